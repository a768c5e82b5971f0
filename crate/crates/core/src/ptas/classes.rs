//! Per-value split of atoms into small-probability and special ones.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::qmass::q_of;
use crate::model::{DiscreteDistribution, Instance, PointMass, SchemeConfig};
use crate::preprocess::high_value_cut;

#[derive(Debug, Clone, Serialize)]
pub struct SmallAtom {
    pub var: usize,
    pub prob: f64,
    pub q: f64,
}

/// All atoms sharing one support value.
#[derive(Debug, Clone, Serialize)]
pub struct ValueClass {
    pub value: f64,
    /// The value is the compressed top value, whose thresholds scale with `q_max`.
    pub is_vmax: bool,
    /// Sum of `q` over every atom at this value.
    pub q_max: f64,
    pub small: Vec<SmallAtom>,
    /// Variables whose atom at this value is not small.
    pub special: Vec<usize>,
    pub qbar_star: f64,
    pub q_star: f64,
    pub q_o: f64,
    pub delta: f64,
    /// The small atoms carried too little mass and were moved to 0.
    pub ignored: bool,
}

impl ValueClass {
    /// Has small atoms that survived the ignore step.
    pub fn is_active(&self) -> bool {
        !self.ignored && !self.small.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ClassSplit {
    pub epsilon: f64,
    /// Sorted by value.
    pub classes: Vec<ValueClass>,
    /// The input with the ignored small atoms moved to 0.
    pub instance: Instance,
    /// Distinct (value, prob) pairs among special atoms.
    pub special_types: usize,
    /// Per variable, the values of its atoms that are small in an active class.
    small_values: Vec<HashSet<u64>>,
}

impl ClassSplit {
    pub fn is_small(&self, var: usize, value: f64) -> bool {
        self.small_values[var].contains(&value.to_bits())
    }

    pub fn ignored(&self) -> impl Iterator<Item = &ValueClass> {
        self.classes.iter().filter(|c| c.ignored)
    }

    pub fn class_of(&self, value: f64) -> Option<usize> {
        self.classes.iter().position(|c| c.value == value)
    }
}

pub fn split_small_special(instance: &Instance, config: &SchemeConfig) -> ClassSplit {
    let eps = config.epsilon;
    let cut = high_value_cut(eps);
    let mut by_value: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, var) in instance.variables.iter().enumerate() {
        for a in var.positive_atoms() {
            by_value.entry(a.value.to_bits()).or_default().push((i, a.prob));
        }
    }
    let mut classes = Vec::with_capacity(by_value.len());
    let mut special_pairs = HashSet::new();
    let mut small_values = vec![HashSet::new(); instance.n()];
    let mut dropped: Vec<HashSet<u64>> = vec![HashSet::new(); instance.n()];
    for (bits, atoms) in by_value {
        let value = f64::from_bits(bits);
        let is_vmax = value >= cut;
        let q_max: f64 = atoms.iter().map(|&(_, p)| q_of(p)).sum();
        let scale = if is_vmax { q_max } else { 1.0 };
        let small_cut = config.small_prob_threshold() * scale;
        let mut small = Vec::new();
        let mut special = Vec::new();
        for &(var, prob) in &atoms {
            let q = q_of(prob);
            if q < small_cut {
                small.push(SmallAtom { var, prob, q });
            } else {
                special.push(var);
                special_pairs.insert((bits, prob.to_bits()));
            }
        }
        let qbar_star: f64 = small.iter().map(|s| s.q).sum();
        let ignored = !small.is_empty() && qbar_star < config.ignore_mass_threshold() * scale;
        let (q_star, q_o, delta) = if small.is_empty() || ignored {
            (0.0, 0.0, 0.0)
        } else {
            let q_star = qbar_star.min(1.0 / eps);
            let q_o = config.block_mass_factor() * q_star;
            (q_star, q_o, q_o / qbar_star)
        };
        for s in &small {
            if ignored {
                dropped[s.var].insert(bits);
            } else {
                small_values[s.var].insert(bits);
            }
        }
        classes.push(ValueClass { value, is_vmax, q_max, small, special, qbar_star, q_star, q_o, delta, ignored });
    }
    let vars = instance
        .variables
        .iter()
        .zip(&dropped)
        .map(|(var, drop)| {
            if drop.is_empty() {
                return var.clone();
            }
            DiscreteDistribution::from_masses(var.atoms().iter().map(|a| {
                if drop.contains(&a.value.to_bits()) {
                    (0.0, a.prob)
                } else {
                    (a.value, a.prob)
                }
            }))
        })
        .collect();
    ClassSplit {
        epsilon: eps,
        classes,
        instance: Instance::from_parts_unchecked(vars, instance.scale),
        special_types: special_pairs.len(),
        small_values,
    }
}

/// A variable split into standalone binaries for its small atoms and a
/// truncated remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// Each `(v, p)` stands for the binary `{v w.p. p, 0 otherwise}`.
    pub small: Vec<PointMass>,
    pub truncated: DiscreteDistribution,
}

impl Truncation {
    pub fn binaries(&self) -> Vec<DiscreteDistribution> {
        self.small.iter().map(|a| DiscreteDistribution::two_point(a.value, a.prob)).collect()
    }

    /// `P[max of the bundle <= x]` with independent components.
    pub fn bundle_max_cdf(&self, x: f64) -> f64 {
        let binaries: f64 = self.small.iter().filter(|a| a.value > x).map(|a| 1.0 - a.prob).product();
        binaries * self.truncated.cdf(x)
    }
}

/// Splits with the plain small-probability test `q < eps^small_prob_exp`.
pub fn special_truncation(variable: &DiscreteDistribution, config: &SchemeConfig) -> Truncation {
    let cut = config.small_prob_threshold();
    special_truncation_by(variable, |a| q_of(a.prob) < cut)
}

pub fn special_truncation_by(variable: &DiscreteDistribution, is_small: impl Fn(&PointMass) -> bool) -> Truncation {
    let mut small = Vec::new();
    let mut large = Vec::new();
    for a in variable.positive_atoms() {
        if is_small(a) {
            small.push(*a);
        } else {
            large.push((a.value, a.prob));
        }
    }
    if small.is_empty() {
        return Truncation { small, truncated: variable.clone() };
    }
    let rest = 1.0 - large.iter().map(|a| a.1).sum::<f64>();
    let truncated = DiscreteDistribution::from_masses(std::iter::once((0.0, rest.max(0.0))).chain(large));
    Truncation { small, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&(v, p)| PointMass::new(v, p)).collect()).unwrap()
    }

    #[test]
    fn all_large_means_nothing_small() {
        let cfg = SchemeConfig::desk(0.25).unwrap();
        let inst = Instance::new(vec![dist(&[(0.0, 0.5), (1.0, 0.5)]); 3]).unwrap();
        let split = split_small_special(&inst, &cfg);
        assert!(split.classes.iter().all(|c| c.small.is_empty() && !c.ignored));
        assert_eq!(split.instance, inst);
        assert_eq!(split.special_types, 1);
    }

    #[test]
    fn thin_small_mass_is_ignored() {
        // Five atoms with q ~ 0.0101 each: total below 0.0625.
        let cfg = SchemeConfig::desk(0.25).unwrap();
        let inst = Instance::new(vec![dist(&[(0.0, 0.99), (1.0, 0.01)]); 5]).unwrap();
        let split = split_small_special(&inst, &cfg);
        assert!(split.classes[0].ignored);
        assert!(split.instance.variables.iter().all(|v| v.max_value() == 0.0));
        assert!(!split.is_small(0, 1.0));
    }

    #[test]
    fn heavy_small_mass_is_kept() {
        let cfg = SchemeConfig::desk(0.25).unwrap();
        let inst = Instance::new(vec![dist(&[(0.0, 0.97), (1.0, 0.03)]); 40]).unwrap();
        let split = split_small_special(&inst, &cfg);
        let c = &split.classes[0];
        assert!(c.is_active());
        assert_eq!(c.small.len(), 40);
        let q = q_of(0.03);
        assert!((c.qbar_star - 40.0 * q).abs() < 1e-12);
        assert!((c.q_star - c.qbar_star).abs() < 1e-15);
        assert!((c.q_o - 0.25 * c.q_star).abs() < 1e-15);
        assert!((c.delta - 0.25).abs() < 1e-12);
        assert!(split.is_small(3, 1.0));
    }

    #[test]
    fn truncation_examples() {
        let cfg = SchemeConfig::desk(0.25).unwrap();
        let big = dist(&[(0.0, 0.5), (1.0, 0.5)]);
        let t = special_truncation(&big, &cfg);
        assert!(t.small.is_empty());
        assert_eq!(t.truncated, big);

        let mixed = dist(&[(0.0, 0.49), (1.0, 0.01), (2.0, 0.5)]);
        let t = special_truncation(&mixed, &cfg);
        assert_eq!(t.small, vec![PointMass::new(1.0, 0.01)]);
        assert_eq!(t.binaries()[0], dist(&[(0.0, 0.99), (1.0, 0.01)]));
        assert_eq!(t.truncated, dist(&[(0.0, 0.5), (2.0, 0.5)]));
    }
}
