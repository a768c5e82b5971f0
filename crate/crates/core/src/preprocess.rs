//! Value-space transforms applied before discretization.
//!
//! Every transform moves mass between atoms of a single variable and never
//! renormalizes; mass removed from an atom lands on the value-0 atom. Each
//! returns the new instance together with a [`TransformStep`] describing what
//! it touched and the multiplicative bound it guarantees on `OPT`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Instance, PointMass};

/// Values at or above this are "high" and get compressed to `v_max`.
pub fn high_value_cut(eps: f64) -> f64 {
    1.0 / (eps * eps)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformStep {
    pub name: String,
    /// The bound this step guarantees, in words.
    pub guarantee: String,
    pub variables_touched: Vec<usize>,
    pub mass_moved: f64,
    /// `OPT(after) >= lower_factor * OPT(before)` when the step touched anything.
    pub lower_factor: f64,
    /// `OPT(after) <= upper_factor * OPT(before)`.
    pub upper_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after_value: Option<f64>,
}

impl TransformStep {
    fn new(name: &str, guarantee: String, touched: Vec<usize>, moved: f64, lower: f64, upper: f64) -> Self {
        let active = !touched.is_empty();
        Self {
            name: name.to_string(),
            guarantee,
            variables_touched: touched,
            mass_moved: moved,
            lower_factor: if active { lower } else { 1.0 },
            upper_factor: if active { upper } else { 1.0 },
            prior_value: None,
            after_value: None,
        }
    }

    pub fn touched_anything(&self) -> bool {
        !self.variables_touched.is_empty()
    }
}

/// The ordered record of a pipeline run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TransformLog {
    pub steps: Vec<TransformStep>,
}

/// The composed multiplicative bounds of a log, also expressed as
/// `1 - c_lower * eps` and `1 + c_upper * eps`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComposedLoss {
    pub lower: f64,
    pub upper: f64,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl TransformLog {
    pub fn push(&mut self, step: TransformStep) {
        self.steps.push(step);
    }

    pub fn composed(&self, eps: f64) -> ComposedLoss {
        let lower: f64 = self.steps.iter().map(|s| s.lower_factor).product();
        let upper: f64 = self.steps.iter().map(|s| s.upper_factor).product();
        ComposedLoss { lower, upper, c_lower: (1.0 - lower) / eps, c_upper: (upper - 1.0) / eps }
    }
}

/// Moves every atom selected by `pick(variable, atom)` onto value 0.
fn zero_atoms(instance: &Instance, pick: impl Fn(usize, &PointMass) -> bool) -> (Instance, Vec<usize>, f64) {
    let mut touched = Vec::new();
    let mut moved = 0.0;
    let vars = instance
        .variables
        .iter()
        .enumerate()
        .map(|(i, var)| {
            let hit: f64 = var.atoms().iter().filter(|a| a.value > 0.0 && pick(i, a)).map(|a| a.prob).sum();
            if hit == 0.0 {
                return var.clone();
            }
            touched.push(i);
            moved += hit;
            DiscreteDistribution::from_masses(var.atoms().iter().map(|a| {
                if a.value > 0.0 && pick(i, a) {
                    (0.0, a.prob)
                } else {
                    (a.value, a.prob)
                }
            }))
        })
        .collect();
    (Instance::from_parts_unchecked(vars, instance.scale), touched, moved)
}

/// Zeroes every atom with value strictly below `eps`.
pub fn zero_small_values(instance: &Instance, eps: f64) -> (Instance, TransformStep) {
    let (out, touched, moved) = zero_atoms(instance, |_, a| a.value < eps);
    let lower = 1.0 - 1.5 * eps;
    let step = TransformStep::new("zero-small-values", format!("OPT' >= {lower} * OPT"), touched, moved, lower, 1.0);
    (out, step)
}

/// Zeroes every atom whose contribution `value * prob` is at most
/// `eps / (c * n)`, where `c` bounds the support size.
pub fn zero_small_means(instance: &Instance, eps: f64, c: usize) -> (Instance, TransformStep) {
    let cut = eps / (c.max(1) as f64 * instance.n() as f64);
    let (out, touched, moved) = zero_atoms(instance, |_, a| a.value * a.prob <= cut);
    let lower = 1.0 - 1.5 * c.max(1) as f64 * eps;
    let step = TransformStep::new(
        "zero-small-means",
        format!("atoms with value*prob <= {cut} zeroed; OPT' >= {lower} * OPT"),
        touched,
        moved,
        lower,
        1.0,
    );
    (out, step)
}

/// Collapses all atoms above 1 of each variable into one atom at their
/// conditional mean, carrying their total probability.
pub fn bundle_above_one(instance: &Instance) -> (Instance, TransformStep) {
    let mut touched = Vec::new();
    let mut moved = 0.0;
    let vars = instance
        .variables
        .iter()
        .enumerate()
        .map(|(i, var)| {
            let high: Vec<&PointMass> = var.atoms().iter().filter(|a| a.value > 1.0).collect();
            if high.len() < 2 {
                return var.clone();
            }
            let mass: f64 = high.iter().map(|a| a.prob).sum();
            let mean = high.iter().map(|a| a.value * a.prob).sum::<f64>() / mass;
            touched.push(i);
            moved += mass;
            let low = var.atoms().iter().filter(|a| a.value <= 1.0).map(|a| (a.value, a.prob));
            DiscreteDistribution::from_masses(low.chain(std::iter::once((mean, mass))))
        })
        .collect();
    let step = TransformStep::new("bundle-above-one", "OPT' == OPT".into(), touched, moved, 1.0, 1.0);
    (Instance::from_parts_unchecked(vars, instance.scale), step)
}

fn check_high_atoms(instance: &Instance, eps: f64) -> Result<Option<f64>> {
    let cut = high_value_cut(eps);
    let mut vmax: Option<f64> = None;
    for (i, var) in instance.variables.iter().enumerate() {
        let above_one = var.atoms().iter().filter(|a| a.value > 1.0).count();
        if above_one > 1 {
            return Err(Error::MultipleHighAtoms { var: i, count: above_one });
        }
        for a in var.atoms() {
            if a.value > cut && a.prob > eps * eps {
                return Err(Error::ForbiddenAtom { var: i, value: a.value, prob: a.prob });
            }
            if a.value >= cut {
                vmax = Some(vmax.map_or(a.value, |m: f64| m.max(a.value)));
            }
        }
    }
    Ok(vmax)
}

/// Moves every atom with value at least `1/eps^2` to the largest such value
/// `v_max`, keeping `value * prob` fixed; the freed mass goes to 0.
pub fn rescale_high_values(instance: &Instance, eps: f64) -> Result<(Instance, TransformStep)> {
    let cut = high_value_cut(eps);
    let vmax = check_high_atoms(instance, eps)?;
    let mut touched = Vec::new();
    let mut moved = 0.0;
    let vars = match vmax {
        None => instance.variables.clone(),
        Some(vmax) => instance
            .variables
            .iter()
            .enumerate()
            .map(|(i, var)| {
                if !var.atoms().iter().any(|a| a.value >= cut && a.value < vmax) {
                    return var.clone();
                }
                touched.push(i);
                let mut masses = Vec::with_capacity(var.atoms().len() + 1);
                for a in var.atoms() {
                    if a.value >= cut && a.value < vmax {
                        let p = a.value * a.prob / vmax;
                        moved += a.prob - p;
                        masses.push((vmax, p));
                        masses.push((0.0, a.prob - p));
                    } else {
                        masses.push((a.value, a.prob));
                    }
                }
                DiscreteDistribution::from_masses(masses)
            })
            .collect(),
    };
    let upper = 1.0 + eps * eps;
    let step =
        TransformStep::new("compress-high-values", format!("OPT <= OPT' <= {upper} * OPT"), touched, moved, 1.0, upper);
    Ok((Instance::from_parts_unchecked(vars, instance.scale), step))
}

/// [`rescale_high_values`], then zeroes the `v_max` atoms whose new
/// probability is below `eps / n`.
pub fn compress_high_values(instance: &Instance, eps: f64) -> Result<(Instance, Vec<TransformStep>)> {
    let (rescaled, step) = rescale_high_values(instance, eps)?;
    let cut = high_value_cut(eps);
    let floor = eps / instance.n() as f64;
    let rare = |a: &PointMass| a.value >= cut && a.prob < floor;
    let (out, touched, moved) = zero_atoms(&rescaled, |_, a| rare(a));
    // Zeroing loses at most the dropped expectation, and OPT is at least the best single mean.
    let lost: f64 =
        rescaled.variables.iter().flat_map(|v| v.atoms()).filter(|a| rare(a)).map(|a| a.value * a.prob).sum();
    let best_mean = rescaled.variables.iter().map(|v| v.mean()).fold(0.0, f64::max);
    let lower = if lost > 0.0 { (1.0 - lost / best_mean).max(0.0) } else { 1.0 };
    let drop = TransformStep::new(
        "drop-rare-high-values",
        format!("v_max atoms with prob < {floor} zeroed; OPT' >= OPT - {lost} >= {lower} * OPT"),
        touched,
        moved,
        lower,
        1.0,
    );
    Ok((out, vec![step, drop]))
}

/// Region of the (value, prob) plane an atom falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomCase {
    /// Removed by the preprocessing steps (value 0, value below `eps`, or
    /// negligible probability).
    Preprocessing,
    /// `eps <= v <= 1/eps^2` and `p >= eps^3/n`: rounded on both axes.
    Case1,
    /// `v >= 1/eps^2`, `p <= eps^2`: compressed to `v_max`.
    Case2,
    /// `v > 1/eps^2`, `p > eps^2`: impossible after normalization.
    Forbidden,
}

pub fn classify_atom(value: f64, prob: f64, eps: f64, n: usize) -> AtomCase {
    let cut = high_value_cut(eps);
    if value <= 0.0 {
        AtomCase::Preprocessing
    } else if value > cut && prob > eps * eps {
        AtomCase::Forbidden
    } else if value >= cut && prob <= eps * eps {
        AtomCase::Case2
    } else if value < eps || prob < eps.powi(3) / n as f64 {
        AtomCase::Preprocessing
    } else {
        AtomCase::Case1
    }
}

pub fn classify_atoms(instance: &Instance, eps: f64) -> Vec<Vec<AtomCase>> {
    let n = instance.n();
    instance
        .variables
        .iter()
        .map(|var| var.atoms().iter().map(|a| classify_atom(a.value, a.prob, eps, n)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&(v, p)| PointMass::new(v, p)).collect()).unwrap()
    }

    fn inst(vars: Vec<DiscreteDistribution>) -> Instance {
        Instance::new(vars).unwrap()
    }

    #[test]
    fn small_values_are_zeroed() {
        let (out, step) = zero_small_values(&inst(vec![dist(&[(0.01, 0.5), (1.0, 0.5)])]), 0.1);
        assert_eq!(out.variables[0], dist(&[(0.0, 0.5), (1.0, 0.5)]));
        assert_eq!(step.variables_touched, vec![0]);
        assert_eq!(step.mass_moved, 0.5);
    }

    #[test]
    fn boundary_value_is_kept() {
        let i = inst(vec![dist(&[(0.0, 0.5), (0.1, 0.5)])]);
        let (out, step) = zero_small_values(&i, 0.1);
        assert_eq!(out, i);
        assert!(!step.touched_anything());
        assert_eq!(step.lower_factor, 1.0);
    }

    #[test]
    fn small_means_threshold() {
        let tiny = dist(&[(0.0, 0.995), (1.0, 0.005)]);
        let big = dist(&[(0.0, 0.5), (1.0, 0.5)]);
        let mut vars = vec![tiny];
        vars.extend(std::iter::repeat_n(big.clone(), 9));
        let (out, step) = zero_small_means(&inst(vars), 0.1, 1);
        assert_eq!(out.variables[0], DiscreteDistribution::point(0.0));
        assert_eq!(out.variables[1], big);
        assert_eq!(step.variables_touched, vec![0]);
    }

    #[test]
    fn bundling_merges_high_atoms() {
        let i = inst(vec![dist(&[(0.0, 0.25), (0.5, 0.25), (2.0, 0.25), (4.0, 0.25)])]);
        let (out, step) = bundle_above_one(&i);
        assert_eq!(out.variables[0], dist(&[(0.0, 0.25), (0.5, 0.25), (3.0, 0.5)]));
        assert_eq!(step.mass_moved, 0.5);

        let single = inst(vec![dist(&[(0.0, 0.5), (2.0, 0.5)])]);
        assert_eq!(bundle_above_one(&single).0, single);
    }

    #[test]
    fn rescale_preserves_mean() {
        let i = inst(vec![dist(&[(0.0, 0.999), (100.0, 0.001)]), dist(&[(0.0, 0.9995), (200.0, 0.0005)])]);
        let (out, step) = rescale_high_values(&i, 0.1).unwrap();
        assert_eq!(out.variables[0].atoms()[1], PointMass::new(200.0, 0.0005));
        assert!((out.variables[0].total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(out.variables[1], i.variables[1]);
        assert_eq!(step.variables_touched, vec![0]);
    }

    #[test]
    fn rescale_is_identity_without_high_atoms() {
        let i = inst(vec![dist(&[(0.0, 0.5), (3.0, 0.5)])]);
        let (out, step) = rescale_high_values(&i, 0.3).unwrap();
        assert_eq!(out, i);
        assert_eq!(step.upper_factor, 1.0);
    }

    #[test]
    fn forbidden_and_multiple_high_atoms_are_rejected() {
        let forbidden = inst(vec![dist(&[(0.0, 0.5), (50.0, 0.5)])]);
        assert!(matches!(rescale_high_values(&forbidden, 0.2), Err(Error::ForbiddenAtom { var: 0, .. })));
        let two = inst(vec![dist(&[(0.0, 0.5), (2.0, 0.25), (3.0, 0.25)])]);
        assert!(matches!(compress_high_values(&two, 0.2), Err(Error::MultipleHighAtoms { var: 0, count: 2 })));
    }

    #[test]
    fn compress_floor_drops_rare_vmax_atoms() {
        // n = 2, eps = 0.1: floor 0.05; the 100-atom rescales to prob 0.0005.
        let i = inst(vec![dist(&[(0.0, 0.995), (100.0, 0.005)]), dist(&[(0.0, 0.9), (200.0, 0.1)])]);
        let err = compress_high_values(&i, 0.1);
        assert!(matches!(err, Err(Error::ForbiddenAtom { var: 1, .. })));

        let i = inst(vec![dist(&[(0.0, 0.995), (100.0, 0.005)]), dist(&[(0.0, 0.99), (200.0, 0.01)])]);
        let (out, steps) = compress_high_values(&i, 0.1).unwrap();
        for var in &out.variables {
            assert_eq!(var.atoms().len(), 1);
            assert_eq!(var.atoms()[0].value, 0.0);
            assert!((var.total_mass() - 1.0).abs() < 1e-12);
        }
        assert_eq!(steps[1].variables_touched, vec![0, 1]);
    }

    #[test]
    fn atom_cases() {
        assert_eq!(classify_atom(1.0, 0.5, 0.2, 10), AtomCase::Case1);
        assert_eq!(classify_atom(50.0, 0.01, 0.2, 10), AtomCase::Case2);
        assert_eq!(classify_atom(50.0, 0.5, 0.2, 10), AtomCase::Forbidden);
        assert_eq!(classify_atom(0.1, 0.5, 0.2, 10), AtomCase::Preprocessing);
        assert_eq!(classify_atom(1.0, 1e-6, 0.2, 10), AtomCase::Preprocessing);
        assert_eq!(classify_atom(0.0, 0.5, 0.2, 10), AtomCase::Preprocessing);
    }

    #[test]
    fn composed_loss() {
        let mut log = TransformLog::default();
        log.push(TransformStep::new("a", String::new(), vec![0], 0.1, 0.9, 1.0));
        log.push(TransformStep::new("b", String::new(), vec![], 0.0, 0.5, 2.0));
        log.push(TransformStep::new("c", String::new(), vec![1], 0.0, 1.0, 1.01));
        let c = log.composed(0.1);
        assert!((c.lower - 0.9).abs() < 1e-15);
        assert!((c.c_lower - 1.0).abs() < 1e-12);
        assert!((c.c_upper - 0.1).abs() < 1e-12);
    }
}
