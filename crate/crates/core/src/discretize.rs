//! Rounding to integer powers of `1 + eps` and canonical group keys.
//!
//! Rounded quantities are stored as integer exponents so that keys hash
//! exactly; the float value of exponent `k` is always `(1 + eps).powi(k)`,
//! which makes rounding idempotent bit for bit.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Instance};
use crate::preprocess::{high_value_cut, TransformStep};

/// A rounded-down positive quantity `(1 + eps)^k`, or zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PowerKey {
    Zero,
    Exp(i32),
}

impl PowerKey {
    pub fn exponent(self) -> Option<i32> {
        match self {
            PowerKey::Zero => None,
            PowerKey::Exp(k) => Some(k),
        }
    }

    pub fn value(self, eps: f64) -> f64 {
        match self {
            PowerKey::Zero => 0.0,
            PowerKey::Exp(k) => power(eps, k),
        }
    }
}

pub fn power(eps: f64, k: i32) -> f64 {
    (1.0 + eps).powi(k)
}

/// The largest `k` with `(1 + eps)^k <= x`.
pub fn round_down_to_power(x: f64, eps: f64) -> Result<PowerKey> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("cannot round {x} to a power of 1 + eps")));
    }
    let mut k = (x.ln() / eps.ln_1p()).floor() as i32;
    // Guard both directions against log round-off.
    if power(eps, k) > x * (1.0 + 1e-12) {
        k -= 1;
    }
    if (power(eps, k + 1) - x).abs() <= 1e-12 * x || power(eps, k + 1) <= x {
        k += 1;
    }
    Ok(PowerKey::Exp(k))
}

/// Value component of a group key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKey {
    Power(i32),
    VMax,
}

/// Canonical description of a discretized variable: its positive atoms as
/// (value key, probability exponent) pairs, in increasing value order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub atoms: Vec<(ValueKey, i32)>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("zero");
        }
        for (j, (v, p)) in self.atoms.iter().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            match v {
                ValueKey::Power(k) => write!(f, "v{k}p{p}")?,
                ValueKey::VMax => write!(f, "vVMAXp{p}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for GroupKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Rebuilds a variable from positive atoms, putting the missing mass on 0.
fn with_zero_remainder(positive: Vec<(f64, f64)>) -> DiscreteDistribution {
    let mass: f64 = positive.iter().map(|a| a.1).sum();
    let rest = 1.0 - mass;
    DiscreteDistribution::from_masses(std::iter::once((0.0, rest.max(0.0))).chain(positive))
}

/// Rounds every positive value down to a power of `1 + eps`, merging atoms
/// that collide.
pub fn round_values_down(instance: &Instance, eps: f64) -> Instance {
    let vars = instance
        .variables
        .iter()
        .map(|var| {
            DiscreteDistribution::from_masses(var.atoms().iter().map(|a| {
                let v = if a.value > 0.0 { round_down_to_power(a.value, eps).unwrap().value(eps) } else { 0.0 };
                (v, a.prob)
            }))
        })
        .collect();
    Instance::from_parts_unchecked(vars, instance.scale)
}

/// Rounds the probability of every positive atom down to a power of
/// `1 + eps`; the deficit joins the value-0 atom.
pub fn round_probs_down(instance: &Instance, eps: f64) -> Instance {
    let vars = instance
        .variables
        .iter()
        .map(|var| {
            with_zero_remainder(
                var.positive_atoms().map(|a| (a.value, round_down_to_power(a.prob, eps).unwrap().value(eps))).collect(),
            )
        })
        .collect();
    Instance::from_parts_unchecked(vars, instance.scale)
}

#[derive(Debug, Clone)]
pub struct Discretized {
    pub instance: Instance,
    pub keys: Vec<GroupKey>,
    pub step: TransformStep,
}

/// Rounds values in `[eps, 1/eps^2)` and all positive probabilities down to
/// powers of `1 + eps`. Atoms at or above `1/eps^2` keep their (common)
/// value and get the `VMAX` key. Values in `[eps/(1+eps), eps)` are the
/// images of that rounding and are accepted too, so a second pass is a no-op.
pub fn discretize_instance(instance: &Instance, eps: f64) -> Result<Discretized> {
    let cut = high_value_cut(eps);
    let mut keys = Vec::with_capacity(instance.n());
    let mut vars = Vec::with_capacity(instance.n());
    let mut touched = Vec::new();
    let mut moved = 0.0;
    for (i, var) in instance.variables.iter().enumerate() {
        // Values first; atoms landing on the same power merge.
        let mut merged: Vec<(ValueKey, f64, f64)> = Vec::new();
        for a in var.positive_atoms() {
            let (key, value) = if a.value >= cut {
                if a.value > cut && a.prob > eps * eps {
                    return Err(Error::ForbiddenAtom { var: i, value: a.value, prob: a.prob });
                }
                (ValueKey::VMax, a.value)
            } else if a.value >= eps / (1.0 + eps) * (1.0 - 1e-12) {
                let k = round_down_to_power(a.value, eps)?;
                (ValueKey::Power(k.exponent().unwrap()), k.value(eps))
            } else {
                return Err(Error::Unclassifiable {
                    var: i,
                    value: a.value,
                    prob: a.prob,
                    reason: "positive value below eps; zero small values first",
                });
            };
            match merged.iter_mut().find(|m| m.0 == key) {
                Some(m) => {
                    if key == ValueKey::VMax && m.1 != value {
                        return Err(Error::MultipleHighAtoms { var: i, count: 2 });
                    }
                    m.2 += a.prob;
                }
                None => merged.push((key, value, a.prob)),
            }
        }
        let mut key_atoms = Vec::with_capacity(merged.len());
        let mut positive = Vec::with_capacity(merged.len());
        for (vk, value, prob) in merged {
            let pk = round_down_to_power(prob.min(1.0), eps)?.exponent().unwrap();
            key_atoms.push((vk, pk));
            positive.push((value, power(eps, pk)));
        }
        let rounded = with_zero_remainder(positive);
        let zero_before = var.atoms().iter().find(|a| a.value == 0.0).map_or(0.0, |a| a.prob);
        let zero_after = rounded.atoms().iter().find(|a| a.value == 0.0).map_or(0.0, |a| a.prob);
        if !rounded.same_atoms(var) {
            touched.push(i);
            moved += (zero_after - zero_before).max(0.0);
        }
        keys.push(GroupKey { atoms: key_atoms });
        vars.push(rounded);
    }
    let lower = 1.0 / ((1.0 + eps) * (1.0 + eps));
    let step = TransformStep {
        name: "discretize".into(),
        guarantee: format!("OPT' >= {lower} * OPT"),
        lower_factor: if touched.is_empty() { 1.0 } else { lower },
        upper_factor: 1.0,
        variables_touched: touched,
        mass_moved: moved,
        prior_value: None,
        after_value: None,
    };
    Ok(Discretized { instance: Instance::from_parts_unchecked(vars, instance.scale), keys, step })
}

/// Observed group structure of a discretized instance and the bounds on it.
#[derive(Debug, Clone, Serialize)]
pub struct GroupCount {
    /// Distinct group keys present.
    pub groups: usize,
    pub value_keys: usize,
    pub prob_keys: usize,
    /// `k = value_keys * prob_keys`.
    pub pairs: usize,
    /// Support bound `c` used for the bounds.
    pub c: usize,
    /// `k^c / (c-1)!`.
    pub closed_form_bound: f64,
    /// `sum_{i=0}^{c} C(k, i)`: keys are sets of at most `c` pairs.
    pub exact_bound: f64,
    /// Most value keys `[eps, 1/eps^2]` can produce, plus `VMAX`.
    pub value_key_ceiling: usize,
    /// Most prob keys `[eps^3/(c n), 1]` can produce.
    pub prob_key_ceiling: usize,
    pub holds: bool,
}

pub fn count_groups(keys: &[GroupKey], eps: f64, c: usize, n: usize) -> GroupCount {
    let distinct: BTreeSet<&GroupKey> = keys.iter().collect();
    let values: BTreeSet<ValueKey> = keys.iter().flat_map(|k| k.atoms.iter().map(|a| a.0)).collect();
    let probs: BTreeSet<i32> = keys.iter().flat_map(|k| k.atoms.iter().map(|a| a.1)).collect();
    let c = c.max(1);
    let k = values.len() * probs.len();
    let kf = k as f64;
    let factorial: f64 = (1..c).map(|i| i as f64).product();
    let closed_form_bound = kf.powi(c as i32) / factorial;
    let mut binom = 1.0;
    let mut exact_bound = 1.0;
    for i in 1..=c.min(k) {
        binom = binom * (kf - i as f64 + 1.0) / i as f64;
        exact_bound += binom;
    }
    let log = eps.ln_1p();
    let value_key_ceiling = (3.0 * (1.0 / eps).ln() / log).floor() as usize + 3;
    let prob_key_ceiling = ((c as f64 * n as f64 / eps.powi(3)).ln() / log).floor() as usize + 2;
    let holds =
        (distinct.len() as f64) <= exact_bound && values.len() <= value_key_ceiling && probs.len() <= prob_key_ceiling;
    GroupCount {
        groups: distinct.len(),
        value_keys: values.len(),
        prob_keys: probs.len(),
        pairs: k,
        c,
        closed_form_bound,
        exact_bound,
        value_key_ceiling,
        prob_key_ceiling,
        holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PointMass;

    fn dist(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&(v, p)| PointMass::new(v, p)).collect()).unwrap()
    }

    #[test]
    fn power_rounding_examples() {
        assert_eq!(round_down_to_power(1.5f64.powi(3), 0.5).unwrap(), PowerKey::Exp(3));
        assert_eq!(round_down_to_power(1.3, 0.5).unwrap(), PowerKey::Exp(0));
        assert_eq!(round_down_to_power(1.5, 0.5).unwrap(), PowerKey::Exp(1));
        assert_eq!(round_down_to_power(0.7, 0.5).unwrap(), PowerKey::Exp(-1));
        assert!(round_down_to_power(0.0, 0.5).is_err());
        assert!(round_down_to_power(-1.0, 0.5).is_err());
    }

    #[test]
    fn fixed_points_survive_round_off() {
        for eps in [0.1, 0.2, 0.25, 0.3] {
            for k in -60..60 {
                assert_eq!(round_down_to_power(power(eps, k), eps).unwrap(), PowerKey::Exp(k), "eps {eps} k {k}");
            }
        }
    }

    #[test]
    fn discretize_examples() {
        let one = Instance::new(vec![DiscreteDistribution::point(1.0)]).unwrap();
        let d = discretize_instance(&one, 0.5).unwrap();
        assert_eq!(d.instance, one);
        assert_eq!(d.keys[0].to_string(), "v0p0");
        assert!(!d.step.touched_anything());

        let i = Instance::new(vec![dist(&[(0.0, 0.3), (1.3, 0.7)])]).unwrap();
        let d = discretize_instance(&i, 0.5).unwrap();
        let atoms = d.instance.variables[0].atoms();
        assert_eq!(atoms[1].value, 1.0);
        assert!((atoms[1].prob - 2.0 / 3.0).abs() < 1e-15);
        assert!((atoms[0].prob - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.keys[0].to_string(), "v0p-1");
    }

    #[test]
    fn collisions_merge_before_prob_rounding() {
        // 1.1 and 1.2 both round to 1.0 at eps = 0.5; 0.3 + 0.3 = 0.6 -> 1.5^-2.
        let i = Instance::new(vec![dist(&[(0.0, 0.4), (1.1, 0.3), (1.2, 0.3)])]).unwrap();
        let d = discretize_instance(&i, 0.5).unwrap();
        assert_eq!(d.keys[0].atoms, vec![(ValueKey::Power(0), -2)]);
    }

    #[test]
    fn vmax_atoms_keep_value() {
        let i = Instance::new(vec![dist(&[(0.0, 0.99), (200.0, 0.01)])]).unwrap();
        let d = discretize_instance(&i, 0.1).unwrap();
        assert_eq!(d.instance.variables[0].atoms()[1].value, 200.0);
        assert!(d.keys[0].to_string().starts_with("vVMAXp"));
    }

    #[test]
    fn small_positive_value_is_unclassifiable() {
        let i = Instance::new(vec![dist(&[(0.0, 0.5), (0.01, 0.5)])]).unwrap();
        assert!(matches!(discretize_instance(&i, 0.1), Err(Error::Unclassifiable { .. })));
    }

    #[test]
    fn zero_variable_key() {
        let i = Instance::new(vec![DiscreteDistribution::point(0.0)]).unwrap();
        assert_eq!(discretize_instance(&i, 0.1).unwrap().keys[0].to_string(), "zero");
    }

    #[test]
    fn group_count_bounds() {
        let keys = vec![GroupKey { atoms: vec![(ValueKey::Power(0), -1)] }; 4];
        let gc = count_groups(&keys, 0.2, 1, 4);
        assert_eq!(gc.groups, 1);
        assert_eq!(gc.closed_form_bound, 1.0);
        assert!(gc.holds);
        let keys: Vec<GroupKey> = (0..3).map(|k| GroupKey { atoms: vec![(ValueKey::Power(k), -1)] }).collect();
        let gc = count_groups(&keys, 0.2, 1, 3);
        assert_eq!((gc.groups, gc.pairs, gc.closed_form_bound), (3, 3, 3.0));
    }
}
