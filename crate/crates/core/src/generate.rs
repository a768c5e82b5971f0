//! Seeded instance families for experiments and test batteries.

use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `{0, v}` with `v ~ U[0.1, 10]`, `p ~ U[0.05, 1]`.
    TwoPointUniform,
    /// At most `c` atoms per variable on `[0, 10]`.
    ConstSupport,
    /// One low atom plus one rare heavy atom with bounded `value * prob`.
    HeavyTailOneAtom,
    /// The fixed pair `X_A`, `X_B` with equal means and variances.
    Counterexample,
    /// Tiny-probability atoms (about `1/n` each) at a few shared values on
    /// every variable, plus some variables carrying one large-probability atom.
    SmallProbSwarm,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::TwoPointUniform,
        Family::ConstSupport,
        Family::HeavyTailOneAtom,
        Family::Counterexample,
        Family::SmallProbSwarm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TwoPointUniform => "two-point-uniform",
            Family::ConstSupport => "const-support-c",
            Family::HeavyTailOneAtom => "heavy-tail-one-atom",
            Family::Counterexample => "appendix-A-counterexample",
            Family::SmallProbSwarm => "small-prob-swarm",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenParams {
    /// Support bound for `const-support-c`.
    pub c: usize,
    /// Shared values for `small-prob-swarm`.
    pub shared_values: usize,
    /// Fraction of swarm variables with a large atom.
    pub special_fraction: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { c: 3, shared_values: 3, special_fraction: 0.1 }
    }
}

/// Builds a variable from positive atoms, the rest of the mass at 0.
fn with_rest(positive: Vec<(f64, f64)>) -> DiscreteDistribution {
    let rest = 1.0 - positive.iter().map(|a| a.1).sum::<f64>();
    DiscreteDistribution::from_masses(std::iter::once((0.0, rest.max(0.0))).chain(positive))
}

pub fn counterexample_pair() -> (DiscreteDistribution, DiscreteDistribution) {
    let a = DiscreteDistribution::from_masses([(0.25, 0.5), (0.75, 0.5)]);
    let b = DiscreteDistribution::from_masses([(0.0, 0.125), (0.5, 0.75), (1.0, 0.125)]);
    (a, b)
}

pub fn generate(family: Family, n: usize, seed: u64, params: &GenParams) -> Result<Instance> {
    if n == 0 && family != Family::Counterexample {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = match family {
        Family::TwoPointUniform => (0..n)
            .map(|_| {
                let v = rng.random_range(0.1..10.0);
                let p: f64 = rng.random_range(0.05..=1.0);
                with_rest(vec![(v, p)])
            })
            .collect(),
        Family::ConstSupport => {
            if params.c == 0 {
                return Err(Error::InvalidArgument("c must be positive".into()));
            }
            (0..n)
                .map(|_| {
                    let k = rng.random_range(1..=params.c);
                    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                    let total: f64 = weights.iter().sum();
                    let masses = weights.iter().map(|w| (rng.random_range(0.0..10.0), w / total)).collect::<Vec<_>>();
                    DiscreteDistribution::from_masses(masses)
                })
                .collect()
        }
        Family::HeavyTailOneAtom => (0..n)
            .map(|_| {
                let low = rng.random_range(0.1..1.0);
                let low_p = rng.random_range(0.2..0.6);
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                let heavy = 10.0 * u.powf(-1.0 / 1.5);
                let heavy_p = rng.random_range(0.2..1.0) / heavy;
                with_rest(vec![(low, low_p), (heavy, heavy_p)])
            })
            .collect(),
        Family::Counterexample => {
            let (a, b) = counterexample_pair();
            vec![a, b]
        }
        Family::SmallProbSwarm => {
            // Each shared value is realized by some variable with a fixed
            // chance whatever n is, so the expected maximum (and with it the
            // normalized values) stays put: only the top shared value ends up
            // above 1, and values 1.6x apart never share a rounding bin.
            let s = params.shared_values.max(1);
            let values: Vec<f64> = (0..s)
                .map(|j| if j + 1 == s && s > 1 { 2.5 * 1.6f64.powi(j as i32 - 1) } else { 1.6f64.powi(j as i32) })
                .collect();
            let rates: Vec<f64> = (0..s).map(|_| rng.random_range(0.5..0.9)).collect();
            // Large atoms sit at least 1.25x away from every shared value.
            let specials = [(0.6, 0.5), (1.26, 0.4)];
            (0..n)
                .map(|_| {
                    let mut atoms: Vec<(f64, f64)> = values
                        .iter()
                        .zip(&rates)
                        .map(|(&v, &r)| (v, (r / n as f64).min(0.05) * rng.random_range(0.92..1.08)))
                        .collect();
                    if rng.random_bool(params.special_fraction.clamp(0.0, 1.0)) {
                        atoms.push(specials[rng.random_range(0..specials.len())]);
                    }
                    with_rest(atoms)
                })
                .collect()
        }
    };
    Instance::new(vars)
}

/// Random variable with `1..=max_atoms` atoms, values in `[0, 10)`.
fn random_variable(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_atoms.max(1));
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    DiscreteDistribution::from_masses(
        weights.iter().map(|w| (rng.random_range(0.0..10.0), w / total)).collect::<Vec<_>>(),
    )
}

/// `n` independent random variables with at most `max_atoms` atoms each.
pub fn random_instance(n: usize, max_atoms: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance::new((0..n).map(|_| random_variable(&mut rng, max_atoms)).collect())
}

/// `n` variables drawn from a pool of `distinct` random distributions, so
/// several variables share a distribution.
pub fn random_repeated_instance(n: usize, distinct: usize, max_atoms: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<DiscreteDistribution> = (0..distinct.max(1)).map(|_| random_variable(&mut rng, max_atoms)).collect();
    Instance::new((0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect())
}

/// Normalized instance where some variable has at least two atoms above 1.
pub fn random_bundling_instance(n: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let vars = (0..n)
            .map(|_| {
                let mut atoms = vec![(rng.random_range(0.05..1.0), rng.random_range(0.2..0.6))];
                for _ in 0..rng.random_range(0..=3) {
                    atoms.push((rng.random_range(1.0..6.0), rng.random_range(0.01..0.12)));
                }
                with_rest(atoms)
            })
            .collect();
        let inst = Instance::new(vars)?.normalize()?;
        if inst.variables.iter().any(|v| v.atoms().iter().filter(|a| a.value > 1.0).count() >= 2) {
            return Ok(inst);
        }
    }
}

/// Normalized instance with at most one atom above 1 per variable, no atom
/// above `1/eps^2` with probability above `eps^2`, and at least two distinct
/// values at or above `1/eps^2`.
pub fn random_high_value_instance(n: usize, eps: f64, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = 1.0 / (eps * eps);
    loop {
        let vars = (0..n)
            .map(|_| {
                let mut atoms = vec![(rng.random_range(0.05..1.0), rng.random_range(0.3..0.8))];
                if rng.random_bool(0.6) {
                    atoms.push((rng.random_range(1.5..8.0) * cut, rng.random_range(0.0005..0.01)));
                }
                with_rest(atoms)
            })
            .collect();
        let inst = Instance::new(vars)?.normalize()?;
        let mut high: Vec<f64> = Vec::new();
        let mut ok = true;
        for v in &inst.variables {
            ok &= v.atoms().iter().filter(|a| a.value > 1.0).count() <= 1;
            ok &= v.atoms().iter().all(|a| a.value <= cut || a.prob <= eps * eps);
            high.extend(v.atoms().iter().filter(|a| a.value >= cut).map(|a| a.value));
        }
        high.dedup();
        if ok && high.len() >= 2 {
            return Ok(inst);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_valid_and_deterministic() {
        for family in Family::ALL {
            let a = generate(family, 12, 9, &GenParams::default()).unwrap();
            let b = generate(family, 12, 9, &GenParams::default()).unwrap();
            assert!(a.validate().is_valid(), "{}", family.name());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn const_support_respects_c() {
        let params = GenParams { c: 3, ..Default::default() };
        let inst = generate(Family::ConstSupport, 50, 4, &params).unwrap();
        assert!(inst.variables.iter().all(|v| v.atoms().len() <= 3));
    }

    #[test]
    fn counterexample_pair_is_fixed() {
        let inst = generate(Family::Counterexample, 0, 0, &GenParams::default()).unwrap();
        let (a, b) = counterexample_pair();
        assert_eq!(inst.variables, vec![a, b]);
    }

    #[test]
    fn random_helpers_meet_their_contracts() {
        for seed in 0..20 {
            let b = random_bundling_instance(5, seed).unwrap();
            assert!((b.expected_max().unwrap() - 1.0).abs() < 1e-9);
            let h = random_high_value_instance(5, 0.3, seed).unwrap();
            assert!(crate::preprocess::rescale_high_values(&h, 0.3).is_ok());
            let r = random_repeated_instance(9, 3, 3, seed).unwrap();
            assert!(crate::grouped::group_by_identical_distribution(&r).groups.len() <= 3);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("nope".parse::<Family>().is_err());
    }
}
