//! Monte-Carlo evaluation of stopping strategies under uniformly random
//! arrival order.
//!
//! Trial `t` of a run seeded with `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! switched to stream `t`, so every trial has its own counter-based stream
//! and results do not depend on thread scheduling. Within a trial the
//! generator is consumed in a fixed order: the arrival permutation first
//! (Fisher-Yates, high-to-low, index drawn as the high 64 bits of a
//! 64x64-bit product), then one uniform per arriving variable, taken as the
//! top 53 bits of a `u64`. A variable with sorted atoms `a_1 < ... < a_m`
//! realizes the first atom whose cumulative probability exceeds the uniform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{solve_exact, DpValue, SubsetKey};
use crate::model::{DiscreteDistribution, Instance};

/// A stopping rule. `play` starts a fresh episode.
pub trait Strategy: Sync {
    fn play(&self) -> Box<dyn Play + '_>;
}

/// One episode: variables are offered in arrival order until one is taken.
pub trait Play {
    /// Offers the realization `value` of variable `var`; `true` stops.
    fn offer(&mut self, var: usize, value: f64) -> bool;
}

/// Takes the first arrival.
pub struct AcceptFirst;

impl Strategy for AcceptFirst {
    fn play(&self) -> Box<dyn Play + '_> {
        struct P;
        impl Play for P {
            fn offer(&mut self, _: usize, _: f64) -> bool {
                true
            }
        }
        Box::new(P)
    }
}

/// Takes the first value at or above a fixed threshold; the last arrival is
/// always taken.
pub struct FixedThreshold {
    pub threshold: f64,
    pub n: usize,
}

impl Strategy for FixedThreshold {
    fn play(&self) -> Box<dyn Play + '_> {
        struct P<'a> {
            s: &'a FixedThreshold,
            seen: usize,
        }
        impl Play for P<'_> {
            fn offer(&mut self, _: usize, value: f64) -> bool {
                self.seen += 1;
                self.seen >= self.s.n || value >= self.s.threshold
            }
        }
        Box::new(P { s: self, seen: 0 })
    }
}

/// Threshold strategy driven by a function of the set still to arrive:
/// accept `x` iff `x >= oracle(remaining after this arrival)`.
pub struct OracleStrategy<F> {
    n: usize,
    oracle: F,
}

impl<F: Fn(SubsetKey) -> f64 + Sync> OracleStrategy<F> {
    pub fn new(n: usize, oracle: F) -> Self {
        Self { n, oracle }
    }
}

impl<F: Fn(SubsetKey) -> f64 + Sync> Strategy for OracleStrategy<F> {
    fn play(&self) -> Box<dyn Play + '_> {
        struct P<'a, F> {
            s: &'a OracleStrategy<F>,
            remaining: SubsetKey,
        }
        impl<F: Fn(SubsetKey) -> f64> Play for P<'_, F> {
            fn offer(&mut self, var: usize, value: f64) -> bool {
                self.remaining = self.remaining.without(var);
                value >= (self.s.oracle)(self.remaining)
            }
        }
        Box::new(P { s: self, remaining: SubsetKey::full(self.n) })
    }
}

/// The optimal strategy read off an exact DP table.
pub fn exact_strategy(dp: &DpValue) -> OracleStrategy<impl Fn(SubsetKey) -> f64 + Sync + '_> {
    OracleStrategy::new(dp.n, move |r: SubsetKey| dp.thresholds[r.0 as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl SimResult {
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.mean.to_bits() == other.mean.to_bits()
            && self.stderr.to_bits() == other.stderr.to_bits()
            && self.trials == other.trials
            && self.seed == other.seed
    }
}

pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform in `[0, 1)` from the top 53 bits.
pub(crate) fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index in `[0, k)` as the high half of `next_u64 * k`.
pub(crate) fn below(rng: &mut ChaCha8Rng, k: usize) -> usize {
    ((rng.next_u64() as u128 * k as u128) >> 64) as usize
}

pub(crate) fn shuffle(rng: &mut ChaCha8Rng, items: &mut [usize]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// Random permutation of `0..n`.
pub fn draw_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut order);
    order
}

/// Inverse-CDF realization of `var` at uniform `u`.
pub fn realize(var: &DiscreteDistribution, u: f64) -> f64 {
    let mut acc = 0.0;
    for a in var.atoms() {
        acc += a.prob;
        if u < acc {
            return a.value;
        }
    }
    var.max_value()
}

/// Sums in a fixed binary tree so the result does not depend on threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of `samples` (sample variance with `n - 1`).
pub fn summarize(samples: &[f64], seed: u64) -> SimResult {
    let trials = samples.len() as u64;
    let mean = pairwise_sum(samples) / samples.len() as f64;
    let stderr = if samples.len() > 1 {
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        (pairwise_sum(&sq) / (samples.len() - 1) as f64 / samples.len() as f64).sqrt()
    } else {
        0.0
    };
    SimResult { mean, stderr, trials, seed }
}

/// Plays `strategy` on `trials` random arrival orders and realizations.
pub fn run_sim(instance: &Instance, strategy: &dyn Strategy, trials: u64, seed: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let n = instance.n();
    let rewards: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let order = draw_permutation(&mut rng, n);
            let mut play = strategy.play();
            for &var in &order {
                let x = realize(&instance.variables[var], uniform(&mut rng));
                if play.offer(var, x) {
                    return x;
                }
            }
            0.0
        })
        .collect();
    Ok(summarize(&rewards, seed))
}

/// Outcome of playing two adversarially perturbed oracles.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorPropagationReport {
    pub epsilon: f64,
    pub opt: f64,
    pub bound: f64,
    /// Oracle `(1 - eps) * OPT` on every sub-instance.
    pub floor: SimResult,
    /// Oracle anywhere in `[(1 - eps) OPT, OPT]`, varying per sub-instance.
    pub jitter: SimResult,
    pub pass: bool,
}

/// Deterministic fraction in `[0, 1)` per `(mask, seed)`.
fn mask_fraction(mask: u64, seed: u64) -> f64 {
    let mut z = mask ^ seed.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Plays thresholds taken from an oracle within a factor `1 - eps` of the
/// exact sub-instance values and checks `mean >= (1 - eps) OPT - 3 stderr` (less the float tolerance).
pub fn check_error_propagation(
    instance: &Instance,
    eps: f64,
    trials: u64,
    seed: u64,
) -> Result<ErrorPropagationReport> {
    let dp = solve_exact(instance)?;
    let factor = 1.0 - eps;
    let floor = OracleStrategy::new(dp.n, |r: SubsetKey| factor * dp.thresholds[r.0 as usize]);
    let jitter = OracleStrategy::new(dp.n, |r: SubsetKey| {
        let f = 1.0 - eps * mask_fraction(r.0, seed);
        f * dp.thresholds[r.0 as usize]
    });
    let floor = run_sim(instance, &floor, trials, seed)?;
    let jitter = run_sim(instance, &jitter, trials, seed)?;
    let bound = factor * dp.value;
    let pass = [floor, jitter].iter().all(|r| r.mean >= bound - 3.0 * r.stderr - crate::model::TOLERANCE);
    Ok(ErrorPropagationReport { epsilon: eps, opt: dp.value, bound, floor, jitter, pass })
}
