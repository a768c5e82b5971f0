//! Test-side oracles and instance generators, written independently of the
//! library's solvers.
#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stopkit::{DiscreteDistribution, Instance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_7e57)
}

/// `(value, prob)` pairs of a distribution.
pub fn pairs(d: &DiscreteDistribution) -> Vec<(f64, f64)> {
    d.atoms().iter().map(|a| (a.value, a.prob)).collect()
}

/// `E[max(X, t)]` summed atom by atom.
pub fn e_max_against(d: &DiscreteDistribution, t: f64) -> f64 {
    pairs(d).iter().map(|&(v, p)| p * v.max(t)).sum()
}

/// `E[max_i X_i]` by enumerating every joint outcome.
pub fn e_max_enumerated(vars: &[DiscreteDistribution]) -> f64 {
    fn go(vars: &[DiscreteDistribution], i: usize, best: f64, prob: f64) -> f64 {
        if i == vars.len() {
            return prob * best;
        }
        pairs(&vars[i]).iter().map(|&(v, p)| go(vars, i + 1, best.max(v), prob * p)).sum()
    }
    go(vars, 0, 0.0, 1.0)
}

/// Online optimum by the recursion on remaining sets, memoized on a sorted
/// index list: the next arrival is uniform over what remains; the last
/// arrival is always taken.
pub fn naive_opt(vars: &[DiscreteDistribution]) -> f64 {
    fn go(vars: &[DiscreteDistribution], rest: &[usize], memo: &mut HashMap<Vec<usize>, f64>) -> f64 {
        if rest.is_empty() {
            return 0.0;
        }
        if let Some(&v) = memo.get(rest) {
            return v;
        }
        let mut total = 0.0;
        for (k, &i) in rest.iter().enumerate() {
            let others: Vec<usize> = rest.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &x)| x).collect();
            let cont = go(vars, &others, memo);
            total += e_max_against(&vars[i], cont);
        }
        let v = total / rest.len() as f64;
        memo.insert(rest.to_vec(), v);
        v
    }
    let all: Vec<usize> = (0..vars.len()).collect();
    go(vars, &all, &mut HashMap::new())
}

/// `(1+eps)^k` with the largest `k` such that it does not exceed `x`
/// (within a relative `1e-12`), found by stepping from `k = 0`.
pub fn round_down(x: f64, eps: f64) -> f64 {
    let g = 1.0 + eps;
    let fits = |k: i32| g.powi(k) <= x * (1.0 + 1e-12);
    let mut k = 0;
    if fits(0) {
        while fits(k + 1) {
            k += 1;
        }
    } else {
        while !fits(k) {
            k -= 1;
        }
    }
    g.powi(k)
}

/// Distribution from `(value, weight)` pairs; weights are normalized.
pub fn from_weights(raw: &[(f64, f64)]) -> DiscreteDistribution {
    let total: f64 = raw.iter().map(|r| r.1).sum();
    DiscreteDistribution::from_masses(raw.iter().map(|&(v, w)| (v, w / total)).collect::<Vec<_>>())
}

/// Values from a coarse grid half the time (so ties and shared atoms occur),
/// continuous otherwise.
pub fn random_dist(r: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteDistribution {
    let k = r.random_range(1..=max_atoms);
    let raw: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let v = if r.random_bool(0.5) { r.random_range(0..=10) as f64 * 0.5 } else { r.random_range(0.0..5.0) };
            (v, r.random_range(0.05..1.0))
        })
        .collect();
    from_weights(&raw)
}

pub fn random_instance(r: &mut ChaCha8Rng, n: usize, max_atoms: usize) -> Instance {
    Instance::new((0..n).map(|_| random_dist(r, max_atoms)).collect()).unwrap()
}

/// `n` variables drawn from a pool of `distinct` distributions.
pub fn repeated_instance(r: &mut ChaCha8Rng, n: usize, distinct: usize, max_atoms: usize) -> Instance {
    let pool: Vec<DiscreteDistribution> = (0..distinct).map(|_| random_dist(r, max_atoms)).collect();
    Instance::new((0..n).map(|_| pool[r.random_range(0..distinct)].clone()).collect()).unwrap()
}

/// `{0, v}` variables with `v ~ U[0.1, 10]`, `p ~ U[0.05, 1]`.
pub fn two_point_instance(r: &mut ChaCha8Rng, n: usize) -> Instance {
    Instance::new(
        (0..n)
            .map(|_| DiscreteDistribution::two_point(r.random_range(0.1..10.0), r.random_range(0.05..=1.0)))
            .collect(),
    )
    .unwrap()
}

/// Up to three atoms on a coarse grid, every probability at least 0.1.
pub fn chunky_dist(r: &mut ChaCha8Rng) -> DiscreteDistribution {
    let k = r.random_range(1..=3usize);
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
    let total: f64 = w.iter().sum::<f64>().max(1e-12);
    let free = 1.0 - 0.1 * k as f64;
    DiscreteDistribution::from_masses(
        w.iter().map(|x| (r.random_range(0..=8) as f64 * 0.25, 0.1 + free * x / total)).collect::<Vec<_>>(),
    )
}

pub fn arb_dist(max_atoms: usize) -> impl Strategy<Value = DiscreteDistribution> {
    let value = prop_oneof![(0u32..=10).prop_map(|k| k as f64 * 0.5), 0.0f64..5.0];
    prop::collection::vec((value, 0.05f64..1.0), 1..=max_atoms).prop_map(|raw| from_weights(&raw))
}

pub fn arb_instance(max_n: usize, max_atoms: usize) -> impl Strategy<Value = Instance> {
    prop::collection::vec(arb_dist(max_atoms), 1..=max_n).prop_map(|vars| Instance::new(vars).unwrap())
}

/// Instance with at least one strictly positive value.
pub fn arb_positive_instance(max_n: usize, max_atoms: usize) -> impl Strategy<Value = Instance> {
    arb_instance(max_n, max_atoms).prop_filter("some positive value", |i| i.max_value() > 0.0)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
