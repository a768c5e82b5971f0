//! Online-optimal values by memoization over subsets of remaining variables.
//!
//! `OPT(S) = (1/|S|) * sum_{i in S} E[max(X_i, OPT(S \ {i}))]`, `OPT({}) = 0`.
//! The continuation value `OPT(S \ {i})` is the threshold the optimal
//! gambler uses when `X_i` arrives with `S \ {i}` still to come.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Instance;

/// Default cap on the number of variables for [`solve_exact`].
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Default cap on `outcomes * n!` for [`brute_force_oracle`].
pub const ORACLE_WORK_CAP: u128 = 10_000_000;

/// Bitset of the variables that have not arrived yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SubsetKey(pub u64);

impl SubsetKey {
    pub fn full(n: usize) -> Self {
        SubsetKey(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn empty() -> Self {
        SubsetKey(0)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        SubsetKey(indices.iter().fold(0u64, |m, &i| m | (1u64 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn without(self, i: usize) -> Self {
        SubsetKey(self.0 & !(1u64 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }
}

/// Optimal value plus the continuation value of every subset.
#[derive(Debug, Clone, Serialize)]
pub struct DpValue {
    pub n: usize,
    pub value: f64,
    /// `thresholds[mask]` is `OPT` of the variables in `mask`.
    pub thresholds: Vec<f64>,
}

impl DpValue {
    /// `OPT` of the sub-instance still to arrive; 0 for the empty set.
    pub fn threshold_at(&self, remaining: SubsetKey) -> Result<f64> {
        self.thresholds
            .get(remaining.0 as usize)
            .copied()
            .filter(|_| remaining.0 >> self.n == 0)
            .ok_or(Error::UnknownState { mask: remaining.0, n: self.n })
    }

    pub fn root(&self) -> SubsetKey {
        SubsetKey::full(self.n)
    }
}

pub fn solve_exact(instance: &Instance) -> Result<DpValue> {
    solve_exact_capped(instance, DEFAULT_EXACT_CAP)
}

pub fn solve_exact_capped(instance: &Instance, cap: usize) -> Result<DpValue> {
    let n = instance.n();
    if n > cap.min(30) {
        return Err(Error::TooManyVariables { n, cap: cap.min(30) });
    }
    let vars = &instance.variables;
    let size = 1usize << n;
    let mut opt = vec![0.0f64; size];
    // Masks only ever depend on strictly smaller masks.
    for mask in 1..size {
        let mut rest = mask;
        let mut sum = 0.0;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            sum += vars[i].expected_max_against(opt[mask & !(1 << i)]);
        }
        opt[mask] = sum / mask.count_ones() as f64;
    }
    Ok(DpValue { n, value: opt[size - 1], thresholds: opt })
}

/// Independent oracle: enumerates every arrival order and every joint
/// realization, then runs backward induction on the prefix sets.
///
/// At step `t` the gambler knows which `t` variables have arrived; the
/// continuation value is the mean, over every (order, outcome) pair with that
/// prefix set, of the reward collected from step `t + 1` on.
pub fn brute_force_oracle(instance: &Instance) -> Result<f64> {
    let n = instance.n();
    let outcomes: u128 = instance.variables.iter().map(|v| v.atoms().len() as u128).product();
    let perms: u128 = (1..=n as u128).product();
    let work = outcomes.saturating_mul(perms);
    if n > 7 || work > ORACLE_WORK_CAP {
        return Err(Error::OracleTooLarge { work, cap: ORACLE_WORK_CAP });
    }
    let outcomes = outcomes as usize;

    // values[o * n + i] and weight[o] for joint outcome o.
    let mut values = vec![0.0; outcomes * n];
    let mut weight = vec![1.0; outcomes];
    for o in 0..outcomes {
        let mut rest = o;
        for (i, var) in instance.variables.iter().enumerate() {
            let len = var.atoms().len();
            let atom = var.atoms()[rest % len];
            rest /= len;
            values[o * n + i] = atom.value;
            weight[o] *= atom.prob;
        }
    }

    let orders = all_permutations(n);
    let stride = outcomes;
    // reward[p * stride + o]: reward from the current step on.
    let mut reward = vec![0.0; orders.len() * stride];
    for (p, order) in orders.iter().enumerate() {
        let last = order[n - 1];
        for o in 0..outcomes {
            reward[p * stride + o] = values[o * n + last];
        }
    }
    let mut cont_sum = vec![0.0; 1 << n];
    let mut cont_mass = vec![0.0; 1 << n];
    for t in (0..n - 1).rev() {
        cont_sum.iter_mut().for_each(|x| *x = 0.0);
        cont_mass.iter_mut().for_each(|x| *x = 0.0);
        let prefix_sets: Vec<usize> = orders.iter().map(|ord| ord[..=t].iter().fold(0, |m, &i| m | 1 << i)).collect();
        for (p, &set) in prefix_sets.iter().enumerate() {
            for o in 0..outcomes {
                cont_sum[set] += weight[o] * reward[p * stride + o];
                cont_mass[set] += weight[o];
            }
        }
        for (p, order) in orders.iter().enumerate() {
            let set = prefix_sets[p];
            let threshold = cont_sum[set] / cont_mass[set];
            let current = order[t];
            for o in 0..outcomes {
                let x = values[o * n + current];
                if x >= threshold {
                    reward[p * stride + o] = x;
                }
            }
        }
    }
    let mut total = 0.0;
    for p in 0..orders.len() {
        for o in 0..outcomes {
            total += weight[o] * reward[p * stride + o];
        }
    }
    Ok(total / orders.len() as f64)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    // Lexicographic successor.
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscreteDistribution, PointMass};

    fn dist(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&(v, p)| PointMass::new(v, p)).collect()).unwrap()
    }

    #[test]
    fn single_variable_must_be_taken() {
        let inst = Instance::new(vec![DiscreteDistribution::point(3.5)]).unwrap();
        let dp = solve_exact(&inst).unwrap();
        assert_eq!(dp.value, 3.5);
        assert_eq!(dp.threshold_at(SubsetKey::empty()).unwrap(), 0.0);
        assert_eq!(dp.threshold_at(SubsetKey(1)).unwrap(), 3.5);
        assert_eq!(brute_force_oracle(&inst).unwrap(), 3.5);
    }

    #[test]
    fn two_fair_coins() {
        let coin = dist(&[(0.0, 0.5), (1.0, 0.5)]);
        let inst = Instance::new(vec![coin.clone(), coin]).unwrap();
        assert!((solve_exact(&inst).unwrap().value - 0.75).abs() < 1e-15);
        assert!((brute_force_oracle(&inst).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unknown_state_is_an_error() {
        let inst = Instance::new(vec![DiscreteDistribution::point(1.0)]).unwrap();
        let dp = solve_exact(&inst).unwrap();
        assert!(matches!(dp.threshold_at(SubsetKey(0b10)), Err(Error::UnknownState { .. })));
    }

    #[test]
    fn caps_are_enforced() {
        let inst = Instance::new(vec![DiscreteDistribution::point(1.0); 4]).unwrap();
        assert!(matches!(solve_exact_capped(&inst, 3), Err(Error::TooManyVariables { n: 4, cap: 3 })));
        let wide = dist(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        let big = Instance::new(vec![wide; 7]).unwrap();
        assert!(matches!(brute_force_oracle(&big), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn permutations_are_complete() {
        let perms = all_permutations(4);
        assert_eq!(perms.len(), 24);
        let mut sorted = perms.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn subset_key_helpers() {
        let key = SubsetKey::from_indices(&[0, 2, 5]);
        assert_eq!(key.len(), 3);
        assert!(key.contains(2) && !key.contains(1));
        assert_eq!(key.without(2).indices().collect::<Vec<_>>(), vec![0, 5]);
        assert_eq!(SubsetKey::full(3), SubsetKey(7));
    }
}
