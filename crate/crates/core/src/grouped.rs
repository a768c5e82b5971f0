//! Online-optimal DP over count vectors of identically distributed groups.
//!
//! With groups of sizes `k_1..k_g`, the state is how many members of each
//! group are still to arrive. The memo is a flat vector indexed by the
//! mixed-radix encoding of the count vector.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Instance};

/// Default cap on the number of count-vector states.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub representative: DiscreteDistribution,
    pub count: usize,
}

/// A multiset of distributions.
#[derive(Debug, Clone)]
pub struct GroupedInstance {
    pub groups: Vec<Group>,
    /// Group of each original variable, when built from an [`Instance`].
    pub membership: Vec<usize>,
}

impl GroupedInstance {
    /// Checks that counts are positive and representatives pairwise distinct.
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidInstance("grouped instance has no groups".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.count == 0 {
                return Err(Error::InvalidInstance(format!("group {i} has count 0")));
            }
            if groups[..i].iter().any(|h| h.representative.same_atoms(&g.representative)) {
                return Err(Error::InvalidInstance(format!("group {i} repeats an earlier representative")));
            }
        }
        Ok(Self::from_groups_unchecked(groups))
    }

    /// Accepts repeated representatives; each group keeps its own counter.
    pub fn from_groups_unchecked(groups: Vec<Group>) -> Self {
        let membership = groups.iter().enumerate().flat_map(|(i, g)| std::iter::repeat_n(i, g.count)).collect();
        Self { groups, membership }
    }

    pub fn total_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.count).collect()
    }

    /// Flattens back to an instance, group by group.
    pub fn to_instance(&self) -> Instance {
        let vars = self.groups.iter().flat_map(|g| std::iter::repeat_n(g.representative.clone(), g.count)).collect();
        Instance::from_parts_unchecked(vars, 1.0)
    }
}

/// Groups variables whose atom lists are bitwise identical, in order of
/// first appearance.
pub fn group_by_identical_distribution(instance: &Instance) -> GroupedInstance {
    let mut index: HashMap<Vec<(u64, u64)>, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut membership = Vec::with_capacity(instance.n());
    for var in &instance.variables {
        let g = *index.entry(var.structural_key()).or_insert_with(|| {
            groups.push(Group { representative: var.clone(), count: 0 });
            groups.len() - 1
        });
        groups[g].count += 1;
        membership.push(g);
    }
    GroupedInstance { groups, membership }
}

/// Number of count-vector states, `prod (k_i + 1)`, saturating.
pub fn memo_size(gi: &GroupedInstance) -> u128 {
    gi.groups.iter().fold(1u128, |acc, g| acc.saturating_mul(g.count as u128 + 1))
}

/// State-count check under the convention that group `i` contributes a
/// factor `k_i`: `prod k_i <= ceil(K/g)^g`.
#[derive(Debug, Clone, Serialize)]
pub struct StateCountCheck {
    pub groups: usize,
    pub total: usize,
    pub product_of_counts: f64,
    pub bound: f64,
    /// The literal number of memo states, `prod (k_i + 1)`.
    pub memo_states: f64,
    pub holds: bool,
}

pub fn state_count_check(gi: &GroupedInstance) -> StateCountCheck {
    let g = gi.groups.len();
    let total = gi.total_count();
    let product_of_counts: f64 = gi.groups.iter().map(|gr| gr.count as f64).product();
    let bound = (total.div_ceil(g.max(1)) as f64).powi(g as i32);
    let memo_states: f64 = gi.groups.iter().map(|gr| gr.count as f64 + 1.0).product();
    StateCountCheck {
        groups: g,
        total,
        product_of_counts,
        bound,
        memo_states,
        holds: product_of_counts <= bound * (1.0 + 1e-12),
    }
}

/// Mixed-radix encoding of count vectors bounded by `limits`.
#[derive(Debug, Clone, Serialize)]
pub struct CountIndex {
    pub limits: Vec<usize>,
    pub strides: Vec<usize>,
    pub size: usize,
}

impl CountIndex {
    pub fn new(limits: &[usize], cap: usize) -> Result<Self> {
        let mut strides = Vec::with_capacity(limits.len());
        let mut size: u128 = 1;
        for &k in limits {
            strides.push(size as usize);
            size = size.saturating_mul(k as u128 + 1);
        }
        if size > cap as u128 {
            return Err(Error::StateSpaceTooLarge { groups: limits.len(), states: size, cap });
        }
        Ok(Self { limits: limits.to_vec(), strides, size: size as usize })
    }

    pub fn index(&self, counts: &[usize]) -> Option<usize> {
        if counts.len() != self.limits.len() || counts.iter().zip(&self.limits).any(|(c, k)| c > k) {
            return None;
        }
        Some(counts.iter().zip(&self.strides).map(|(c, s)| c * s).sum())
    }

    /// Increments `counts` in mixed radix; used to walk indices in order.
    pub(crate) fn advance(&self, counts: &mut [usize]) {
        for (c, &k) in counts.iter_mut().zip(&self.limits) {
            if *c < k {
                *c += 1;
                return;
            }
            *c = 0;
        }
    }
}

/// `OPT` of every count vector `0 <= c <= k`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupedDp {
    pub value: f64,
    pub index: CountIndex,
    pub values: Vec<f64>,
}

impl GroupedDp {
    /// `OPT` of the sub-instance with `counts` members of each group left.
    pub fn value_at(&self, counts: &[usize]) -> Result<f64> {
        self.index.index(counts).map(|i| self.values[i]).ok_or_else(|| {
            Error::InvalidArgument(format!("count vector {counts:?} outside limits {:?}", self.index.limits))
        })
    }
}

pub fn solve_grouped(gi: &GroupedInstance) -> Result<GroupedDp> {
    solve_grouped_capped(gi, DEFAULT_STATE_CAP)
}

pub fn solve_grouped_capped(gi: &GroupedInstance, cap: usize) -> Result<GroupedDp> {
    let index = CountIndex::new(&gi.counts(), cap)?;
    let reps: Vec<&DiscreteDistribution> = gi.groups.iter().map(|g| &g.representative).collect();
    let mut values = vec![0.0f64; index.size];
    let mut counts = vec![0usize; reps.len()];
    let mut remaining = 0usize;
    for flat in 0..index.size {
        if flat > 0 {
            index.advance(&mut counts);
            remaining = counts.iter().sum();
        }
        if remaining == 0 {
            continue;
        }
        let mut sum = 0.0;
        for (i, rep) in reps.iter().enumerate() {
            if counts[i] > 0 {
                let next = values[flat - index.strides[i]];
                sum += counts[i] as f64 * rep.expected_max_against(next);
            }
        }
        values[flat] = sum / remaining as f64;
    }
    Ok(GroupedDp { value: values[index.size - 1], index, values })
}
