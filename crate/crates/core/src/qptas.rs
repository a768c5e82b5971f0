//! The discretize-and-group pipeline and threshold strategies built from it.

use serde::Serialize;

use crate::discretize::{count_groups, discretize_instance, GroupCount, GroupKey};
use crate::error::Result;
use crate::exact::{solve_exact, SubsetKey};
use crate::grouped::{
    group_by_identical_distribution, solve_grouped_capped, GroupedDp, GroupedInstance, DEFAULT_STATE_CAP,
};
use crate::model::{Instance, SchemeConfig};
use crate::preprocess::{
    bundle_above_one, compress_high_values, zero_small_means, zero_small_values, ComposedLoss, TransformLog,
    TransformStep,
};
use crate::simulate::{OracleStrategy, Play, Strategy};

#[derive(Debug, Clone)]
pub struct QptasOptions {
    pub state_cap: usize,
    /// Fill each log step's prior/after values with exact DP values when
    /// the instance is small enough.
    pub annotate: bool,
}

impl Default for QptasOptions {
    fn default() -> Self {
        Self { state_cap: DEFAULT_STATE_CAP, annotate: false }
    }
}

/// Everything up to (and including) discretization.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// `E[max]` of the input, the factor values were divided by.
    pub expected_max: f64,
    pub normalized: Instance,
    pub discretized: Instance,
    pub keys: Vec<GroupKey>,
    pub support_bound: usize,
    pub log: TransformLog,
}

/// Runs normalize, zero small values, zero small means, bundle above one,
/// compress high values and discretize.
pub fn prepare(instance: &Instance, eps: f64, annotate: bool) -> Result<Prepared> {
    let expected_max = instance.expected_max()?;
    let normalized = instance.normalize()?;
    let support_bound = normalized.support_bound();
    let mut log = TransformLog::default();
    let mut stages = vec![normalized.clone()];

    let (a, step) = zero_small_values(&normalized, eps);
    log.push(step);
    stages.push(a.clone());
    let (b, step) = zero_small_means(&a, eps, support_bound);
    log.push(step);
    stages.push(b.clone());
    let (c, step) = bundle_above_one(&b);
    log.push(step);
    stages.push(c.clone());
    let (d, steps) = compress_high_values(&c, eps)?;
    // Two log steps, one intermediate instance we do not keep: annotate the
    // pair as a whole on the second step.
    let mut steps = steps.into_iter();
    log.push(steps.next().unwrap());
    log.push(steps.next().unwrap());
    stages.push(d.clone());
    let disc = discretize_instance(&d, eps)?;
    log.push(disc.step);
    stages.push(disc.instance.clone());

    if annotate && instance.n() <= 12 {
        let values: Vec<f64> = stages.iter().map(|s| solve_exact(s).map(|dp| dp.value)).collect::<Result<_>>()?;
        // stage index before/after each log step
        let spans = [(0, 1), (1, 2), (2, 3), (3, 4), (3, 4), (4, 5)];
        for (step, &(before, after)) in log.steps.iter_mut().zip(&spans) {
            step.prior_value = Some(values[before]);
            step.after_value = Some(values[after]);
        }
    }

    Ok(Prepared { expected_max, normalized, discretized: disc.instance, keys: disc.keys, support_bound, log })
}

#[derive(Debug, Clone)]
pub struct QptasSolution {
    /// Approximate `OPT` in the units of the input.
    pub value: f64,
    /// Approximate `OPT` of the normalized instance.
    pub normalized_value: f64,
    pub prepared: Prepared,
    pub grouped: GroupedInstance,
    pub dp: GroupedDp,
    pub group_count: GroupCount,
    pub composed: ComposedLoss,
}

#[derive(Debug, Clone, Serialize)]
pub struct QptasReport {
    pub value: f64,
    pub normalized_value: f64,
    pub expected_max: f64,
    pub epsilon: f64,
    pub groups: Vec<GroupSummary>,
    pub memo_states: usize,
    pub group_count: GroupCount,
    pub composed_loss: ComposedLoss,
    pub log: Vec<TransformStep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub key: String,
    pub count: usize,
}

impl QptasSolution {
    pub fn report(&self, eps: f64) -> QptasReport {
        let mut groups: Vec<GroupSummary> = Vec::new();
        for (g, group) in self.grouped.groups.iter().enumerate() {
            let var = self.grouped.membership.iter().position(|&m| m == g).unwrap();
            groups.push(GroupSummary { key: self.prepared.keys[var].to_string(), count: group.count });
        }
        QptasReport {
            value: self.value,
            normalized_value: self.normalized_value,
            expected_max: self.prepared.expected_max,
            epsilon: eps,
            groups,
            memo_states: self.dp.index.size,
            group_count: self.group_count.clone(),
            composed_loss: self.composed,
            log: self.prepared.log.steps.clone(),
        }
    }

    /// Threshold strategy reading sub-instance values off the grouped memo.
    pub fn strategy(&self) -> GroupedStrategy<'_> {
        GroupedStrategy::new(&self.grouped.membership, &self.dp, self.prepared.expected_max)
    }
}

pub fn solve_qptas(instance: &Instance, config: &SchemeConfig) -> Result<QptasSolution> {
    solve_qptas_with(instance, config, &QptasOptions::default())
}

pub fn solve_qptas_with(instance: &Instance, config: &SchemeConfig, options: &QptasOptions) -> Result<QptasSolution> {
    let eps = config.epsilon;
    let prepared = prepare(instance, eps, options.annotate)?;
    let grouped = group_by_identical_distribution(&prepared.discretized);
    let dp = solve_grouped_capped(&grouped, options.state_cap)?;
    let group_count = count_groups(&prepared.keys, eps, prepared.support_bound, instance.n());
    let composed = prepared.log.composed(eps);
    Ok(QptasSolution {
        value: dp.value * prepared.expected_max,
        normalized_value: dp.value,
        prepared,
        grouped,
        dp,
        group_count,
        composed,
    })
}

/// Accept `x` iff `x >= scale * OPT(remaining count vector)`.
pub struct GroupedStrategy<'a> {
    membership: &'a [usize],
    dp: &'a GroupedDp,
    scale: f64,
}

impl<'a> GroupedStrategy<'a> {
    pub fn new(membership: &'a [usize], dp: &'a GroupedDp, scale: f64) -> Self {
        Self { membership, dp, scale }
    }
}

impl Strategy for GroupedStrategy<'_> {
    fn play(&self) -> Box<dyn Play + '_> {
        struct P<'a> {
            s: &'a GroupedStrategy<'a>,
            index: usize,
        }
        impl Play for P<'_> {
            fn offer(&mut self, var: usize, value: f64) -> bool {
                self.index -= self.s.dp.index.strides[self.s.membership[var]];
                value >= self.s.scale * self.s.dp.values[self.index]
            }
        }
        Box::new(P { s: self, index: self.dp.index.size - 1 })
    }
}

/// Oracle strategy: accept iff the realization reaches the oracle's
/// value of the variables still to come.
pub fn strategy_from_oracle<F>(instance: &Instance, oracle: F) -> OracleStrategy<F>
where
    F: Fn(SubsetKey) -> f64 + Sync,
{
    OracleStrategy::new(instance.n(), oracle)
}
