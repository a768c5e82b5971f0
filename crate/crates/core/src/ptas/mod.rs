//! The frontloading reduction: per-value split into small-probability and
//! special atoms, block layouts, the outside-option DP, and the game chain
//! that links it back to the original problem.

pub mod blocks;
pub mod chain;
pub mod classes;
pub mod g5;
pub mod qmass;

use serde::Serialize;

pub use blocks::{build_blocks, BlockLayout, ClassBlocks};
pub use chain::{simulate_game_chain, ChainReport};
pub use classes::{special_truncation, special_truncation_by, split_small_special, ClassSplit, Truncation, ValueClass};
pub use g5::{solve_g5, solve_g5_capped, G5Solution, G5Strategy};
pub use qmass::{p_transform, q_transform};

use crate::error::Result;
use crate::model::{Instance, SchemeConfig};
use crate::preprocess::TransformStep;
use crate::qptas::{prepare, Prepared};

#[derive(Debug, Clone)]
pub struct PtasSolution {
    /// G5 value in the units of the input.
    pub value: f64,
    pub normalized_value: f64,
    pub config: SchemeConfig,
    pub prepared: Prepared,
    pub split: ClassSplit,
    pub layout: BlockLayout,
    pub g5: G5Solution,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub value: f64,
    pub is_vmax: bool,
    pub small: usize,
    pub special: usize,
    pub qbar_star: f64,
    pub q_star: f64,
    pub q_o: f64,
    pub delta: f64,
    pub ignored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PtasReport {
    pub value: f64,
    pub normalized_value: f64,
    pub expected_max: f64,
    pub config: SchemeConfig,
    pub classes: Vec<ClassSummary>,
    pub special_types: usize,
    pub layout: BlockLayout,
    pub options: usize,
    pub truncated_types: usize,
    pub dp_states: usize,
    pub log: Vec<TransformStep>,
}

impl PtasSolution {
    pub fn report(&self) -> PtasReport {
        PtasReport {
            value: self.value,
            normalized_value: self.normalized_value,
            expected_max: self.prepared.expected_max,
            config: self.config,
            classes: self
                .split
                .classes
                .iter()
                .map(|c| ClassSummary {
                    value: c.value,
                    is_vmax: c.is_vmax,
                    small: c.small.len(),
                    special: c.special.len(),
                    qbar_star: c.qbar_star,
                    q_star: c.q_star,
                    q_o: c.q_o,
                    delta: c.delta,
                    ignored: c.ignored,
                })
                .collect(),
            special_types: self.split.special_types,
            layout: self.layout.clone(),
            options: self.g5.options.len(),
            truncated_types: self.g5.types.groups.len(),
            dp_states: self.g5.state_count(),
            log: self.prepared.log.steps.clone(),
        }
    }

    /// Option-unaware G5 thresholds, in input units.
    pub fn strategy(&self) -> G5Strategy<'_> {
        self.g5.strategy(self.prepared.expected_max)
    }

    pub fn game_chain(&self, trials: u64, seed: u64) -> Result<ChainReport> {
        simulate_game_chain(&self.split, &self.layout, &self.g5, &self.config, trials, seed)
    }
}

/// Discretizes, splits, lays out blocks and solves the G5 DP.
pub fn solve_ptas(instance: &Instance, config: &SchemeConfig) -> Result<PtasSolution> {
    let prepared = prepare(instance, config.epsilon, false)?;
    let split = split_small_special(&prepared.discretized, config);
    let layout = build_blocks(&split, config);
    let g5 = solve_g5(&split, &layout, config)?;
    Ok(PtasSolution {
        value: g5.value * prepared.expected_max,
        normalized_value: g5.value,
        config: *config,
        prepared,
        split,
        layout,
        g5,
    })
}
