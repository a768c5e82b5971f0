//! Exact DP for the fixed-probability outside-option game.
//!
//! Only truncated components arrive; small atoms act solely through the
//! outside options `Z_v`, which are redrawn at the start of every non-initial
//! block of `v` and equal `v` with probability `1 - exp(-(1 - eps) Q^o_v)`.
//! The state is the count vector of remaining truncated types plus one bit
//! per option; the position is implied by the counts.

use serde::Serialize;

use super::blocks::{BlockLayout, ClassBlocks};
use super::classes::{special_truncation_by, ClassSplit, Truncation};
use crate::error::{Error, Result};
use crate::grouped::{group_by_identical_distribution, CountIndex, GroupedInstance, DEFAULT_STATE_CAP};
use crate::model::{Instance, SchemeConfig};
use crate::simulate::{Play, Strategy};

/// Most outside options the DP tracks (one bit each).
pub const MAX_OPTIONS: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct OptionClass {
    pub value: f64,
    pub q_o: f64,
    pub redraw_prob: f64,
    pub blocks: ClassBlocks,
}

#[derive(Debug, Clone)]
pub struct G5Solution {
    pub n: usize,
    pub epsilon: f64,
    pub value: f64,
    pub options: Vec<OptionClass>,
    pub truncations: Vec<Truncation>,
    /// Groups of identical truncated components; `membership` maps variables.
    pub types: GroupedInstance,
    pub index: CountIndex,
    values: Vec<f64>,
    prior: Vec<f64>,
    zmax: Vec<f64>,
    redraw_at: Vec<u32>,
    active_at: Vec<u32>,
}

impl G5Solution {
    fn width(&self) -> usize {
        1 << self.options.len()
    }

    pub fn full_index(&self) -> usize {
        self.index.size - 1
    }

    /// Index step taken when variable `var` arrives.
    pub fn stride(&self, var: usize) -> usize {
        self.index.strides[self.types.membership[var]]
    }

    /// Largest option value available under bits `z`.
    pub fn option_value(&self, z: u32) -> f64 {
        self.zmax[z as usize]
    }

    /// Options whose block starts at `pos`.
    pub fn redraws_at(&self, pos: usize) -> u32 {
        self.redraw_at.get(pos).copied().unwrap_or(0)
    }

    /// Options whose first non-initial block has started by `pos`.
    pub fn active_at(&self, pos: usize) -> u32 {
        self.active_at.get(pos).copied().unwrap_or(0)
    }

    /// `V` at count index `idx` with option bits `z`, before the arrival.
    pub fn value_at(&self, idx: usize, z: u32) -> f64 {
        self.values[idx * self.width() + z as usize]
    }

    /// Value of moving to count index `next` (with `remaining` variables
    /// left) while holding options `z`, averaging over the redraws due at
    /// that position.
    pub fn continuation(&self, next: usize, remaining: usize, z: u32) -> f64 {
        continuation(&self.values, self.width(), &self.options, &self.redraw_at, self.n, next, remaining, z)
    }

    /// Continuation without knowledge of the options: each option active at
    /// the next position is held with its redraw probability.
    pub fn prior_threshold(&self, next: usize) -> f64 {
        self.prior[next]
    }

    pub fn state_count(&self) -> usize {
        self.values.len()
    }

    pub fn strategy(&self, scale: f64) -> G5Strategy<'_> {
        G5Strategy { sol: self, scale }
    }
}

#[allow(clippy::too_many_arguments)]
fn continuation(
    values: &[f64],
    width: usize,
    options: &[OptionClass],
    redraw_at: &[u32],
    n: usize,
    next: usize,
    remaining: usize,
    z: u32,
) -> f64 {
    if remaining == 0 {
        return 0.0;
    }
    let base = next * width;
    let redraw = redraw_at[n - remaining];
    if redraw == 0 {
        return values[base + z as usize];
    }
    let kept = z & !redraw;
    let mut acc = 0.0;
    // Enumerate every subset `s` of the redrawn bits.
    let mut s = redraw;
    loop {
        let mut weight = 1.0;
        for (j, opt) in options.iter().enumerate() {
            if redraw >> j & 1 == 1 {
                weight *= if s >> j & 1 == 1 { opt.redraw_prob } else { 1.0 - opt.redraw_prob };
            }
        }
        acc += weight * values[base + (kept | s) as usize];
        if s == 0 {
            break;
        }
        s = (s - 1) & redraw;
    }
    acc
}

pub fn solve_g5(split: &ClassSplit, layout: &BlockLayout, config: &SchemeConfig) -> Result<G5Solution> {
    solve_g5_capped(split, layout, config, DEFAULT_STATE_CAP)
}

pub fn solve_g5_capped(
    split: &ClassSplit,
    layout: &BlockLayout,
    config: &SchemeConfig,
    cap: usize,
) -> Result<G5Solution> {
    let eps = config.epsilon;
    let instance = &split.instance;
    let n = instance.n();
    let truncations: Vec<Truncation> = instance
        .variables
        .iter()
        .enumerate()
        .map(|(i, var)| special_truncation_by(var, |a| split.is_small(i, a.value)))
        .collect();
    let truncated = Instance::from_parts_unchecked(truncations.iter().map(|t| t.truncated.clone()).collect(), 1.0);
    let types = group_by_identical_distribution(&truncated);

    let options: Vec<OptionClass> = layout
        .classes
        .iter()
        .filter(|b| !b.degenerate)
        .map(|b| {
            let q_o = split.classes[b.class].q_o;
            OptionClass { value: b.value, q_o, redraw_prob: -(-(1.0 - eps) * q_o).exp_m1(), blocks: b.clone() }
        })
        .collect();
    if options.len() > MAX_OPTIONS {
        return Err(Error::StateSpaceTooLarge { groups: types.groups.len(), states: u128::MAX, cap });
    }
    let width = 1usize << options.len();
    let index = CountIndex::new(&types.counts(), (cap / width).max(1)).map_err(|e| match e {
        Error::StateSpaceTooLarge { groups, states, .. } => {
            Error::StateSpaceTooLarge { groups, states: states.saturating_mul(width as u128), cap }
        }
        other => other,
    })?;

    let mut redraw_at = vec![0u32; n];
    let mut active_at = vec![0u32; n];
    for (j, opt) in options.iter().enumerate() {
        for &s in &opt.blocks.starts {
            redraw_at[s] |= 1 << j;
        }
        if let Some(&first) = opt.blocks.starts.first() {
            for a in &mut active_at[first..] {
                *a |= 1 << j;
            }
        }
    }
    let zmax: Vec<f64> = (0..width)
        .map(|z| options.iter().enumerate().filter(|(j, _)| z >> j & 1 == 1).map(|(_, o)| o.value).fold(0.0, f64::max))
        .collect();

    let reps: Vec<_> = types.groups.iter().map(|g| &g.representative).collect();
    let mut values = vec![0.0f64; index.size * width];
    let mut counts = vec![0usize; reps.len()];
    for flat in 0..index.size {
        if flat > 0 {
            index.advance(&mut counts);
        }
        let remaining: usize = counts.iter().sum();
        if remaining == 0 {
            continue;
        }
        for z in 0..width {
            let mut sum = 0.0;
            for (t, rep) in reps.iter().enumerate() {
                if counts[t] == 0 {
                    continue;
                }
                let next = flat - index.strides[t];
                let cont = continuation(&values, width, &options, &redraw_at, n, next, remaining - 1, z as u32);
                sum += counts[t] as f64 * rep.expected_max_against(cont.max(zmax[z]));
            }
            values[flat * width + z] = sum / remaining as f64;
        }
    }

    let mut prior = vec![0.0; index.size];
    let mut counts = vec![0usize; reps.len()];
    for (flat, slot) in prior.iter_mut().enumerate() {
        if flat > 0 {
            index.advance(&mut counts);
        }
        let remaining: usize = counts.iter().sum();
        if remaining == 0 {
            continue;
        }
        let active = active_at[n - remaining];
        let mut acc = 0.0;
        for z in 0..width as u32 {
            if z & !active != 0 {
                continue;
            }
            let mut weight = 1.0;
            for (j, opt) in options.iter().enumerate() {
                if active >> j & 1 == 1 {
                    weight *= if z >> j & 1 == 1 { opt.redraw_prob } else { 1.0 - opt.redraw_prob };
                }
            }
            acc += weight * values[flat * width + z as usize];
        }
        *slot = acc;
    }

    let full = index.size - 1;
    let value = continuation(&values, width, &options, &redraw_at, n, full, n, 0);
    Ok(G5Solution {
        n,
        epsilon: eps,
        value,
        options,
        truncations,
        types,
        index,
        values,
        prior,
        zmax,
        redraw_at,
        active_at,
    })
}

/// Plays whole variables against the option-unaware continuation.
pub struct G5Strategy<'a> {
    sol: &'a G5Solution,
    scale: f64,
}

impl Strategy for G5Strategy<'_> {
    fn play(&self) -> Box<dyn Play + '_> {
        struct P<'a> {
            s: &'a G5Strategy<'a>,
            index: usize,
        }
        impl Play for P<'_> {
            fn offer(&mut self, var: usize, value: f64) -> bool {
                self.index -= self.s.sol.stride(var);
                value >= self.s.scale * self.s.sol.prior_threshold(self.index)
            }
        }
        Box::new(P { s: self, index: self.sol.full_index() })
    }
}
