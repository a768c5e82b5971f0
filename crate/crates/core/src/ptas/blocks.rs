//! Partition of the arrival positions into blocks, one layout per value.
//!
//! Positions are 0-based. For a class with `m = floor(delta * n)`, blocks
//! `B_1..B_K` are the last `K * m` positions in runs of `m`; `B_0` is the
//! prefix before them.

use std::ops::Range;

use serde::Serialize;

use super::classes::ClassSplit;
use crate::model::SchemeConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassBlocks {
    /// Index into [`ClassSplit::classes`].
    pub class: usize,
    pub value: f64,
    pub n: usize,
    /// Size of each of `B_1..B_K`.
    pub m: usize,
    pub b0_len: usize,
    /// First position of each of `B_1..B_K`.
    pub starts: Vec<usize>,
    /// `m == 0`: everything falls into `B_0`.
    pub degenerate: bool,
}

impl ClassBlocks {
    /// Layout of `n` positions into `B_0` and `k` blocks of `floor(delta n)`.
    pub fn new(class: usize, value: f64, n: usize, k: usize, delta: f64) -> Self {
        let m = ((delta * n as f64 + 1e-9).floor() as usize).min(n / k.max(1));
        let b0_len = n - k * m;
        let starts = if m == 0 { Vec::new() } else { (0..k).map(|j| b0_len + j * m).collect() };
        Self { class, value, n, m, b0_len, starts, degenerate: m == 0 }
    }

    /// Block index of `pos`: 0 for `B_0`, `k` for `B_k`.
    pub fn block_of(&self, pos: usize) -> usize {
        if self.degenerate || pos < self.b0_len {
            0
        } else {
            1 + (pos - self.b0_len) / self.m
        }
    }

    pub fn ranges(&self) -> Vec<Range<usize>> {
        std::iter::once(0..self.b0_len).chain(self.starts.iter().map(|&s| s..s + self.m)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockLayout {
    pub n: usize,
    /// Number of non-initial blocks per class.
    pub k: usize,
    /// One entry per active class.
    pub classes: Vec<ClassBlocks>,
}

impl BlockLayout {
    pub fn degenerate(&self) -> Vec<&ClassBlocks> {
        self.classes.iter().filter(|c| c.degenerate).collect()
    }
}

pub fn build_blocks(split: &ClassSplit, config: &SchemeConfig) -> BlockLayout {
    let n = split.instance.n();
    let k = config.block_count();
    let classes = split
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_active())
        .map(|(i, c)| ClassBlocks::new(i, c.value, n, k, c.delta))
        .collect();
    BlockLayout { n, k, classes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_positions_four_blocks() {
        let b = ClassBlocks::new(0, 1.0, 100, 4, 0.05);
        assert_eq!(b.b0_len, 80);
        assert_eq!(b.ranges(), vec![0..80, 80..85, 85..90, 90..95, 95..100]);
        assert_eq!(b.block_of(79), 0);
        assert_eq!(b.block_of(80), 1);
        assert_eq!(b.block_of(99), 4);
    }

    #[test]
    fn uncapped_mass_leaves_b0_empty() {
        let b = ClassBlocks::new(0, 1.0, 100, 4, 0.25);
        assert_eq!(b.b0_len, 0);
        assert_eq!(b.starts, vec![0, 25, 50, 75]);
    }

    #[test]
    fn tiny_delta_is_degenerate() {
        let b = ClassBlocks::new(0, 1.0, 10, 4, 0.01);
        assert!(b.degenerate);
        assert_eq!(b.ranges(), vec![0..10]);
        assert_eq!(b.block_of(9), 0);
    }
}
