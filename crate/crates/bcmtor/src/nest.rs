//! Nests of coordinate subspaces and partitions of the parameter interval.
//!
//! A nest is realized as an ordering in which coordinates join the subspace:
//! level `l` spans the first `l` coordinates of the order. Every projection
//! `X^s` is then a 0/1 diagonal matrix, monotone in `s`, with `X^0 = 0` and
//! `X^T = I`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linop::{LinOp, SpaceDesc};

/// A continuous nest of coordinate projections, one level per grid sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NestSpec {
    /// `order[l]` is the coordinate added when passing level `l`.
    order: Vec<usize>,
}

impl NestSpec {
    /// Delayed-control nest on a time window sampled at `t_1..t_n`:
    /// `X^s` keeps samples with `t > T - s`, so the latest time joins first.
    pub fn delayed_control(n: usize) -> Self {
        Self { order: (0..n).rev().collect() }
    }

    /// Filled-region nest on a spatial grid `x_0..x_{n-1}`:
    /// `X^s` keeps samples with `x < s`, so the shallow end joins first.
    pub fn filled_region(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    /// Standard coordinate flag `{0} ⊂ span(e_1) ⊂ span(e_1, e_2) ⊂ ...`.
    pub fn coordinate_flag(n: usize) -> Self {
        Self::filled_region(n)
    }

    /// Coordinate flag in a seeded random order.
    pub fn random_flag(n: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        Self { order }
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n || seen[c] {
                return Err(Error::Dimension("nest order must be a permutation".into()));
            }
            seen[c] = true;
        }
        Ok(Self { order })
    }

    /// Number of levels (= dimension of the underlying space).
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Coordinates spanned at `level` (the first `level` entries of the order).
    pub fn selected(&self, level: usize) -> &[usize] {
        &self.order[..level]
    }

    /// Coordinate added when passing from `level - 1` to `level`.
    pub fn added_at(&self, level: usize) -> usize {
        self.order[level - 1]
    }

    /// 0/1 mask of the subspace at `level`.
    pub fn mask(&self, level: usize) -> Vec<bool> {
        let mut m = vec![false; self.len()];
        for &c in self.selected(level) {
            m[c] = true;
        }
        m
    }

    /// The projection `X^s` at `level` as an operator on `space`.
    pub fn projection(&self, level: usize, space: SpaceDesc) -> Result<LinOp> {
        if space.n != self.len() {
            return Err(Error::Dimension("nest level count differs from space dimension".into()));
        }
        let mask = self.mask(level);
        let mat = DMatrix::from_fn(space.n, space.n, |i, j| {
            if i == j && mask[i] {
                1.0
            } else {
                0.0
            }
        });
        LinOp::endomorphism(mat, space)
    }

    /// Zeroes the coordinates outside the subspace at `level`.
    pub fn project_vector(&self, level: usize, v: &DVector<f64>) -> DVector<f64> {
        let mask = self.mask(level);
        DVector::from_fn(v.len(), |i, _| if mask[i] { v[i] } else { 0.0 })
    }

    /// Columns of `m` at the coordinates spanned by `level`, in nest order.
    pub fn select_columns(&self, m: &DMatrix<f64>, level: usize) -> DMatrix<f64> {
        let cols = self.selected(level);
        let mut out = DMatrix::zeros(m.nrows(), cols.len());
        for (k, &c) in cols.iter().enumerate() {
            out.set_column(k, &m.column(c));
        }
        out
    }
}

/// A partition `0 = s_0 < s_1 < ... < s_m = T` of the nest parameter,
/// stored as grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionXi {
    points: Vec<usize>,
}

impl PartitionXi {
    pub fn new(points: Vec<usize>, n: usize) -> Result<Self> {
        if points.first() != Some(&0) || points.last() != Some(&n) {
            return Err(Error::Dimension("partition must run from 0 to the top level".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dimension("partition points must strictly increase".into()));
        }
        Ok(Self { points })
    }

    /// Quasi-uniform partition with `blocks` blocks on `n` grid levels,
    /// rounded to the grid; never more blocks than levels.
    pub fn uniform(blocks: usize, n: usize) -> Self {
        let blocks = blocks.clamp(1, n);
        let mut points: Vec<usize> = (0..=blocks)
            .map(|k| ((k as f64 / blocks as f64) * n as f64).round() as usize)
            .collect();
        points.dedup();
        Self { points }
    }

    /// The finest partition: every grid level is a point.
    pub fn finest(n: usize) -> Self {
        Self { points: (0..=n).collect() }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn block_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Largest block, in grid levels.
    pub fn range(&self) -> usize {
        self.points.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}
