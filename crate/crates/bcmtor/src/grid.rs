//! Uniform space/time discretization of the interval and the observation
//! window, with the composite-rectangle quadrature weights.
//!
//! The time step always equals the spatial step (unit wave speed), which makes
//! the leapfrog scheme exact on the transport part and keeps every adjoint a
//! plain scaled transpose.

use crate::error::{Error, Result};

/// Relative tolerance used when checking that the horizon lands on the grid.
const ALIGN_TOL: f64 = 1e-9;

/// Uniform discretization of `[0, L] x [0, T]` with `dt = h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    /// Interval length `L`.
    pub length: f64,
    /// Control/observation horizon `T` of the single window.
    pub horizon: f64,
    /// Number of spatial cells; nodes are `x_i = i * h`, `i = 0..=n_x`.
    pub n_x: usize,
    /// Spatial step `h = L / n_x`; also the time step.
    pub h: f64,
    /// Time samples per window `[0, T]`, so `T = n_t * dt`.
    pub n_t: usize,
}

impl SimGrid {
    /// Builds a grid, enforcing `dt = h`, `T < L`, `n_x >= 16` and `T/h >= 16`.
    pub fn new(length: f64, horizon: f64, n_x: usize) -> Result<Self> {
        if !(length.is_finite() && horizon.is_finite()) || length <= 0.0 || horizon <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "length and horizon must be positive finite, got L={length}, T={horizon}"
            )));
        }
        if horizon >= length {
            return Err(Error::InvalidGrid(format!(
                "horizon must satisfy T < L strictly, got T={horizon}, L={length}"
            )));
        }
        if n_x < 16 {
            return Err(Error::InvalidGrid(format!("n_x must be >= 16, got {n_x}")));
        }
        let h = length / n_x as f64;
        let raw = horizon / h;
        let n_t = raw.round() as usize;
        if (raw - n_t as f64).abs() > ALIGN_TOL * raw.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} is not a multiple of dt={h} (T/h = {raw})"
            )));
        }
        if n_t < 16 {
            return Err(Error::InvalidGrid(format!(
                "need at least 16 time samples per window, got T/h = {n_t}"
            )));
        }
        Ok(Self { length, horizon, n_x, h, n_t })
    }

    /// Time step; equal to the spatial step by construction.
    pub fn dt(&self) -> f64 {
        self.h
    }

    /// Time samples on the doubled window `[0, 2T]`.
    pub fn n_t2(&self) -> usize {
        2 * self.n_t
    }

    /// Sample count of the inner (wave-filled) space: nodes `x_0..x_{n_t-1}`.
    ///
    /// Waves launched from `x = 0` fill `[0, T)` at time `T`; samples are the
    /// mirror of the time nodes `t_1..t_{n_t}` under `x = T - t`.
    pub fn inner_len(&self) -> usize {
        self.n_t
    }

    /// Spatial node `x_i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Time node `t_k`.
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Checks the geometry needed for reflection-free data on `[0, 2T]`:
    /// reflections from the far end must not reach `x = 0` within the doubled
    /// window, enforced as `L >= 2.2 T`.
    pub fn require_reflection_free(&self) -> Result<()> {
        if self.length + 1e-12 * self.length < 2.2 * self.horizon {
            return Err(Error::DomainTooShort { length: self.length, horizon: self.horizon });
        }
        Ok(())
    }
}
