//! Sampled boundary controls and spatial profiles.
//!
//! A `TimeSignal` stores values at every node of its window, including `t = 0`.
//! Operator coordinates drop the `t = 0` node (controls vanish there), so an
//! operator acting on the window `[0, T]` sees vectors sampled at `t_1..t_n`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::SimGrid;

/// Observation window of a time signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// `[0, T]`.
    Single,
    /// `[0, 2T]`.
    Doubled,
}

impl Window {
    /// Number of operator coordinates (nodes excluding `t = 0`).
    pub fn len(&self, grid: &SimGrid) -> usize {
        match self {
            Window::Single => grid.n_t,
            Window::Doubled => grid.n_t2(),
        }
    }

    pub fn horizon(&self, grid: &SimGrid) -> f64 {
        match self {
            Window::Single => grid.horizon,
            Window::Doubled => 2.0 * grid.horizon,
        }
    }
}

/// A function of time sampled on all nodes of its window.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub window: Window,
    /// Time step; also the quadrature weight of the window.
    pub dt: f64,
    /// Values at `t_0..t_n`, length `n + 1`.
    pub values: DVector<f64>,
}

impl TimeSignal {
    pub fn from_fn(grid: &SimGrid, window: Window, f: impl Fn(f64) -> f64) -> Self {
        let n = window.len(grid);
        let dt = grid.dt();
        let values = DVector::from_fn(n + 1, |k, _| f(k as f64 * dt));
        Self { window, dt, values }
    }

    pub fn zero(grid: &SimGrid, window: Window) -> Self {
        let n = window.len(grid);
        Self { window, dt: grid.dt(), values: DVector::zeros(n + 1) }
    }

    /// Number of operator coordinates (nodes minus the `t = 0` node).
    pub fn len(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// Checks the control convention `f(0) = 0`.
    pub fn require_control(&self) -> Result<()> {
        if self.values[0] != 0.0 {
            return Err(Error::GridMismatch(format!(
                "control must vanish at t = 0, got f(0) = {}",
                self.values[0]
            )));
        }
        Ok(())
    }

    /// Operator coordinates: samples at `t_1..t_n`.
    pub fn coords(&self) -> DVector<f64> {
        DVector::from_fn(self.len(), |k, _| self.values[k + 1])
    }

    /// Rebuilds a signal from operator coordinates, restoring `f(0) = 0`.
    pub fn from_coords(window: Window, dt: f64, coords: &DVector<f64>) -> Self {
        let mut values = DVector::zeros(coords.len() + 1);
        values.rows_mut(1, coords.len()).copy_from(coords);
        Self { window, dt, values }
    }

    /// Weighted L2 norm over the window.
    pub fn norm(&self) -> f64 {
        self.dt.sqrt() * self.values.norm()
    }
}

/// A function of the space variable sampled on a uniform sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceProfile {
    /// Coordinate of the first sample.
    pub x0: f64,
    /// Spatial step; also the quadrature weight.
    pub h: f64,
    pub values: DVector<f64>,
}

impl SpaceProfile {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weighted L2 norm.
    pub fn norm(&self) -> f64 {
        self.h.sqrt() * self.values.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_round_trip() {
        let g = SimGrid::new(1.0, 0.2, 80).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Single, |t| t * (0.2 - t));
        let back = TimeSignal::from_coords(Window::Single, f.dt, &f.coords());
        assert_eq!(f, back);
        assert!(f.require_control().is_ok());
    }

    #[test]
    fn control_convention_enforced() {
        let g = SimGrid::new(1.0, 0.2, 80).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Single, |_| 1.0);
        assert!(f.require_control().is_err());
    }
}
