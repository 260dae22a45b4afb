//! Real potentials on the interval and their smoothness proxy.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::SimGrid;

/// A real potential sampled at all spatial nodes `x_0..x_{n_x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub h: f64,
    pub values: DVector<f64>,
}

impl Potential {
    pub fn from_fn(grid: &SimGrid, q: impl Fn(f64) -> f64) -> Result<Self> {
        let values = DVector::from_fn(grid.n_x + 1, |i, _| q(grid.x(i)));
        let p = Self { h: grid.h, values };
        p.require_finite()?;
        Ok(p)
    }

    pub fn zero(grid: &SimGrid) -> Self {
        Self { h: grid.h, values: DVector::zeros(grid.n_x + 1) }
    }

    pub fn constant(grid: &SimGrid, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_| c)
    }

    /// `q(x) = offset + depth * exp(-((x - center)/width)^2)`.
    pub fn gaussian_bump(
        grid: &SimGrid,
        center: f64,
        width: f64,
        depth: f64,
        offset: f64,
    ) -> Result<Self> {
        if width <= 0.0 {
            return Err(Error::InvalidGrid(format!("bump width must be positive, got {width}")));
        }
        Self::from_fn(grid, |x| {
            let u = (x - center) / width;
            offset + depth * (-u * u).exp()
        })
    }

    /// Piecewise-linear interpolation of `(xs, qs)` onto the grid nodes.
    /// Outside the table range the edge values are extended.
    pub fn from_table(grid: &SimGrid, xs: &[f64], qs: &[f64]) -> Result<Self> {
        if xs.len() != qs.len() || xs.len() < 2 {
            return Err(Error::InvalidGrid(
                "potential table needs at least two (x, q) pairs of equal length".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("potential table abscissae must increase".into()));
        }
        Self::from_fn(grid, |x| {
            if x <= xs[0] {
                return qs[0];
            }
            if x >= xs[xs.len() - 1] {
                return qs[qs.len() - 1];
            }
            let k = xs.partition_point(|&a| a <= x).min(xs.len() - 1);
            let (x0, x1) = (xs[k - 1], xs[k]);
            let s = (x - x0) / (x1 - x0);
            qs[k - 1] * (1.0 - s) + qs[k] * s
        })
    }

    fn require_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("potential contains non-finite values".into()));
        }
        Ok(())
    }

    /// `q + scale * p` on the same grid.
    pub fn add_scaled(&self, p: &Potential, scale: f64) -> Result<Potential> {
        if self.values.len() != p.values.len() {
            return Err(Error::Dimension("potentials live on different grids".into()));
        }
        Ok(Potential { h: self.h, values: &self.values + scale * &p.values })
    }

    /// Stand-in for the C^N bound: max absolute iterated centered differences,
    /// orders 1..=4, over the interior nodes.
    pub fn smoothness_proxy(&self) -> [f64; 4] {
        let mut proxy = [0.0_f64; 4];
        let mut cur: Vec<f64> = self.values.iter().copied().collect();
        for p in proxy.iter_mut() {
            let n = cur.len();
            if n < 3 {
                break;
            }
            let next: Vec<f64> =
                (1..n - 1).map(|i| (cur[i + 1] - cur[i - 1]) / (2.0 * self.h)).collect();
            *p = next.iter().fold(0.0, |m, v| m.max(v.abs()));
            cur = next;
        }
        proxy
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
