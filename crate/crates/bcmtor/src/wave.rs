//! Forward simulation of the boundary-controlled wave system on an interval,
//! and assembly of the response operator (the inverse data) and the control
//! operator (the hidden oracle).
//!
//! The scheme is the explicit leapfrog with `dt = h`, which transports
//! boundary data exactly when `q = 0` and keeps the discrete domain of
//! influence inside the causality cone `x <= t`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SimGrid;
use crate::linop::{LinOp, SpaceDesc};
use crate::potential::Potential;
use crate::signal::{TimeSignal, Window};

/// Discrete wave `u[k][i]`, `k` time index, `i` space index.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: SimGrid,
    pub window: Window,
    /// Row `k` holds `u(., t_k)`; dimensions `(n_steps + 1) x (n_x + 1)`.
    pub data: DMatrix<f64>,
}

impl WaveField {
    pub fn u(&self, k: usize, i: usize) -> f64 {
        self.data[(k, i)]
    }

    /// Final-time snapshot on all spatial nodes.
    pub fn final_row(&self) -> DVector<f64> {
        self.data.row(self.data.nrows() - 1).transpose()
    }
}

/// One leapfrog step: writes `u(t_{k+1})` into `next`.
///
/// `next[0]` must be set to the boundary value by the caller afterwards;
/// the far end stays pinned at zero.
#[inline]
fn leapfrog_step(prev: &[f64], cur: &[f64], q: &[f64], h2: f64, next: &mut [f64]) {
    let n_x = cur.len() - 1;
    for i in 1..n_x {
        next[i] = cur[i + 1] + cur[i - 1] - prev[i] - h2 * q[i] * cur[i];
    }
    next[n_x] = 0.0;
}

fn check_finite(step: usize, row: &[f64]) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if !sum.is_finite() {
        return Err(Error::Instability { step });
    }
    Ok(())
}

fn require_consistent(q: &Potential, f: &TimeSignal, grid: &SimGrid) -> Result<()> {
    if q.values.len() != grid.n_x + 1 {
        return Err(Error::GridMismatch(format!(
            "potential has {} nodes, grid has {}",
            q.values.len(),
            grid.n_x + 1
        )));
    }
    if (f.dt - grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(Error::GridMismatch(format!(
            "control step {} does not match grid step {}",
            f.dt,
            grid.dt()
        )));
    }
    if f.len() != f.window.len(grid) {
        return Err(Error::GridMismatch(format!(
            "control has {} samples, window needs {}",
            f.len(),
            f.window.len(grid)
        )));
    }
    f.require_control()
}

/// Solves `u_tt = u_xx - q u`, `u(0, t) = f(t)`, `u(L, t) = 0`, zero initial
/// data, over the window of `f`. Deterministic and bit-exact for fixed inputs.
pub fn solve_wave(q: &Potential, f: &TimeSignal, grid: &SimGrid) -> Result<WaveField> {
    require_consistent(q, f, grid)?;
    let n_steps = f.len();
    let n_x = grid.n_x;
    let h2 = grid.h * grid.h;
    let qv: Vec<f64> = q.values.iter().copied().collect();

    let mut data = DMatrix::zeros(n_steps + 1, n_x + 1);
    // zero initial data: u(., t_0) = 0 and u_t(., t_0) = 0 give u(., t_1) = 0
    // away from the controlled end (u_tt(., 0) = -q u = 0 as well)
    data[(0, 0)] = f.values[0];
    if n_steps >= 1 {
        data[(1, 0)] = f.values[1];
    }
    let mut prev: Vec<f64> = data.row(0).iter().copied().collect();
    let mut cur: Vec<f64> = data.row(1).iter().copied().collect();
    let mut next = vec![0.0; n_x + 1];
    for k in 1..n_steps {
        leapfrog_step(&prev, &cur, &qv, h2, &mut next);
        next[0] = f.values[k + 1];
        check_finite(k + 1, &next)?;
        for (i, v) in next.iter().enumerate() {
            data[(k + 1, i)] = *v;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(WaveField { grid: grid.clone(), window: f.window, data })
}

/// Outward normal derivative at the controlled end, via the second-order
/// one-sided stencil: `d_nu u(0, t) = -u_x(0, t) = (3u_0 - 4u_1 + u_2)/(2h)`.
pub fn neumann_trace(u: &WaveField) -> Result<TimeSignal> {
    if u.grid.n_x < 3 {
        return Err(Error::InvalidGrid("neumann trace needs at least 3 spatial nodes".into()));
    }
    let h = u.grid.h;
    let n = u.data.nrows();
    let values = DVector::from_fn(n, |k, _| {
        (3.0 * u.data[(k, 0)] - 4.0 * u.data[(k, 1)] + u.data[(k, 2)]) / (2.0 * h)
    });
    Ok(TimeSignal { window: u.window, dt: u.grid.dt(), values })
}

/// Rolling-buffer solve that records only the boundary trace.
fn solve_trace_rolling(qv: &[f64], f: &[f64], grid: &SimGrid) -> Result<Vec<f64>> {
    let n_steps = f.len() - 1;
    let n_x = grid.n_x;
    let h = grid.h;
    let h2 = h * h;
    let trace_at = |row: &[f64]| (3.0 * row[0] - 4.0 * row[1] + row[2]) / (2.0 * h);

    let mut prev = vec![0.0; n_x + 1];
    let mut cur = vec![0.0; n_x + 1];
    let mut next = vec![0.0; n_x + 1];
    prev[0] = f[0];
    cur[0] = f[1];
    let mut trace = Vec::with_capacity(n_steps + 1);
    trace.push(trace_at(&prev));
    trace.push(trace_at(&cur));
    for k in 1..n_steps {
        leapfrog_step(&prev, &cur, qv, h2, &mut next);
        next[0] = f[k + 1];
        check_finite(k + 1, &next)?;
        trace.push(trace_at(&next));
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(trace)
}

/// Rolling-buffer solve that returns the final-time snapshot.
fn solve_final_rolling(qv: &[f64], f: &[f64], grid: &SimGrid) -> Result<Vec<f64>> {
    let n_steps = f.len() - 1;
    let n_x = grid.n_x;
    let h2 = grid.h * grid.h;
    let mut prev = vec![0.0; n_x + 1];
    let mut cur = vec![0.0; n_x + 1];
    let mut next = vec![0.0; n_x + 1];
    prev[0] = f[0];
    cur[0] = f[1];
    for k in 1..n_steps {
        leapfrog_step(&prev, &cur, qv, h2, &mut next);
        next[0] = f[k + 1];
        check_finite(k + 1, &next)?;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

fn hat_control(n_nodes: usize, j: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_nodes];
    f[j] = 1.0;
    f
}

/// Assembles the response operator on the doubled window `[0, 2T]`.
///
/// Column `j` is the Neumann trace of the wave driven by the discrete hat
/// control at `t_j`, `j = 1..2 n_t` (hats vanish at `t = 0`). Columns are
/// computed independently, so the result does not depend on the parallel
/// schedule.
pub fn assemble_response(q: &Potential, grid: &SimGrid) -> Result<LinOp> {
    grid.require_reflection_free()?;
    let n2 = grid.n_t2();
    let qv: Vec<f64> = q.values.iter().copied().collect();
    let cols: Vec<Result<Vec<f64>>> = (1..=n2)
        .into_par_iter()
        .map(|j| solve_trace_rolling(&qv, &hat_control(n2 + 1, j), grid))
        .collect();
    let mut mat = DMatrix::zeros(n2, n2);
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        for k in 1..=n2 {
            mat[(k - 1, j)] = col[k];
        }
    }
    let space = SpaceDesc::time_window(2.0 * grid.horizon, n2, grid.dt());
    LinOp::new(mat, space, space)
}

/// Assembles the control operator `f -> u^f(., T)` on `[0, T]`.
///
/// ORACLE: uses knowledge of the potential. It is never fed into the
/// reconstruction path, only into validation. The codomain is the wave-filled
/// sub-grid `x_0..x_{n_t - 1}`.
pub fn assemble_control_operator(q: &Potential, grid: &SimGrid) -> Result<LinOp> {
    let n = grid.n_t;
    let qv: Vec<f64> = q.values.iter().copied().collect();
    let cols: Vec<Result<Vec<f64>>> = (1..=n)
        .into_par_iter()
        .map(|j| solve_final_rolling(&qv, &hat_control(n + 1, j), grid))
        .collect();
    let mut mat = DMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        for i in 0..n {
            mat[(i, j)] = col[i];
        }
    }
    let dom = SpaceDesc::time_window(grid.horizon, n, grid.dt());
    let cod = SpaceDesc::space_interval(0.0, n, grid.h);
    LinOp::new(mat, dom, cod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> SimGrid {
        SimGrid::new(1.0, 0.25, 128).unwrap()
    }

    fn rel_l2(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn free_wave_is_exact_transport() {
        // q = 0: u(x, T) = f(T - x) to round-off under dt = h
        let g = grid();
        let t_end = g.horizon;
        let f = TimeSignal::from_fn(&g, Window::Single, |t| {
            (std::f64::consts::PI * t / t_end).sin().powi(2)
        });
        let u = solve_wave(&Potential::zero(&g), &f, &g).unwrap();
        let last = u.final_row();
        let mut exact = DVector::zeros(g.n_x + 1);
        for i in 0..=g.n_x {
            let s = t_end - g.x(i);
            exact[i] = if s > 0.0 { (std::f64::consts::PI * s / t_end).sin().powi(2) } else { 0.0 };
        }
        assert!(rel_l2(&last, &exact) <= 1e-12);
    }

    #[test]
    fn zero_control_gives_zero_wave() {
        let g = grid();
        let q = Potential::gaussian_bump(&g, 0.4, 0.2, -1.5, 2.0).unwrap();
        let f = TimeSignal::zero(&g, Window::Doubled);
        let u = solve_wave(&q, &f, &g).unwrap();
        assert_eq!(u.data.amax(), 0.0);
        let tr = neumann_trace(&u).unwrap();
        assert_eq!(tr.values.amax(), 0.0);
    }

    #[test]
    fn causality_cone_is_exact() {
        let g = grid();
        let q = Potential::constant(&g, 1.0).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Single, |t| t * t);
        let u = solve_wave(&q, &f, &g).unwrap();
        for k in 0..=g.n_t {
            for i in 0..=g.n_x {
                if (k as f64) < (i as f64) {
                    assert_eq!(u.u(k, i), 0.0, "cone violated at k={k}, i={i}");
                }
            }
        }
    }

    #[test]
    fn linearity_to_round_off() {
        let g = grid();
        let q = Potential::gaussian_bump(&g, 0.3, 0.15, 1.0, 0.5).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Single, |t| (7.0 * t).sin() * t);
        let gsig = TimeSignal::from_fn(&g, Window::Single, |t| t * t * (1.0 - t));
        let combo = TimeSignal {
            window: Window::Single,
            dt: f.dt,
            values: 2.0 * &f.values - 3.0 * &gsig.values,
        };
        let u_combo = solve_wave(&q, &combo, &g).unwrap();
        let expect = 2.0 * solve_wave(&q, &f, &g).unwrap().data
            - 3.0 * solve_wave(&q, &gsig, &g).unwrap().data;
        let diff = (&u_combo.data - &expect).amax();
        assert!(diff <= 1e-12 * expect.amax().max(1.0));
    }

    #[test]
    fn trace_approximates_control_derivative_at_second_order() {
        // q = 0: trace = f'(t) + O(h^2); check the size and the order
        let err_at = |n_x: usize| {
            let g = SimGrid::new(1.0, 0.25, n_x).unwrap();
            let w = std::f64::consts::PI / g.horizon;
            let f = TimeSignal::from_fn(&g, Window::Single, |t| (w * t).sin().powi(2));
            let u = solve_wave(&Potential::zero(&g), &f, &g).unwrap();
            let tr = neumann_trace(&u).unwrap();
            let fprime = DVector::from_fn(g.n_t + 1, |k, _| w * (2.0 * w * g.t(k)).sin());
            rel_l2(&tr.values, &fprime)
        };
        let coarse = err_at(128);
        let fine = err_at(256);
        assert!(coarse <= 5e-2, "coarse error {coarse}");
        let order = (coarse / fine).log2();
        assert!((1.7..=2.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn response_of_free_system_differentiates() {
        // q = 0: the response matrix applied to t^2 samples returns ~2t
        let g = SimGrid::new(1.0, 0.2, 160).unwrap();
        let r = assemble_response(&Potential::zero(&g), &g).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Doubled, |t| t * t);
        let out = r.apply(&f.coords()).unwrap();
        let expect = DVector::from_fn(g.n_t2(), |k, _| 2.0 * g.t(k + 1));
        assert!(rel_l2(&out, &expect) <= 1e-2);
    }

    #[test]
    fn response_assembly_matches_direct_application() {
        let g = SimGrid::new(1.0, 0.2, 160).unwrap();
        let q = Potential::gaussian_bump(&g, 0.4, 1.0 / 20f64.sqrt(), -1.5, 2.0).unwrap();
        let r = assemble_response(&q, &g).unwrap();
        let horizon2 = 2.0 * g.horizon;
        let f = TimeSignal::from_fn(&g, Window::Doubled, |t| {
            (std::f64::consts::PI * t / horizon2).sin().powi(2)
        });
        let via_matrix = r.apply(&f.coords()).unwrap();
        let direct = neumann_trace(&solve_wave(&q, &f, &g).unwrap()).unwrap();
        assert!(rel_l2(&via_matrix, &direct.coords()) <= 1e-12);
    }

    #[test]
    fn free_control_operator_is_time_reversal() {
        let g = SimGrid::new(1.0, 0.2, 160).unwrap();
        let w = assemble_control_operator(&Potential::zero(&g), &g).unwrap();
        let n = g.n_t;
        // (W f)(x_i) = f(T - x_i) = f(t_{n-i}): the anti-diagonal permutation
        for i in 0..n {
            for j in 1..=n {
                let expect = if j == n - i { 1.0 } else { 0.0 };
                assert_relative_eq!(w.mat[(i, j - 1)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn control_columns_respect_finite_speed() {
        let g = SimGrid::new(1.0, 0.2, 160).unwrap();
        let q = Potential::constant(&g, 2.0).unwrap();
        let w = assemble_control_operator(&q, &g).unwrap();
        let n = g.n_t;
        // hat at t_j reaches depth x < T - t_{j-1}
        for j in 1..=n {
            for i in 0..n {
                if g.x(i) > g.horizon - g.t(j - 1) {
                    assert_eq!(w.mat[(i, j - 1)], 0.0);
                }
            }
        }
    }

    #[test]
    fn energy_stays_bounded() {
        // discrete energy at t = T stays below a fixed multiple of the
        // discrete H^1 norm of the control, for q >= 0 supported early
        let g = grid();
        let q = Potential::constant(&g, 3.0).unwrap();
        let half = g.horizon / 2.0;
        let f = TimeSignal::from_fn(&g, Window::Single, |t| {
            if t < half { (std::f64::consts::PI * t / half).sin().powi(2) } else { 0.0 }
        });
        let u = solve_wave(&q, &f, &g).unwrap();
        let n = g.n_t;
        let mut energy = 0.0;
        for i in 0..g.n_x {
            let ut = (u.u(n, i) - u.u(n - 1, i)) / g.dt();
            let ux = (u.u(n, i + 1) - u.u(n, i)) / g.h;
            energy += 0.5 * g.h * (ut * ut + ux * ux + q.values[i] * u.u(n, i) * u.u(n, i));
        }
        let mut h1 = 0.0;
        for k in 0..n {
            let df = (f.values[k + 1] - f.values[k]) / g.dt();
            h1 += g.dt() * (f.values[k] * f.values[k] + df * df);
        }
        assert!(energy <= 10.0 * h1, "energy {energy} vs control H1 {h1}");
    }

    #[test]
    fn instability_is_reported_with_step() {
        let g = grid();
        // a potential this large violates any reasonable stability margin
        let q = Potential::constant(&g, -1e18).unwrap();
        let f = TimeSignal::from_fn(&g, Window::Single, |t| t);
        match solve_wave(&q, &f, &g) {
            Err(Error::Instability { step }) => assert!(step > 0),
            other => panic!("expected instability, got {other:?}"),
        }
    }
}
