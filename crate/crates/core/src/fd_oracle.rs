//! Crank–Nicolson reference solver across the plate thickness.
//!
//! Solves `u_t = u_zz` on `[0, h]` with
//! `u_z(h) = f1(t) + a(T0 − u(h))` and `u_z(0) = −f0(t) − a(T1 − u(0))`,
//! using ghost nodes for the flux conditions. The first Crank–Nicolson step is
//! replaced by two implicit Euler half steps, which damps the stiff boundary
//! modes excited when the flux switches on at `t = 0`.

use crate::error::{Error, Result};
use crate::spectrum::RobinParams;

/// Uniform grid of `n` nodes over `[0, h]` and a fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub dt_step: f64,
}

impl Grid1D {
    pub fn new(n: usize, dt_step: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 nodes, got {n}")));
        }
        if !(dt_step > 0.0) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt_step}")));
        }
        Ok(Self { n, dt_step })
    }

    /// Twice the resolution in space and time.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, dt_step: 0.5 * self.dt_step }
    }

    pub fn spacing(&self, h: f64) -> f64 {
        h / (self.n - 1) as f64
    }

    pub fn nodes(&self, h: f64) -> Vec<f64> {
        (0..self.n).map(|i| h * i as f64 / (self.n - 1) as f64).collect()
    }
}

/// Tridiagonal operator `A` of the semi-discrete system `u' = A u + b(t)`.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    fn new(n: usize, dz: f64, a: f64) -> Self {
        let inv = 1.0 / (dz * dz);
        let mut lower = vec![inv; n];
        let mut diag = vec![-2.0 * inv; n];
        let mut upper = vec![inv; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        diag[0] = -(2.0 + 2.0 * dz * a) * inv;
        upper[0] = 2.0 * inv;
        diag[n - 1] = diag[0];
        lower[n - 1] = 2.0 * inv;
        Self { lower, diag, upper }
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * u[i];
                if i > 0 {
                    v += self.lower[i] * u[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * u[i + 1];
                }
                v
            })
            .collect()
    }

    /// Solves `(I − c A) x = rhs` with the Thomas algorithm.
    fn solve_shifted(&self, c: f64, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let b0 = 1.0 - c * self.diag[0];
        cp[0] = -c * self.upper[0] / b0;
        dp[0] = rhs[0] / b0;
        for i in 1..n {
            let ai = -c * self.lower[i];
            let bi = 1.0 - c * self.diag[i];
            let denom = bi - ai * cp[i - 1];
            cp[i] = if i + 1 < n { -c * self.upper[i] / denom } else { 0.0 };
            dp[i] = (rhs[i] - ai * dp[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }
}

/// Crank–Nicolson solution at `t_end` from the initial profile `g` on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn cn_transverse_solve(
    p: &RobinParams,
    g: &[f64],
    f0: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    grid: &Grid1D,
    t_end: f64,
) -> Result<Vec<f64>> {
    if g.len() != grid.n {
        return Err(Error::GridMismatch(format!("initial profile has {} values for {} nodes", g.len(), grid.n)));
    }
    let steps_f = t_end / grid.dt_step;
    let steps = steps_f.round();
    if !(t_end >= 0.0) || (steps_f - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::Domain(format!("t_end = {t_end} is not a multiple of dt = {}", grid.dt_step)));
    }
    let steps = steps as usize;
    let n = grid.n;
    let dz = grid.spacing(p.h);
    let op = Operator::new(n, dz, p.a);
    let forcing = |t: f64| -> (f64, f64) { (2.0 * (f0(t) + p.a * t1) / dz, 2.0 * (f1(t) + p.a * t0) / dz) };

    // θ-step from `t` to `t + dt`.
    let step = |u: &[f64], t: f64, dt: f64, theta: f64| -> Vec<f64> {
        let au = op.apply(u);
        let (b0_old, bn_old) = forcing(t);
        let (b0_new, bn_new) = forcing(t + dt);
        let mut rhs: Vec<f64> = u.iter().zip(&au).map(|(v, w)| v + (1.0 - theta) * dt * w).collect();
        rhs[0] += dt * (theta * b0_new + (1.0 - theta) * b0_old);
        rhs[n - 1] += dt * (theta * bn_new + (1.0 - theta) * bn_old);
        op.solve_shifted(theta * dt, &rhs)
    };

    let mut u = g.to_vec();
    let dt = grid.dt_step;
    for k in 0..steps {
        let t = k as f64 * dt;
        u = if k == 0 {
            let half = step(&u, t, 0.5 * dt, 1.0);
            step(&half, t + 0.5 * dt, 0.5 * dt, 1.0)
        } else {
            step(&u, t, dt, 0.5)
        };
    }
    Ok(u)
}

/// Second-order Richardson combination on the coarse nodes, and the a
/// posteriori estimate `max |fine − coarse| / 3` of the fine solution's error.
pub fn richardson_extrapolate(coarse: &[f64], fine: &[f64]) -> Result<(Vec<f64>, f64)> {
    if coarse.len() < 2 || fine.len() != 2 * coarse.len() - 1 {
        return Err(Error::GridMismatch(format!(
            "fine profile with {} nodes is not a 2x refinement of {} nodes",
            fine.len(),
            coarse.len()
        )));
    }
    let mut estimate = 0.0f64;
    let combined = coarse
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let f = fine[2 * i];
            estimate = estimate.max((f - c).abs() / 3.0);
            f + (f - c) / 3.0
        })
        .collect();
    Ok((combined, estimate))
}

/// Richardson-corrected oracle result on the coarse nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub error_estimate: f64,
}

/// Runs the solver on `grid` and on its 2× refinement and combines the two.
#[allow(clippy::too_many_arguments)]
pub fn cn_richardson(
    p: &RobinParams,
    g: impl Fn(f64) -> f64,
    f0: impl Fn(f64) -> f64 + Copy,
    f1: impl Fn(f64) -> f64 + Copy,
    t0: f64,
    t1: f64,
    grid: &Grid1D,
    t_end: f64,
) -> Result<OracleProfile> {
    let fine_grid = grid.refined();
    let coarse_init: Vec<f64> = grid.nodes(p.h).into_iter().map(&g).collect();
    let fine_init: Vec<f64> = fine_grid.nodes(p.h).into_iter().map(&g).collect();
    let coarse = cn_transverse_solve(p, &coarse_init, f0, f1, t0, t1, grid, t_end)?;
    let fine = cn_transverse_solve(p, &fine_init, f0, f1, t0, t1, &fine_grid, t_end)?;
    let (values, error_estimate) = richardson_extrapolate(&coarse, &fine)?;
    Ok(OracleProfile { nodes: grid.nodes(p.h), values, error_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plate::static_state;

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(2, 0.1).is_err());
        assert!(Grid1D::new(5, 0.0).is_err());
        let g = Grid1D::new(5, 0.1).unwrap().refined();
        assert_eq!((g.n, g.dt_step), (9, 0.05));
    }

    #[test]
    fn static_profile_is_preserved() {
        let p = RobinParams::new(1.0, 0.1).unwrap();
        let s = static_state(1.0, 0.1, 2.0, -1.0).unwrap();
        let grid = Grid1D::new(41, 1e-3).unwrap();
        let g: Vec<f64> = grid.nodes(0.1).iter().map(|&z| s.eval(z)).collect();
        let u = cn_transverse_solve(&p, &g, |_| 0.0, |_| 0.0, 2.0, -1.0, &grid, 0.5).unwrap();
        for (a, b) in u.iter().zip(&g) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_flux_reaches_shifted_steady_state() {
        let p = RobinParams::new(1.0, 0.1).unwrap();
        let grid = Grid1D::new(21, 1e-2).unwrap();
        let g = vec![0.0; 21];
        let u = cn_transverse_solve(&p, &g, |_| 0.7, |_| 0.7, 0.0, 0.0, &grid, 20.0).unwrap();
        for v in u {
            assert!((v - 0.7).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn rejects_misaligned_end_time() {
        let p = RobinParams::new(1.0, 0.1).unwrap();
        let grid = Grid1D::new(5, 0.3).unwrap();
        let g = vec![0.0; 5];
        assert!(matches!(cn_transverse_solve(&p, &g, |_| 0.0, |_| 0.0, 0.0, 0.0, &grid, 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            cn_transverse_solve(&p, &[0.0; 4], |_| 0.0, |_| 0.0, 0.0, 0.0, &grid, 0.9),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn richardson_identities() {
        let coarse = [1.0, 2.0, 4.0];
        let fine = [1.0, 1.5, 2.0, 3.0, 4.0];
        let (v, e) = richardson_extrapolate(&coarse, &fine).unwrap();
        assert_eq!(v, coarse.to_vec());
        assert_eq!(e, 0.0);
        assert!(matches!(richardson_extrapolate(&coarse, &[1.0, 2.0]), Err(Error::GridMismatch(_))));
        let (_, e) = richardson_extrapolate(&[0.0, 1.0], &[0.5, -2.0, 1.5]).unwrap();
        assert!(e >= 0.0);
    }

    /// `u = e^{−t} cos z` solves the heat equation; its fluxes drive the solver.
    #[test]
    fn manufactured_solution_error_estimate() {
        let (a, h) = (1.0, 1.0);
        let p = RobinParams::new(a, h).unwrap();
        let exact = |z: f64, t: f64| (-t).exp() * z.cos();
        let f1 = move |t: f64| (-t).exp() * (a * h.cos() - h.sin());
        let f0 = move |t: f64| a * (-t).exp();
        let grid = Grid1D::new(21, 0.01).unwrap();
        let t_end = 0.5;
        let fine_grid = grid.refined();
        let init: Vec<f64> = fine_grid.nodes(h).iter().map(|&z| exact(z, 0.0)).collect();
        let fine = cn_transverse_solve(&p, &init, f0, f1, 0.0, 0.0, &fine_grid, t_end).unwrap();
        let true_err = fine_grid
            .nodes(h)
            .iter()
            .zip(&fine)
            .step_by(2)
            .fold(0.0f64, |m, (&z, &u)| m.max((u - exact(z, t_end)).abs()));
        let oracle = cn_richardson(&p, |z| exact(z, 0.0), f0, f1, 0.0, 0.0, &grid, t_end).unwrap();
        assert!(
            oracle.error_estimate <= 3.0 * true_err && true_err <= 3.0 * oracle.error_estimate,
            "estimate {} vs true {}",
            oracle.error_estimate,
            true_err
        );
        let extrap_err =
            oracle.nodes.iter().zip(&oracle.values).fold(0.0f64, |m, (&z, &u)| m.max((u - exact(z, t_end)).abs()));
        assert!(extrap_err < true_err);
    }
}
