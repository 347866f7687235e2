//! Neumann heat semigroup on the rectangle `[0, L1] × [0, L2]`.
//!
//! The eigenfunctions are `N cos(k1 π x1 / L1) cos(k2 π x2 / L2)` with
//! eigenvalue `π²(k1²/L1² + k2²/L2²)`; the planar heat kernel is
//! `W(x, y, dt) = Σ_k e^{−λ_k dt} φ_k(x) φ_k(y)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Default Gauss–Legendre nodes per panel and axis.
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Maximum cosine index per quadrature panel.
const MODES_PER_PANEL: usize = 8;
/// Tail level at which the truncated kernel is trusted pointwise.
pub const KERNEL_TAIL_TOL: f64 = 1e-8;
/// Relative coefficient drift that triggers a quadrature warning.
const QUAD_DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarMode {
    pub k1: usize,
    pub k2: usize,
    pub lambda: f64,
}

/// The `K` lowest Neumann modes of a rectangle, ordered by eigenvalue and then
/// by `(k1, k2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarModeSet {
    l1: f64,
    l2: f64,
    modes: Vec<PlanarMode>,
    /// Smallest eigenvalue among the modes left out.
    next_lambda: f64,
    k1_max: usize,
    k2_max: usize,
}

fn neumann_lambda(k1: usize, k2: usize, l1: f64, l2: f64) -> f64 {
    let (q1, q2) = (k1 as f64 / l1, k2 as f64 / l2);
    PI * PI * (q1 * q1 + q2 * q2)
}

fn axis_norm(k: usize, l: f64) -> f64 {
    if k == 0 {
        (1.0 / l).sqrt()
    } else {
        (2.0 / l).sqrt()
    }
}

/// Normalized 1D cosine `ψ_k(x)` on `[0, l]`.
fn axis_mode(k: usize, l: f64, x: f64) -> f64 {
    axis_norm(k, l) * (k as f64 * PI * x / l).cos()
}

fn modes_below(limit: f64, l1: f64, l2: f64) -> Vec<PlanarMode> {
    let k1_top = (l1 * limit.sqrt() / PI).floor() as usize;
    let mut out = Vec::new();
    for k1 in 0..=k1_top {
        let rest = limit - (PI * k1 as f64 / l1).powi(2);
        if rest < 0.0 {
            break;
        }
        let k2_top = (l2 * rest.sqrt() / PI).floor() as usize;
        for k2 in 0..=k2_top {
            out.push(PlanarMode { k1, k2, lambda: neumann_lambda(k1, k2, l1, l2) });
        }
    }
    out
}

pub fn planar_modes(l1: f64, l2: f64, count: usize) -> Result<PlanarModeSet> {
    if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(Error::Domain(format!("side lengths must be > 0, got {l1} x {l2}")));
    }
    if count == 0 {
        return Err(Error::Domain("planar mode count must be at least 1".into()));
    }
    let mut limit = PI * PI * (1.0 / (l1 * l1)).max(1.0 / (l2 * l2));
    let mut modes = modes_below(limit, l1, l2);
    while modes.len() <= count {
        limit *= 2.0;
        modes = modes_below(limit, l1, l2);
    }
    modes.sort_by(|p, q| p.lambda.total_cmp(&q.lambda).then((p.k1, p.k2).cmp(&(q.k1, q.k2))));
    let next_lambda = modes[count].lambda;
    modes.truncate(count);
    let k1_max = modes.iter().map(|m| m.k1).max().unwrap_or(0);
    let k2_max = modes.iter().map(|m| m.k2).max().unwrap_or(0);
    Ok(PlanarModeSet { l1, l2, modes, next_lambda, k1_max, k2_max })
}

/// One axis of a composite Gauss–Legendre rule.
#[derive(Debug, Clone)]
struct AxisRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AxisRule {
    fn new(length: f64, panels: usize, order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(2)).expect("nonzero order");
        let rule = GaussLegendre::new(order);
        let width = length / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order.get());
        let mut weights = Vec::with_capacity(panels * order.get());
        for p in 0..panels {
            let left = p as f64 * width;
            for &(x, w) in rule.as_node_weight_pairs() {
                nodes.push(left + 0.5 * width * (x + 1.0));
                weights.push(0.5 * width * w);
            }
        }
        Self { nodes, weights }
    }
}

/// Spatial heat source on one face of the plate.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceField {
    Uniform {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        sigma: f64,
    },
    /// Bilinear interpolant of samples on an `n1 × n2` uniform grid spanning
    /// the rectangle; `values[i * n2 + j]` sits at `(i·L1/(n1−1), j·L2/(n2−1))`.
    Grid {
        l1: f64,
        l2: f64,
        n1: usize,
        n2: usize,
        values: Vec<f64>,
    },
}

impl FaceField {
    pub fn zero() -> Self {
        FaceField::Uniform { value: 0.0 }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        match self {
            FaceField::Uniform { value } => *value,
            FaceField::Gaussian { amplitude, center, sigma } => {
                let (d1, d2) = (x1 - center[0], x2 - center[1]);
                amplitude * (-(d1 * d1 + d2 * d2) / (2.0 * sigma * sigma)).exp()
            }
            FaceField::Grid { l1, l2, n1, n2, values } => {
                let locate = |x: f64, l: f64, n: usize| {
                    let s = (x / l).clamp(0.0, 1.0) * (n - 1) as f64;
                    let i = (s.floor() as usize).min(n - 2);
                    (i, s - i as f64)
                };
                let (i, u) = locate(x1, *l1, *n1);
                let (j, v) = locate(x2, *l2, *n2);
                let at = |i: usize, j: usize| values[i * n2 + j];
                (1.0 - u) * ((1.0 - v) * at(i, j) + v * at(i, j + 1))
                    + u * ((1.0 - v) * at(i + 1, j) + v * at(i + 1, j + 1))
            }
        }
    }

    /// Supremum of `|f|` over the rectangle. Exact for every variant: the
    /// Gaussian peaks at its center and the bilinear interpolant at a node.
    pub fn sup_abs(&self) -> f64 {
        match self {
            FaceField::Uniform { value } => value.abs(),
            FaceField::Gaussian { amplitude, .. } => amplitude.abs(),
            FaceField::Grid { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Splits the field into `scale × unit`, so fields differing only by
    /// amplitude share one projection.
    pub fn split_amplitude(&self) -> (f64, FaceField) {
        match self {
            FaceField::Uniform { value } => (*value, FaceField::Uniform { value: 1.0 }),
            FaceField::Gaussian { amplitude, center, sigma } => {
                (*amplitude, FaceField::Gaussian { amplitude: 1.0, center: *center, sigma: *sigma })
            }
            FaceField::Grid { .. } => (1.0, self.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FaceField::Uniform { value } if value.is_finite() => Ok(()),
            FaceField::Gaussian { amplitude, center, sigma }
                if amplitude.is_finite() && center.iter().all(|c| c.is_finite()) && *sigma > 0.0 =>
            {
                Ok(())
            }
            FaceField::Grid { l1, l2, n1, n2, values }
                if *n1 >= 2 && *n2 >= 2 && *l1 > 0.0 && *l2 > 0.0 && values.len() == n1 * n2 =>
            {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Domain("grid face field holds non-finite samples".into()))
                }
            }
            other => Err(Error::Domain(format!("invalid face field {other:?}"))),
        }
    }

    fn grid_cells(&self) -> Option<(usize, usize)> {
        match self {
            FaceField::Grid { n1, n2, .. } => Some((n1 - 1, n2 - 1)),
            _ => None,
        }
    }
}

/// Reported when raising the quadrature order moves a coefficient noticeably.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureWarning {
    pub max_relative_shift: f64,
    pub quad_order: usize,
}

impl std::fmt::Display for QuadratureWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "projection coefficients moved by {:.3e} (relative) when refining quadrature order {}",
            self.max_relative_shift, self.quad_order
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    pub warning: Option<QuadratureWarning>,
}

impl PlanarModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[PlanarMode] {
        &self.modes
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.l1, self.l2)
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.lambda)
    }

    /// Smallest eigenvalue not in the set.
    pub fn next_lambda(&self) -> f64 {
        self.next_lambda
    }

    pub fn eval(&self, index: usize, x: [f64; 2]) -> f64 {
        let m = self.modes[index];
        axis_mode(m.k1, self.l1, x[0]) * axis_mode(m.k2, self.l2, x[1])
    }

    /// All eigenfunctions at `x`, in mode order.
    pub fn eval_all(&self, x: [f64; 2]) -> Vec<f64> {
        let c1: Vec<f64> = (0..=self.k1_max).map(|k| axis_mode(k, self.l1, x[0])).collect();
        let c2: Vec<f64> = (0..=self.k2_max).map(|k| axis_mode(k, self.l2, x[1])).collect();
        self.modes.iter().map(|m| c1[m.k1] * c2[m.k2]).collect()
    }

    fn panels(&self, k_max: usize, cells: Option<usize>) -> usize {
        let base = k_max / MODES_PER_PANEL + 1;
        match cells {
            Some(c) => c * base.div_ceil(c),
            None => base,
        }
    }

    fn project_with(&self, f: &FaceField, order: usize) -> Vec<f64> {
        let cells = f.grid_cells();
        let r1 = AxisRule::new(self.l1, self.panels(self.k1_max, cells.map(|c| c.0)), order);
        let r2 = AxisRule::new(self.l2, self.panels(self.k2_max, cells.map(|c| c.1)), order);
        let psi2: Vec<Vec<f64>> =
            (0..=self.k2_max).map(|k| r2.nodes.iter().map(|&y| axis_mode(k, self.l2, y)).collect()).collect();
        // partial[i][k2] = Σ_j w_j f(x_i, y_j) ψ_k2(y_j)
        let partial: Vec<Vec<f64>> = r1
            .nodes
            .iter()
            .map(|&x| {
                let fw: Vec<f64> = r2.nodes.iter().zip(&r2.weights).map(|(&y, &w)| w * f.value(x, y)).collect();
                psi2.iter().map(|row| row.iter().zip(&fw).map(|(p, v)| p * v).sum()).collect()
            })
            .collect();
        let psi1: Vec<Vec<f64>> =
            (0..=self.k1_max).map(|k| r1.nodes.iter().map(|&x| axis_mode(k, self.l1, x)).collect()).collect();
        self.modes
            .iter()
            .map(|m| psi1[m.k1].iter().zip(&r1.weights).zip(&partial).map(|((p, w), row)| p * w * row[m.k2]).sum())
            .collect()
    }

    /// Coefficients `c_k = ∫ f φ_k` by composite tensor Gauss–Legendre
    /// quadrature with `quad_order` nodes per panel. The projection is repeated
    /// at 1.5× the order; a warning is attached if any coefficient moves by
    /// more than `1e-8` relative to the largest one.
    pub fn project_source(&self, f: &FaceField, quad_order: usize) -> Result<Projection> {
        if quad_order < 2 {
            return Err(Error::Domain(format!("quadrature order must be >= 2, got {quad_order}")));
        }
        f.validate()?;
        let coefficients = self.project_with(f, quad_order);
        let refined_order = quad_order + quad_order.div_ceil(2);
        let refined = self.project_with(f, refined_order);
        let scale = coefficients.iter().fold(f64::MIN_POSITIVE, |m, c| m.max(c.abs()));
        let shift = coefficients.iter().zip(&refined).fold(0.0f64, |m, (c, r)| m.max((c - r).abs() / scale));
        let warning = (shift > QUAD_DRIFT_TOL).then_some(QuadratureWarning { max_relative_shift: shift, quad_order });
        Ok(Projection { coefficients, warning })
    }

    /// `max |⟨φ_i, φ_j⟩ − δ_ij|` under the projection quadrature of a smooth field.
    pub fn gram_deviation(&self, quad_order: usize) -> f64 {
        let axis_gram = |l: f64, k_max: usize| -> Vec<Vec<f64>> {
            let rule = AxisRule::new(l, self.panels(k_max, None), quad_order);
            let psi: Vec<Vec<f64>> =
                (0..=k_max).map(|k| rule.nodes.iter().map(|&x| axis_mode(k, l, x)).collect()).collect();
            psi.iter()
                .map(|a| {
                    psi.iter().map(|b| a.iter().zip(b).zip(&rule.weights).map(|((p, q), w)| p * q * w).sum()).collect()
                })
                .collect()
        };
        let g1 = axis_gram(self.l1, self.k1_max);
        let g2 = axis_gram(self.l2, self.k2_max);
        let mut worst = 0.0f64;
        for (i, p) in self.modes.iter().enumerate() {
            for (j, q) in self.modes.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g1[p.k1][q.k1] * g2[p.k2][q.k2] - expected).abs());
            }
        }
        worst
    }

    /// `Σ_k e^{−λ_k dt} c_k φ_k(x)`, the kernel applied to the projected field.
    pub fn semigroup_apply(&self, coefficients: &[f64], dt: f64, x: [f64; 2]) -> f64 {
        self.eval_all(x)
            .iter()
            .zip(coefficients)
            .zip(&self.modes)
            .map(|((phi, c), m)| (-m.lambda * dt).exp() * c * phi)
            .sum()
    }

    /// Coefficients after evolving for `dt`.
    pub fn evolve(&self, coefficients: &[f64], dt: f64) -> Vec<f64> {
        coefficients.iter().zip(&self.modes).map(|(c, m)| (-m.lambda * dt).exp() * c).collect()
    }

    /// Bound on `|W − W_K|` at elapsed time `dt`: every omitted mode has
    /// `λ ≥ λ_next`, so the remainder is at most
    /// `(4/|P|) e^{−λ_next dt/2} S1(dt/2) S2(dt/2)` with
    /// `S(τ) = Σ_k e^{−(kπ/L)² τ} ≤ 1 + L/(2√(πτ))`.
    pub fn kernel_tail_bound(&self, dt: f64) -> f64 {
        if !(dt > 0.0) {
            return f64::INFINITY;
        }
        let tau = 0.5 * dt;
        let s = |l: f64| 1.0 + l / (2.0 * (PI * tau).sqrt());
        4.0 / self.area() * (-self.next_lambda * tau).exp() * s(self.l1) * s(self.l2)
    }

    /// Smallest `dt` at which [`Self::kernel_tail_bound`] falls to [`KERNEL_TAIL_TOL`].
    pub fn dt_min(&self) -> f64 {
        let (mut lo, mut hi) = (1e-300f64, 1.0f64);
        while self.kernel_tail_bound(hi) > KERNEL_TAIL_TOL {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.kernel_tail_bound(mid) > KERNEL_TAIL_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Truncated kernel `Σ_k e^{−λ_k dt} φ_k(x) φ_k(y)`.
    pub fn w_eval(&self, x: [f64; 2], y: [f64; 2], dt: f64) -> Result<f64> {
        if !(dt > 0.0) || self.kernel_tail_bound(dt) > KERNEL_TAIL_TOL {
            return Err(Error::Truncation(format!(
                "planar kernel with {} modes is not certified at dt = {dt} (needs dt >= {:e})",
                self.len(),
                self.dt_min()
            )));
        }
        let px = self.eval_all(x);
        let py = self.eval_all(y);
        Ok(self.modes.iter().zip(px.iter().zip(&py)).map(|(m, (a, b))| (-m.lambda * dt).exp() * (a * b)).sum())
    }

    /// `max |f − Π_K f|` sampled on a tensor grid fine enough to resolve the
    /// highest retained cosine. Estimates the projection residual.
    pub fn residual_sup(&self, f: &FaceField, coefficients: &[f64]) -> f64 {
        let n1 = 4 * (self.k1_max + 1) + 1;
        let n2 = 4 * (self.k2_max + 1) + 1;
        let mut dense = vec![0.0; (self.k1_max + 1) * (self.k2_max + 1)];
        for (m, c) in self.modes.iter().zip(coefficients) {
            dense[m.k1 * (self.k2_max + 1) + m.k2] = *c;
        }
        let xs: Vec<f64> = (0..n1).map(|i| self.l1 * i as f64 / (n1 - 1) as f64).collect();
        let ys: Vec<f64> = (0..n2).map(|j| self.l2 * j as f64 / (n2 - 1) as f64).collect();
        let psi2: Vec<Vec<f64>> =
            ys.iter().map(|&y| (0..=self.k2_max).map(|k| axis_mode(k, self.l2, y)).collect()).collect();
        let mut worst = 0.0f64;
        for &x in &xs {
            let psi1: Vec<f64> = (0..=self.k1_max).map(|k| axis_mode(k, self.l1, x)).collect();
            let row: Vec<f64> = (0..=self.k2_max)
                .map(|k2| psi1.iter().enumerate().map(|(k1, p)| p * dense[k1 * (self.k2_max + 1) + k2]).sum())
                .collect();
            for (&y, p2) in ys.iter().zip(&psi2) {
                let approx: f64 = row.iter().zip(p2).map(|(r, p)| r * p).sum();
                worst = worst.max((f.value(x, y) - approx).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambdas(ms: &PlanarModeSet) -> Vec<f64> {
        ms.eigenvalues().collect()
    }

    #[test]
    fn lowest_modes() {
        let pi2 = PI * PI;
        assert_eq!(lambdas(&planar_modes(1.0, 1.0, 1).unwrap()), vec![0.0]);
        let sq = planar_modes(1.0, 1.0, 4).unwrap();
        assert_eq!(lambdas(&sq), vec![0.0, pi2, pi2, 2.0 * pi2]);
        assert_eq!((sq.modes()[1].k1, sq.modes()[1].k2), (0, 1));
        let rect = lambdas(&planar_modes(2.0, 1.0, 3).unwrap());
        assert!((rect[1] - pi2 / 4.0).abs() < 1e-14 && (rect[2] - pi2).abs() < 1e-14);
        assert!(planar_modes(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn eigenvalues_nondecreasing() {
        let ms = planar_modes(1.3, 0.7, 500).unwrap();
        assert_eq!(ms.len(), 500);
        assert!(lambdas(&ms).windows(2).all(|w| w[0] <= w[1]));
        assert!(ms.next_lambda() >= *lambdas(&ms).last().unwrap());
        assert!((ms.eval(0, [0.2, 0.3]) - 1.0 / (1.3f64 * 0.7).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_and_single_mode_projection() {
        let ms = planar_modes(1.0, 1.0, 30).unwrap();
        let c = ms.project_source(&FaceField::Uniform { value: 1.0 }, 32).unwrap();
        assert!(c.warning.is_none());
        assert!((c.coefficients[0] - 1.0).abs() < 1e-13);
        assert!(c.coefficients[1..].iter().all(|v| v.abs() < 1e-13));

        // φ_(1,0) sampled through a fine bilinear grid.
        let n = 401;
        let values: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |_| axis_mode(1, 1.0, i as f64 / (n - 1) as f64) * axis_mode(0, 1.0, 0.0)))
            .collect();
        let grid = FaceField::Grid { l1: 1.0, l2: 1.0, n1: n, n2: n, values };
        let c = ms.project_source(&grid, 4).unwrap();
        let idx = ms.modes().iter().position(|m| (m.k1, m.k2) == (1, 0)).unwrap();
        for (i, v) in c.coefficients.iter().enumerate() {
            let expected = if i == idx { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-5, "mode {i}: {v}");
        }
    }

    #[test]
    fn gaussian_projection_matches_brute_force() {
        let ms = planar_modes(1.0, 1.0, 12).unwrap();
        let spot = FaceField::Gaussian { amplitude: 1.0, center: [0.5, 0.5], sigma: 0.1 };
        let c = ms.project_source(&spot, DEFAULT_QUAD_ORDER).unwrap();
        assert!(c.warning.is_none());
        // 1000 × 1000 midpoint sum.
        let n = 1000;
        let d = 1.0 / n as f64;
        for (k, &got) in c.coefficients.iter().enumerate() {
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = [(i as f64 + 0.5) * d, (j as f64 + 0.5) * d];
                    sum += spot.value(x[0], x[1]) * ms.eval(k, x);
                }
            }
            sum *= d * d;
            assert!((got - sum).abs() < 1e-6, "mode {k}: {got} vs {sum}");
        }
    }

    #[test]
    fn projection_warning_on_unresolved_field() {
        let ms = planar_modes(1.0, 1.0, 4).unwrap();
        let spike = FaceField::Gaussian { amplitude: 1.0, center: [0.31, 0.47], sigma: 0.05 };
        let c = ms.project_source(&spike, 2).unwrap();
        assert!(c.warning.is_some());
        assert!(matches!(ms.project_source(&spike, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn mass_is_conserved() {
        let ms = planar_modes(1.0, 1.0, 60).unwrap();
        let c = ms.project_source(&FaceField::Uniform { value: 1.0 }, 32).unwrap().coefficients;
        for dt in [0.0, 0.1, 1.0, 10.0] {
            for x in [[0.0, 0.0], [0.3, 0.8], [1.0, 0.5]] {
                assert!((ms.semigroup_apply(&c, dt, x) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn single_mode_decays_analytically() {
        let ms = planar_modes(1.0, 1.0, 10).unwrap();
        let idx = ms.modes().iter().position(|m| (m.k1, m.k2) == (1, 0)).unwrap();
        let mut c = vec![0.0; ms.len()];
        c[idx] = 1.0;
        let x = [0.2, 0.7];
        let expected = (-PI * PI * 0.1).exp() * ms.eval(idx, x);
        assert!((ms.semigroup_apply(&c, 0.1, x) - expected).abs() < 1e-15);
    }

    #[test]
    fn long_time_limit_is_mean() {
        let ms = planar_modes(1.0, 1.0, 200).unwrap();
        let spot = FaceField::Gaussian { amplitude: 2.0, center: [0.3, 0.6], sigma: 0.15 };
        let c = ms.project_source(&spot, 32).unwrap().coefficients;
        let mean = c[0] / ms.area().sqrt();
        assert!((ms.semigroup_apply(&c, 50.0, [0.9, 0.1]) - mean).abs() < 1e-14);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let ms = planar_modes(1.0, 0.5, 40).unwrap();
        let r1 = AxisRule::new(1.0, 2, 32);
        let r2 = AxisRule::new(0.5, 2, 32);
        for i in 0..ms.len() {
            for j in 0..ms.len() {
                let mut g = 0.0;
                for (x, wx) in r1.nodes.iter().zip(&r1.weights) {
                    for (y, wy) in r2.nodes.iter().zip(&r2.weights) {
                        g += wx * wy * ms.eval(i, [*x, *y]) * ms.eval(j, [*x, *y]);
                    }
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-10);
            }
        }
        assert!(ms.gram_deviation(32) < 1e-10);
        assert!(planar_modes(2.0, 1.0, 1200).unwrap().gram_deviation(32) < 1e-10);
    }

    #[test]
    fn kernel_matches_image_sum() {
        let ms = planar_modes(1.0, 1.0, 50).unwrap();
        assert!(ms.dt_min() < 0.5);
        let w = ms.w_eval([0.5, 0.5], [0.5, 0.5], 0.5).unwrap();
        // Method of images, 40 digits.
        assert!((w - 1.000_000_010_701_152).abs() < 1e-8);
        assert!(matches!(ms.w_eval([0.5, 0.5], [0.5, 0.5], 1e-4), Err(Error::Truncation(_))));
    }

    #[test]
    fn kernel_integrates_to_one() {
        let ms = planar_modes(1.0, 1.0, 50).unwrap();
        let dt = ms.dt_min() * 1.01;
        let r = AxisRule::new(1.0, 4, 32);
        let x = [0.37, 0.81];
        let mut total = 0.0;
        for (y1, w1) in r.nodes.iter().zip(&r.weights) {
            for (y2, w2) in r.nodes.iter().zip(&r.weights) {
                total += w1 * w2 * ms.w_eval(x, [*y1, *y2], dt).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(ms.w_eval(x, [0.1, 0.2], dt).unwrap(), ms.w_eval([0.1, 0.2], x, dt).unwrap());
    }

    #[test]
    fn residual_estimate_small_for_smooth_spot() {
        let ms = planar_modes(1.0, 1.0, 1200).unwrap();
        let spot = FaceField::Gaussian { amplitude: 1.0, center: [0.5, 0.5], sigma: 0.1 };
        let c = ms.project_source(&spot, 32).unwrap().coefficients;
        assert!(ms.residual_sup(&spot, &c) < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn semigroup_composition(dt1 in 0.0f64..0.5, dt2 in 0.0f64..0.5, seed in 0u64..1000) {
            let ms = planar_modes(1.0, 1.0, 40).unwrap();
            let c: Vec<f64> = (0..ms.len()).map(|k| ((k as u64 * 7919 + seed) % 97) as f64 / 97.0 - 0.5).collect();
            let two_step = ms.evolve(&ms.evolve(&c, dt1), dt2);
            let one_step = ms.evolve(&c, dt1 + dt2);
            for (a, b) in two_step.iter().zip(&one_step) {
                proptest::prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn maximum_principle(cx in 0.1f64..0.9, cy in 0.1f64..0.9, dt in 0.001f64..1.0) {
            let ms = planar_modes(1.0, 1.0, 600).unwrap();
            let spot = FaceField::Gaussian { amplitude: 1.0, center: [cx, cy], sigma: 0.12 };
            let c = ms.project_source(&spot, 32).unwrap().coefficients;
            let eps = ms.residual_sup(&spot, &c);
            let v = ms.semigroup_apply(&c, dt, [0.5, 0.5]);
            proptest::prop_assert!(v >= -eps - 1e-12 && v <= 1.0 + eps + 1e-12);
        }
    }
}
