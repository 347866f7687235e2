//! Full product-kernel solution of the heated plate, its thin-plate reduction,
//! and the error budget between them.
//!
//! The plate `P × [0, h]` exchanges heat with ambient temperatures `T0` (top,
//! `x3 = h`) and `T1` (bottom, `x3 = 0`) through a Robin condition with
//! coefficient `a`, and a source `F` heats both faces. Starting from the static
//! state `G`, the temperature is
//!
//! ```text
//! U(x, x3, t) = G(x3) + Σ_m Σ_k φ_k(x) (2 φ_m(x3) / D_m)
//!               [φ_m(0) ∫ e^{−(α_m² + λ_k)(t−s)} c_k^bottom(s) ds
//!              + φ_m(h) ∫ e^{−(α_m² + λ_k)(t−s)} c_k^top(s) ds]
//! ```
//!
//! and the reduced model keeps only the thin-plate surrogate of the `m = 1` term.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::convolution::{convolve, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::planar::{planar_modes, FaceField, PlanarModeSet, QuadratureWarning};
use crate::spectrum::{build_spectrum, RobinParams, RobinSpectrum};
use crate::transverse::TransverseKernel;

/// Multiplier of `h‖F‖` in the thin-plate error estimate.
pub const CERTIFICATE_FACTOR: f64 = 19.0 / 3.0;
/// Multiplier of `h‖F‖` in the first-mode estimate.
pub const FIRST_MODE_FACTOR: f64 = 5.0;
const POINT_TOL: f64 = 1e-12;

/// Temperature profile `c0 + c1·x3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearProfile {
    pub c0: f64,
    pub c1: f64,
}

impl LinearProfile {
    pub fn eval(&self, x3: f64) -> f64 {
        self.c0 + self.c1 * x3
    }
}

/// Static state balancing both Robin faces:
/// `c1 = a(c0 − T1)` and `c1 = a(T0 − c0 − c1·h)`.
pub fn static_state(a: f64, h: f64, t0: f64, t1: f64) -> Result<LinearProfile> {
    RobinParams::new(a, h)?;
    let c1 = a * (t0 - t1) / (2.0 + a * h);
    let c0 = t1 + c1 / a;
    Ok(LinearProfile { c0, c1 })
}

/// Face heat source, piecewise linear in time between samples and held
/// constant after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSource {
    times: Vec<f64>,
    top: Vec<FaceField>,
    bottom: Vec<FaceField>,
}

impl SurfaceSource {
    pub fn new(times: Vec<f64>, top: Vec<FaceField>, bottom: Vec<FaceField>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("source needs at least one time sample".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Domain(format!("source time grid must start at 0, got {}", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("source times must be finite and strictly increasing".into()));
        }
        if top.len() != times.len() || bottom.len() != times.len() {
            return Err(Error::Domain(format!(
                "source has {} times but {} top and {} bottom fields",
                times.len(),
                top.len(),
                bottom.len()
            )));
        }
        for f in top.iter().chain(&bottom) {
            f.validate()?;
        }
        Ok(Self { times, top, bottom })
    }

    pub fn zero() -> Self {
        Self::uniform(0.0, 0.0)
    }

    /// Time-independent uniform heating of both faces.
    pub fn uniform(top: f64, bottom: f64) -> Self {
        Self {
            times: vec![0.0],
            top: vec![FaceField::Uniform { value: top }],
            bottom: vec![FaceField::Uniform { value: bottom }],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn top(&self) -> &[FaceField] {
        &self.top
    }

    pub fn bottom(&self) -> &[FaceField] {
        &self.bottom
    }

    fn face_sup(fields: &[FaceField], times: &[f64], t: f64) -> f64 {
        let mut sup = 0.0f64;
        for (j, (f, &s)) in fields.iter().zip(times).enumerate() {
            if s > t {
                // `t` lies strictly inside (s_{j-1}, s_j): bound the interpolated field.
                let prev = &fields[j - 1];
                let u = (t - times[j - 1]) / (s - times[j - 1]);
                let (sa, ua) = prev.split_amplitude();
                let (sb, ub) = f.split_amplitude();
                let inner = if ua == ub {
                    ((1.0 - u) * sa + u * sb).abs() * ua.sup_abs()
                } else {
                    (1.0 - u) * prev.sup_abs() + u * f.sup_abs()
                };
                return sup.max(inner);
            }
            sup = sup.max(f.sup_abs());
        }
        sup
    }

    /// `sup |F|` over both faces and `[0, t]`. Exact whenever consecutive
    /// samples share a shape; otherwise the convex bound at `t`.
    pub fn sup_norm(&self, t: f64) -> f64 {
        Self::face_sup(&self.top, &self.times, t).max(Self::face_sup(&self.bottom, &self.times, t))
    }

    pub fn is_zero(&self) -> bool {
        self.top.iter().chain(&self.bottom).all(|f| f.sup_abs() == 0.0)
    }
}

/// Plate geometry, Robin exchange, ambient temperatures and heat source.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateConfig {
    pub l1: f64,
    pub l2: f64,
    pub robin: RobinParams,
    /// Ambient temperature above the top face.
    pub t0: f64,
    /// Ambient temperature below the bottom face.
    pub t1: f64,
    pub source: SurfaceSource,
}

impl PlateConfig {
    pub fn new(l1: f64, l2: f64, a: f64, h: f64, t0: f64, t1: f64, source: SurfaceSource) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::Domain(format!("side lengths must be > 0, got {l1} x {l2}")));
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::Domain("ambient temperatures must be finite".into()));
        }
        Ok(Self { l1, l2, robin: RobinParams::new(a, h)?, t0, t1, source })
    }

    pub fn h(&self) -> f64 {
        self.robin.h
    }

    pub fn static_profile(&self) -> LinearProfile {
        let c1 = self.robin.a * (self.t0 - self.t1) / (2.0 + self.robin.a * self.robin.h);
        LinearProfile { c0: self.t1 + c1 / self.robin.a, c1 }
    }

    /// `(19h/3)·sup |F|` over `[0, t]`.
    pub fn error_certificate(&self, t: f64) -> Result<f64> {
        self.robin.require_asymptotic_valid()?;
        Ok(CERTIFICATE_FACTOR * self.robin.h * self.source.sup_norm(t))
    }
}

/// Standalone form of [`PlateConfig::error_certificate`].
pub fn error_certificate(cfg: &PlateConfig, t: f64) -> Result<f64> {
    cfg.error_certificate(t)
}

/// `Σ_{j ≥ n} 1/j²` for `n ≥ 1`, rounded upward for large `n`.
pub fn zeta2_tail(n: usize) -> f64 {
    assert!(n >= 1, "zeta tail starts at 1");
    if n < 64 {
        PI * PI / 6.0 - (1..n).map(|j| 1.0 / (j * j) as f64).sum::<f64>()
    } else {
        // Euler–Maclaurin, truncated after a positive term.
        let x = n as f64;
        1.0 / x + 0.5 / (x * x) + 1.0 / (6.0 * x * x * x)
    }
}

/// Bound on `Σ_{m>M} 8/(h α_m²)·sup_F`, using the computed roots where
/// available and `α_m ≥ (m−1)π/h` past the end of the spectrum.
pub fn tail_contribution_bound(spectrum: &RobinSpectrum, order: usize, sup_f: f64) -> f64 {
    let order = order.max(1);
    let h = spectrum.params.h;
    let known: f64 = spectrum.alphas.iter().skip(order).map(|alpha| 1.0 / (alpha * alpha)).sum();
    let first_unknown = order.max(spectrum.len()) + 1;
    let beyond = h * h / (PI * PI) * zeta2_tail(first_unknown - 1);
    8.0 / h * (known + beyond) * sup_f
}

/// Numerical resolution of a plate solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Transverse modes summed in the full solution.
    pub transverse_modes: usize,
    /// Planar modes used for the source projection.
    pub planar_modes: usize,
    pub quad_order: usize,
    pub eig_tol: f64,
    /// Largest acceptable truncation slack; `None` accepts any.
    pub slack_budget: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            transverse_modes: 64,
            planar_modes: 1200,
            quad_order: crate::planar::DEFAULT_QUAD_ORDER,
            eig_tol: 1e-13,
            slack_budget: None,
        }
    }
}

/// Mode coefficients of both faces at every source time, stored per mode.
#[derive(Debug, Clone)]
struct ProjectedSource {
    /// `top[k][j]`: coefficient of planar mode `k` at time sample `j`.
    top: Vec<Vec<f64>>,
    bottom: Vec<Vec<f64>>,
    /// Estimated `sup |F − Π_K F|` over faces and times.
    residual: f64,
    warnings: Vec<QuadratureWarning>,
}

fn project_faces(planar: &PlanarModeSet, source: &SurfaceSource, quad_order: usize) -> Result<ProjectedSource> {
    let mut cache: Vec<(FaceField, Vec<f64>, f64)> = Vec::new();
    let mut warnings = Vec::new();
    let mut residual = 0.0f64;
    let mut project_face = |fields: &[FaceField]| -> Result<Vec<Vec<f64>>> {
        let mut by_mode = vec![vec![0.0; fields.len()]; planar.len()];
        for (j, field) in fields.iter().enumerate() {
            let (scale, unit) = field.split_amplitude();
            if scale == 0.0 {
                continue;
            }
            let idx = match cache.iter().position(|(f, _, _)| *f == unit) {
                Some(i) => i,
                None => {
                    let proj = planar.project_source(&unit, quad_order)?;
                    warnings.extend(proj.warning);
                    let res = planar.residual_sup(&unit, &proj.coefficients);
                    cache.push((unit, proj.coefficients, res));
                    cache.len() - 1
                }
            };
            let (_, coeffs, res) = &cache[idx];
            residual = residual.max(scale.abs() * res);
            for (row, c) in by_mode.iter_mut().zip(coeffs) {
                row[j] = scale * c;
            }
        }
        Ok(by_mode)
    };
    let top = project_face(&source.top)?;
    let bottom = project_face(&source.bottom)?;
    Ok(ProjectedSource { top, bottom, residual, warnings })
}

/// Modal convolutions `∫ e^{−(α_m² + λ_k)(t−s)} c_k(s) ds` at one time.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    pub t: f64,
    /// `bottom[m−1][k]`
    bottom: Vec<Vec<f64>>,
    top: Vec<Vec<f64>>,
}

/// Full and reduced values at one point with their error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSample {
    pub x: [f64; 2],
    pub x3: f64,
    pub t: f64,
    pub value_full: f64,
    pub value_reduced: f64,
    /// `(19h/3)·sup |F|` over `[0, t]`.
    pub certificate: f64,
    /// Bound on the computed-vs-exact error of both values.
    pub truncation_slack: f64,
}

impl SolutionSample {
    pub fn diff(&self) -> f64 {
        (self.value_full - self.value_reduced).abs()
    }

    pub fn bound_satisfied(&self) -> bool {
        self.diff() <= self.certificate + self.truncation_slack
    }
}

/// Value of a truncated solution and a bound on its distance from the exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncated {
    pub value: f64,
    pub truncation_slack: f64,
}

/// Precomputed spectra and projections for one plate configuration.
#[derive(Debug, Clone)]
pub struct PlateSolver {
    config: PlateConfig,
    settings: SolverSettings,
    profile: LinearProfile,
    kernel: TransverseKernel,
    planar: PlanarModeSet,
    projected: ProjectedSource,
}

impl PlateSolver {
    pub fn new(config: PlateConfig, settings: SolverSettings) -> Result<Self> {
        if settings.transverse_modes == 0 || settings.planar_modes == 0 {
            return Err(Error::Domain("mode counts must be at least 1".into()));
        }
        let spectrum = build_spectrum(&config.robin, settings.transverse_modes, settings.eig_tol)?;
        let kernel = TransverseKernel::full(spectrum)?;
        let planar = planar_modes(config.l1, config.l2, settings.planar_modes)?;
        let projected = project_faces(&planar, &config.source, settings.quad_order)?;
        let profile = config.static_profile();
        Ok(Self { config, settings, profile, kernel, planar, projected })
    }

    pub fn config(&self) -> &PlateConfig {
        &self.config
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn kernel(&self) -> &TransverseKernel {
        &self.kernel
    }

    pub fn planar(&self) -> &PlanarModeSet {
        &self.planar
    }

    pub fn static_profile(&self) -> LinearProfile {
        self.profile
    }

    /// Estimated `sup |F − Π_K F|`.
    pub fn projection_residual(&self) -> f64 {
        self.projected.residual
    }

    pub fn quadrature_warnings(&self) -> &[QuadratureWarning] {
        &self.projected.warnings
    }

    fn check_point(&self, x: [f64; 2], x3: f64) -> Result<f64> {
        let (l1, l2) = (self.config.l1, self.config.l2);
        let inside = |v: f64, l: f64| v >= -POINT_TOL && v <= l + POINT_TOL;
        if !(inside(x[0], l1) && inside(x[1], l2)) {
            return Err(Error::Domain(format!("point ({}, {}) outside [0, {l1}] x [0, {l2}]", x[0], x[1])));
        }
        self.kernel.clamp_face(x3)
    }

    fn check_time(t: f64) -> Result<()> {
        if t >= 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("time must be >= 0, got {t}")))
        }
    }

    /// Modal convolutions for all retained transverse and planar modes.
    pub fn time_slice(&self, t: f64) -> Result<TimeSlice> {
        Self::check_time(t)?;
        let times = self.config.source.times();
        let lambdas: Vec<f64> = self.planar.eigenvalues().collect();
        let integrate = |coeffs: &[Vec<f64>], alpha2: f64| -> Vec<f64> {
            coeffs
                .iter()
                .zip(&lambdas)
                .map(|(values, lambda)| {
                    if values.iter().all(|&v| v == 0.0) {
                        0.0
                    } else {
                        convolve(&PiecewiseLinear { times, values }, alpha2 + lambda, t)
                    }
                })
                .collect()
        };
        let (bottom, top) = (1..=self.kernel.order())
            .into_par_iter()
            .map(|m| {
                let alpha = self.kernel.alpha(m);
                (integrate(&self.projected.bottom, alpha * alpha), integrate(&self.projected.top, alpha * alpha))
            })
            .unzip();
        Ok(TimeSlice { t, bottom, top })
    }

    /// Contribution of transverse mode `m` to the full solution at `x`.
    fn mode_term(&self, slice: &TimeSlice, phi: &[f64], m: usize, x3: f64) -> f64 {
        let h = self.config.h();
        let dot = |v: &[f64]| phi.iter().zip(v).map(|(p, c)| p * c).sum::<f64>();
        let shape = |z: f64| self.kernel.mode_shape(m, z);
        let bottom = dot(&slice.bottom[m - 1]);
        let top = dot(&slice.top[m - 1]);
        2.0 * shape(x3) * (shape(0.0) * bottom + shape(h) * top) / self.kernel.mode_norm(m)
    }

    /// Contribution of transverse mode `m` (1-based) at `(x, x3, t)`.
    pub fn mode_contribution(&self, m: usize, x: [f64; 2], x3: f64, t: f64) -> Result<f64> {
        let x3 = self.check_point(x, x3)?;
        if m == 0 || m > self.kernel.order() {
            return Err(Error::Domain(format!("mode index {m} outside 1..={}", self.kernel.order())));
        }
        let slice = self.time_slice(t)?;
        Ok(self.mode_term(&slice, &self.planar.eval_all(x), m, x3))
    }

    /// Contributions of every retained transverse mode at `(x, x3)` and the
    /// slice time, index `m − 1`.
    pub fn mode_contributions(&self, slice: &TimeSlice, x: [f64; 2], x3: f64) -> Result<Vec<f64>> {
        let x3 = self.check_point(x, x3)?;
        let phi = self.planar.eval_all(x);
        Ok((1..=self.kernel.order()).map(|m| self.mode_term(slice, &phi, m, x3)).collect())
    }

    /// Bound on `|computed full − exact full|`: the transverse tail for the
    /// projected source plus the exact-mode response to the projection residual.
    fn full_slack(&self, x3: f64, t: f64) -> f64 {
        let order = self.kernel.order();
        let sup_f = self.config.source.sup_norm(t);
        let eps = self.projected.residual;
        let h = self.config.h();
        let residual_response: f64 = (1..=order)
            .map(|m| {
                let alpha = self.kernel.alpha(m);
                let shape = |z: f64| self.kernel.mode_shape(m, z);
                2.0 * shape(x3).abs() * (shape(0.0).abs() + shape(h).abs()) / self.kernel.mode_norm(m)
                    * -(-alpha * alpha * t).exp_m1()
                    / (alpha * alpha)
            })
            .sum();
        tail_contribution_bound(self.kernel.spectrum(), order, sup_f + eps) + eps * residual_response
    }

    /// Bound on `|computed reduced − exact reduced|` from the projection residual.
    fn reduced_slack(&self, t: f64) -> f64 {
        let alpha = self.kernel.alpha(1);
        self.projected.residual * -(-alpha * alpha * t).exp_m1() / self.config.robin.a
    }

    fn full_at(&self, slice: &TimeSlice, phi: &[f64], x3: f64) -> f64 {
        let sum: f64 = (1..=self.kernel.order()).map(|m| self.mode_term(slice, phi, m, x3)).sum();
        self.profile.eval(x3) + sum
    }

    fn reduced_integral_at(&self, slice: &TimeSlice, phi: &[f64]) -> f64 {
        let alpha = self.kernel.alpha(1);
        let both: f64 = phi.iter().zip(slice.bottom[0].iter().zip(&slice.top[0])).map(|(p, (b, t))| p * (b + t)).sum();
        alpha * alpha / (2.0 * self.config.robin.a) * both
    }

    fn budget_check(&self, slack: f64) -> Result<()> {
        match self.settings.slack_budget {
            Some(budget) if slack > budget => Err(Error::Truncation(format!(
                "truncation slack {slack:e} exceeds budget {budget:e} with {} transverse and {} planar modes",
                self.kernel.order(),
                self.planar.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Truncated full solution at `(x, x3, t)`.
    pub fn full_solution(&self, x: [f64; 2], x3: f64, t: f64) -> Result<Truncated> {
        let x3 = self.check_point(x, x3)?;
        let slice = self.time_slice(t)?;
        let value = self.full_at(&slice, &self.planar.eval_all(x), x3);
        let truncation_slack = self.full_slack(x3, t);
        self.budget_check(truncation_slack)?;
        Ok(Truncated { value, truncation_slack })
    }

    /// Integral term of the reduced model; it never depends on `x3`.
    pub fn reduced_integral(&self, x: [f64; 2], t: f64) -> Result<f64> {
        self.config.robin.require_asymptotic_valid()?;
        self.check_point(x, 0.0)?;
        let slice = self.time_slice(t)?;
        Ok(self.reduced_integral_at(&slice, &self.planar.eval_all(x)))
    }

    /// `G(x3) + (α_1²/2a) ∫∫ e^{−α_1²(t−s)} W F` over both faces.
    pub fn reduced_solution(&self, x: [f64; 2], x3: f64, t: f64) -> Result<f64> {
        self.config.robin.require_asymptotic_valid()?;
        let x3 = self.check_point(x, x3)?;
        Ok(self.profile.eval(x3) + self.reduced_integral(x, t)?)
    }

    /// Full, reduced, certificate and slack on a tensor grid of points and
    /// times. Points are evaluated in parallel; output order is times-major,
    /// then `points` order.
    pub fn sample_grid(&self, points: &[([f64; 2], f64)], times: &[f64]) -> Result<Vec<SolutionSample>> {
        self.config.robin.require_asymptotic_valid()?;
        let points: Vec<([f64; 2], f64)> =
            points.iter().map(|&(x, x3)| Ok((x, self.check_point(x, x3)?))).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(points.len() * times.len());
        for &t in times {
            let slice = self.time_slice(t)?;
            let certificate = self.config.error_certificate(t)?;
            let reduced_slack = self.reduced_slack(t);
            let rows: Vec<SolutionSample> = points
                .par_iter()
                .map(|&(x, x3)| {
                    let phi = self.planar.eval_all(x);
                    let value_full = self.full_at(&slice, &phi, x3);
                    let value_reduced = self.profile.eval(x3) + self.reduced_integral_at(&slice, &phi);
                    SolutionSample {
                        x,
                        x3,
                        t,
                        value_full,
                        value_reduced,
                        certificate,
                        truncation_slack: self.full_slack(x3, t) + reduced_slack,
                    }
                })
                .collect();
            out.extend(rows);
        }
        Ok(out)
    }

    /// `|first-mode contribution − reduced integral|` on a grid, for the
    /// first-mode estimate `≤ 5h·sup |F|`.
    pub fn first_mode_deviation(&self, points: &[([f64; 2], f64)], t: f64) -> Result<f64> {
        self.config.robin.require_asymptotic_valid()?;
        let slice = self.time_slice(t)?;
        points.iter().try_fold(0.0f64, |worst, &(x, x3)| {
            let x3 = self.check_point(x, x3)?;
            let phi = self.planar.eval_all(x);
            let first = self.mode_term(&slice, &phi, 1, x3);
            Ok(worst.max((first - self.reduced_integral_at(&slice, &phi)).abs()))
        })
    }
}

/// The fixed acceptance grid: `n × n` interior points of the rectangle at
/// `x3 ∈ {0, h/2, h}`.
pub fn sample_points(l1: f64, l2: f64, h: f64, n: usize) -> Vec<([f64; 2], f64)> {
    let coord = |i: usize, l: f64| l * (i as f64 + 0.5) / n as f64;
    let mut pts = Vec::with_capacity(n * n * 3);
    for i in 0..n {
        for j in 0..n {
            for x3 in [0.0, 0.5 * h, h] {
                pts.push(([coord(i, l1), coord(j, l2)], x3));
            }
        }
    }
    pts
}
