//! Green's function of the heat equation across the plate thickness.
//!
//! With `φ_m(z) = α_m cos(α_m z) + a sin(α_m z)` and
//! `D_m = 2a + h(a² + α_m²)`, the kernel is
//! `G_h(z, w, dt) = Σ_m 2 e^{−α_m² dt} φ_m(z) φ_m(w) / D_m`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectrum::{RobinParams, RobinSpectrum};

/// Face coordinates this far outside `[0, h]` are clamped instead of rejected.
const FACE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransverseKernel {
    spectrum: RobinSpectrum,
    order: usize,
}

/// Partial sum of the transverse kernel and its certified remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
    /// Number of terms summed.
    pub terms: usize,
}

impl TransverseKernel {
    pub fn new(spectrum: RobinSpectrum, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("transverse order must be at least 1".into()));
        }
        if spectrum.len() < order {
            return Err(Error::Truncation(format!(
                "transverse order {order} exceeds the {} computed eigenvalues",
                spectrum.len()
            )));
        }
        Ok(Self { spectrum, order })
    }

    /// Kernel over every computed eigenvalue.
    pub fn full(spectrum: RobinSpectrum) -> Result<Self> {
        let order = spectrum.len();
        Self::new(spectrum, order)
    }

    pub fn params(&self) -> &RobinParams {
        &self.spectrum.params
    }

    pub fn spectrum(&self) -> &RobinSpectrum {
        &self.spectrum
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self, m: usize) -> f64 {
        self.spectrum.alpha(m)
    }

    fn check_index(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.order {
            return Err(Error::Domain(format!("mode index {m} outside 1..={}", self.order)));
        }
        Ok(())
    }

    pub(crate) fn clamp_face(&self, z: f64) -> Result<f64> {
        let h = self.params().h;
        if z >= 0.0 && z <= h {
            Ok(z)
        } else if z > -FACE_CLAMP && z < h + FACE_CLAMP {
            Ok(z.clamp(0.0, h))
        } else {
            Err(Error::Domain(format!("thickness coordinate {z} outside [0, {h}]")))
        }
    }

    /// Unnormalized eigenfunction `α_m cos(α_m z) + a sin(α_m z)`.
    pub fn mode_shape(&self, m: usize, z: f64) -> f64 {
        let alpha = self.alpha(m);
        let (s, c) = (alpha * z).sin_cos();
        alpha * c + self.params().a * s
    }

    /// Denominator `2a + h(a² + α_m²)`, equal to twice the squared norm of the mode shape.
    pub fn mode_norm(&self, m: usize) -> f64 {
        let RobinParams { a, h } = *self.params();
        let alpha = self.alpha(m);
        2.0 * a + h * (a * a + alpha * alpha)
    }

    /// Spatial factor `2 φ_m(z) φ_m(w) / D_m` of the `m`-th term.
    pub(crate) fn spatial_factor(&self, m: usize, z: f64, w: f64) -> f64 {
        2.0 * self.mode_shape(m, z) * self.mode_shape(m, w) / self.mode_norm(m)
    }

    /// The `m`-th series term at elapsed time `dt`.
    pub fn pm_term(&self, m: usize, z: f64, w: f64, dt: f64) -> Result<f64> {
        self.check_index(m)?;
        let z = self.clamp_face(z)?;
        let w = self.clamp_face(w)?;
        if !(dt >= 0.0) {
            return Err(Error::Domain(format!("elapsed time must be >= 0, got {dt}")));
        }
        let alpha = self.alpha(m);
        Ok((-alpha * alpha * dt).exp() * self.spatial_factor(m, z, w))
    }

    /// Uniform bound `(4/h) e^{−α_m² dt}` on the `m`-th term.
    pub fn pm_sup_bound(&self, m: usize, dt: f64) -> f64 {
        let alpha = self.alpha(m);
        4.0 / self.params().h * (-alpha * alpha * dt).exp()
    }

    /// Partial sum with the fewest terms whose certified remainder is at most `tail_tol`.
    pub fn gh_eval(&self, z: f64, w: f64, dt: f64, tail_tol: f64) -> Result<KernelValue> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("kernel needs dt > 0, got {dt}")));
        }
        let z = self.clamp_face(z)?;
        let w = self.clamp_face(w)?;
        let h = self.params().h;
        let terms = (1..=self.order).find(|&n| kernel_tail_bound(h, n, dt) <= tail_tol).ok_or_else(|| {
            Error::Truncation(format!(
                "kernel remainder at dt = {dt} stays above {tail_tol:e} with {} terms",
                self.order
            ))
        })?;
        let value = (1..=terms)
            .map(|m| {
                let alpha = self.alpha(m);
                (-alpha * alpha * dt).exp() * self.spatial_factor(m, z, w)
            })
            .sum();
        Ok(KernelValue { value, tail_bound: kernel_tail_bound(h, terms, dt), terms })
    }

    /// Thin-plate surrogate `(α_1²/2a) e^{−α_1² dt}` for the leading term.
    pub fn p1_leading(&self, dt: f64) -> f64 {
        let alpha = self.alpha(1);
        alpha * alpha / (2.0 * self.params().a) * (-alpha * alpha * dt).exp()
    }

    /// `(5/2) h α_1² e^{−α_1² dt}`, dominating `|P_1 − p1_leading|` when `a·h ≤ 1/3`.
    pub fn p1_deviation_bound(&self, dt: f64) -> Result<f64> {
        self.params().require_asymptotic_valid()?;
        let alpha = self.alpha(1);
        Ok(2.5 * self.params().h * alpha * alpha * (-alpha * alpha * dt).exp())
    }

    /// `∫_0^h G_h(z, w, dt) dw` over the summed terms. Diagnostic only.
    pub fn mass(&self, z: f64, dt: f64) -> Result<f64> {
        let z = self.clamp_face(z)?;
        let RobinParams { a, h } = *self.params();
        Ok((1..=self.order)
            .map(|m| {
                let alpha = self.alpha(m);
                let (s, c) = (alpha * h).sin_cos();
                let integral = s + a / alpha * (1.0 - c);
                (-alpha * alpha * dt).exp() * 2.0 * self.mode_shape(m, z) * integral / self.mode_norm(m)
            })
            .sum())
    }
}

/// Bound on `Σ_{m>n} (4/h) e^{−α_m² dt}` from `α_m ≥ (m−1)π/h`: the first
/// omitted term over `1 − r`, where `r` is the largest ratio of consecutive terms.
pub fn kernel_tail_bound(h: f64, n: usize, dt: f64) -> f64 {
    let k = PI / h;
    let first = 4.0 / h * (-(k * n as f64).powi(2) * dt).exp();
    if first == 0.0 {
        return 0.0;
    }
    let ratio = (-(k * k) * dt * (2 * n + 1) as f64).exp();
    first / (1.0 - ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::build_spectrum;

    fn kernel(a: f64, h: f64, count: usize) -> TransverseKernel {
        let p = RobinParams::new(a, h).unwrap();
        TransverseKernel::full(build_spectrum(&p, count, 1e-13).unwrap()).unwrap()
    }

    #[test]
    fn term_at_bottom_face() {
        let k = kernel(1.0, 0.1, 4);
        for m in 1..=4 {
            let alpha = k.alpha(m);
            let expected = 2.0 * alpha * alpha / (2.0 + 0.1 * (1.0 + alpha * alpha));
            assert!((k.pm_term(m, 0.0, 0.0, 0.0).unwrap() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn pinned_leading_values() {
        let k = kernel(1.0, 0.1, 4);
        let p1 = k.pm_term(1, 0.05, 0.05, 0.01).unwrap();
        assert!((p1 - 8.349_817_380_983_108).abs() < 1e-12);
        assert!((k.p1_leading(0.1) - 1.375_606_741_876_748).abs() < 1e-12);
        assert!((k.pm_sup_bound(2, 0.01) - 1.392_435_159_330_511e-3).abs() < 1e-15);
        assert_eq!(k.pm_sup_bound(3, 0.0), 40.0);
    }

    #[test]
    fn face_coordinates_are_checked() {
        let k = kernel(1.0, 0.1, 2);
        assert!(k.pm_term(1, 0.1 + 5e-13, 0.0, 0.0).is_ok());
        assert!(matches!(k.pm_term(1, 0.2, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(k.pm_term(1, -1e-6, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(k.gh_eval(0.0, 0.0, 0.0, 1e-12), Err(Error::Domain(_))));
    }

    #[test]
    fn sup_bound_dominates_terms() {
        let k = kernel(1.0, 0.1, 6);
        for m in 1..=6 {
            for dt in [0.0, 1e-3, 0.01] {
                let bound = k.pm_sup_bound(m, dt);
                for i in 0..20 {
                    for j in 0..20 {
                        let (z, w) = (0.1 * i as f64 / 19.0, 0.1 * j as f64 / 19.0);
                        assert!(k.pm_term(m, z, w, dt).unwrap() <= bound);
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_series_pinned_and_certified() {
        let k = kernel(1.0, 0.1, 40);
        let v = k.gh_eval(0.05, 0.05, 0.05, 1e-12).unwrap();
        assert!(v.tail_bound <= 1e-12);
        // 40-term high-precision sum.
        assert!((v.value - 3.801_504_505_779_267).abs() < 1e-11);
        let more = k.gh_eval(0.05, 0.05, 0.05, 1e-15).unwrap();
        assert!(more.terms >= v.terms);
        assert!((more.value - v.value).abs() <= v.tail_bound);
    }

    #[test]
    fn late_times_reduce_to_first_term() {
        let k = kernel(1.0, 0.1, 8);
        let dt = 10.0 / k.alpha(1).powi(2);
        let v = k.gh_eval(0.02, 0.07, dt, 1e-30).unwrap();
        let p1 = k.pm_term(1, 0.02, 0.07, dt).unwrap();
        assert!((v.value - p1).abs() < 1e-30);
    }

    #[test]
    fn truncation_error_when_spectrum_too_small() {
        let k = kernel(1.0, 0.1, 2);
        assert!(matches!(k.gh_eval(0.05, 0.05, 1e-6, 1e-12), Err(Error::Truncation(_))));
    }

    #[test]
    fn deviation_bound_on_grid() {
        let k = kernel(1.0, 0.1, 1);
        for dt in [0.0, 0.01, 0.1, 1.0] {
            let bound = k.p1_deviation_bound(dt).unwrap();
            for i in 0..50 {
                for j in 0..50 {
                    let (z, w) = (0.1 * i as f64 / 49.0, 0.1 * j as f64 / 49.0);
                    let dev = (k.pm_term(1, z, w, dt).unwrap() - k.p1_leading(dt)).abs();
                    assert!(dev <= bound);
                }
            }
        }
        assert!(matches!(kernel(1.0, 1.0, 1).p1_deviation_bound(0.0), Err(Error::Domain(_))));
        assert!(k.p1_deviation_bound(1e3).unwrap() < 1e-300);
    }

    #[test]
    fn leading_surrogate_decreases() {
        let k = kernel(1.0, 0.1, 1);
        assert!((k.p1_leading(0.0) - k.alpha(1).powi(2) / 2.0).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let v = k.p1_leading(i as f64 * 0.01);
            assert!(v < prev);
            prev = v;
        }
    }

    /// Rescaled form with `β = hα` and `B = ah` written out independently.
    #[test]
    fn rescaled_form_agrees() {
        let (a, h) = (0.7, 0.2);
        let k = kernel(a, h, 5);
        let big_b = a * h;
        for m in 1..=5 {
            let beta = h * k.alpha(m);
            assert!(((beta).tan() - 2.0 * beta * big_b / (beta * beta - big_b * big_b)).abs() < 1e-8);
            for &(z, w, dt) in &[(0.0, 0.2, 0.001), (0.05, 0.13, 0.01), (0.2, 0.2, 0.0)] {
                let num = 2.0 / h
                    * (-beta * beta * dt / (h * h)).exp()
                    * (beta * (beta * z / h).cos() + big_b * (beta * z / h).sin())
                    * (beta * (beta * w / h).cos() + big_b * (beta * w / h).sin());
                let den = (beta * beta + big_b * big_b) * (1.0 + big_b / (beta * beta + big_b * big_b)) + big_b;
                let expected = num / den;
                let got = k.pm_term(m, z, w, dt).unwrap();
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    /// Mode shapes are orthogonal with squared norm `D_m / 2`.
    #[test]
    fn mode_shapes_orthogonal() {
        let k = kernel(1.0, 0.1, 6);
        let n = 20_000;
        let dz = 0.1 / n as f64;
        for m in 1..=6 {
            for l in 1..=6 {
                let gram: f64 = (0..n)
                    .map(|i| {
                        let z = (i as f64 + 0.5) * dz;
                        k.mode_shape(m, z) * k.mode_shape(l, z) * dz
                    })
                    .sum::<f64>()
                    * 2.0
                    / (k.mode_norm(m) * k.mode_norm(l)).sqrt();
                let expected = if m == l { 1.0 } else { 0.0 };
                assert!((gram - expected).abs() < 1e-6, "m={m} l={l} gram={gram}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn terms_symmetric(z in 0.0f64..0.1, w in 0.0f64..0.1, dt in 0.0f64..0.1, m in 1usize..6) {
            let k = kernel(1.0, 0.1, 6);
            proptest::prop_assert_eq!(k.pm_term(m, z, w, dt).unwrap(), k.pm_term(m, w, z, dt).unwrap());
            if dt > 0.0 {
                proptest::prop_assert_eq!(
                    k.gh_eval(z, w, dt.max(1e-3), 1e-10).unwrap().value,
                    k.gh_eval(w, z, dt.max(1e-3), 1e-10).unwrap().value
                );
            }
        }
    }
}
