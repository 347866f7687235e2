//! Transverse Robin spectrum of the slab `[0, h]`.
//!
//! The eigenvalues are the positive roots of `tan(hq) = 2aq / (q² − a²)`.
//! All root finding works on the pole-free residual
//! `R(q) = sin(hq)(q² − a²) − 2aq·cos(hq)`, which is smooth and changes sign
//! exactly once inside each bracket returned by [`bracket`].

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative inward shrink applied to bracket endpoints.
pub const BRACKET_SHRINK: f64 = 1e-9;
/// Relative width at which bisection hands over to Newton polishing.
const BISECTION_WIDTH: f64 = 1e-12;
const MAX_NEWTON_STEPS: usize = 3;

/// Convection coefficient `a` and plate thickness `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinParams {
    pub a: f64,
    pub h: f64,
}

impl RobinParams {
    pub fn new(a: f64, h: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("convection coefficient a must be > 0, got {a}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("thickness h must be > 0, got {h}")));
        }
        Ok(Self { a, h })
    }

    /// `h < π/(2a)`: every root past the first sits in its own half period.
    pub fn bracket_valid(&self) -> bool {
        self.h < FRAC_PI_2 / self.a
    }

    /// `a·h ≤ 1/3`: the thin-plate estimates hold.
    pub fn asymptotic_valid(&self) -> bool {
        self.a * self.h <= 1.0 / 3.0
    }

    pub(crate) fn require_bracket_valid(&self) -> Result<()> {
        if self.bracket_valid() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "eigenvalue brackets need h < pi/(2a) (h = {}, pi/(2a) = {})",
                self.h,
                FRAC_PI_2 / self.a
            )))
        }
    }

    pub(crate) fn require_asymptotic_valid(&self) -> Result<()> {
        if self.asymptotic_valid() {
            Ok(())
        } else {
            Err(Error::Domain(format!("thin-plate estimates need a*h <= 1/3 (a*h = {})", self.a * self.h)))
        }
    }
}

/// Open interval `(lo, hi)` known to contain exactly one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn contains(&self, q: f64) -> bool {
        self.lo <= q && q <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Pole-free eigenvalue residual `sin(hq)(q² − a²) − 2aq·cos(hq)`.
pub fn eigen_residual(q: f64, p: &RobinParams) -> f64 {
    let (s, c) = (p.h * q).sin_cos();
    s * (q * q - p.a * p.a) - 2.0 * p.a * q * c
}

fn eigen_residual_derivative(q: f64, p: &RobinParams) -> f64 {
    let (a, h) = (p.a, p.h);
    let (s, c) = (h * q).sin_cos();
    h * c * (q * q - a * a) + 2.0 * q * s - 2.0 * a * c + 2.0 * a * q * h * s
}

/// Scale used to make residuals dimensionless.
pub fn residual_scale(q: f64, p: &RobinParams) -> f64 {
    q * q + p.a * p.a
}

/// Bracket for the `m`-th eigenvalue: `(0, π/2h)` for `m = 1`, otherwise
/// `((m−1)π/h, (m−1)π/h + π/2h)`, both shrunk inward by [`BRACKET_SHRINK`].
pub fn bracket(m: usize, p: &RobinParams) -> Result<Bracket> {
    if m == 0 {
        return Err(Error::Domain("eigenvalue index starts at 1".into()));
    }
    p.require_bracket_valid()?;
    let half = PI / (2.0 * p.h);
    let (lo, hi) = if m == 1 {
        (0.0, half)
    } else {
        let base = (m - 1) as f64 * PI / p.h;
        (base, base + half)
    };
    let pad = BRACKET_SHRINK * (hi - lo);
    Ok(Bracket { lo: lo + pad, hi: hi - pad })
}

/// Relative rounding floor of evaluating the residual at `q`: the argument
/// `hq` carries an absolute error of about `ε·hq`.
pub fn residual_floor(q: f64, p: &RobinParams) -> f64 {
    4.0 * f64::EPSILON * (1.0 + p.h * q)
}

/// The `m`-th eigenvalue (1-based) with `|R(α)| ≤ tol·(α² + a²)`, or within
/// [`residual_floor`] when `tol` is below it.
pub fn solve_alpha(m: usize, p: &RobinParams, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("root tolerance must be > 0, got {tol}")));
    }
    let br = bracket(m, p)?;
    let (mut lo, mut hi) = (br.lo, br.hi);
    let f_lo = eigen_residual(lo, p);
    let f_hi = eigen_residual(hi, p);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Convergence(format!(
            "no sign change of the eigen residual on bracket {m} = ({lo}, {hi}) for a = {}, h = {}",
            p.a, p.h
        )));
    }
    let lo_negative = f_lo < 0.0;

    while hi - lo > BISECTION_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        let f_mid = eigen_residual(mid, p);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut q = 0.5 * (lo + hi);
    for _ in 0..MAX_NEWTON_STEPS {
        let f = eigen_residual(q, p);
        if f == 0.0 {
            break;
        }
        let df = eigen_residual_derivative(q, p);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let next = (q - f / df).clamp(lo, hi);
        if next == q {
            break;
        }
        q = next;
    }

    let residual = eigen_residual(q, p).abs();
    if residual > tol.max(residual_floor(q, p)) * residual_scale(q, p) {
        return Err(Error::Convergence(format!(
            "eigenvalue {m} residual {residual:e} exceeds {tol:e} * scale for a = {}, h = {}",
            p.a, p.h
        )));
    }
    Ok(q)
}

/// Closed-form sandwich `(√(a² + 2a/(h + 2ah²)), √(a² + 2a/h))` for the first
/// eigenvalue, valid when `a·h ≤ 1/3`.
pub fn alpha1_bounds(p: &RobinParams) -> Result<(f64, f64)> {
    p.require_asymptotic_valid()?;
    let (a, h) = (p.a, p.h);
    let lo = (a * a + 2.0 * a / (h + 2.0 * a * h * h)).sqrt();
    let hi = (a * a + 2.0 * a / h).sqrt();
    debug_assert!(hi <= (3.0 * a / h).sqrt() * (1.0 + 1e-15));
    Ok((lo, hi))
}

/// First `M` transverse eigenvalues together with their brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinSpectrum {
    pub params: RobinParams,
    pub alphas: Vec<f64>,
    pub brackets: Vec<Bracket>,
    pub residual_tol: f64,
}

impl RobinSpectrum {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// 1-based eigenvalue access.
    pub fn alpha(&self, m: usize) -> f64 {
        self.alphas[m - 1]
    }
}

/// Solves the first `count` eigenvalues. Roots are independent, so the solves
/// run in parallel; collection keeps index order.
pub fn build_spectrum(p: &RobinParams, count: usize, tol: f64) -> Result<RobinSpectrum> {
    if count == 0 {
        return Err(Error::Domain("spectrum size must be at least 1".into()));
    }
    p.require_bracket_valid()?;
    let solved: Vec<(f64, Bracket)> =
        (1..=count).into_par_iter().map(|m| Ok((solve_alpha(m, p, tol)?, bracket(m, p)?))).collect::<Result<_>>()?;
    let (alphas, brackets): (Vec<f64>, Vec<Bracket>) = solved.into_iter().unzip();
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Convergence("eigenvalues are not strictly increasing".into()));
    }
    Ok(RobinSpectrum { params: *p, alphas, brackets, residual_tol: tol })
}

/// Sign-change intervals of the residual on `(0, q_max]`, found by a uniform
/// scan with the given step. A step wider than a bracket can miss roots.
pub fn scan_eigenvalues(p: &RobinParams, q_max: f64, step: f64) -> Vec<Bracket> {
    if !(step > 0.0) || !(q_max > 0.0) {
        return Vec::new();
    }
    let n = (q_max / step).ceil() as usize;
    let mut out = Vec::new();
    let mut prev_q = step;
    let mut prev_f = eigen_residual(prev_q, p);
    for i in 2..=n {
        let q = (i as f64 * step).min(q_max);
        let f = eigen_residual(q, p);
        if prev_f == 0.0 || (f != 0.0 && f.signum() != prev_f.signum()) {
            out.push(Bracket { lo: prev_q, hi: q });
        }
        prev_q = q;
        prev_f = f;
    }
    out
}

/// Plain bisection of a sign-change interval down to relative width `rel_width`.
pub fn refine_root(p: &RobinParams, br: Bracket, rel_width: f64) -> f64 {
    let (mut lo, mut hi) = (br.lo, br.hi);
    let lo_negative = eigen_residual(lo, p) < 0.0;
    while hi - lo > rel_width * hi {
        let mid = 0.5 * (lo + hi);
        let f = eigen_residual(mid, p);
        if f == 0.0 {
            return mid;
        }
        if (f < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
