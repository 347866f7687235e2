//! Command-line front end: `eigs`, `solve`, `verify` and `sweep`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::plate::{sample_points, PlateSolver, SolutionSample};
use crate::spectrum::{alpha1_bounds, build_spectrum, eigen_residual, Bracket};
use crate::verify::{run_verify, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "thinplate", version, about = "Thin-plate heat conduction: spectra, solutions and bound checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; overrides `out` from the config. Standard output otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Suppress progress and warnings on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Transverse eigenvalues with their brackets and bounds.
    Eigs,
    /// Full and reduced solutions on the sample grid.
    Solve,
    /// Run the invariant suite.
    Verify,
    /// Thickness sweep of the full-vs-reduced gap.
    Sweep,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Convergence(_) => EXIT_CONVERGENCE,
        Error::Domain(_) | Error::Truncation(_) | Error::GridMismatch(_) => EXIT_DOMAIN,
    }
}

/// Reals are written with 17 significant digits so they round-trip.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigRow {
    pub m: usize,
    pub alpha: f64,
    pub bracket: Bracket,
    pub residual: f64,
    /// Closed-form sandwich for `α_1`; first row only, and only when `a·h ≤ 1/3`.
    pub alpha1_bounds: Option<(f64, f64)>,
    pub ratio: f64,
}

pub fn eigs_rows(cfg: &RunConfig) -> Result<Vec<EigRow>> {
    let p = cfg.plate()?.robin;
    let s = build_spectrum(&p, cfg.transverse_modes, cfg.eig_tol)?;
    let bounds = if p.asymptotic_valid() { Some(alpha1_bounds(&p)?) } else { None };
    let reference = (2.0 * p.a / p.h).sqrt();
    Ok(s.alphas
        .iter()
        .zip(&s.brackets)
        .enumerate()
        .map(|(i, (&alpha, &bracket))| EigRow {
            m: i + 1,
            alpha,
            bracket,
            residual: eigen_residual(alpha, &p),
            alpha1_bounds: if i == 0 { bounds } else { None },
            ratio: alpha / reference,
        })
        .collect())
}

pub fn eigs_csv(rows: &[EigRow]) -> String {
    let mut out =
        String::from("m,alpha,bracket_lo,bracket_hi,residual,lemma33_lo,lemma33_hi,ratio_to_sqrt_2a_over_h\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.m,
            real(r.alpha),
            real(r.bracket.lo),
            real(r.bracket.hi),
            real(r.residual),
            opt_real(r.alpha1_bounds.map(|b| b.0)),
            opt_real(r.alpha1_bounds.map(|b| b.1)),
            real(r.ratio)
        );
    }
    out
}

pub fn solve_samples(cfg: &RunConfig) -> Result<(PlateSolver, Vec<SolutionSample>)> {
    let plate = cfg.plate()?;
    plate.robin.require_asymptotic_valid()?;
    let solver = PlateSolver::new(plate, cfg.settings())?;
    let c = solver.config();
    let points = sample_points(c.l1, c.l2, c.h(), cfg.grid_points);
    let samples = solver.sample_grid(&points, &cfg.sample_times)?;
    Ok((solver, samples))
}

pub fn solve_csv(samples: &[SolutionSample]) -> String {
    let mut out =
        String::from("x1,x2,x3,t,value_full,value_reduced,diff,certificate_19h3,truncation_slack,bound_satisfied\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            real(s.x[0]),
            real(s.x[1]),
            real(s.x3),
            real(s.t),
            real(s.value_full),
            real(s.value_reduced),
            real(s.diff()),
            real(s.certificate),
            real(s.truncation_slack),
            u8::from(s.bound_satisfied())
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub alpha1: f64,
    pub ratio: f64,
    pub max_diff: f64,
    /// Largest certificate over the sample times.
    pub certificate: f64,
    /// Least-squares slope of `ln max_diff` against `ln h` over all rows.
    pub slope: f64,
}

/// Least-squares slope of `y` on `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let hs = &cfg.sweep_h;
    if hs.len() < 2 {
        return Err(Error::Domain(format!("sweep needs at least two thicknesses, got {}", hs.len())));
    }
    if hs.iter().any(|&h| !(h > 0.0)) || hs.windows(2).any(|w| w[1] == w[0]) {
        return Err(Error::Domain("sweep thicknesses must be positive and distinct".into()));
    }
    let h_max = hs.iter().fold(0.0f64, |m, &h| m.max(h));
    if cfg.a * h_max > 1.0 / 3.0 {
        return Err(Error::Domain(format!(
            "sweep needs a*h <= 1/3 at the largest thickness (a*h = {})",
            cfg.a * h_max
        )));
    }
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let solver = PlateSolver::new(cfg.plate_at(h)?, cfg.settings())?;
        let points = sample_points(cfg.l1, cfg.l2, h, cfg.grid_points);
        let samples = solver.sample_grid(&points, &cfg.sample_times)?;
        let alpha1 = solver.kernel().alpha(1);
        rows.push(SweepRow {
            h,
            alpha1,
            ratio: alpha1 * (h / (2.0 * cfg.a)).sqrt(),
            max_diff: samples.iter().fold(0.0f64, |m, s| m.max(s.diff())),
            certificate: samples.iter().fold(0.0f64, |m, s| m.max(s.certificate)),
            slope: f64::NAN,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.max_diff.ln()).collect();
    let slope = fitted_slope(&lx, &ly);
    for r in &mut rows {
        r.slope = slope;
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("h,alpha1,ratio,max_diff_full_vs_reduced,certificate,slope\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            real(r.h),
            real(r.alpha1),
            real(r.ratio),
            real(r.max_diff),
            real(r.certificate),
            real(r.slope)
        );
    }
    out
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cli.out.as_ref().or(cfg.out.as_ref());
    let text = match cli.command {
        Command::Eigs => eigs_csv(&eigs_rows(&cfg)?),
        Command::Solve => {
            let (solver, samples) = solve_samples(&cfg)?;
            if !cli.quiet {
                for w in solver.quadrature_warnings() {
                    eprintln!("warning: {w}");
                }
            }
            solve_csv(&samples)
        }
        Command::Sweep => sweep_csv(&sweep_rows(&cfg)?),
        Command::Verify => {
            let report: Report = run_verify(&cfg)?;
            let mut text = report.lines().join("\n");
            text.push('\n');
            emit(&text, out)?;
            return Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY });
        }
    };
    emit(&text, out)?;
    Ok(EXIT_OK)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_DOMAIN);
        assert_eq!(exit_code(&Error::Convergence("x".into())), EXIT_CONVERGENCE);
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [0.1f64, 0.03, 0.01].iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 1.5 * l + 0.2).collect();
        assert!((fitted_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
