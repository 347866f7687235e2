//! Run configuration: a flat TOML file where every key has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::planar::FaceField;
use crate::plate::{PlateConfig, SolverSettings, SurfaceSource};

/// Spatial profile of the source on one face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceKind {
    None,
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    pub a: f64,
    pub t0: f64,
    pub t1: f64,

    pub top_kind: FaceKind,
    pub top_amplitude: f64,
    pub top_center: [f64; 2],
    pub top_sigma: f64,
    pub bottom_kind: FaceKind,
    pub bottom_amplitude: f64,
    pub bottom_center: [f64; 2],
    pub bottom_sigma: f64,
    /// Time nodes of the source; each face is its shape times a level that is
    /// linear between nodes and held after the last one.
    pub source_times: Vec<f64>,
    pub top_levels: Vec<f64>,
    pub bottom_levels: Vec<f64>,

    pub transverse_modes: usize,
    pub planar_modes: usize,
    pub quad_order: usize,
    pub eig_tol: f64,
    pub grid_points: usize,
    pub sample_times: Vec<f64>,
    pub sweep_h: Vec<f64>,
    /// Largest admissible truncation slack as a fraction of the certificate.
    pub slack_fraction: f64,
    pub cn_nodes: usize,
    pub cn_dt: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            l1: 1.0,
            l2: 1.0,
            h: 0.1,
            a: 1.0,
            t0: 0.0,
            t1: 0.0,
            top_kind: FaceKind::Gaussian,
            top_amplitude: 1.0,
            top_center: [0.5, 0.5],
            top_sigma: 0.1,
            bottom_kind: FaceKind::Gaussian,
            bottom_amplitude: 0.5,
            bottom_center: [0.4, 0.6],
            bottom_sigma: 0.08,
            source_times: vec![0.0, 0.05],
            top_levels: vec![0.0, 1.0],
            bottom_levels: vec![0.0, 1.0],
            transverse_modes: 64,
            planar_modes: 1200,
            quad_order: 32,
            eig_tol: 1e-13,
            grid_points: 5,
            sample_times: vec![0.05, 0.1, 0.2, 0.3, 0.5, 1.0],
            sweep_h: vec![0.1, 0.03, 0.01, 0.003],
            slack_fraction: 0.01,
            cn_nodes: 400,
            cn_dt: 1e-4,
            out: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks the numerical knobs and the shape of the source description.
    /// Physical admissibility (signs, `h < π/(2a)`, `a·h ≤ 1/3`) is left to
    /// the solver, which reports it as a domain error.
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("l1", self.l1),
            ("l2", self.l2),
            ("h", self.h),
            ("a", self.a),
            ("t0", self.t0),
            ("t1", self.t1),
            ("top_amplitude", self.top_amplitude),
            ("top_sigma", self.top_sigma),
            ("bottom_amplitude", self.bottom_amplitude),
            ("bottom_sigma", self.bottom_sigma),
            ("eig_tol", self.eig_tol),
            ("slack_fraction", self.slack_fraction),
            ("cn_dt", self.cn_dt),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(config_err(format!("{name} must be finite, got {v}")));
        }
        let counts = [
            ("transverse_modes", self.transverse_modes),
            ("planar_modes", self.planar_modes),
            ("quad_order", self.quad_order),
            ("grid_points", self.grid_points),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(config_err(format!("{name} must be at least 1")));
        }
        if self.cn_nodes < 3 {
            return Err(config_err(format!("cn_nodes must be at least 3, got {}", self.cn_nodes)));
        }
        if !(self.eig_tol > 0.0 && self.slack_fraction > 0.0 && self.cn_dt > 0.0) {
            return Err(config_err("eig_tol, slack_fraction and cn_dt must be > 0"));
        }
        if self.source_times.is_empty() {
            return Err(config_err("source_times must not be empty"));
        }
        if self.top_levels.len() != self.source_times.len() || self.bottom_levels.len() != self.source_times.len() {
            return Err(config_err(format!(
                "top_levels ({}) and bottom_levels ({}) must match source_times ({})",
                self.top_levels.len(),
                self.bottom_levels.len(),
                self.source_times.len()
            )));
        }
        let lists = [
            ("source_times", &self.source_times),
            ("top_levels", &self.top_levels),
            ("bottom_levels", &self.bottom_levels),
            ("sample_times", &self.sample_times),
            ("sweep_h", &self.sweep_h),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(config_err(format!("{name} holds a non-finite value")));
        }
        if self.sample_times.is_empty() {
            return Err(config_err("sample_times must not be empty"));
        }
        Ok(())
    }

    fn face(kind: FaceKind, amplitude: f64, center: [f64; 2], sigma: f64) -> FaceField {
        match kind {
            FaceKind::None => FaceField::zero(),
            FaceKind::Uniform => FaceField::Uniform { value: amplitude },
            FaceKind::Gaussian => FaceField::Gaussian { amplitude, center, sigma },
        }
    }

    fn scaled(field: &FaceField, level: f64) -> FaceField {
        match field {
            FaceField::Uniform { value } => FaceField::Uniform { value: value * level },
            FaceField::Gaussian { amplitude, center, sigma } => {
                FaceField::Gaussian { amplitude: amplitude * level, center: *center, sigma: *sigma }
            }
            grid => grid.clone(),
        }
    }

    pub fn source(&self) -> Result<SurfaceSource> {
        let top = Self::face(self.top_kind, self.top_amplitude, self.top_center, self.top_sigma);
        let bottom = Self::face(self.bottom_kind, self.bottom_amplitude, self.bottom_center, self.bottom_sigma);
        SurfaceSource::new(
            self.source_times.clone(),
            self.top_levels.iter().map(|&s| Self::scaled(&top, s)).collect(),
            self.bottom_levels.iter().map(|&s| Self::scaled(&bottom, s)).collect(),
        )
    }

    /// Plate description at thickness `h`, which may differ from `self.h` in sweeps.
    pub fn plate_at(&self, h: f64) -> Result<PlateConfig> {
        PlateConfig::new(self.l1, self.l2, self.a, h, self.t0, self.t1, self.source()?)
    }

    pub fn plate(&self) -> Result<PlateConfig> {
        self.plate_at(self.h)
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            transverse_modes: self.transverse_modes,
            planar_modes: self.planar_modes,
            quad_order: self.quad_order,
            eig_tol: self.eig_tol,
            slack_budget: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_example_is_default() {
        let text = include_str!("../../../docs/example.toml");
        assert_eq!(RunConfig::from_toml_str(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::from_toml_str("hh = 0.1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("top_kind = \"ring\"\n"), Err(Error::Config(_))));
    }

    #[test]
    fn zero_modes_rejected() {
        let err = RunConfig::from_toml_str("transverse_modes = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("transverse_modes")), "{err}");
    }

    #[test]
    fn mismatched_levels_rejected() {
        let text = "source_times = [0.0, 1.0, 2.0]\n";
        assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))));
    }

    #[test]
    fn physical_violations_are_domain_errors() {
        let cfg = RunConfig::from_toml_str("h = -0.1\n").unwrap();
        assert!(matches!(cfg.plate(), Err(Error::Domain(_))));
    }

    #[test]
    fn source_levels_scale_shapes() {
        let cfg = RunConfig::from_toml_str(
            "top_kind = \"uniform\"\ntop_amplitude = 2.0\nbottom_kind = \"none\"\n\
             source_times = [0.0, 1.0]\ntop_levels = [0.5, 1.0]\nbottom_levels = [1.0, 1.0]\n",
        )
        .unwrap();
        let src = cfg.source().unwrap();
        assert_eq!(src.top()[0], FaceField::Uniform { value: 1.0 });
        assert_eq!(src.sup_norm(2.0), 2.0);
        assert!(src.bottom().iter().all(|f| f.sup_abs() == 0.0));
    }
}
