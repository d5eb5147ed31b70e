use crate::error::{CliError, Result};
use log::warn;
use misfit_core::material::{read_config, MaterialInput, MaterialParams};
use std::path::{Path, PathBuf};

/// Geometric sweep in `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for SweepSpec {
    /// Three decades at twelve points per decade.
    fn default() -> Self {
        Self {
            r_min: 1e3,
            r_max: 1e6,
            points: 37,
        }
    }
}

impl SweepSpec {
    pub fn radii(&self) -> Vec<f64> {
        let n = self.points;
        let ratio = self.r_max / self.r_min;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.r_max
                } else {
                    self.r_min * ratio.powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect()
    }
}

/// Which stages of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Modes {
    pub corrector: bool,
    pub sweep: bool,
    pub crossover: bool,
    pub pyramid: bool,
    pub diverge: bool,
}

impl Modes {
    pub fn all() -> Self {
        Self {
            corrector: true,
            sweep: true,
            crossover: true,
            pyramid: true,
            diverge: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material_path: Option<PathBuf>,
    pub material: MaterialParams,
    pub sweep: SweepSpec,
    /// Finest corrector mesh; the convergence study also solves `mesh/4` and `mesh/2`.
    pub mesh: usize,
    pub grading: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub modes: Modes,
    /// Bulk constant for the sweep and the crossover; the finest corrector
    /// constant when unset.
    pub k: Option<f64>,
    /// Growth exponent of the envelope density in the pyramid construction.
    pub p: f64,
    pub crossover_range: (f64, f64),
}

/// `alpha = 1.1`, `mu = 1`, `nu = 1/4`, `sigma = 1`, `b = h = 1`.
pub fn default_material() -> MaterialParams {
    MaterialInput {
        alpha: Some(1.1),
        mu: Some(1.0),
        nu: Some(0.25),
        sigma: Some(1.0),
        ..Default::default()
    }
    .build()
    .expect("default material is valid")
}

impl RunConfig {
    pub fn new(material: MaterialParams, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            material_path: None,
            material,
            sweep: SweepSpec::default(),
            mesh: 16,
            grading: 2.0,
            out_dir: out_dir.into(),
            seed: 0,
            modes: Modes::default(),
            k: None,
            p: 1.5,
            crossover_range: (1e-3, 1e9),
        }
    }

    pub fn from_file(path: &Path, out_dir: impl Into<PathBuf>) -> Result<Self> {
        let file = read_config(path)?;
        if file.big_r.is_some() || file.theta.is_some() {
            warn!("{}: `R` and `theta` are ignored by the harness", path.display());
        }
        let mut cfg = Self::new(file.material.build()?, out_dir);
        cfg.material_path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        let s = &self.sweep;
        if !(s.r_min > 0.0) || !s.r_max.is_finite() {
            return bad(format!("R_min must be positive and R_max finite, got [{}, {}]", s.r_min, s.r_max));
        }
        if !(s.r_max > s.r_min) {
            return bad(format!("R_max = {} must exceed R_min = {}", s.r_max, s.r_min));
        }
        if s.points < 2 {
            return bad(format!("sweep needs at least 2 points, got {}", s.points));
        }
        if self.mesh < 4 || !self.mesh.is_multiple_of(4) {
            return bad(format!("mesh must be a positive multiple of 4, got {}", self.mesh));
        }
        if !(self.grading >= 1.0) || !self.grading.is_finite() {
            return bad(format!("grading must be at least 1, got {}", self.grading));
        }
        if !(1.0..2.0).contains(&self.p) {
            return bad(format!("growth exponent must lie in [1, 2), got {}", self.p));
        }
        if let Some(k) = self.k {
            if !(k > 0.0) || !k.is_finite() {
                return bad(format!("k must be positive, got {k}"));
            }
        }
        let (lo, hi) = self.crossover_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("crossover range [{lo}, {hi}] is empty"));
        }
        Ok(())
    }
}
