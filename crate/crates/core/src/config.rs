//! Run configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::kernels::{KernelModel, ModelSpec};
use crate::synth::DEFAULT_CAP;

fn default_replicates() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Largest lattice the dense sampler accepts.
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub cov: Option<CovConfig>,
    #[serde(default)]
    pub holder: Option<HolderConfig>,
    #[serde(default)]
    pub lass: Option<LassConfig>,
    #[serde(default)]
    pub dudley: Option<DudleyConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest acceptable `|z|` in the covariance check.
    pub z_max: f64,
    /// Allowed distance between an exponent estimate and its ground truth.
    pub exponent: f64,
    /// Relative tolerance on LASS limits.
    pub lass_rel: f64,
    /// Relative tolerance on the entropy slope.
    pub entropy_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { z_max: 4.0, exponent: 0.1, lass_rel: 1e-3, entropy_rel: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovConfig {
    /// Pairs `(s, t)` of lattice points; every pair of lattice points when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderConfig {
    /// Lattice points to estimate at; the lattice centre when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Estimate at every `stride`-th lattice point per axis instead of `points`.
    #[serde(default)]
    pub stride: Option<usize>,
    /// Write a PGM of pointwise estimates (2D only).
    #[serde(default)]
    pub heatmap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassConfig {
    pub t0: Vec<f64>,
    /// One exponent for fields, one per axis for sheets.
    pub alpha: Vec<f64>,
    /// `ρ = 2^-k` for `k` in `rho_exponents`.
    pub rho_exponents: Vec<u32>,
    /// Probe pairs `(u, v)`; six defaults at `probe_scale` when absent.
    #[serde(default)]
    pub probes: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    #[serde(default = "default_probe_scale")]
    pub probe_scale: f64,
    #[serde(default)]
    pub tightness: Option<TightnessConfig>,
    /// Expected classification; a mismatch is an acceptance failure.
    #[serde(default)]
    pub expect: Option<crate::analysis::LassClass>,
}

fn default_probe_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessConfig {
    #[serde(default)]
    pub gamma: Option<f64>,
    pub probe_box: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DudleyConfig {
    pub deltas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that need no kernel tables.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.grid.validate().map_err(cfg)?;
        if self.grid.dim() != self.model.dim() {
            return Err(Error::Config(format!(
                "grid has dimension {}, model has dimension {}",
                self.grid.dim(),
                self.model.dim()
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if let Some(l) = &self.lass {
            if l.t0.len() != self.model.dim() {
                return Err(Error::Config("lass.t0 has the wrong dimension".into()));
            }
            let want = if self.model.is_sheet() { self.model.dim() } else { 1 };
            if l.alpha.len() != want {
                return Err(Error::Config(format!("lass.alpha needs {want} value(s)")));
            }
            if l.rho_exponents.is_empty() || l.rho_exponents.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("lass.rho_exponents must be non-empty and increasing".into()));
            }
        }
        if let Some(h) = &self.holder {
            if h.stride == Some(0) {
                return Err(Error::Config("holder.stride must be positive".into()));
            }
        }
        Ok(())
    }

    /// Build the kernel model; bad parameters count as configuration errors.
    pub fn kernel(&self) -> Result<KernelModel> {
        KernelModel::new(self.model.clone()).map_err(
            |e| {
                if e.is_numerical() {
                    e
                } else {
                    Error::Config(e.to_string())
                }
            },
        )
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

impl LassConfig {
    pub fn rhos(&self) -> Vec<f64> {
        self.rho_exponents.iter().map(|&k| 2f64.powi(-(k as i32))).collect()
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
