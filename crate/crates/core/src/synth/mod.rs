//! Exact Gaussian synthesis on lattices.
//!
//! The Gram matrix of the kernel is factored once and every replicate is
//! `L z` with `z` drawn from its own substream. Separable sheets are factored
//! axis by axis, which keeps large 2D and 3D lattices exact and cheap.

mod cholesky;
mod rng;

pub use cholesky::{factor_psd, jitter_schedule, CovMatrix, Factor};
pub use rng::{NormalStream, GENERATOR};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{rect_increment, GridSpec, IndexBox, PointValues};
use crate::hurst::HurstFamily;
use crate::kernels::{Family, KernelModel, ModelSpec};

/// Default cap on the number of lattice points of a dense factorization.
pub const DEFAULT_CAP: usize = 4096;

/// Gram matrix of `model` on the lattice. Each entry is the average of the
/// two evaluation orders, so the result is symmetric by construction.
pub fn build_cov(model: &KernelModel, grid: &GridSpec) -> Result<CovMatrix> {
    build_cov_capped(model, grid, DEFAULT_CAP)
}

pub fn build_cov_capped(model: &KernelModel, grid: &GridSpec, cap: usize) -> Result<CovMatrix> {
    grid.validate()?;
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    let n = grid.len();
    if n > cap {
        return Err(Error::CapExceeded { points: n, cap });
    }
    let points: Vec<_> = (0..n).map(|i| grid.point(i)).collect();
    let hurst = points.iter().map(|p| model.hurst_values(p.coords())).collect::<Result<Vec<_>>>()?;
    Ok(CovMatrix::from_fn(n, |i, j| {
        let (p, q) = (points[i].coords(), points[j].coords());
        let a = model.cov_with(p, &hurst[i], q, &hurst[j]);
        let b = model.cov_with(q, &hurst[j], p, &hurst[i]);
        0.5 * (a + b)
    }))
}

/// One replicate of a field on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
    pub model_hash: u64,
}

impl FieldSample {
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.ravel(idx)]
    }
}

impl PointValues for FieldSample {
    fn value_at(&self, p: &[f64]) -> Option<f64> {
        self.grid.index_of(p).map(|i| self.values[i])
    }
}

/// How the lattice covariance is factored.
#[derive(Debug, Clone)]
pub enum Plan {
    /// One Cholesky factor of the full Gram matrix.
    Dense(Factor),
    /// One factor per axis; the field covariance is their Kronecker product.
    Kronecker(Vec<Factor>),
}

/// Factored covariance ready to produce replicates.
#[derive(Debug, Clone)]
pub struct Sampler {
    grid: GridSpec,
    plan: Plan,
    model_hash: u64,
}

/// Per-axis one-dimensional models of a separable sheet.
fn axis_models(model: &KernelModel) -> Result<Option<Vec<KernelModel>>> {
    let hs: Vec<f64> = match model.family() {
        Family::FbSheet { hurst } => hurst.clone(),
        Family::MbSheet { hurst } => {
            let mut out = Vec::with_capacity(hurst.len());
            for h in hurst {
                match h.family() {
                    HurstFamily::Constant { value } => out.push(*value),
                    _ => return Ok(None),
                }
            }
            out
        }
        _ => return Ok(None),
    };
    hs.into_iter()
        .map(|h| KernelModel::new(ModelSpec::new(Family::FbSheet { hurst: vec![h] }, model.normalization())))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn axis_grid(grid: &GridSpec, axis: usize) -> Result<GridSpec> {
    use crate::geometry::Point;
    GridSpec::new(
        Point::new(vec![grid.lower.coords()[axis]])?,
        Point::new(vec![grid.upper.coords()[axis]])?,
        vec![grid.resolution[axis]],
    )
}

impl Sampler {
    /// Kronecker plan for separable sheets, dense factorization otherwise.
    pub fn new(model: &KernelModel, grid: &GridSpec) -> Result<Self> {
        Self::with_cap(model, grid, DEFAULT_CAP)
    }

    pub fn with_cap(model: &KernelModel, grid: &GridSpec, cap: usize) -> Result<Self> {
        grid.validate()?;
        if grid.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
        }
        let plan = match axis_models(model)? {
            Some(axes) => {
                let mut factors = Vec::with_capacity(axes.len());
                for (axis, m) in axes.iter().enumerate() {
                    let g = axis_grid(grid, axis)?;
                    factors.push(factor_psd(&build_cov_capped(m, &g, cap)?)?);
                }
                Plan::Kronecker(factors)
            }
            None => Plan::Dense(factor_psd(&build_cov_capped(model, grid, cap)?)?),
        };
        Ok(Sampler { grid: grid.clone(), plan, model_hash: model.descriptor_hash() })
    }

    /// Dense plan regardless of separability.
    pub fn dense(model: &KernelModel, grid: &GridSpec, cap: usize) -> Result<Self> {
        let c = build_cov_capped(model, grid, cap)?;
        Ok(Sampler { grid: grid.clone(), plan: Plan::Dense(factor_psd(&c)?), model_hash: model.descriptor_hash() })
    }

    pub fn from_factor(grid: GridSpec, factor: Factor, model_hash: u64) -> Result<Self> {
        if factor.n() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: factor.n() });
        }
        Ok(Sampler { grid, plan: Plan::Dense(factor), model_hash })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn model_hash(&self) -> u64 {
        self.model_hash
    }

    /// Largest absolute jitter applied by any factor.
    pub fn max_jitter(&self) -> f64 {
        match &self.plan {
            Plan::Dense(f) => f.jitter(),
            Plan::Kronecker(fs) => fs.iter().map(|f| f.jitter()).fold(0.0, f64::max),
        }
    }

    /// Relative Frobenius error of the factorization against the model's Gram
    /// matrix; for Kronecker plans, the worst axis.
    pub fn reconstruction_error(&self, model: &KernelModel) -> Result<f64> {
        match &self.plan {
            Plan::Dense(f) => Ok(f.reconstruction_error(&build_cov_capped(model, &self.grid, f.n())?)),
            Plan::Kronecker(fs) => {
                let axes = axis_models(model)?.ok_or_else(|| Error::InvalidModel("model is not separable".into()))?;
                let mut worst: f64 = 0.0;
                for (axis, (f, m)) in fs.iter().zip(&axes).enumerate() {
                    let c = build_cov_capped(m, &axis_grid(&self.grid, axis)?, f.n())?;
                    worst = worst.max(f.reconstruction_error(&c));
                }
                Ok(worst)
            }
        }
    }

    /// Replicate `replicate` of seed `seed`.
    pub fn sample_one(&self, seed: u64, replicate: u64) -> FieldSample {
        let n = self.grid.len();
        let mut z = vec![0.0; n];
        NormalStream::new(seed, replicate).fill_normal(&mut z);
        let values = match &self.plan {
            Plan::Dense(f) => {
                let mut out = vec![0.0; n];
                f.apply(&z, &mut out);
                out
            }
            Plan::Kronecker(fs) => kronecker_apply(fs, &self.grid.resolution, z),
        };
        FieldSample { grid: self.grid.clone(), values, seed, replicate, model_hash: self.model_hash }
    }

    /// Replicates `0..replicates` of seed `seed`.
    pub fn sample(&self, seed: u64, replicates: usize) -> Vec<FieldSample> {
        (0..replicates as u64).into_par_iter().map(|r| self.sample_one(seed, r)).collect()
    }
}

/// `(L_0 ⊗ L_1 ⊗ …) z` for row-major `z`, applied one axis at a time.
fn kronecker_apply(factors: &[Factor], resolution: &[usize], mut z: Vec<f64>) -> Vec<f64> {
    let total: usize = resolution.iter().product();
    let mut line = Vec::new();
    let mut mapped = Vec::new();
    for (axis, f) in factors.iter().enumerate() {
        let n = resolution[axis];
        let inner: usize = resolution[axis + 1..].iter().product();
        let outer = total / (n * inner);
        line.resize(n, 0.0);
        mapped.resize(n, 0.0);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for k in 0..n {
                    line[k] = z[base + k * inner];
                }
                f.apply(&line, &mut mapped);
                for k in 0..n {
                    z[base + k * inner] = mapped[k];
                }
            }
        }
    }
    z
}

/// Sample replicates directly from a dense factor.
pub fn sample(
    factor: &Factor,
    grid: &GridSpec,
    seed: u64,
    replicates: usize,
    model_hash: u64,
) -> Result<Vec<FieldSample>> {
    let sampler = Sampler::from_factor(grid.clone(), factor.clone(), model_hash)?;
    Ok(sampler.sample(seed, replicates))
}

/// Rectangular increments of every sample over every box: `out[r][b]`.
pub fn sample_increments(samples: &[FieldSample], boxes: &[IndexBox]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| boxes.iter().map(|b| rect_increment(s, b)).collect::<Result<Vec<_>>>()).collect()
}
