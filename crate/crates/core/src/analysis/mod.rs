//! Estimators and analytic checks on samples and kernels.

mod dudley;
mod holder;
mod lass;

pub use dudley::{modulus_and_entropy, DudleyReport};
pub use holder::{
    directional_exponent, local_exponent, pointwise_exponent, ExponentEstimate, ExponentKind, ScalingFit, MIN_RADII,
    MIN_WINDOW,
};
pub use lass::{
    default_probes, lass_field, lass_sheet, tightness_sweep, AxisLass, LassClass, LassReport, PairTrace,
    SheetLassReport, TightnessReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::FieldSample;

/// Monte-Carlo estimate of `E[X_s X_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicates: usize,
}

impl CovEstimate {
    /// `(value - analytic) / stderr`; 0 when both the error and the spread vanish.
    pub fn z_score(&self, analytic: f64) -> f64 {
        let diff = self.value - analytic;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// Mean of `X_s X_t` over replicates with the Gaussian product standard
/// error `sqrt((C_ss C_tt + C_st²) / R)`, the second moments taken from the data.
pub fn empirical_cov(samples: &[FieldSample], s: &[f64], t: &[f64]) -> Result<CovEstimate> {
    let r = samples.len();
    if r < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: r });
    }
    let grid = &samples[0].grid;
    let is = grid.index_of(s).ok_or_else(|| Error::MissingCorner(s.to_vec()))?;
    let it = grid.index_of(t).ok_or_else(|| Error::MissingCorner(t.to_vec()))?;
    let (mut ss, mut tt, mut st) = (0.0, 0.0, 0.0);
    for x in samples {
        if &x.grid != grid {
            return Err(Error::InvalidGrid("samples live on different lattices".into()));
        }
        let (a, b) = (x.values[is], x.values[it]);
        ss += a * a;
        tt += b * b;
        st += a * b;
    }
    let rf = r as f64;
    let (ss, tt, st) = (ss / rf, tt / rf, st / rf);
    Ok(CovEstimate { value: st, stderr: ((ss * tt + st * st) / rf).sqrt(), replicates: r })
}

/// Ordinary least squares of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; 0 for exact fits and two-point fits.
    pub slope_stderr: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LineFit { slope, intercept, r2, slope_stderr }
}
