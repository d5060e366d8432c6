//! Hölder exponent estimators based on oscillation scaling.
//!
//! Every estimator reduces the samples to a curve `log Q(r)` over dyadic
//! scales `r = h·2^j` (`h` the lattice step), averages it over replicates
//! and fits a line on the contiguous window of at least [`MIN_WINDOW`]
//! scales with the best `R²`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::line_fit;
use crate::error::{Error, Result};
use crate::geometry::{self, GridSpec, Point};
use crate::synth::FieldSample;

/// Fewest dyadic scales an estimate accepts.
pub const MIN_RADII: usize = 6;
/// Fewest scales in a regression window.
pub const MIN_WINDOW: usize = 5;
/// Largest half-width, in lattice steps, of the oscillation stencil.
pub const STENCIL: usize = 8;
/// `R²` values closer than this count as tied.
const TIE_TOL: f64 = 1e-9;
/// Relative slack on distance comparisons against radii.
const DIST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentKind {
    Pointwise,
    Local,
    Directional { direction: Vec<f64> },
}

/// Log-log regression behind an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Scales in increasing order.
    pub scales: Vec<f64>,
    /// Replicate mean of the log statistic at each scale.
    pub mean_log: Vec<f64>,
    pub window_start: usize,
    pub window_len: usize,
    pub r2: f64,
    pub slope: f64,
    /// Slope of each replicate on the chosen window.
    pub per_replicate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub t0: Point,
    pub kind: ExponentKind,
    pub value: f64,
    /// Half-width: two standard errors of the replicate slopes, or of the
    /// regression when that is larger.
    pub band: f64,
    pub fit: ScalingFit,
}

impl ExponentEstimate {
    pub fn window(&self) -> &[f64] {
        &self.fit.scales[self.fit.window_start..self.fit.window_start + self.fit.window_len]
    }
}

fn check_samples(samples: &[FieldSample]) -> Result<&GridSpec> {
    let first = samples.first().ok_or(Error::TooFewReplicates { needed: 1, got: 0 })?;
    if samples.iter().any(|s| s.grid != first.grid) {
        return Err(Error::InvalidGrid("samples live on different lattices".into()));
    }
    Ok(&first.grid)
}

fn lattice_index(grid: &GridSpec, t0: &[f64]) -> Result<Vec<usize>> {
    if t0.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: t0.len() });
    }
    let flat = grid.index_of(t0).ok_or_else(|| Error::InvalidPoint(format!("{t0:?} is not a lattice point")))?;
    Ok(grid.unravel(flat))
}

fn max_spacing(grid: &GridSpec) -> f64 {
    (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max)
}

/// Lattice points within Euclidean distance `radius` of `t0`, as
/// `(distance, flat index)` sorted by distance.
fn ball(grid: &GridSpec, idx0: &[usize], t0: &[f64], radius: f64) -> Vec<(f64, usize)> {
    let n = grid.dim();
    let (lo, hi): (Vec<usize>, Vec<usize>) = (0..n)
        .map(|a| {
            let k = (radius / grid.spacing(a) * (1.0 + DIST_TOL)).floor() as usize;
            (idx0[a].saturating_sub(k), (idx0[a] + k).min(grid.resolution[a] - 1))
        })
        .unzip();
    let mut out = Vec::new();
    let mut idx = lo.clone();
    let mut p = vec![0.0; n];
    loop {
        for a in 0..n {
            p[a] = grid.coord(a, idx[a]);
        }
        let d = geometry::distance(&p, t0);
        if d <= radius * (1.0 + DIST_TOL) {
            out.push((d, grid.ravel(&idx)));
        }
        let mut a = n;
        loop {
            if a == 0 {
                out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                return out;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] <= hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
}

/// Best window, slope and band for per-replicate log curves over `scales`.
fn fit_scaling(scales: Vec<f64>, logs: Vec<Vec<f64>>) -> Result<ScalingFit> {
    let k = scales.len();
    if k < MIN_RADII {
        return Err(Error::InsufficientRadii { needed: MIN_RADII, got: k });
    }
    let r = logs.len() as f64;
    let mean_log: Vec<f64> = (0..k).map(|j| logs.iter().map(|l| l[j]).sum::<f64>() / r).collect();
    let x: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for start in 0..k {
        for len in MIN_WINDOW..=k - start {
            let f = line_fit(&x[start..start + len], &mean_log[start..start + len]);
            if !f.r2.is_finite() {
                continue;
            }
            // Strict improvement only: earlier windows (smaller radii) win ties.
            if best.is_none_or(|(_, _, r2)| f.r2 > r2 + TIE_TOL) {
                best = Some((start, len, f.r2));
            }
        }
    }
    let (start, len, r2) = best.ok_or(Error::InsufficientRadii { needed: MIN_WINDOW, got: 0 })?;
    let xs = &x[start..start + len];
    let fit = line_fit(xs, &mean_log[start..start + len]);
    let per_replicate: Vec<f64> = logs.iter().map(|l| line_fit(xs, &l[start..start + len]).slope).collect();
    Ok(ScalingFit { scales, mean_log, window_start: start, window_len: len, r2, slope: fit.slope, per_replicate })
}

fn band(fit: &ScalingFit) -> f64 {
    let r = fit.per_replicate.len();
    let xs: Vec<f64> = fit.scales[fit.window_start..fit.window_start + fit.window_len].iter().map(|s| s.ln()).collect();
    let reg = 2.0 * line_fit(&xs, &fit.mean_log[fit.window_start..fit.window_start + fit.window_len]).slope_stderr;
    let rep = if r >= 2 {
        let m = fit.per_replicate.iter().sum::<f64>() / r as f64;
        let var = fit.per_replicate.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (r - 1) as f64;
        2.0 * (var / r as f64).sqrt()
    } else {
        0.0
    };
    rep.max(reg).max(f64::EPSILON)
}

/// Oscillation `max - min` over the stencil `idx0 + 2^j·m`, `m ∈ offsets`,
/// against the radius `k·unit·2^j`, for every `j` at which the whole stencil
/// stays on the lattice.
///
/// Every scale sees the same number of lattice points, so by self-similarity
/// the log oscillation of a fractional field is exactly linear in `log ρ`;
/// a full ball would hold `(2^j)^N` times more points at scale `j` and bias
/// the slope upwards.
fn oscillation_fit(
    samples: &[FieldSample],
    idx0: &[usize],
    offsets: &[Vec<i64>],
    k: usize,
    unit: f64,
) -> Result<ScalingFit> {
    let grid = &samples[0].grid;
    let n = grid.dim();
    let mut radii = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut scale = 1i64;
    loop {
        let mut here = Vec::with_capacity(offsets.len());
        let mut idx = vec![0usize; n];
        for m in offsets {
            for a in 0..n {
                let i = idx0[a] as i64 + scale * m[a];
                if i < 0 || i >= grid.resolution[a] as i64 {
                    return keep_positive(radii, oscillations(samples, &members));
                }
                idx[a] = i as usize;
            }
            here.push(grid.ravel(&idx));
        }
        radii.push(k as f64 * unit * scale as f64);
        members.push(here);
        scale *= 2;
    }
}

fn oscillations(samples: &[FieldSample], members: &[Vec<usize>]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            members
                .iter()
                .map(|ix| {
                    let (lo, hi) = ix.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| {
                        (l.min(s.values[i]), h.max(s.values[i]))
                    });
                    hi - lo
                })
                .collect()
        })
        .collect()
}

/// Drop scales where any replicate has a zero statistic, then fit.
fn keep_positive(scales: Vec<f64>, stats: Vec<Vec<f64>>) -> Result<ScalingFit> {
    let keep: Vec<usize> = (0..scales.len()).filter(|&j| stats.iter().all(|l| l[j] > 0.0)).collect();
    let scales: Vec<f64> = keep.iter().map(|&j| scales[j]).collect();
    let logs: Vec<Vec<f64>> = stats.iter().map(|l| keep.iter().map(|&j| l[j].ln()).collect()).collect();
    fit_scaling(scales, logs)
}

/// Number of dyadic scales `2^j` at which the box `idx0 ± 2^j·reach` stays
/// on the lattice.
fn full_scales(grid: &GridSpec, idx0: &[usize], reach: &[i64]) -> usize {
    let mut count = 0;
    let mut scale = 1i64;
    while (0..grid.dim()).all(|a| {
        let i = idx0[a] as i64;
        i - scale * reach[a] >= 0 && i + scale * reach[a] < grid.resolution[a] as i64
    }) {
        count += 1;
        scale *= 2;
        if reach.iter().all(|&r| r == 0) {
            break;
        }
    }
    count
}

/// Largest stencil half-width up to [`STENCIL`] leaving [`MIN_RADII`] scales.
fn stencil_size(grid: &GridSpec, idx0: &[usize], reach_of: impl Fn(usize) -> Vec<i64>) -> Result<usize> {
    let mut best = 0;
    for k in (1..=STENCIL).rev() {
        let got = full_scales(grid, idx0, &reach_of(k));
        if got >= MIN_RADII {
            return Ok(k);
        }
        best = best.max(got);
    }
    Err(Error::InsufficientRadii { needed: MIN_RADII, got: best })
}

/// Slope of the log oscillation `sup |X_t - X_s|` over `s, t ∈ B(t0, ρ)`
/// against `log ρ`, for `ρ = K·h·2^j` with `h` the largest lattice step.
/// The sup runs over the lattice points `t0 + 2^j·m` of the ball, `m` an
/// integer vector with `|m·step| ≤ K·h`. `K` is [`STENCIL`], or smaller when
/// the lattice around `t0` is too narrow for [`MIN_RADII`] scales.
pub fn pointwise_exponent(samples: &[FieldSample], t0: &[f64]) -> Result<ExponentEstimate> {
    let grid = check_samples(samples)?;
    let idx0 = lattice_index(grid, t0)?;
    let h = max_spacing(grid);
    let n = grid.dim();
    let reach_of = |k: usize| -> Vec<i64> {
        (0..n).map(|a| (k as f64 * h / grid.spacing(a) * (1.0 + DIST_TOL)).floor() as i64).collect()
    };
    let k = stencil_size(grid, &idx0, reach_of)?;
    let reach = reach_of(k);
    let mut offsets = Vec::new();
    let mut m: Vec<i64> = reach.iter().map(|r| -r).collect();
    loop {
        let d = m.iter().enumerate().map(|(a, &j)| (j as f64 * grid.spacing(a)).powi(2)).sum::<f64>().sqrt();
        if d <= k as f64 * h * (1.0 + DIST_TOL) {
            offsets.push(m.clone());
        }
        let mut a = n;
        loop {
            if a == 0 {
                let fit = oscillation_fit(samples, &idx0, &offsets, k, h)?;
                return Ok(ExponentEstimate {
                    t0: Point::new(t0.to_vec())?,
                    kind: ExponentKind::Pointwise,
                    value: fit.slope,
                    band: band(&fit),
                    fit,
                });
            }
            a -= 1;
            m[a] += 1;
            if m[a] <= reach[a] {
                break;
            }
            m[a] = -reach[a];
        }
    }
}

/// Slope of the log uniform modulus inside the ball `B(t0, W)`, `W` a quarter
/// of the smallest lattice extent. At lag `ℓ = h·2^j`, `Q(ℓ)` is the largest
/// `|X_{p+ℓe_a} - X_p|` over the `M` disjoint axis increments with `p` on the
/// sub-lattice `t0 + ℓ·Z^N` and both ends in the ball, divided by the median
/// of the maximum of `M` independent `|N(0,1)|`. Disjoint increments keep the
/// statistic self-similar across lags.
pub fn local_exponent(samples: &[FieldSample], t0: &[f64]) -> Result<ExponentEstimate> {
    let grid = check_samples(samples)?;
    let w =
        (0..grid.dim()).map(|a| grid.upper.coords()[a] - grid.lower.coords()[a]).fold(f64::INFINITY, f64::min) / 4.0;
    local_exponent_within(samples, t0, w)
}

/// Median of `max_{i<m} |Z_i|` for independent standard normals.
fn gaussian_max_median(m: usize) -> f64 {
    let n01 = Normal::new(0.0, 1.0).expect("standard normal");
    n01.inverse_cdf((1.0 + 0.5f64.powf(1.0 / m as f64)) / 2.0)
}

/// [`local_exponent`] with an explicit ball radius.
pub fn local_exponent_within(samples: &[FieldSample], t0: &[f64], w: f64) -> Result<ExponentEstimate> {
    let grid = check_samples(samples)?;
    let idx0 = lattice_index(grid, t0)?;
    let n = grid.dim();
    let members = ball(grid, &idx0, t0, w);
    let h = max_spacing(grid);
    let mut lags = Vec::new();
    let mut lag = 1usize;
    // Keep lags small against the ball so every scale has several increments.
    while lag as f64 * h <= w / 2.0 {
        lags.push(lag);
        lag *= 2;
    }
    // Lags count steps of the coarsest axis, so lengths agree across axes.
    let steps: Vec<Vec<usize>> =
        lags.iter().map(|&k| (0..n).map(|a| (k as f64 * h / grid.spacing(a)).round() as usize).collect()).collect();
    let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); lags.len()];
    let mut p = vec![0.0; n];
    for &(_, flat) in &members {
        let idx = grid.unravel(flat);
        for (j, st) in steps.iter().enumerate() {
            if (0..n).any(|a| (idx[a] as i64 - idx0[a] as i64).rem_euclid(st[a].max(1) as i64) != 0) {
                continue;
            }
            for a in 0..n {
                let mut q = idx.clone();
                q[a] += st[a];
                if q[a] >= grid.resolution[a] {
                    continue;
                }
                for b in 0..n {
                    p[b] = grid.coord(b, q[b]);
                }
                if geometry::distance(&p, t0) <= w * (1.0 + DIST_TOL) {
                    pairs[j].push((flat, grid.ravel(&q)));
                }
            }
        }
    }
    let scales: Vec<f64> = lags.iter().map(|&k| k as f64 * h).collect();
    let norms: Vec<f64> = pairs.iter().map(|ps| gaussian_max_median(ps.len().max(1))).collect();
    let stats: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            pairs
                .iter()
                .zip(&norms)
                .map(|(ps, norm)| ps.iter().map(|&(a, b)| (s.values[b] - s.values[a]).abs()).fold(0.0, f64::max) / norm)
                .collect()
        })
        .collect();
    let fit = keep_positive(scales, stats)?;
    Ok(ExponentEstimate {
        t0: Point::new(t0.to_vec())?,
        kind: ExponentKind::Local,
        value: fit.slope,
        band: band(&fit),
        fit,
    })
}

/// Local exponent along the lattice line through `t0` with direction `u`:
/// [`local_exponent_within`] on the longest segment of the line centred at
/// `t0`. `u` must be an axis or a diagonal of the lattice: all nonzero components
/// of equal magnitude.
pub fn directional_exponent(samples: &[FieldSample], t0: &[f64], u: &[f64]) -> Result<ExponentEstimate> {
    let grid = check_samples(samples)?;
    let idx0 = lattice_index(grid, t0)?;
    if u.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: u.len() });
    }
    let c = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(c > 0.0) {
        return Err(Error::RayOffLattice("zero direction".into()));
    }
    let mut step = Vec::with_capacity(u.len());
    for &x in u {
        let r = x / c;
        if (r.abs() - 1.0).abs() < 1e-12 {
            step.push(r.signum() as i64);
        } else if r.abs() < 1e-12 {
            step.push(0);
        } else {
            return Err(Error::RayOffLattice(format!("{u:?} is neither an axis nor a diagonal")));
        }
    }
    let length = step.iter().enumerate().map(|(a, &s)| (s as f64 * grid.spacing(a)).powi(2)).sum::<f64>().sqrt();
    // Steps k with idx0 + k·step on the lattice: kmin..=kmax.
    let (mut kmin, mut kmax) = (i64::MIN / 2, i64::MAX / 2);
    for (a, &st) in step.iter().enumerate() {
        let i = idx0[a] as i64;
        let last = grid.resolution[a] as i64 - 1;
        match st {
            1 => {
                kmin = kmin.max(-i);
                kmax = kmax.min(last - i);
            }
            -1 => {
                kmin = kmin.max(i - last);
                kmax = kmax.min(i);
            }
            _ => {}
        }
    }
    let half = kmax.min(-kmin);
    if half < 1 {
        return Err(Error::InsufficientRadii { needed: MIN_RADII, got: 0 });
    }
    // The ray as a 1D lattice with t0 at its centre.
    let line = GridSpec::new(
        Point::new(vec![0.0])?,
        Point::new(vec![2.0 * half as f64 * length])?,
        vec![2 * half as usize + 1],
    )?;
    let lines: Vec<FieldSample> = samples
        .iter()
        .map(|s| {
            let mut idx = idx0.clone();
            let values = (-half..=half)
                .map(|k| {
                    for a in 0..idx.len() {
                        idx[a] = (idx0[a] as i64 + k * step[a]) as usize;
                    }
                    s.values[grid.ravel(&idx)]
                })
                .collect();
            FieldSample { grid: line.clone(), values, seed: s.seed, replicate: s.replicate, model_hash: s.model_hash }
        })
        .collect();
    let centre = line.coord(0, half as usize);
    let fit = local_exponent_within(&lines, &[centre], centre)?.fit;
    Ok(ExponentEstimate {
        t0: Point::new(t0.to_vec())?,
        kind: ExponentKind::Directional { direction: u.to_vec() },
        value: fit.slope,
        band: band(&fit),
        fit,
    })
}
