//! Modulus of continuity and metric entropy under the variance metric
//! `d(s,t) = E[X_s - X_t]²`.

use serde::{Deserialize, Serialize};

use super::line_fit;
use crate::error::{Error, Result};
use crate::geometry::IndexBox;
use crate::kernels::KernelModel;
use crate::synth::FieldSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DudleyReport {
    /// δ values kept, increasing.
    pub deltas: Vec<f64>,
    /// δ values dropped: below the smallest lattice distance or not below 1.
    pub excluded: Vec<f64>,
    /// `ω(δ)` per replicate.
    pub modulus: Vec<Vec<f64>>,
    /// `ω(δ) / sqrt(δ ln(1/δ))` per replicate.
    pub ratios: Vec<Vec<f64>>,
    /// Max of the ratio over the three smallest δ, per replicate.
    pub limsup: Vec<f64>,
    /// `max / min` of `limsup` over replicates.
    pub limsup_spread: f64,
    /// Per replicate: ratio strictly increasing as δ decreases over the three smallest δ.
    pub monotone_growth: Vec<bool>,
    /// ε values, increasing.
    pub epsilons: Vec<f64>,
    /// Greedy covering counts `D(ε)`.
    pub entropy: Vec<usize>,
    /// Fitted slope of `ln D` against `ln ε`, over counts strictly between 1 and the point count.
    pub entropy_slope: f64,
    /// `-Σ_i 1/α_i`, where `d ≍ |t_i - s_i|^{α_i}` along axis `i`.
    pub expected_slope: f64,
}

impl DudleyReport {
    pub fn slope_rel_error(&self) -> f64 {
        (self.entropy_slope / self.expected_slope - 1.0).abs()
    }
}

/// Exponents of `d` along each axis from the smallest Hurst value on the lattice.
fn metric_exponents(model: &KernelModel, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = model.dim();
    let mut hmin = vec![f64::INFINITY; n];
    for p in points {
        let h = model.hurst_values(p)?;
        for a in 0..n {
            hmin[a] = hmin[a].min(if model.spec().is_sheet() { h[a] } else { h[0] });
        }
    }
    Ok(hmin.into_iter().map(|h| 2.0 * h).collect())
}

/// Sweep all lattice pairs in `region` (the whole lattice when `None`):
/// `ω(δ) = max |X_t - X_s|` over `d(s,t) ≤ δ` and greedy covering numbers.
pub fn modulus_and_entropy(
    samples: &[FieldSample],
    model: &KernelModel,
    region: Option<&IndexBox>,
    deltas: &[f64],
    epsilons: &[f64],
) -> Result<DudleyReport> {
    let first = samples.first().ok_or(Error::TooFewReplicates { needed: 1, got: 0 })?;
    let grid = &first.grid;
    if samples.iter().any(|s| s.grid != *grid) {
        return Err(Error::InvalidGrid("samples live on different lattices".into()));
    }
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    let members: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            region.is_none_or(|b| {
                let p = grid.point(i);
                p.coords().iter().enumerate().all(|(a, x)| b.lo().coords()[a] <= *x && *x <= b.hi().coords()[a])
            })
        })
        .collect();
    if members.len() < 2 {
        return Err(Error::InvalidGrid("region holds fewer than two lattice points".into()));
    }
    let points: Vec<Vec<f64>> = members.iter().map(|&i| grid.point(i).coords().to_vec()).collect();
    let hs = points.iter().map(|p| model.hurst_values(p)).collect::<Result<Vec<_>>>()?;
    let var: Vec<f64> = points.iter().zip(&hs).map(|(p, h)| model.cov_with(p, h, p, h)).collect();
    let dist = |a: usize, b: usize| -> f64 {
        (var[a] + var[b] - 2.0 * model.cov_with(&points[a], &hs[a], &points[b], &hs[b])).max(0.0)
    };
    let m = points.len();

    let mut sorted: Vec<f64> = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (candidates, mut excluded): (Vec<f64>, Vec<f64>) = sorted.into_iter().partition(|&d| d > 0.0 && d < 1.0);
    let top = *candidates.last().ok_or_else(|| Error::Config("no δ value in (0, 1)".into()))?;

    let r = samples.len();
    let values: Vec<Vec<f64>> = samples.iter().map(|s| members.iter().map(|&i| s.values[i]).collect()).collect();
    let mut bucket = vec![vec![0.0f64; candidates.len()]; r];
    let mut d_min = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            let d = dist(a, b);
            if d > 0.0 {
                d_min = d_min.min(d);
            }
            if d > top {
                continue;
            }
            let k = candidates.partition_point(|&x| x < d);
            for (rep, v) in values.iter().enumerate() {
                let diff = (v[a] - v[b]).abs();
                if diff > bucket[rep][k] {
                    bucket[rep][k] = diff;
                }
            }
        }
    }
    // δ below the smallest lattice distance sees no pair at all.
    let first = candidates.partition_point(|&x| x < d_min);
    for d in &candidates[..first] {
        log::warn!("δ = {d} excluded: below the smallest lattice distance {d_min}");
    }
    excluded.extend_from_slice(&candidates[..first]);
    excluded.sort_by(f64::total_cmp);
    let kept = candidates[first..].to_vec();
    if kept.is_empty() {
        return Err(Error::Config("no usable δ values".into()));
    }
    let bucket: Vec<Vec<f64>> = bucket.into_iter().map(|row| row[first..].to_vec()).collect();
    let modulus: Vec<Vec<f64>> = bucket
        .into_iter()
        .map(|row| {
            let mut acc = 0.0f64;
            row.into_iter()
                .map(|x| {
                    acc = acc.max(x);
                    acc
                })
                .collect()
        })
        .collect();
    let ratios: Vec<Vec<f64>> = modulus
        .iter()
        .map(|row| row.iter().zip(&kept).map(|(w, d)| w / (d * (1.0 / d).ln()).sqrt()).collect())
        .collect();
    let tail = kept.len().min(3);
    let limsup: Vec<f64> = ratios.iter().map(|row| row[..tail].iter().fold(0.0f64, |a, &b| a.max(b))).collect();
    let monotone_growth: Vec<bool> = ratios.iter().map(|row| tail == 3 && row[0] > row[1] && row[1] > row[2]).collect();
    let (lo, hi) = limsup.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let limsup_spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };

    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut entropy = Vec::with_capacity(eps.len());
    for &e in &eps {
        let mut remaining: Vec<usize> = (0..m).collect();
        let mut count = 0usize;
        while let Some(&c) = remaining.first() {
            count += 1;
            remaining.retain(|&q| q != c && dist(c, q) > e);
        }
        // A cover at a smaller radius also covers at a larger one.
        let bound = entropy.last().copied().unwrap_or(usize::MAX);
        entropy.push(count.min(bound));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        eps.iter().zip(&entropy).filter(|(_, &c)| c > 1 && c < m).map(|(e, &c)| (e.ln(), (c as f64).ln())).unzip();
    let entropy_slope = if lx.len() >= 2 { line_fit(&lx, &ly).slope } else { f64::NAN };
    let expected_slope = -metric_exponents(model, &points)?.iter().map(|a| 1.0 / a).sum::<f64>();

    Ok(DudleyReport {
        deltas: kept,
        excluded,
        modulus,
        ratios,
        limsup,
        limsup_spread,
        monotone_growth,
        epsilons: eps,
        entropy,
        entropy_slope,
        expected_slope,
    })
}
