//! Analytic local self-similarity checks.
//!
//! With `Y_u(ρ) = (X_{t0+ρu} - X_{t0}) / ρ^α`, all second moments of the
//! rescaled field follow from the kernel. Limits are compared in the
//! representation normalization, where the predicted limit of
//! `½ E[Y_u - Y_v]²` is `D(2H0) |u-v|^{2H0}` when `α = H0` and
//! `∂²φ/∂x²(2H0, |t0|) Γ(u,v)²` when `α` is the exponent of `H` itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, signed_corners, Point};
use crate::hurst::{classify_trend, Exponent, GammaForm, HurstFunction, Trend, CAUCHY_TERMS, CAUCHY_TOL};
use crate::kernels::{d_f, phi_xx, Family, KernelModel, Normalization};
use crate::special::SpecialTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LassClass {
    FbmLimit,
    GammaLimit,
    DegenerateZero,
    Divergent,
}

/// Moments of one probe pair along the ρ sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `E[Y_u - Y_v]²` per ρ.
    pub moments: Vec<f64>,
    /// `E[Y_u Y_v]` per ρ.
    pub cross: Vec<f64>,
    pub trend: Trend,
    /// Predicted limit of `E[Y_u - Y_v]²`, when the case has one.
    pub predicted: Option<f64>,
    /// Predicted limit of `E[Y_u Y_v]`.
    pub cross_predicted: Option<f64>,
}

impl PairTrace {
    pub fn last(&self) -> f64 {
        *self.moments.last().expect("non-empty ρ list")
    }

    pub fn last_cross(&self) -> f64 {
        *self.cross.last().expect("non-empty ρ list")
    }

    /// `|last/predicted - 1|`.
    pub fn rel_error(&self) -> Option<f64> {
        self.predicted.map(|p| (self.last() / p - 1.0).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassReport {
    pub t0: Point,
    pub alpha: f64,
    pub hurst_t0: f64,
    pub rhos: Vec<f64>,
    pub pairs: Vec<PairTrace>,
    pub classification: LassClass,
    /// Relative spread `(max - min)/mean` of `last / |u-v|^{2H0}` over pairs.
    pub isotropy_spread: f64,
    /// Relative spread of `last cross / predicted cross` over pairs with a
    /// nonzero prediction; `None` without predictions.
    pub cross_spread: Option<f64>,
    /// Largest `|last/predicted - 1|` over pairs.
    pub max_rel_error: Option<f64>,
}

/// Six probe pairs from four vectors with positive entries in `(0, scale]`.
pub fn default_probes(dim: usize, scale: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let vecs: Vec<Vec<f64>> =
        (0..4).map(|k| (0..dim).map(|i| scale * (((k + i) % 4) + 1) as f64 / 4.0).collect()).collect();
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            out.push((vecs[a].clone(), vecs[b].clone()));
        }
    }
    out
}

fn rel_spread(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (hi - lo) / mean.abs()
}

fn check_rhos(rhos: &[f64]) -> Result<()> {
    if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0)) || rhos.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("ρ list must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn offset(t0: &[f64], rho: f64, u: &[f64]) -> Vec<f64> {
    t0.iter().zip(u).map(|(a, b)| a + rho * b).collect()
}

fn combine(trends: &[Trend]) -> Option<LassClass> {
    if trends.contains(&Trend::Divergent) {
        Some(LassClass::Divergent)
    } else if trends.iter().all(|t| *t == Trend::Zero) {
        Some(LassClass::DegenerateZero)
    } else {
        None
    }
}

/// The rescaled problem at one point: predicted half-limits per pair.
struct Prediction<'a> {
    case_fbm: bool,
    d: f64,
    curvature: f64,
    gamma: &'a GammaForm,
    h0: f64,
}

impl Prediction<'_> {
    /// Predicted limit of `½ E[Y_u - Y_v]²`.
    fn half(&self, u: &[f64], v: &[f64]) -> Option<f64> {
        if self.case_fbm {
            Some(self.d * geometry::distance(u, v).powf(2.0 * self.h0))
        } else {
            self.gamma.eval(u, v).map(|g| self.curvature * g * g)
        }
    }

    fn cross(&self, u: &[f64], v: &[f64]) -> Option<f64> {
        let zero = vec![0.0; u.len()];
        Some(self.half(u, &zero)? + self.half(v, &zero)? - self.half(u, v)?)
    }
}

/// Rescaled moments of a field at `t0`. The model is evaluated in the
/// representation normalization whatever its own setting.
pub fn lass_field(
    model: &KernelModel,
    t0: &[f64],
    alpha: f64,
    rhos: &[f64],
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<LassReport> {
    check_rhos(rhos)?;
    let gamma = match model.family() {
        Family::LevyFbm { .. } => GammaForm::Zero,
        Family::MbField { hurst, .. } => hurst.exponent_meta(t0).gamma,
        _ => return Err(Error::InvalidModel("lass_field needs a field model; use lass_sheet for sheets".into())),
    };
    let m = model.with_normalization(Normalization::Harmonizable)?;
    let table = m.table().expect("field models carry their table in this normalization");
    let h0 = m.hurst_values(t0)?[0];
    let pred = Prediction {
        case_fbm: alpha >= h0,
        d: d_f(2.0 * h0, table)?,
        curvature: phi_xx(2.0 * h0, geometry::norm(t0), table)?,
        gamma: &gamma,
        h0,
    };
    let mut pairs = Vec::with_capacity(probes.len());
    for (u, v) in probes {
        if u.len() != t0.len() || v.len() != t0.len() {
            return Err(Error::DimensionMismatch { expected: t0.len(), got: u.len().min(v.len()) });
        }
        let mut moments = Vec::with_capacity(rhos.len());
        let mut cross = Vec::with_capacity(rhos.len());
        for &rho in rhos {
            let (pu, pv) = (offset(t0, rho, u), offset(t0, rho, v));
            let norm = rho.powf(2.0 * alpha);
            let muv = m.sq_increment(&pu, &pv)? / norm;
            let mu = m.sq_increment(&pu, t0)? / norm;
            let mv = m.sq_increment(&pv, t0)? / norm;
            moments.push(muv);
            cross.push(0.5 * (mu + mv - muv));
        }
        let trend = classify_trend(rhos, &moments);
        pairs.push(PairTrace {
            u: u.clone(),
            v: v.clone(),
            moments,
            cross,
            trend,
            predicted: pred.half(u, v).map(|h| 2.0 * h),
            cross_predicted: pred.cross(u, v),
        });
    }
    let trends: Vec<Trend> = pairs.iter().map(|p| p.trend).collect();
    let classification =
        combine(&trends).unwrap_or(if pred.case_fbm { LassClass::FbmLimit } else { LassClass::GammaLimit });
    Ok(summarize(Point::new(t0.to_vec())?, alpha, h0, rhos, pairs, classification))
}

fn summarize(
    t0: Point,
    alpha: f64,
    h0: f64,
    rhos: &[f64],
    pairs: Vec<PairTrace>,
    classification: LassClass,
) -> LassReport {
    let iso: Vec<f64> = pairs.iter().map(|p| p.last() / geometry::distance(&p.u, &p.v).powf(2.0 * h0)).collect();
    let cross: Vec<f64> =
        pairs.iter().filter_map(|p| p.cross_predicted.filter(|c| *c != 0.0).map(|c| p.last_cross() / c)).collect();
    let errors: Vec<f64> = pairs.iter().filter_map(|p| p.rel_error()).collect();
    LassReport {
        t0,
        alpha,
        hurst_t0: h0,
        rhos: rhos.to_vec(),
        isotropy_spread: rel_spread(&iso),
        cross_spread: if cross.is_empty() { None } else { Some(rel_spread(&cross)) },
        max_rel_error: if errors.is_empty() { None } else { Some(errors.iter().fold(0.0, |a: f64, &b| a.max(b))) },
        pairs,
        classification,
    }
}

/// One axis of a sheet treated as a one-parameter problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisLass {
    pub axis: usize,
    pub report: LassReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetLassReport {
    pub t0: Point,
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub axes: Vec<AxisLass>,
    /// `E[Y_u Y_v]` of the full rectangular increment, per pair and ρ.
    pub full_cross: Vec<Vec<f64>>,
    /// Largest relative gap between the full moment and the product of the
    /// per-axis moments, per ρ.
    pub product_error: Vec<f64>,
    pub classification: LassClass,
}

/// `E[ΔX_{t0,a} ΔX_{t0,b}]` for rectangular increments over all axes; zero
/// as soon as either box is flat along some axis.
fn rect_cross(m: &KernelModel, t0: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    if a.iter().zip(t0).any(|(x, y)| x == y) || b.iter().zip(t0).any(|(x, y)| x == y) {
        return Ok(0.0);
    }
    let ca = signed_corners(t0, a);
    let cb = signed_corners(t0, b);
    let ha = ca.iter().map(|(_, p)| m.hurst_values(p)).collect::<Result<Vec<_>>>()?;
    let hb = cb.iter().map(|(_, p)| m.hurst_values(p)).collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    for ((sa, p), hp) in ca.iter().zip(&ha) {
        for ((sb, q), hq) in cb.iter().zip(&hb) {
            sum += sa * sb * m.cov_with(p, hp, q, hq);
        }
    }
    Ok(sum)
}

/// Per-axis rescaled moments of a sheet and the product structure of the
/// full rectangular increment, normalized by `ρ^{Σα_i}`.
pub fn lass_sheet(
    model: &KernelModel,
    t0: &[f64],
    alphas: &[f64],
    rhos: &[f64],
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<SheetLassReport> {
    check_rhos(rhos)?;
    let n = model.dim();
    if t0.len() != n || alphas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t0.len().min(alphas.len()) });
    }
    let hurst_fns: Vec<Option<HurstFunction>> = match model.family() {
        Family::FbSheet { hurst } => vec![None; hurst.len()],
        Family::MbSheet { hurst } => hurst.iter().cloned().map(Some).collect(),
        _ => return Err(Error::InvalidModel("lass_sheet needs a sheet model".into())),
    };
    let m = model.with_normalization(Normalization::Harmonizable)?;
    let table: &SpecialTable = m.table_1().expect("sheet models carry the one-dimensional table");
    let h_t0 = m.hurst_values(t0)?;
    let on_axis = |i: usize, x: f64| {
        let mut p = t0.to_vec();
        p[i] = x;
        p
    };
    let mut axes = Vec::with_capacity(n);
    for i in 0..n {
        let h0 = h_t0[i];
        let gamma = hurst_fns[i].as_ref().map_or(GammaForm::Zero, |h| h.exponent_meta(t0).gamma);
        let alpha = alphas[i];
        let pred = Prediction {
            case_fbm: alpha >= h0,
            d: d_f(2.0 * h0, table)?,
            curvature: phi_xx(2.0 * h0, t0[i].abs(), table)?,
            gamma: &gamma,
            h0,
        };
        let k = |a: f64, b: f64| -> Result<f64> {
            let (pa, pb) = (on_axis(i, a), on_axis(i, b));
            Ok(m.axis_factor(i, a, &m.hurst_values(&pa)?, b, &m.hurst_values(&pb)?))
        };
        let mut pairs = Vec::with_capacity(probes.len());
        for (u, v) in probes {
            let mut moments = Vec::with_capacity(rhos.len());
            let mut cross = Vec::with_capacity(rhos.len());
            let c = t0[i];
            for &rho in rhos {
                let (a, b) = (c + rho * u[i], c + rho * v[i]);
                let norm = rho.powf(2.0 * alpha);
                let kcc = k(c, c)?;
                let (kac, kbc) = (k(a, c)?, k(b, c)?);
                let (kaa, kbb, kab) = (k(a, a)?, k(b, b)?, k(a, b)?);
                moments.push(if a == b { 0.0 } else { (kaa + kbb - 2.0 * kab) / norm });
                cross.push((kab - kac - kbc + kcc) / norm);
            }
            let trend = classify_trend(rhos, &moments);
            let (ui, vi) = (axis_vec(n, i, u[i]), axis_vec(n, i, v[i]));
            pairs.push(PairTrace {
                u: vec![u[i]],
                v: vec![v[i]],
                moments,
                cross,
                trend,
                predicted: pred.half_axis(&ui, &vi, u[i], v[i]).map(|h| 2.0 * h),
                cross_predicted: pred.cross_axis(&ui, &vi, u[i], v[i]),
            });
        }
        let trends: Vec<Trend> = pairs.iter().map(|p| p.trend).collect();
        let class = combine(&trends).unwrap_or(if pred.case_fbm { LassClass::FbmLimit } else { LassClass::GammaLimit });
        let report = summarize(Point::new(vec![t0[i]])?, alpha, h0, rhos, pairs, class);
        axes.push(AxisLass { axis: i, report });
    }
    let total_alpha: f64 = alphas.iter().sum();
    let mut full_cross = Vec::with_capacity(probes.len());
    let mut product_error = vec![0.0f64; rhos.len()];
    for (p, (u, v)) in probes.iter().enumerate() {
        let mut row = Vec::with_capacity(rhos.len());
        for (j, &rho) in rhos.iter().enumerate() {
            let full = rect_cross(&m, t0, &offset(t0, rho, u), &offset(t0, rho, v))? / rho.powf(2.0 * total_alpha);
            let prod: f64 = axes.iter().map(|a| a.report.pairs[p].cross[j]).product();
            let gap = if full == prod { 0.0 } else { (full - prod).abs() / full.abs().max(prod.abs()) };
            product_error[j] = product_error[j].max(gap);
            row.push(full);
        }
        full_cross.push(row);
    }
    let classes: Vec<LassClass> = axes.iter().map(|a| a.report.classification).collect();
    let classification = if classes.contains(&LassClass::Divergent) {
        LassClass::Divergent
    } else if classes.contains(&LassClass::DegenerateZero) {
        LassClass::DegenerateZero
    } else if classes.contains(&LassClass::GammaLimit) {
        LassClass::GammaLimit
    } else {
        LassClass::FbmLimit
    };
    Ok(SheetLassReport {
        t0: Point::new(t0.to_vec())?,
        alphas: alphas.to_vec(),
        rhos: rhos.to_vec(),
        axes,
        full_cross,
        product_error,
        classification,
    })
}

fn axis_vec(n: usize, i: usize, x: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = x;
    e
}

impl Prediction<'_> {
    /// Axis version: the fBm part uses the scalar offsets, `Γ` the embedded vectors.
    fn half_axis(&self, ue: &[f64], ve: &[f64], u: f64, v: f64) -> Option<f64> {
        if self.case_fbm {
            Some(self.d * (u - v).abs().powf(2.0 * self.h0))
        } else {
            self.gamma.eval(ue, ve).map(|g| self.curvature * g * g)
        }
    }

    fn cross_axis(&self, ue: &[f64], ve: &[f64], u: f64, v: f64) -> Option<f64> {
        let zero = vec![0.0; ue.len()];
        Some(self.half_axis(ue, &zero, u, 0.0)? + self.half_axis(ve, &zero, v, 0.0)? - self.half_axis(ue, ve, u, v)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub t0: Point,
    pub alpha: f64,
    pub gamma: f64,
    pub rhos: Vec<f64>,
    /// `sup_{u≠v} E[Y_u - Y_v]² / |u-v|^{2γ}` per ρ.
    pub sup_per_rho: Vec<f64>,
    /// Lower edge of each pair-distance bin (powers of two times the probe step).
    pub bin_edges: Vec<f64>,
    /// Supremum over ρ and over the pairs of each bin.
    pub sup_per_bin: Vec<f64>,
    pub sup: f64,
    pub rho_trend: Trend,
    pub bin_trend: Trend,
    /// Neither the ρ sequence nor shrinking pair distances make the ratio grow.
    pub bounded: bool,
}

/// A sequence grows towards the small-key end when it neither settles nor
/// vanishes and some step of its tail increases. A slowly decreasing tail
/// is bounded by its first term even before it converges.
fn grows(keys: &[f64], values: &[f64], trend: Trend) -> bool {
    if trend != Trend::Divergent {
        return false;
    }
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    let tail = &idx[idx.len().saturating_sub(CAUCHY_TERMS)..];
    tail.windows(2).any(|w| values[w[1]] > values[w[0]] * (1.0 + CAUCHY_TOL))
}

/// Sweep of the tightness moment ratio over the pairs of a probe lattice
/// `[lo, hi]^N` with `points` nodes per axis. `gamma` defaults to `H(t0)`
/// when `α ≥ H(t0)` and to `β ∧ H(t0)` otherwise.
pub fn tightness_sweep(
    model: &KernelModel,
    t0: &[f64],
    alpha: f64,
    gamma: Option<f64>,
    probe_box: (f64, f64),
    points: usize,
    rhos: &[f64],
) -> Result<TightnessReport> {
    check_rhos(rhos)?;
    if points < 2 || !(probe_box.0 < probe_box.1) {
        return Err(Error::Config("probe box needs lo < hi and at least 2 points".into()));
    }
    let n = t0.len();
    if n != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: n });
    }
    let m = model.with_normalization(Normalization::Harmonizable)?;
    let h0 = m.hurst_values(t0)?.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let beta = match model.family() {
        Family::MbField { hurst, .. } => hurst.exponent_meta(t0).pair,
        Family::MbSheet { hurst } => {
            hurst.iter().map(|h| h.exponent_meta(t0).pair).fold(Exponent::Unbounded, Exponent::min)
        }
        _ => Exponent::Unbounded,
    };
    let gamma = gamma.unwrap_or(if alpha >= h0 { h0 } else { beta.wedge(h0) });
    let step = (probe_box.1 - probe_box.0) / (points - 1) as f64;
    let total = points.pow(n as u32);
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|mut f| {
            let mut p = vec![0.0; n];
            for a in (0..n).rev() {
                p[a] = probe_box.0 + step * (f % points) as f64;
                f /= points;
            }
            p
        })
        .collect();
    let max_dist = step * (points - 1) as f64 * (n as f64).sqrt();
    let bins = (max_dist / step).log2().floor() as usize + 1;
    let bin_edges: Vec<f64> = (0..bins).map(|b| step * 2f64.powi(b as i32)).collect();
    let mut sup_per_bin = vec![0.0f64; bins];
    let mut sup_per_rho = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let norm = rho.powf(2.0 * alpha);
        let pts: Vec<Vec<f64>> = nodes.iter().map(|u| offset(t0, rho, u)).collect();
        let hs = pts.iter().map(|p| m.hurst_values(p)).collect::<Result<Vec<_>>>()?;
        let var: Vec<f64> = pts.iter().zip(&hs).map(|(p, h)| m.cov_with(p, h, p, h)).collect();
        let mut sup = 0.0f64;
        for a in 0..total {
            for b in a + 1..total {
                let cab = m.cov_with(&pts[a], &hs[a], &pts[b], &hs[b]);
                let mom = (var[a] + var[b] - 2.0 * cab) / norm;
                let d = geometry::distance(&nodes[a], &nodes[b]);
                let ratio = mom / d.powf(2.0 * gamma);
                sup = sup.max(ratio);
                let bin = ((d / step).log2() + 1e-9).floor().max(0.0) as usize;
                sup_per_bin[bin.min(bins - 1)] = sup_per_bin[bin.min(bins - 1)].max(ratio);
            }
        }
        sup_per_rho.push(sup);
    }
    let rho_trend = classify_trend(rhos, &sup_per_rho);
    let bin_trend = classify_trend(&bin_edges, &sup_per_bin);
    let sup = sup_per_rho.iter().fold(0.0f64, |a, &b| a.max(b));
    let bounded =
        sup.is_finite() && !grows(rhos, &sup_per_rho, rho_trend) && !grows(&bin_edges, &sup_per_bin, bin_trend);
    Ok(TightnessReport {
        t0: Point::new(t0.to_vec())?,
        alpha,
        gamma,
        rhos: rhos.to_vec(),
        sup_per_rho,
        bin_edges,
        sup_per_bin,
        sup,
        bounded,
        rho_trend,
        bin_trend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_are_distinct_and_positive() {
        for n in 1..=3 {
            let p = default_probes(n, 1.0);
            assert_eq!(p.len(), 6);
            for (u, v) in &p {
                assert_ne!(u, v);
                assert!(u.iter().chain(v).all(|x| *x > 0.0));
            }
        }
    }

    #[test]
    fn rho_list_must_decrease() {
        let m = KernelModel::levy(0.5, 1).unwrap();
        assert!(lass_field(&m, &[1.0], 0.5, &[0.1, 0.2], &default_probes(1, 1.0)).is_err());
    }

    #[test]
    fn slow_decrease_is_bounded_but_increase_is_not() {
        let rhos: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
        let slow: Vec<f64> = rhos.iter().map(|r| 11.0 + r.sqrt()).collect();
        assert_eq!(classify_trend(&rhos, &slow), Trend::Divergent);
        assert!(!grows(&rhos, &slow, Trend::Divergent));
        let rising: Vec<f64> = rhos.iter().map(|r| 1.0 / r.sqrt()).collect();
        assert!(grows(&rhos, &rising, classify_trend(&rhos, &rising)));
    }
}
