//! Covariance kernels of the four field families and the bounds derived from
//! their second-order expansion.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{self, lattice, GridSpec, IndexBox, Point};
use crate::hurst::{Exponent, HurstFunction};
use crate::special::{radial_reference, radial_reference_log2, SpecialTable, HURST_MAX, HURST_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `½(|s|^{2H} + |t|^{2H} - |t-s|^{2H})` and its tensor form.
    #[default]
    Unit,
    /// Constants of the harmonizable representation, built from `D_N`.
    Harmonizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    LevyFbm { hurst: f64, dim: usize },
    FbSheet { hurst: Vec<f64> },
    MbField { hurst: HurstFunction, dim: usize },
    MbSheet { hurst: Vec<HurstFunction> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub normalization: Normalization,
}

impl ModelSpec {
    pub fn new(family: Family, normalization: Normalization) -> Self {
        ModelSpec { family, normalization }
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::LevyFbm { dim, .. } | Family::MbField { dim, .. } => *dim,
            Family::FbSheet { hurst } => hurst.len(),
            Family::MbSheet { hurst } => hurst.len(),
        }
    }

    pub fn is_sheet(&self) -> bool {
        matches!(self.family, Family::FbSheet { .. } | Family::MbSheet { .. })
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let in_range = |h: f64| (HURST_MIN..=HURST_MAX).contains(&h);
        match &self.family {
            Family::LevyFbm { hurst, .. } => {
                if !in_range(*hurst) {
                    return Err(Error::InvalidModel(format!("H = {hurst} outside [{HURST_MIN}, {HURST_MAX}]")));
                }
            }
            Family::FbSheet { hurst } => {
                if let Some(h) = hurst.iter().find(|h| !in_range(**h)) {
                    return Err(Error::InvalidModel(format!("H = {h} outside [{HURST_MIN}, {HURST_MAX}]")));
                }
            }
            Family::MbField { hurst, .. } => check_hurst_dim(hurst, dim)?,
            Family::MbSheet { hurst } => {
                for h in hurst {
                    check_hurst_dim(h, dim)?;
                }
            }
        }
        Ok(())
    }
}

fn check_hurst_dim(h: &HurstFunction, dim: usize) -> Result<()> {
    h.validate()?;
    match h.dim() {
        Some(d) if d != dim => Err(Error::DimensionMismatch { expected: dim, got: d }),
        _ => Ok(()),
    }
}

/// A validated model with the normalization tables it needs.
#[derive(Debug, Clone)]
pub struct KernelModel {
    spec: ModelSpec,
    table_n: Option<Arc<SpecialTable>>,
    table_1: Option<Arc<SpecialTable>>,
}

#[inline]
fn pw(y: f64, x: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y.powf(x)
    }
}

/// One-parameter fBm covariance `½(|s|^{2H} + |t|^{2H} - |t-s|^{2H})`.
#[inline]
pub fn fbm_cov(s: f64, t: f64, h: f64) -> f64 {
    let x = 2.0 * h;
    0.5 * (pw(s.abs(), x) + pw(t.abs(), x) - pw((t - s).abs(), x))
}

/// Lévy fractional Brownian field covariance, unit normalization.
pub fn levy_cov(s: &[f64], t: &[f64], h: f64) -> f64 {
    let x = 2.0 * h;
    0.5 * (pw(geometry::norm(s), x) + pw(geometry::norm(t), x) - pw(geometry::distance(s, t), x))
}

/// Fractional Brownian sheet covariance, unit normalization.
pub fn fbs_cov(s: &[f64], t: &[f64], h: &[f64]) -> f64 {
    s.iter().zip(t).zip(h).map(|((a, b), h)| fbm_cov(*a, *b, *h)).product()
}

pub fn d_f(x: f64, table: &SpecialTable) -> Result<f64> {
    table.eval(x, 0)
}

/// `D_N^{(order)}(x)`, `order ∈ {1, 2}`.
pub fn d_f_deriv(x: f64, table: &SpecialTable, order: usize) -> Result<f64> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidModel(format!("derivative order {order} not in {{1, 2}}")));
    }
    table.eval(x, order)
}

/// `φ(x, y) = D(x) y^x`.
pub fn phi(x: f64, y: f64, table: &SpecialTable) -> Result<f64> {
    Ok(d_f(x, table)? * pw(y, x))
}

/// `∂²φ/∂x² (x, y) = y^x (D ln²y + 2 D' ln y + D'')`; 0 at `y = 0`.
pub fn phi_xx(x: f64, y: f64, table: &SpecialTable) -> Result<f64> {
    let (d0, d1, d2) = (table.eval(x, 0)?, table.eval(x, 1)?, table.eval(x, 2)?);
    if y == 0.0 {
        return Ok(0.0);
    }
    let l = y.ln();
    Ok(y.powf(x) * (d0 * l * l + 2.0 * d1 * l + d2))
}

/// `Φ(t) = |t|^{2H} ∫ (1 - cos u_1)/|u|^{2H+N} (ln|t| - ln|u|)² du`, from the
/// tabulated derivatives. With `D'` the derivative in `x` this is
/// `|t|^{2H}(D ln²|t| + 2 D' ln|t| + D'')`.
pub fn phi_big(t: &[f64], h: f64, table: &SpecialTable) -> Result<f64> {
    let r = geometry::norm(t);
    if r == 0.0 {
        return Err(Error::Singular("Φ is undefined at t = 0".into()));
    }
    phi_xx(2.0 * h, r, table)
}

/// [`phi_big`] by direct quadrature of the single-integral form.
pub fn phi_big_reference(t: &[f64], h: f64) -> Result<f64> {
    let r = geometry::norm(t);
    if r == 0.0 {
        return Err(Error::Singular("Φ is undefined at t = 0".into()));
    }
    Ok(r.powf(2.0 * h) * radial_reference_log2(2.0 * h, t.len(), r.ln())?)
}

/// `C_{N,H}` of the harmonizable representation of the Lévy field.
pub fn harmonizable_constant(h: f64, dim: usize) -> Result<f64> {
    radial_reference(2.0 * h, dim)
}

/// Multifractional field covariance `D(x)[|s|^x + |t|^x - |t-s|^x]`, `x = H(s) + H(t)`.
pub fn mbf_cov(s: &[f64], t: &[f64], h: &HurstFunction, table: &SpecialTable) -> Result<f64> {
    let x = h.eval(s)? + h.eval(t)?;
    Ok(table.d(x) * bracket(geometry::norm(s), geometry::norm(t), geometry::distance(s, t), x))
}

/// Multifractional sheet covariance, the product of one-parameter factors.
pub fn mbs_cov(s: &[f64], t: &[f64], h: &[HurstFunction], table_1: &SpecialTable) -> Result<f64> {
    let mut out = 1.0;
    for (m, hm) in h.iter().enumerate() {
        let x = hm.eval(s)? + hm.eval(t)?;
        out *= table_1.d(x) * bracket(s[m].abs(), t[m].abs(), (t[m] - s[m]).abs(), x);
    }
    Ok(out)
}

#[inline]
fn bracket(ns: f64, nt: f64, nd: f64, x: f64) -> f64 {
    pw(ns, x) + pw(nt, x) - pw(nd, x)
}

impl KernelModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let harm = spec.normalization == Normalization::Harmonizable;
        let (need_n, need_1) = match &spec.family {
            Family::LevyFbm { .. } => (harm, false),
            Family::FbSheet { .. } => (false, harm),
            Family::MbField { .. } => (true, false),
            Family::MbSheet { .. } => (false, true),
        };
        let table_n = if need_n { Some(SpecialTable::shared(dim)?) } else { None };
        let table_1 = if need_1 { Some(SpecialTable::shared(1)?) } else { None };
        Ok(KernelModel { spec, table_n, table_1 })
    }

    pub fn levy(hurst: f64, dim: usize) -> Result<Self> {
        Self::new(ModelSpec::new(Family::LevyFbm { hurst, dim }, Normalization::Unit))
    }

    pub fn sheet(hurst: Vec<f64>) -> Result<Self> {
        Self::new(ModelSpec::new(Family::FbSheet { hurst }, Normalization::Unit))
    }

    /// Same family under another normalization.
    pub fn with_normalization(&self, normalization: Normalization) -> Result<Self> {
        Self::new(ModelSpec { normalization, ..self.spec.clone() })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> &Family {
        &self.spec.family
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn normalization(&self) -> Normalization {
        self.spec.normalization
    }

    /// Table of `D_N` for the field dimension, when the model uses one.
    pub fn table(&self) -> Option<&SpecialTable> {
        self.table_n.as_deref()
    }

    /// Table of `D_1`, when the model uses one.
    pub fn table_1(&self) -> Option<&SpecialTable> {
        self.table_1.as_deref()
    }

    /// Hex SHA-256 of the tables in use, concatenated.
    pub fn table_checksums(&self) -> Vec<String> {
        self.table_n.iter().chain(self.table_1.iter()).map(|t| t.checksum()).collect()
    }

    /// 64-bit digest of the canonical JSON description.
    pub fn descriptor_hash(&self) -> u64 {
        let json = serde_json::to_vec(&self.spec).expect("model spec serializes");
        let digest = Sha256::digest(json);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Hurst values at `p`: one scalar for fields, one per axis for sheets.
    pub fn hurst_values(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        match &self.spec.family {
            Family::LevyFbm { hurst, .. } => Ok(vec![*hurst]),
            Family::FbSheet { hurst } => Ok(hurst.clone()),
            Family::MbField { hurst, .. } => Ok(vec![hurst.eval(p)?]),
            Family::MbSheet { hurst } => hurst.iter().map(|h| h.eval(p)).collect(),
        }
    }

    /// Kernel value given precomputed Hurst values at both points.
    pub fn cov_with(&self, s: &[f64], hs: &[f64], t: &[f64], ht: &[f64]) -> f64 {
        let harm = self.spec.normalization == Normalization::Harmonizable;
        match &self.spec.family {
            Family::LevyFbm { hurst, .. } => {
                let c = levy_cov(s, t, *hurst);
                if harm {
                    2.0 * self.d_n(2.0 * hurst) * c
                } else {
                    c
                }
            }
            Family::FbSheet { .. } | Family::MbSheet { .. } => {
                (0..s.len()).map(|m| self.axis_factor(m, s[m], hs, t[m], ht)).product()
            }
            Family::MbField { .. } => {
                let x = hs[0] + ht[0];
                let mut c = self.d_n(x) * bracket(geometry::norm(s), geometry::norm(t), geometry::distance(s, t), x);
                if !harm {
                    c /= 2.0 * (self.d_n(2.0 * hs[0]) * self.d_n(2.0 * ht[0])).sqrt();
                }
                c
            }
        }
    }

    /// Factor of axis `m` in the tensor kernel of a sheet, given the
    /// coordinates on that axis and the Hurst vectors at both points.
    /// Returns 1 for fields.
    pub fn axis_factor(&self, m: usize, s: f64, hs: &[f64], t: f64, ht: &[f64]) -> f64 {
        let harm = self.spec.normalization == Normalization::Harmonizable;
        match &self.spec.family {
            Family::FbSheet { hurst } => {
                let c = fbm_cov(s, t, hurst[m]);
                if harm {
                    2.0 * self.d_1(2.0 * hurst[m]) * c
                } else {
                    c
                }
            }
            Family::MbSheet { .. } => {
                let x = hs[m] + ht[m];
                let c = self.d_1(x) * bracket(s.abs(), t.abs(), (t - s).abs(), x);
                if harm {
                    c
                } else {
                    c / (2.0 * (self.d_1(2.0 * hs[m]) * self.d_1(2.0 * ht[m])).sqrt())
                }
            }
            _ => 1.0,
        }
    }

    fn d_n(&self, x: f64) -> f64 {
        self.table_n.as_ref().expect("model built with its D_N table").d(x)
    }

    fn d_1(&self, x: f64) -> f64 {
        self.table_1.as_ref().expect("model built with its D_1 table").d(x)
    }

    pub fn cov(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        let hs = self.hurst_values(s)?;
        let ht = self.hurst_values(t)?;
        Ok(self.cov_with(s, &hs, t, &ht))
    }

    pub fn variance(&self, p: &[f64]) -> Result<f64> {
        self.cov(p, p)
    }

    /// `E[X_t - X_s]²`; exactly 0 when `s == t`.
    pub fn sq_increment(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        if s == t {
            self.hurst_values(s)?;
            return Ok(0.0);
        }
        let hs = self.hurst_values(s)?;
        let ht = self.hurst_values(t)?;
        Ok(self.cov_with(s, &hs, s, &hs) + self.cov_with(t, &ht, t, &ht) - 2.0 * self.cov_with(s, &hs, t, &ht))
    }

    /// `E[ΔX_A ΔX_B]` for rectangular increments over boxes `A` and `B`.
    pub fn increment_cov(&self, a: &IndexBox, b: &IndexBox) -> Result<f64> {
        let ca = self.prepared_corners(a)?;
        let cb = self.prepared_corners(b)?;
        let mut sum = 0.0;
        for (sa, p, hp) in &ca {
            for (sb, q, hq) in &cb {
                sum += sa * sb * self.cov_with(p.coords(), hp, q.coords(), hq);
            }
        }
        Ok(sum)
    }

    fn prepared_corners(&self, bx: &IndexBox) -> Result<Vec<(f64, Point, Vec<f64>)>> {
        bx.signed_corners()
            .into_iter()
            .map(|(sign, p)| {
                let h = self.hurst_values(p.coords())?;
                Ok((sign, p, h))
            })
            .collect()
    }
}

/// Constants of the two-sided second-moment bounds on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub lower: Point,
    pub upper: Point,
    /// `inf D(2H(t))`.
    pub k1: f64,
    /// `inf Φ(t)`.
    pub k2: f64,
    /// `sup Φ(t)`.
    pub l1: f64,
    /// `sup D(2H(t))`.
    pub l2: f64,
    /// Coefficient of `|t-s|^{2H(t)}` in the upper bound.
    pub big_k: f64,
    /// Coefficient of `(H(t)-H(s))²` in the upper bound.
    pub big_l: f64,
}

/// Largest violations of the lower bounds over a lattice; both are `≤ 0`
/// when the bounds hold everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub first: f64,
    pub second: f64,
    pub upper: f64,
}

struct LatticeTerms {
    points: Vec<Point>,
    hurst: Vec<f64>,
}

fn field_terms(model: &KernelModel, grid: &GridSpec) -> Result<LatticeTerms> {
    if !matches!(model.family(), Family::MbField { .. }) {
        return Err(Error::InvalidModel("bound constants are defined for multifractional fields".into()));
    }
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    let points = lattice(grid)?;
    let hurst = points.iter().map(|p| Ok(model.hurst_values(p.coords())?[0])).collect::<Result<Vec<_>>>()?;
    Ok(LatticeTerms { points, hurst })
}

impl BoundConstants {
    /// Evaluate the constants on the lattice of `grid`. The kernel is taken in
    /// `Harmonizable` normalization, in which the constants are expressed.
    ///
    /// `K` and `L` are scaled along the direction `(2 l2, 2 l1)` suggested by
    /// the expansion `E[X_t-X_s]² ≈ 2D|t-s|^{2H} + 2Φ(H(t)-H(s))²`: the
    /// smallest feasible multiple over all lattice pairs, plus 10%.
    pub fn compute(model: &KernelModel, grid: &GridSpec) -> Result<Self> {
        let model = model.with_normalization(Normalization::Harmonizable)?;
        let lt = field_terms(&model, grid)?;
        let table = model.table().expect("field model has a D_N table");
        let (mut k1, mut l2) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut k2, mut l1) = (f64::INFINITY, f64::NEG_INFINITY);
        for (p, &h) in lt.points.iter().zip(&lt.hurst) {
            let d = table.d(2.0 * h);
            let big_phi = phi_big(p.coords(), h, table)?;
            k1 = k1.min(d);
            l2 = l2.max(d);
            k2 = k2.min(big_phi);
            l1 = l1.max(big_phi);
        }
        let mut scale = 0.0f64;
        for_each_pair(&model, &lt, |e, a, b| {
            let denom = 2.0 * l2 * a + 2.0 * l1 * b;
            if denom > 0.0 {
                scale = scale.max(e / denom);
            }
        })?;
        Ok(BoundConstants {
            lower: grid.lower.clone(),
            upper: grid.upper.clone(),
            k1,
            k2,
            l1,
            l2,
            big_k: 1.1 * scale * 2.0 * l2,
            big_l: 1.1 * scale * 2.0 * l1,
        })
    }

    /// Worst violations of `E ≥ k1 a - l1 b`, `E ≥ k2 b - l2 a` and
    /// `E ≤ K a + L b` over all ordered lattice pairs, with
    /// `a = |t-s|^{2H(t)}` and `b = (H(t)-H(s))²`.
    pub fn check(&self, model: &KernelModel, grid: &GridSpec) -> Result<LowerBoundCheck> {
        let model = model.with_normalization(Normalization::Harmonizable)?;
        let lt = field_terms(&model, grid)?;
        let mut out = LowerBoundCheck { first: f64::NEG_INFINITY, second: f64::NEG_INFINITY, upper: f64::NEG_INFINITY };
        for_each_pair(&model, &lt, |e, a, b| {
            out.first = out.first.max(self.k1 * a - self.l1 * b - e);
            out.second = out.second.max(self.k2 * b - self.l2 * a - e);
            out.upper = out.upper.max(e - self.big_k * a - self.big_l * b);
        })?;
        Ok(out)
    }
}

/// Calls `f(E[X_t-X_s]², |t-s|^{2H(t)}, (H(t)-H(s))²)` for every ordered pair `s != t`.
fn for_each_pair(model: &KernelModel, lt: &LatticeTerms, mut f: impl FnMut(f64, f64, f64)) -> Result<()> {
    let n = lt.points.len();
    let var: Vec<f64> = (0..n)
        .map(|i| {
            let p = lt.points[i].coords();
            let h = [lt.hurst[i]];
            model.cov_with(p, &h, p, &h)
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (s, t) = (lt.points[i].coords(), lt.points[j].coords());
            let (hs, ht) = (lt.hurst[i], lt.hurst[j]);
            let e = var[i] + var[j] - 2.0 * model.cov_with(s, &[hs], t, &[ht]);
            let a = geometry::distance(s, t).powf(2.0 * ht);
            let b = (ht - hs) * (ht - hs);
            f(e, a, b);
        }
    }
    Ok(())
}

/// Supremum over lattice pairs of `E[X_t-X_s]² / |t-s|^{2γ(t)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub sup_ratio: f64,
    pub argmax: (Point, Point),
    pub pairs: usize,
}

/// Moment-bound check with `γ(t) = β ∧ H(t)` (fields) or `β ∧ min_i H_i(t)`
/// (sheets).
pub fn moment_bound_check(model: &KernelModel, grid: &GridSpec, beta: Exponent) -> Result<MomentBoundReport> {
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    let points = lattice(grid)?;
    let hurst = points.iter().map(|p| model.hurst_values(p.coords())).collect::<Result<Vec<_>>>()?;
    let var: Vec<f64> = points.iter().zip(&hurst).map(|(p, h)| model.cov_with(p.coords(), h, p.coords(), h)).collect();
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    let mut pairs = 0;
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let (s, t) = (points[i].coords(), points[j].coords());
            let e = var[i] + var[j] - 2.0 * model.cov_with(s, &hurst[i], t, &hurst[j]);
            let h_min = hurst[j].iter().cloned().fold(f64::INFINITY, f64::min);
            let gamma = beta.wedge(h_min);
            let ratio = e / geometry::distance(s, t).powf(2.0 * gamma);
            pairs += 1;
            if ratio > best.0 {
                best = (ratio, i, j);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::InvalidGrid("lattice has a single point".into()));
    }
    Ok(MomentBoundReport { sup_ratio: best.0, argmax: (points[best.1].clone(), points[best.2].clone()), pairs })
}
