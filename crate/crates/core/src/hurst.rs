//! Hurst parameter functions and the analytic regularity of each family.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, GridSpec};
use crate::special::{HURST_MAX, HURST_MIN};

/// Number of trailing terms inspected by [`classify_trend`].
pub const CAUCHY_TERMS: usize = 4;
/// Relative spread below which the trailing terms count as converged.
pub const CAUCHY_TOL: f64 = 1e-3;

pub const DEFAULT_WEIERSTRASS_TERMS: usize = 20;

fn default_terms() -> usize {
    DEFAULT_WEIERSTRASS_TERMS
}

/// A family of parameter functions. Every family is evaluated and then
/// clamped to `[HURST_MIN, HURST_MAX]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HurstFamily {
    Constant {
        value: f64,
    },
    /// `offset + <gradient, t>`.
    AffineClamped {
        gradient: Vec<f64>,
        offset: f64,
    },
    /// `base + amplitude * sin(frequency * Σ t_i)`.
    SmoothSine {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `base + sqrt(|t - anchor|)`.
    SqrtShifted {
        base: f64,
        anchor: Vec<f64>,
    },
    /// `base + amplitude * Σ_{m<terms} λ^{-βm} cos(λ^m t_{m mod N})`.
    WeierstrassLike {
        base: f64,
        amplitude: f64,
        beta: f64,
        lacunarity: f64,
        #[serde(default = "default_terms")]
        terms: usize,
    },
    /// Values on a lattice, interpolated multilinearly (`order = 1`) or with
    /// tensor Catmull–Rom cubics (`order = 3`).
    TableLookup {
        grid: GridSpec,
        values: Vec<f64>,
        order: u8,
    },
}

/// Box on which a Hurst function may be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidHurst("domain bounds must be non-empty and of equal length".into()));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                return Err(Error::InvalidHurst(format!("bad domain axis [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.len() == self.dim()
            && t.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstFunction {
    family: HurstFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<Domain>,
}

/// Hölder-type exponent; `Unbounded` sorts above every finite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Unbounded,
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Exponent::Unbounded, Exponent::Unbounded) => Some(Ordering::Equal),
            (Exponent::Unbounded, Exponent::Finite(_)) => Some(Ordering::Greater),
            (Exponent::Finite(_), Exponent::Unbounded) => Some(Ordering::Less),
            (Exponent::Finite(a), Exponent::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(v),
            Exponent::Unbounded => None,
        }
    }

    pub fn min(self, other: Exponent) -> Exponent {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `self ∧ h`.
    pub fn wedge(self, h: f64) -> f64 {
        match self {
            Exponent::Finite(v) => v.min(h),
            Exponent::Unbounded => h,
        }
    }
}

/// Form of the limit `Γ(u, v) = lim |H(t0+ρu) - H(t0+ρv)| / ρ^{β_uv}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GammaForm {
    /// H is locally constant.
    Zero,
    /// `|<gradient, u - v>|`.
    Linear { gradient: Vec<f64> },
    /// `|sqrt|u| - sqrt|v||`.
    SqrtDistance,
    /// No limit (or none known in closed form).
    Undefined,
}

impl GammaForm {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> Option<f64> {
        match self {
            GammaForm::Zero => Some(0.0),
            GammaForm::Linear { gradient } => {
                Some(gradient.iter().zip(u.iter().zip(v)).map(|(g, (a, b))| g * (a - b)).sum::<f64>().abs())
            }
            GammaForm::SqrtDistance => Some((geometry::norm(u).sqrt() - geometry::norm(v).sqrt()).abs()),
            GammaForm::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentMeta {
    pub pointwise: Exponent,
    pub local: Exponent,
    /// `β_{ε_i}(t0)` for each coordinate axis.
    pub directional: Vec<Exponent>,
    /// `inf_{u,v} β_{uv}(t0)`.
    pub pair: Exponent,
    pub gamma: GammaForm,
}

/// Outcome of a limit classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trend", content = "limit", rename_all = "snake_case")]
pub enum Trend {
    Converged(f64),
    Zero,
    Divergent,
}

/// Classify the behaviour of `values[k]` as `rhos[k] → 0`.
///
/// The last [`CAUCHY_TERMS`] terms decide: a relative spread below
/// [`CAUCHY_TOL`] means convergence; otherwise a monotone decrease whose
/// Aitken extrapolation lands near 0 is `Zero`, and anything else (growth,
/// oscillation, or a slow approach to a nonzero value) is `Divergent`.
pub fn classify_trend(rhos: &[f64], values: &[f64]) -> Trend {
    assert_eq!(rhos.len(), values.len());
    let n = values.len().min(CAUCHY_TERMS);
    if n == 0 {
        return Trend::Divergent;
    }
    let order: Vec<usize> = {
        // Sort by decreasing ρ so the tail is the small-ρ end regardless of input order.
        let mut idx: Vec<usize> = (0..rhos.len()).collect();
        idx.sort_by(|&a, &b| rhos[b].total_cmp(&rhos[a]));
        idx
    };
    let tail: Vec<f64> = order[order.len() - n..].iter().map(|&i| values[i]).collect();
    if tail.iter().any(|v| !v.is_finite()) {
        return Trend::Divergent;
    }
    let max_abs = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Trend::Zero;
    }
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = tail.iter().sum::<f64>() / n as f64;
    if (hi - lo) <= CAUCHY_TOL * mean.abs() {
        return Trend::Converged(tail[n - 1]);
    }
    let decreasing = tail.windows(2).all(|w| w[1].abs() < w[0].abs());
    if decreasing
        && tail[n - 1].abs() < tail[0].abs() * (1.0 - CAUCHY_TOL)
        && aitken_limit(&tail).is_none_or(|l| l.abs() < 0.5 * tail[n - 1].abs())
    {
        Trend::Zero
    } else {
        Trend::Divergent
    }
}

/// Aitken Δ² extrapolation from the last three terms; `None` when the
/// differences do not shrink geometrically.
fn aitken_limit(tail: &[f64]) -> Option<f64> {
    let k = tail.len();
    if k < 3 {
        return None;
    }
    let (a, b, c) = (tail[k - 3], tail[k - 2], tail[k - 1]);
    let q = (c - b) / (b - a);
    if !(q > 0.0 && q < 1.0) {
        return None;
    }
    Some(c + (c - b) * q / (1.0 - q))
}

fn check_param(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidHurst(format!("{name} must be finite")))
    }
}

impl HurstFunction {
    /// Constant function, valid in any dimension.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(HurstFamily::Constant { value }, None)
    }

    /// Build and validate. Non-constant families need a declared domain on
    /// which clamping must be inactive; this is checked on a dense lattice.
    pub fn new(family: HurstFamily, domain: Option<Domain>) -> Result<Self> {
        let f = HurstFunction { family, domain };
        f.validate()?;
        Ok(f)
    }

    pub fn family(&self) -> &HurstFamily {
        &self.family
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    /// Dimension implied by the parameters, if any.
    pub fn dim(&self) -> Option<usize> {
        if let Some(d) = &self.domain {
            return Some(d.dim());
        }
        match &self.family {
            HurstFamily::AffineClamped { gradient, .. } => Some(gradient.len()),
            HurstFamily::SqrtShifted { anchor, .. } => Some(anchor.len()),
            HurstFamily::TableLookup { grid, .. } => Some(grid.dim()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.domain {
            d.validate()?;
        }
        let dim = self.dim();
        match &self.family {
            HurstFamily::Constant { value } => {
                if !(HURST_MIN..=HURST_MAX).contains(value) {
                    return Err(Error::InvalidHurst(format!("constant {value} outside [{HURST_MIN}, {HURST_MAX}]")));
                }
                return Ok(());
            }
            HurstFamily::AffineClamped { gradient, offset } => {
                check_param("offset", *offset)?;
                if gradient.is_empty() || gradient.iter().any(|g| !g.is_finite()) {
                    return Err(Error::InvalidHurst("gradient must be non-empty and finite".into()));
                }
            }
            HurstFamily::SmoothSine { base, amplitude, frequency } => {
                check_param("base", *base)?;
                check_param("amplitude", *amplitude)?;
                check_param("frequency", *frequency)?;
            }
            HurstFamily::SqrtShifted { base, anchor } => {
                check_param("base", *base)?;
                if anchor.is_empty() || anchor.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidHurst("anchor must be non-empty and finite".into()));
                }
            }
            HurstFamily::WeierstrassLike { base, amplitude, beta, lacunarity, terms } => {
                check_param("base", *base)?;
                check_param("amplitude", *amplitude)?;
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::InvalidHurst(format!("beta {beta} outside (0, 1]")));
                }
                if !(*lacunarity >= 2.0 && lacunarity.is_finite()) {
                    return Err(Error::InvalidHurst(format!("lacunarity {lacunarity} below 2")));
                }
                if *terms == 0 {
                    return Err(Error::InvalidHurst("terms must be positive".into()));
                }
            }
            HurstFamily::TableLookup { grid, values, order } => {
                grid.validate()?;
                if values.len() != grid.len() {
                    return Err(Error::InvalidHurst(format!(
                        "table has {} values for a {}-point grid",
                        values.len(),
                        grid.len()
                    )));
                }
                if !matches!(order, 1 | 3) {
                    return Err(Error::InvalidHurst(format!("interpolation order {order} not in {{1, 3}}")));
                }
            }
        }
        let domain = self
            .domain
            .as_ref()
            .ok_or_else(|| Error::InvalidHurst("non-constant Hurst functions need a declared domain".into()))?;
        if let Some(d) = dim {
            if d != domain.dim() {
                return Err(Error::InvalidHurst(format!("parameters are {d}-dimensional, domain is {}", domain.dim())));
            }
        }
        if let HurstFamily::TableLookup { grid, .. } = &self.family {
            let inside = domain
                .lower
                .iter()
                .zip(&domain.upper)
                .enumerate()
                .all(|(i, (lo, hi))| grid.lower.coords()[i] <= *lo && *hi <= grid.upper.coords()[i]);
            if !inside {
                return Err(Error::InvalidHurst("table grid does not cover the domain".into()));
            }
        }
        self.check_clamp_inactive(domain)
    }

    fn check_clamp_inactive(&self, domain: &Domain) -> Result<()> {
        let n = domain.dim();
        let per_axis = match n {
            1 => 257,
            2 => 65,
            _ => 17,
        };
        let mut idx = vec![0usize; n];
        let mut t = vec![0.0; n];
        loop {
            for i in 0..n {
                let (lo, hi) = (domain.lower[i], domain.upper[i]);
                t[i] = if idx[i] + 1 == per_axis { hi } else { lo + (hi - lo) * idx[i] as f64 / (per_axis - 1) as f64 };
            }
            let h = self.raw(&t);
            if !(HURST_MIN..=HURST_MAX).contains(&h) {
                return Err(Error::InvalidHurst(format!(
                    "value {h} at {t:?} leaves [{HURST_MIN}, {HURST_MAX}]; shrink the domain or the amplitude"
                )));
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return Ok(());
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// Family formula without clamping or domain checks.
    pub fn raw(&self, t: &[f64]) -> f64 {
        match &self.family {
            HurstFamily::Constant { value } => *value,
            HurstFamily::AffineClamped { gradient, offset } => {
                offset + gradient.iter().zip(t).map(|(g, x)| g * x).sum::<f64>()
            }
            HurstFamily::SmoothSine { base, amplitude, frequency } => {
                base + amplitude * (frequency * t.iter().sum::<f64>()).sin()
            }
            HurstFamily::SqrtShifted { base, anchor } => base + geometry::distance(t, anchor).sqrt(),
            HurstFamily::WeierstrassLike { base, amplitude, beta, lacunarity, terms } => {
                let n = t.len();
                let mut sum = 0.0;
                let mut scale = 1.0f64;
                for m in 0..*terms {
                    sum += scale.powf(-beta) * (scale * t[m % n]).cos();
                    scale *= lacunarity;
                }
                base + amplitude * sum
            }
            HurstFamily::TableLookup { grid, values, order } => table_interp(grid, values, *order, t),
        }
    }

    /// `H(t)`, clamped to `[HURST_MIN, HURST_MAX]`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        if let Some(d) = &self.domain {
            if t.len() != d.dim() {
                return Err(Error::DimensionMismatch { expected: d.dim(), got: t.len() });
            }
            if !d.contains(t) {
                return Err(Error::OutsideDomain { point: t.to_vec(), lower: d.lower.clone(), upper: d.upper.clone() });
            }
        }
        Ok(self.raw(t).clamp(HURST_MIN, HURST_MAX))
    }

    /// Analytic regularity of `H` at `t0`.
    pub fn exponent_meta(&self, t0: &[f64]) -> ExponentMeta {
        let n = t0.len();
        let unbounded = ExponentMeta {
            pointwise: Exponent::Unbounded,
            local: Exponent::Unbounded,
            directional: vec![Exponent::Unbounded; n],
            pair: Exponent::Unbounded,
            gamma: GammaForm::Zero,
        };
        let uniform = |beta: f64, gamma: GammaForm| ExponentMeta {
            pointwise: Exponent::Finite(beta),
            local: Exponent::Finite(beta),
            directional: (0..n).map(|i| self.directional_exponent(t0, &unit(n, i))).collect(),
            pair: Exponent::Finite(beta),
            gamma,
        };
        match &self.family {
            HurstFamily::Constant { .. } => unbounded,
            HurstFamily::AffineClamped { gradient, .. } => {
                if gradient.iter().all(|g| *g == 0.0) {
                    unbounded
                } else {
                    uniform(1.0, GammaForm::Linear { gradient: gradient.clone() })
                }
            }
            HurstFamily::SmoothSine { amplitude, frequency, .. } => {
                if *amplitude == 0.0 || *frequency == 0.0 {
                    return unbounded;
                }
                let slope = amplitude * frequency * (frequency * t0.iter().sum::<f64>()).cos();
                if slope == 0.0 {
                    uniform(2.0, GammaForm::Undefined)
                } else {
                    uniform(1.0, GammaForm::Linear { gradient: vec![slope; n] })
                }
            }
            HurstFamily::SqrtShifted { anchor, .. } => {
                let r = geometry::distance(t0, anchor);
                if r == 0.0 {
                    uniform(0.5, GammaForm::SqrtDistance)
                } else {
                    let gradient = t0.iter().zip(anchor).map(|(x, a)| (x - a) / (2.0 * r.sqrt() * r)).collect();
                    uniform(1.0, GammaForm::Linear { gradient })
                }
            }
            HurstFamily::WeierstrassLike { amplitude, beta, .. } => {
                if *amplitude == 0.0 {
                    unbounded
                } else {
                    uniform(*beta, GammaForm::Undefined)
                }
            }
            HurstFamily::TableLookup { values, .. } => {
                if values.iter().all(|v| *v == values[0]) {
                    unbounded
                } else {
                    uniform(1.0, GammaForm::Undefined)
                }
            }
        }
    }

    /// `β_u(t0)` for a direction `u`.
    pub fn directional_exponent(&self, t0: &[f64], u: &[f64]) -> Exponent {
        let dot = |g: &[f64]| g.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        match &self.family {
            HurstFamily::Constant { .. } => Exponent::Unbounded,
            HurstFamily::AffineClamped { gradient, .. } => {
                if dot(gradient) == 0.0 {
                    Exponent::Unbounded
                } else {
                    Exponent::Finite(1.0)
                }
            }
            HurstFamily::SmoothSine { amplitude, frequency, .. } => {
                let along: f64 = u.iter().sum();
                if *amplitude == 0.0 || *frequency == 0.0 || along == 0.0 {
                    Exponent::Unbounded
                } else if (frequency * t0.iter().sum::<f64>()).cos() == 0.0 {
                    Exponent::Finite(2.0)
                } else {
                    Exponent::Finite(1.0)
                }
            }
            HurstFamily::SqrtShifted { anchor, .. } => {
                if geometry::distance(t0, anchor) == 0.0 {
                    Exponent::Finite(0.5)
                } else {
                    let g: Vec<f64> = t0.iter().zip(anchor).map(|(x, a)| x - a).collect();
                    // Orthogonal to the radius the distance changes quadratically.
                    Exponent::Finite(if dot(&g) == 0.0 { 2.0 } else { 1.0 })
                }
            }
            HurstFamily::WeierstrassLike { amplitude, beta, .. } => {
                if *amplitude == 0.0 {
                    Exponent::Unbounded
                } else {
                    Exponent::Finite(*beta)
                }
            }
            HurstFamily::TableLookup { values, .. } => {
                if values.iter().all(|v| *v == values[0]) {
                    Exponent::Unbounded
                } else {
                    Exponent::Finite(1.0)
                }
            }
        }
    }

    /// Ratios `|H(t0+ρu) - H(t0+ρv)| / ρ^α` with `α = inf β_uv(t0)`, and
    /// their classification.
    pub fn gamma_limit(&self, t0: &[f64], u: &[f64], v: &[f64], rhos: &[f64]) -> Result<(Vec<f64>, Trend)> {
        let alpha = self.exponent_meta(t0).pair;
        let mut ratios = Vec::with_capacity(rhos.len());
        for &rho in rhos {
            let a = self.eval(&offset(t0, rho, u))?;
            let b = self.eval(&offset(t0, rho, v))?;
            let diff = (a - b).abs();
            ratios.push(match alpha {
                Exponent::Finite(al) => diff / rho.powf(al),
                Exponent::Unbounded => diff,
            });
        }
        let trend = classify_trend(rhos, &ratios);
        Ok((ratios, trend))
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn offset(t0: &[f64], rho: f64, u: &[f64]) -> Vec<f64> {
    t0.iter().zip(u).map(|(a, b)| a + rho * b).collect()
}

fn table_interp(grid: &GridSpec, values: &[f64], order: u8, t: &[f64]) -> f64 {
    let n = grid.dim();
    // Per axis: (node indices, weights).
    let mut stencils: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for (axis, &x) in t.iter().enumerate().take(n) {
        let res = grid.resolution[axis];
        let lo = grid.lower.coords()[axis];
        let h = grid.spacing(axis);
        let pos = ((x - lo) / h).clamp(0.0, (res - 1) as f64);
        let i = (pos.floor() as usize).min(res - 2);
        let f = pos - i as f64;
        let st = if order == 1 {
            vec![(i, 1.0 - f), (i + 1, f)]
        } else {
            let f2 = f * f;
            let f3 = f2 * f;
            let w = [
                0.5 * (-f3 + 2.0 * f2 - f),
                0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
                0.5 * (-3.0 * f3 + 4.0 * f2 + f),
                0.5 * (f3 - f2),
            ];
            // Ghost nodes beyond the ends are linear extrapolations.
            let last = res - 1;
            let mut st = Vec::with_capacity(6);
            for (k, wk) in w.iter().enumerate() {
                match (i + k).checked_sub(1) {
                    None => st.extend([(0, 2.0 * wk), (1, -wk)]),
                    Some(j) if j > last => st.extend([(last, 2.0 * wk), (last - 1, -wk)]),
                    Some(j) => st.push((j, *wk)),
                }
            }
            st
        };
        stencils.push(st);
    }
    let mut total = 0.0;
    let mut pick = vec![0usize; n];
    let mut idx = vec![0usize; n];
    loop {
        let mut w = 1.0;
        for a in 0..n {
            let (node, wt) = stencils[a][pick[a]];
            idx[a] = node;
            w *= wt;
        }
        total += w * values[grid.ravel(&idx)];
        let mut a = n;
        loop {
            if a == 0 {
                return total;
            }
            a -= 1;
            pick[a] += 1;
            if pick[a] < stencils[a].len() {
                break;
            }
            pick[a] = 0;
        }
    }
}

/// `H(t) = 3/4 + sqrt(|t - anchor|)` on `[anchor, anchor + width]`.
pub fn sqrt_example(anchor: Vec<f64>, width: f64) -> Result<HurstFunction> {
    let upper = anchor.iter().map(|a| a + width).collect();
    HurstFunction::new(
        HurstFamily::SqrtShifted { base: 0.75, anchor: anchor.clone() },
        Some(Domain::new(anchor, upper)?),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn dom(lo: &[f64], hi: &[f64]) -> Option<Domain> {
        Some(Domain::new(lo.to_vec(), hi.to_vec()).unwrap())
    }

    #[test]
    fn constant_eval() {
        let h = HurstFunction::constant(0.6).unwrap();
        assert_eq!(h.eval(&[0.3]).unwrap(), 0.6);
        assert_eq!(h.eval(&[1.0, 7.0]).unwrap(), 0.6);
        assert!(HurstFunction::constant(0.99).is_err());
    }

    #[test]
    fn sqrt_example_clamps_outside_declared_domain() {
        // On [0, 1/4] the raw value reaches 1.25; the instance is rejected.
        let wide = HurstFunction::new(HurstFamily::SqrtShifted { base: 0.75, anchor: vec![0.0] }, dom(&[0.0], &[0.25]));
        assert!(matches!(wide, Err(Error::InvalidHurst(_))));
        // The raw formula at 1/16 is exactly 1, which the clamp maps to μ.
        let f = HurstFunction { family: HurstFamily::SqrtShifted { base: 0.75, anchor: vec![0.0] }, domain: None };
        assert_eq!(f.raw(&[1.0 / 16.0]), 1.0);
        assert_eq!(f.eval(&[1.0 / 16.0]).unwrap(), HURST_MAX);
        let ok = sqrt_example(vec![0.0], 0.03).unwrap();
        assert_eq!(ok.eval(&[0.0]).unwrap(), 0.75);
        assert!(matches!(ok.eval(&[0.05]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn weierstrass_with_zero_amplitude_is_constant() {
        let w = HurstFunction::new(
            HurstFamily::WeierstrassLike { base: 0.6, amplitude: 0.0, beta: 0.3, lacunarity: 2.0, terms: 20 },
            dom(&[0.0], &[1.0]),
        )
        .unwrap();
        for t in [0.0, 0.1, 0.77] {
            assert_eq!(w.eval(&[t]).unwrap(), 0.6);
        }
        assert_eq!(w.exponent_meta(&[0.5]).pointwise, Exponent::Unbounded);
    }

    #[test]
    fn exponent_ordering_and_wedge() {
        assert!(Exponent::Unbounded > Exponent::Finite(1e300));
        assert_eq!(Exponent::Unbounded.wedge(0.7), 0.7);
        assert_eq!(Exponent::Finite(0.3).wedge(0.7), 0.3);
        assert_eq!(Exponent::Finite(0.3).min(Exponent::Unbounded), Exponent::Finite(0.3));
    }

    #[test]
    fn sqrt_meta_at_anchor() {
        let h = sqrt_example(vec![0.0], 0.03).unwrap();
        let m = h.exponent_meta(&[0.0]);
        assert_eq!(m.pointwise, Exponent::Finite(0.5));
        assert_eq!(m.pair, Exponent::Finite(0.5));
        let g = m.gamma.eval(&[1.0], &[4.0]).unwrap();
        assert_eq!(g, 1.0);
        // |sqrt u - sqrt v| < |u - v|^{1/2} for u != v
        assert!(m.gamma.eval(&[0.3], &[0.8]).unwrap() < (0.5f64).sqrt());
    }

    #[test]
    fn affine_gamma_matches_taylor_ratio() {
        let h =
            HurstFunction::new(HurstFamily::AffineClamped { gradient: vec![0.1], offset: 0.5 }, dom(&[0.0], &[1.0]))
                .unwrap();
        let meta = h.exponent_meta(&[0.5]);
        assert_eq!(meta.gamma.eval(&[1.0], &[0.0]), Some(0.1));
        let rhos: Vec<f64> = (4..20).map(|k| 2f64.powi(-k)).collect();
        let (ratios, trend) = h.gamma_limit(&[0.5], &[1.0], &[0.0], &rhos).unwrap();
        assert!((ratios.last().unwrap() - 0.1).abs() < 1e-9);
        assert!(matches!(trend, Trend::Converged(v) if (v - 0.1).abs() < 1e-9));
    }

    #[test]
    fn gamma_limit_sqrt_and_constant() {
        let h = sqrt_example(vec![0.0], 0.03).unwrap();
        let rhos: Vec<f64> = (8..20).map(|k| 2f64.powi(-k)).collect();
        let (_, trend) = h.gamma_limit(&[0.0], &[1.0], &[4.0], &rhos).unwrap();
        assert!(matches!(trend, Trend::Converged(v) if (v - 1.0).abs() < 1e-12));
        let c = HurstFunction::constant(0.5).unwrap();
        assert_eq!(c.gamma_limit(&[0.2], &[1.0], &[4.0], &rhos).unwrap().1, Trend::Zero);
    }

    #[test]
    fn gamma_limit_weierstrass_diverges() {
        let h = HurstFunction::new(
            HurstFamily::WeierstrassLike { base: 0.75, amplitude: 0.02, beta: 0.3, lacunarity: 2.0, terms: 20 },
            dom(&[0.0], &[2.0]),
        )
        .unwrap();
        let rhos: Vec<f64> = (2..14).map(|k| 2f64.powi(-k)).collect();
        let (_, trend) = h.gamma_limit(&[0.7], &[1.0], &[0.37], &rhos).unwrap();
        assert_eq!(trend, Trend::Divergent);
    }

    #[test]
    fn classifier_cases() {
        let rhos: Vec<f64> = (0..8).map(|k| 2f64.powi(-k)).collect();
        let conv: Vec<f64> = rhos.iter().map(|r| 2.0 + 1e-6 * r).collect();
        assert!(matches!(classify_trend(&rhos, &conv), Trend::Converged(_)));
        let zero: Vec<f64> = rhos.iter().map(|r| r.powf(0.4)).collect();
        assert_eq!(classify_trend(&rhos, &zero), Trend::Zero);
        let div: Vec<f64> = rhos.iter().map(|r| r.powf(-0.4)).collect();
        assert_eq!(classify_trend(&rhos, &div), Trend::Divergent);
        assert_eq!(classify_trend(&rhos, &[0.0; 8]), Trend::Zero);
    }

    #[test]
    fn table_lookup_reproduces_nodes_and_linear_data() {
        let grid = GridSpec::new(Point::new(vec![0.0, 0.0]).unwrap(), Point::new(vec![1.0, 1.0]).unwrap(), vec![5, 5])
            .unwrap();
        let pts = geometry::lattice(&grid).unwrap();
        let values: Vec<f64> = pts.iter().map(|p| 0.4 + 0.1 * p.coords()[0] + 0.2 * p.coords()[1]).collect();
        for order in [1u8, 3] {
            let h = HurstFunction::new(
                HurstFamily::TableLookup { grid: grid.clone(), values: values.clone(), order },
                dom(&[0.0, 0.0], &[1.0, 1.0]),
            )
            .unwrap();
            for t in [[0.25, 0.5], [0.1, 0.9], [0.63, 0.37]] {
                assert!((h.eval(&t).unwrap() - (0.4 + 0.1 * t[0] + 0.2 * t[1])).abs() < 1e-12, "order {order}");
            }
        }
        let bad =
            HurstFunction::new(HurstFamily::TableLookup { grid, values, order: 2 }, dom(&[0.0, 0.0], &[1.0, 1.0]));
        assert!(bad.is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let h = sqrt_example(vec![0.5], 0.03).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let back: HurstFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(h, back);
        let err = serde_json::from_str::<HurstFunction>(r#"{"family":{"kind":"constant","value":0.5,"x":1}}"#);
        assert!(err.is_err());
    }
}
