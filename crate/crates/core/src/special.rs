//! The normalization integral
//!
//! ```text
//! D_N(x) = ∫_{R^N} (1 - cos u_1) / |u|^{x+N} du,   0 < x < 2,
//! ```
//!
//! its derivatives in `x`, and a tabulated form used by the covariance kernels.
//!
//! Writing `u = r ω` and substituting `s = r |ω_1|` separates the integral into
//! a radial factor `I(x) = ∫_0^∞ (1 - cos s) s^{-x-1} ds` and an angular factor
//! `M(x) = ∫_{S^{N-1}} |ω_1|^x dσ(ω)`, so `D_N = M · I`. Derivatives follow from
//! Leibniz' rule with `ln(1/|u|) = ln|ω_1| - ln s`.
//!
//! The radial factor is split at `s = a`: on `[0, a]` the cosine series is
//! integrated term by term (this absorbs the `s^{1-x}` singularity), the
//! non-oscillating part of `[a, ∞)` is integrated in closed form and the
//! oscillating part `∫_a^∞ cos(s) s^{-x-1} ln^j(s) ds` is moved onto the ray
//! `s = a + i t`, where it decays like `e^{-t}`. The angular factor is a smooth
//! integral over `w = |ω_1| ∈ (0, 1)` with endpoint singularities, done with
//! tanh–sinh.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quad::{adaptive, tanh_sinh_unit, wynn_epsilon, GaussLegendre, QuadSettings};

/// Highest derivative order computed at the table nodes.
pub const MAX_ORDER: usize = 4;

/// Hurst values are clamped to `[HURST_MIN, HURST_MAX]`.
pub const HURST_MIN: f64 = 0.05;
pub const HURST_MAX: f64 = 0.95;

pub const TABLE_MESH: usize = 256;

const TABLE_MAGIC: &[u8; 4] = b"MBT1";

/// `|S^{n-1}|`, the surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> Result<f64> {
    match n {
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn gl15() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(15))
}

fn gl256() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(256))
}

/// Quadrature parameters for [`DfQuadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfSettings {
    /// Radial split point `a`.
    pub split: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
    /// Contract tolerance: relative accuracy guaranteed for `D_N`.
    pub tolerance: f64,
}

impl DfSettings {
    pub fn for_dim(n: usize) -> Self {
        DfSettings {
            split: 1.0,
            abs_tol: 1e-16,
            rel_tol: 1e-13,
            max_depth: 400,
            tolerance: if n == 1 { 1e-8 } else { 1e-6 },
        }
    }

    fn quad(&self) -> QuadSettings {
        QuadSettings { abs_tol: self.abs_tol, rel_tol: self.rel_tol, max_depth: self.max_depth }
    }
}

/// Direct quadrature of `D_N` and its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct DfQuadrature {
    dim: usize,
    settings: DfSettings,
}

impl DfQuadrature {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_settings(dim, DfSettings::for_dim(dim))
    }

    pub fn with_settings(dim: usize, settings: DfSettings) -> Result<Self> {
        sphere_area(dim)?;
        Ok(DfQuadrature { dim, settings })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &DfSettings {
        &self.settings
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = (2.0 * HURST_MIN, 2.0 * HURST_MAX);
        if !(lo..=hi).contains(&x) {
            return Err(Error::ExponentOutOfRange { x, lo, hi });
        }
        Ok(())
    }

    /// `D_N^{(n)}(x)` for `n = 0..=MAX_ORDER`.
    pub fn all_orders(&self, x: f64) -> Result<[f64; MAX_ORDER + 1]> {
        self.check_domain(x)?;
        let radial = self.radial(x)?;
        let angular = self.angular(x)?;
        let mut out = [0.0; MAX_ORDER + 1];
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = (0..=n).map(|k| binomial(n, k) * angular[k] * radial[n - k]).sum();
        }
        Ok(out)
    }

    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::InvalidModel(format!("derivative order {order} above {MAX_ORDER}")));
        }
        Ok(self.all_orders(x)?[order])
    }

    /// `I_j(x) = ∫_0^∞ (1 - cos s) s^{-x-1} (-ln s)^j ds`, `j = 0..=MAX_ORDER`.
    pub fn radial(&self, x: f64) -> Result<[f64; MAX_ORDER + 1]> {
        let a = self.settings.split;
        let la = -a.ln();
        let mut out = [0.0; MAX_ORDER + 1];

        // [0, a]: 1 - cos s = Σ_{k≥1} (-1)^{k+1} s^{2k} / (2k)!
        // ∫_0^a s^{p-1} (-ln s)^j ds = a^p Σ_i C(j,i) (-ln a)^{j-i} i! / p^{i+1}
        for (j, slot) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut inv_fact = 0.5; // 1/(2k)! for k = 1
            for k in 1..40 {
                let p = 2.0 * k as f64 - x;
                let mut m = 0.0;
                for i in 0..=j {
                    m += binomial(j, i) * la.powi((j - i) as i32) * factorial(i) / p.powi(i as i32 + 1);
                }
                let term = inv_fact * a.powf(p) * m;
                sum += if k % 2 == 1 { term } else { -term };
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
                let kk = 2.0 * k as f64;
                inv_fact /= (kk + 1.0) * (kk + 2.0);
            }
            *slot = sum;
        }

        // [a, ∞), constant part: a^{-x} Σ_i C(j,i) (-ln a)^{j-i} (-1)^i i! / x^{i+1}
        for (j, slot) in out.iter_mut().enumerate() {
            let mut m = 0.0;
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                m += binomial(j, i) * la.powi((j - i) as i32) * sign * factorial(i) / x.powi(i as i32 + 1);
            }
            *slot += a.powf(-x) * m;
        }

        // [a, ∞), oscillating part on the ray s = a + i t:
        // ∫_a^∞ e^{is} s^{-x-1} (-ln s)^j ds = i e^{ia} ∫_0^∞ e^{-t} (a+it)^{-x-1} (-ln(a+it))^j dt
        let integrand = |t: f64| -> [f64; 2 * (MAX_ORDER + 1)] {
            let s = Complex64::new(a, t);
            let log_s = s.ln();
            let base = (-(x + 1.0) * log_s).exp() * (-t).exp();
            let mut out = [0.0; 2 * (MAX_ORDER + 1)];
            let mut acc = base;
            for j in 0..=MAX_ORDER {
                out[2 * j] = acc.re;
                out[2 * j + 1] = acc.im;
                acc *= -log_s;
            }
            out
        };
        let mut total = [0.0; 2 * (MAX_ORDER + 1)];
        // Segments keep the adaptive bisection local to where e^{-t} matters.
        let breaks = [0.0, 1.0, 4.0, 12.0, 30.0, 60.0];
        for w in breaks.windows(2) {
            let (part, _) = adaptive(gl15(), integrand, w[0], w[1], &self.settings.quad())?;
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        let phase = Complex64::i() * Complex64::new(0.0, a).exp();
        for (j, slot) in out.iter_mut().enumerate() {
            let osc = phase * Complex64::new(total[2 * j], total[2 * j + 1]);
            *slot -= osc.re;
        }
        Ok(out)
    }

    /// `M_k(x) = ∫_{S^{N-1}} |ω_1|^x ln^k |ω_1| dσ(ω)`, `k = 0..=MAX_ORDER`.
    pub fn angular(&self, x: f64) -> Result<[f64; MAX_ORDER + 1]> {
        let mut out = [0.0; MAX_ORDER + 1];
        if self.dim == 1 {
            out[0] = 2.0;
            return Ok(out);
        }
        let lower_area = sphere_area(self.dim - 1)?;
        let expo = (self.dim as f64 - 3.0) / 2.0;
        let settings = QuadSettings { rel_tol: 1e-14, ..self.settings.quad() };
        for (k, slot) in out.iter_mut().enumerate() {
            let (v, _) = tanh_sinh_unit(
                |w, wc| {
                    let lw = w.ln();
                    (x * lw).exp() * lw.powi(k as i32) * (wc * (2.0 - wc)).powf(expo)
                },
                &settings,
            )?;
            *slot = 2.0 * lower_area * v;
        }
        Ok(out)
    }
}

/// The same integral evaluated without the radial/angular factorization:
/// `∫_0^∞ r^{-x-1} A_N(r) dr` with `A_N(r) = ∫_{S^{N-1}} (1 - cos r ω_1) dσ`
/// computed by angular quadrature. On `[0, 1]` the substitution
/// `r = v^{1/(2-x)}` removes the singularity; on `[1, ∞)` the constant part
/// `|S^{N-1}|` is integrated in closed form and the oscillating remainder is
/// summed period by period with Wynn acceleration.
///
/// This is the constant appearing in the harmonizable representation of the
/// Lévy field; it agrees with [`DfQuadrature`] at order 0.
pub fn radial_reference(x: f64, dim: usize) -> Result<f64> {
    radial_route(x, dim, None)
}

/// `∫_{R^N} (1 - cos u_1) / |u|^{x+N} (l - ln|u|)^2 du` by the route of
/// [`radial_reference`].
pub fn radial_reference_log2(x: f64, dim: usize, l: f64) -> Result<f64> {
    radial_route(x, dim, Some(l))
}

fn radial_route(x: f64, dim: usize, log_shift: Option<f64>) -> Result<f64> {
    let area = sphere_area(dim)?;
    let weight = |ln_r: f64| match log_shift {
        Some(l) => (l - ln_r) * (l - ln_r),
        None => 1.0,
    };
    let angular = |r: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        // ∫_{S^{N-1}} g(ω_1) dσ for even-in-ω_1 integrands g.
        match dim {
            1 => 2.0 * f(r),
            2 => 2.0 * gl256().integrate(|th| f(r * th.cos()), 0.0, PI),
            _ => 2.0 * PI * gl256().integrate(|w| f(r * w), -1.0, 1.0),
        }
    };
    let settings = QuadSettings { abs_tol: 1e-16, rel_tol: 1e-13, max_depth: 400 };

    let p = 1.0 / (2.0 - x);
    let (head, _) = tanh_sinh_unit(
        |v, _| {
            let r = v.powf(p);
            let w = weight(p * v.ln());
            if r < 1e-100 {
                // A_N(r)/r² → |S^{N-1}|/(2N)
                return if w.is_finite() { p * w * area / (2.0 * dim as f64) } else { 0.0 };
            }
            let a = angular(r, &|z: f64| {
                let s = (0.5 * z).sin();
                2.0 * s * s
            });
            p * w * a / (r * r)
        },
        &settings,
    )?;

    // ∫_1^∞ r^{-x-1} ln^k r dr = k! / x^{k+1}
    let flat = match log_shift {
        Some(l) => area * (l * l / x - 2.0 * l / (x * x) + 2.0 / (x * x * x)),
        None => area / x,
    };

    let mut sums = Vec::with_capacity(80);
    let mut acc = 0.0;
    let mut lo = 1.0;
    for _ in 0..80 {
        let hi = lo + PI;
        let ([piece], _) = adaptive(
            gl15(),
            |r: f64| [r.powf(-x - 1.0) * weight(r.ln()) * angular(r, &|z: f64| z.cos())],
            lo,
            hi,
            &settings,
        )?;
        acc += piece;
        sums.push(acc);
        lo = hi;
    }
    let (tail_osc, _) = wynn_epsilon(&sums);
    Ok(head + flat - tail_osc)
}

/// Tabulated `D_N` and its first two derivatives on `[2η, 2μ]`.
///
/// Values between nodes are quintic Hermite interpolants built from three
/// consecutive derivative orders, so every node stores orders `0..=4`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialTable {
    dim: usize,
    x_lo: f64,
    x_hi: f64,
    settings: DfSettings,
    nodes: Vec<[f64; MAX_ORDER + 1]>,
}

impl SpecialTable {
    pub fn build(dim: usize) -> Result<Self> {
        Self::build_with(dim, DfSettings::for_dim(dim), TABLE_MESH)
    }

    pub fn build_with(dim: usize, settings: DfSettings, mesh: usize) -> Result<Self> {
        if mesh < 2 {
            return Err(Error::InvalidModel("table mesh needs at least 2 nodes".into()));
        }
        let quad = DfQuadrature::with_settings(dim, settings)?;
        let (x_lo, x_hi) = (2.0 * HURST_MIN, 2.0 * HURST_MAX);
        let nodes = (0..mesh).map(|i| quad.all_orders(node_x(x_lo, x_hi, mesh, i))).collect::<Result<Vec<_>>>()?;
        Ok(SpecialTable { dim, x_lo, x_hi, settings, nodes })
    }

    /// Process-wide table for `dim`, built on first use. When `MBF_TABLE_CACHE`
    /// names a directory, tables are loaded from and saved to it.
    pub fn shared(dim: usize) -> Result<Arc<SpecialTable>> {
        static CACHE: Mutex<[Option<Arc<SpecialTable>>; 3]> = Mutex::new([None, None, None]);
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut guard = CACHE.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = &guard[dim - 1] {
            return Ok(Arc::clone(t));
        }
        let table = match std::env::var_os("MBF_TABLE_CACHE") {
            Some(dir) => Self::load_or_build(Path::new(&dir), dim)?,
            None => Self::build(dim)?,
        };
        let table = Arc::new(table);
        guard[dim - 1] = Some(Arc::clone(&table));
        Ok(table)
    }

    pub fn cache_file(dir: &Path, dim: usize) -> PathBuf {
        dir.join(format!("special_n{dim}.mbt"))
    }

    pub fn load_or_build(dir: &Path, dim: usize) -> Result<Self> {
        let path = Self::cache_file(dir, dim);
        if let Ok(bytes) = std::fs::read(&path) {
            match Self::from_bytes(&bytes) {
                Ok(t) if t.dim == dim && t.settings == DfSettings::for_dim(dim) && t.nodes.len() == TABLE_MESH => {
                    log::debug!("loaded special table from {}", path.display());
                    return Ok(t);
                }
                Ok(_) => log::warn!("ignoring stale special table cache {}", path.display()),
                Err(e) => log::warn!("ignoring unreadable special table cache {}: {e}", path.display()),
            }
        }
        let table = Self::build(dim)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, table.to_bytes())?;
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &DfSettings {
        &self.settings
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn mesh(&self) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.node(i)).collect()
    }

    pub fn step(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nodes.len() - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        node_x(self.x_lo, self.x_hi, self.nodes.len(), i)
    }

    /// Stored value of order `order` at node `i`.
    pub fn node_value(&self, i: usize, order: usize) -> f64 {
        self.nodes[i][order]
    }

    /// Interpolated `D_N^{(order)}(x)`, `order ∈ {0, 1, 2}`.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        if order > 2 {
            return Err(Error::InvalidModel(format!("table interpolates orders 0..=2, not {order}")));
        }
        if !(self.x_lo..=self.x_hi).contains(&x) {
            return Err(Error::ExponentOutOfRange { x, lo: self.x_lo, hi: self.x_hi });
        }
        Ok(self.interp(x, order))
    }

    /// `D_N(x)`; `x` must lie in the table range (callers clamp Hurst values).
    pub(crate) fn d(&self, x: f64) -> f64 {
        self.interp(x.clamp(self.x_lo, self.x_hi), 0)
    }

    fn interp(&self, x: f64, order: usize) -> f64 {
        let h = self.step();
        let last = self.nodes.len() - 1;
        let pos = (x - self.x_lo) / h;
        let i = (pos.floor() as usize).min(last - 1);
        let t = (x - self.node(i)) / h;
        if t == 0.0 {
            return self.nodes[i][order];
        }
        let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        a[order] * h00
            + h * a[order + 1] * h10
            + h * h * a[order + 2] * h20
            + b[order] * h01
            + h * b[order + 1] * h11
            + h * h * b[order + 2] * h21
    }

    /// `|interpolated - direct|` relative to the direct value.
    pub fn check_against_direct(&self, x: f64, order: usize) -> Result<f64> {
        let direct = DfQuadrature::with_settings(self.dim, self.settings)?.eval(x, order)?;
        let interp = self.eval(x, order)?;
        Ok((interp - direct).abs() / direct.abs().max(f64::MIN_POSITIVE))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.nodes.len() * 8 * (MAX_ORDER + 1));
        out.extend_from_slice(TABLE_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.nodes.len() as u32).to_le_bytes());
        out.extend_from_slice(&((MAX_ORDER + 1) as u32).to_le_bytes());
        for v in [
            self.x_lo,
            self.x_hi,
            self.settings.split,
            self.settings.abs_tol,
            self.settings.rel_tol,
            self.settings.tolerance,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.settings.max_depth as u64).to_le_bytes());
        for node in &self.nodes {
            for v in node {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != TABLE_MAGIC {
            return Err(Error::Format("bad special table magic".into()));
        }
        let dim = r.u32()? as usize;
        let mesh = r.u32()? as usize;
        let orders = r.u32()? as usize;
        if orders != MAX_ORDER + 1 || mesh < 2 {
            return Err(Error::Format("unsupported special table layout".into()));
        }
        let x_lo = r.f64()?;
        let x_hi = r.f64()?;
        let settings = DfSettings {
            split: r.f64()?,
            abs_tol: r.f64()?,
            rel_tol: r.f64()?,
            tolerance: r.f64()?,
            max_depth: r.u64()? as usize,
        };
        let mut nodes = Vec::with_capacity(mesh);
        for _ in 0..mesh {
            let mut node = [0.0; MAX_ORDER + 1];
            for v in node.iter_mut() {
                *v = r.f64()?;
            }
            nodes.push(node);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after special table".into()));
        }
        sphere_area(dim)?;
        Ok(SpecialTable { dim, x_lo, x_hi, settings, nodes })
    }

    /// Hex SHA-256 of the serialized table.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn node_x(lo: f64, hi: f64, mesh: usize, i: usize) -> f64 {
    if i + 1 == mesh {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (mesh - 1) as f64
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
