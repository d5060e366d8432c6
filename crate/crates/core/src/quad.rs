//! Quadrature primitives: Gauss–Legendre rules, globally adaptive
//! Gauss–Legendre bisection, tanh–sinh on the unit interval and Wynn's
//! epsilon algorithm for accelerating oscillatory tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Tolerances and refinement limits shared by the adaptive routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of interval bisections (adaptive GL) or halvings
    /// of the step (tanh–sinh).
    pub max_depth: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { abs_tol: 1e-15, rel_tol: 1e-13, max_depth: 2000 }
    }
}

/// n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    pub fn integrate_vec<const K: usize, F: FnMut(f64) -> [f64; K]>(&self, f: &mut F, a: f64, b: f64) -> [f64; K] {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = [0.0; K];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(c + h * x);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        acc.map(|v| v * h)
    }
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: f64,
}

impl<const K: usize> PartialEq for Segment<K> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const K: usize> Eq for Segment<K> {}
impl<const K: usize> PartialOrd for Segment<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Segment<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of a vector-valued integrand on `[a, b]`.
///
/// Each segment is estimated with the rule on the whole segment and on its two
/// halves; the difference is the segment's error. The worst segment is bisected
/// until the summed error meets `max(abs_tol, rel_tol * |I|)` in every
/// component. Returns the estimate and the final error bound.
pub fn adaptive<const K: usize, F: FnMut(f64) -> [f64; K]>(
    rule: &GaussLegendre,
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<([f64; K], f64)> {
    let make = |a: f64, b: f64, f: &mut F| -> Segment<K> {
        let m = 0.5 * (a + b);
        let whole = rule.integrate_vec(f, a, b);
        let left = rule.integrate_vec(f, a, m);
        let right = rule.integrate_vec(f, m, b);
        let mut value = [0.0; K];
        let mut error: f64 = 0.0;
        for k in 0..K {
            value[k] = left[k] + right[k];
            error = error.max((value[k] - whole[k]).abs());
        }
        Segment { a, b, value, error }
    };

    let mut heap = BinaryHeap::new();
    heap.push(make(a, b, &mut f));
    for _ in 0..settings.max_depth {
        let (total, err) = summarize(&heap);
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= settings.abs_tol.max(settings.rel_tol * scale) {
            return Ok((total, err));
        }
        let worst = heap.pop().expect("heap never empty");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            heap.push(worst);
            break;
        }
        heap.push(make(worst.a, m, &mut f));
        heap.push(make(m, worst.b, &mut f));
    }
    let (total, err) = summarize(&heap);
    let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if err <= settings.abs_tol.max(settings.rel_tol * scale) {
        Ok((total, err))
    } else {
        Err(Error::Quadrature { partial: total[0], error: err })
    }
}

fn summarize<const K: usize>(heap: &BinaryHeap<Segment<K>>) -> ([f64; K], f64) {
    let mut total = [0.0; K];
    let mut err = 0.0;
    for s in heap.iter() {
        for k in 0..K {
            total[k] += s.value[k];
        }
        err += s.error;
    }
    (total, err)
}

/// Tanh–sinh quadrature of `f(w, 1 - w)` over `w ∈ (0, 1)`.
///
/// The integrand receives the complement `1 - w` computed without
/// cancellation, so algebraic or logarithmic endpoint singularities at either
/// end are handled. Returns the estimate and the difference between the last
/// two levels.
pub fn tanh_sinh_unit<F: FnMut(f64, f64) -> f64>(mut f: F, settings: &QuadSettings) -> Result<(f64, f64)> {
    let node = |t: f64| -> Option<(f64, f64, f64)> {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // 1 - |x| and 1 + |x| for x = tanh(u).
        let small = 2.0 * e / (1.0 + e);
        let large = 2.0 / (1.0 + e);
        let weight = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if small < 1e-300 || weight < 1e-300 {
            return None;
        }
        let (w, wc) = if u >= 0.0 { (0.5 * large, 0.5 * small) } else { (0.5 * small, 0.5 * large) };
        Some((w, wc, 0.5 * weight))
    };
    let eval = |t: f64, f: &mut F| -> Option<f64> { node(t).map(|(w, wc, weight)| weight * f(w, wc)) };

    let mut h = 1.0;
    let mut sum = eval(0.0, &mut f).unwrap_or(0.0);
    let mut k = 1;
    while let (Some(a), Some(b)) = (eval(k as f64 * h, &mut f), eval(-(k as f64) * h, &mut f)) {
        sum += a + b;
        k += 1;
        if k > 10_000 {
            break;
        }
    }
    let mut estimate = sum * h;
    let max_level = settings.max_depth.min(12);
    for _ in 0..max_level {
        h *= 0.5;
        let mut k = 1usize;
        loop {
            let t = k as f64 * h;
            match (eval(t, &mut f), eval(-t, &mut f)) {
                (Some(a), Some(b)) => sum += a + b,
                _ => break,
            }
            k += 2;
        }
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= settings.abs_tol.max(settings.rel_tol * estimate.abs()) {
            return Ok((estimate, diff));
        }
    }
    Err(Error::Quadrature { partial: estimate, error: f64::NAN })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums; returns the
/// extrapolated limit and an error proxy (difference of the last two entries of
/// the deepest usable even column).
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n < 3 {
        let last = partial_sums.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    // cols[0] is eps_{-1} = 0, cols[1] is eps_0 = S, cols[k + 1] is eps_k.
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; n + 1], partial_sums.to_vec()];
    loop {
        let k = cols.len();
        let prev = &cols[k - 1];
        let prev2 = &cols[k - 2];
        if prev.len() < 2 {
            break;
        }
        let mut next = Vec::with_capacity(prev.len() - 1);
        for i in 0..prev.len() - 1 {
            let d = prev[i + 1] - prev[i];
            let v = prev2[i + 1] + 1.0 / d;
            if d == 0.0 || !v.is_finite() {
                break;
            }
            next.push(v);
        }
        if next.len() < 2 {
            break;
        }
        cols.push(next);
    }
    let mut best = (partial_sums[n - 1], (partial_sums[n - 1] - partial_sums[n - 2]).abs());
    for (idx, col) in cols.iter().enumerate().skip(1).step_by(2) {
        let _ = idx;
        if col.len() >= 2 {
            let last = col[col.len() - 1];
            let err = (last - col[col.len() - 2]).abs();
            if err <= best.1 {
                best = (last, err);
            }
        }
    }
    best
}
