//! Rectangular lattices in the positive orthant, rectangular (corner-sum)
//! increments and progressive differences.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the index space R^N_+.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidPoint(format!("coordinate {c} is not a finite non-negative real")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `self + scale * dir`, rejected if the result leaves the orthant.
    pub fn offset(&self, scale: f64, dir: &[f64]) -> Result<Point> {
        check_dim(self.dim(), dir.len())?;
        Point::new(self.0.iter().zip(dir).map(|(x, d)| x + scale * d).collect())
    }

    pub fn scaled(&self, a: f64) -> Result<Point> {
        Point::new(self.0.iter().map(|x| a * x).collect())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    fn key(&self) -> Vec<u64> {
        self.0.iter().map(|c| c.to_bits()).collect()
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Axis-aligned lattice with `resolution[i]` uniformly spaced points on
/// `[lower[i], upper[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Point,
    pub upper: Point,
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Point, upper: Point, resolution: Vec<usize>) -> Result<Self> {
        let spec = GridSpec { lower, upper, resolution };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor for the box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        GridSpec::new(Point::new(vec![lo; dim])?, Point::new(vec![hi; dim])?, vec![points_per_axis; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lower.dim();
        check_dim(n, self.upper.dim())?;
        check_dim(n, self.resolution.len())?;
        for i in 0..n {
            if self.resolution[i] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {i} has resolution {}; every axis needs at least 2 points",
                    self.resolution[i]
                )));
            }
            if !(self.lower.coords()[i] < self.upper.coords()[i]) {
                return Err(Error::InvalidGrid(format!("lower bound not below upper bound on axis {i}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper.coords()[axis] - self.lower.coords()[axis]) / (self.resolution[axis] - 1) as f64
    }

    /// Coordinate `k` of axis `axis`; the last one is exactly the upper bound.
    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        let a = self.lower.coords()[axis];
        let b = self.upper.coords()[axis];
        let n = self.resolution[axis];
        if k + 1 == n {
            b
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.resolution[axis]).map(|k| self.coord(axis, k)).collect()
    }

    /// Row-major multi-index of a flat index (axis 0 slowest).
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.resolution[axis];
            flat /= self.resolution[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.resolution).fold(0, |acc, (i, r)| acc * r + i)
    }

    /// Axis index of coordinate `c`, matched by exact equality.
    pub fn axis_index(&self, axis: usize, c: f64) -> Option<usize> {
        let a = self.lower.coords()[axis];
        let h = self.spacing(axis);
        let guess = ((c - a) / h).round();
        if !(guess >= 0.0) {
            return None;
        }
        let g = guess as usize;
        let n = self.resolution[axis];
        // Rounding in the coordinate formula can shift the match by one.
        [g, g.wrapping_sub(1), g + 1].into_iter().find(|&k| k < n && self.coord(axis, k) == c)
    }

    /// Flat index of a lattice point, matched by exact coordinate equality.
    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for (axis, &c) in p.iter().enumerate() {
            flat = flat * self.resolution[axis] + self.axis_index(axis, c)?;
        }
        Some(flat)
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.unravel(flat);
        Point(idx.iter().enumerate().map(|(axis, &k)| self.coord(axis, k)).collect())
    }
}

/// Enumerate the lattice in row-major order, axis 0 slowest.
pub fn lattice(spec: &GridSpec) -> Result<Vec<Point>> {
    spec.validate()?;
    let axes: Vec<Vec<f64>> = (0..spec.dim()).map(|a| spec.axis_coords(a)).collect();
    let mut out = Vec::with_capacity(spec.len());
    for flat in 0..spec.len() {
        let idx = spec.unravel(flat);
        out.push(Point(idx.iter().enumerate().map(|(a, &k)| axes[a][k]).collect()));
    }
    Ok(out)
}

/// The box `[lo, hi]` with `lo ≤ hi` componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexBox {
    lo: Point,
    hi: Point,
}

impl IndexBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        if lo.coords().iter().zip(hi.coords()).any(|(s, t)| s > t) {
            return Err(Error::InvalidPoint("box lower corner exceeds upper corner".into()));
        }
        Ok(IndexBox { lo, hi })
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    /// Axes with `lo_i != hi_i` (the set I).
    pub fn active_axes(&self) -> Vec<usize> {
        active_axes(self.lo.coords(), self.hi.coords())
    }

    pub fn is_degenerate(&self) -> bool {
        self.active_axes().is_empty()
    }

    /// Corners of the box over the active axes with their inclusion-exclusion signs.
    pub fn signed_corners(&self) -> Vec<(f64, Point)> {
        signed_corners(self.lo.coords(), self.hi.coords()).into_iter().map(|(sign, c)| (sign, Point(c))).collect()
    }

    pub fn translated(&self, h: &[f64]) -> Result<IndexBox> {
        IndexBox::new(self.lo.offset(1.0, h)?, self.hi.offset(1.0, h)?)
    }
}

fn active_axes(s: &[f64], t: &[f64]) -> Vec<usize> {
    (0..s.len()).filter(|&i| s[i] != t[i]).collect()
}

/// `(sign, corner)` pairs of the corner sum between `s` and `t`; no ordering of
/// `s` and `t` is assumed. Empty when `s == t`.
pub(crate) fn signed_corners(s: &[f64], t: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let axes = active_axes(s, t);
    if axes.is_empty() {
        return Vec::new();
    }
    let k = axes.len();
    (0u32..(1 << k))
        .map(|mask| {
            let mut c = s.to_vec();
            for (bit, &axis) in axes.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    c[axis] = t[axis];
                }
            }
            let ones = mask.count_ones() as usize;
            let sign = if (k - ones).is_multiple_of(2) { 1.0 } else { -1.0 };
            (sign, c)
        })
        .collect()
}

/// Something that can be evaluated at points of the index space.
pub trait PointValues {
    fn value_at(&self, p: &[f64]) -> Option<f64>;
}

impl<F: Fn(&[f64]) -> Option<f64>> PointValues for F {
    fn value_at(&self, p: &[f64]) -> Option<f64> {
        self(p)
    }
}

/// Values keyed by the exact bit pattern of a point.
#[derive(Debug, Clone, Default)]
pub struct ValueMap {
    values: HashMap<Vec<u64>, f64>,
}

impl ValueMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: &Point, v: f64) {
        self.values.insert(p.key(), v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FromIterator<(Point, f64)> for ValueMap {
    fn from_iter<I: IntoIterator<Item = (Point, f64)>>(iter: I) -> Self {
        let mut m = ValueMap::new();
        for (p, v) in iter {
            m.insert(&p, v);
        }
        m
    }
}

impl PointValues for ValueMap {
    fn value_at(&self, p: &[f64]) -> Option<f64> {
        let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
        self.values.get(&key).copied()
    }
}

/// Signed corner sum between two arbitrary points (no ordering required).
/// Swapping `s_i` and `t_i` on one active axis flips the sign.
pub fn corner_sum<V: PointValues + ?Sized>(values: &V, s: &[f64], t: &[f64]) -> Result<f64> {
    check_dim(s.len(), t.len())?;
    let mut acc = 0.0;
    for (sign, c) in signed_corners(s, t) {
        let v = values.value_at(&c).ok_or_else(|| Error::MissingCorner(c.clone()))?;
        acc += sign * v;
    }
    Ok(acc)
}

/// Rectangular increment ΔX over `bx`: inclusion–exclusion over the corners of
/// the non-degenerate axes. Zero for a fully degenerate box.
pub fn rect_increment<V: PointValues + ?Sized>(values: &V, bx: &IndexBox) -> Result<f64> {
    corner_sum(values, bx.lo.coords(), bx.hi.coords())
}

/// Composition of progressive differences Δ_{h_i, i} over `axes` at `x`.
/// Any evaluation point missing from `values` makes the result 0.
pub fn progressive_difference<V: PointValues + ?Sized>(values: &V, x: &[f64], h: &[f64], axes: &[usize]) -> f64 {
    let k = axes.len();
    let mut acc = 0.0;
    for mask in 0u32..(1 << k) {
        let mut p = x.to_vec();
        for (bit, &axis) in axes.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                p[axis] += h[axis];
            }
        }
        let Some(v) = values.value_at(&p) else {
            return 0.0;
        };
        let sign = if (k - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn uniform_1d_lattice() {
        let spec = GridSpec::new(pt(&[0.0]), pt(&[1.0]), vec![3]).unwrap();
        let pts = lattice(&spec).unwrap();
        let c: Vec<f64> = pts.iter().map(|p| p.coords()[0]).collect();
        assert_eq!(c, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn corner_enumeration() {
        let spec = GridSpec::cube(2, 0.0, 1.0, 2).unwrap();
        let pts: Vec<Vec<f64>> = lattice(&spec).unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn affine_lattice() {
        let spec = GridSpec::new(pt(&[1.0, 2.0]), pt(&[2.0, 4.0]), vec![2, 3]).unwrap();
        let pts = lattice(&spec).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].coords(), &[1.0, 3.0]);
        assert_eq!(pts[0].coords(), spec.lower.coords());
        assert_eq!(pts[5].coords(), spec.upper.coords());
    }

    #[test]
    fn rejects_short_axis() {
        let err = GridSpec::new(pt(&[0.0, 0.0]), pt(&[1.0, 1.0]), vec![2, 1]).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
    }

    #[test]
    fn index_roundtrip() {
        let spec = GridSpec::new(pt(&[0.0, 0.5]), pt(&[1.0, 2.0]), vec![5, 7]).unwrap();
        for (i, p) in lattice(&spec).unwrap().iter().enumerate() {
            assert_eq!(spec.index_of(p.coords()), Some(i));
            assert_eq!(spec.point(i), *p);
        }
        assert_eq!(spec.index_of(&[0.1, 0.5]), None);
    }

    #[test]
    fn one_axis_increment() {
        let vals: ValueMap = [(pt(&[0.2]), 1.5), (pt(&[0.7]), 4.0)].into_iter().collect();
        let b = IndexBox::new(pt(&[0.2]), pt(&[0.7])).unwrap();
        assert_eq!(rect_increment(&vals, &b).unwrap(), 2.5);
    }

    #[test]
    fn two_axis_inclusion_exclusion() {
        let vals: ValueMap =
            [(pt(&[0.0, 0.0]), 1.0), (pt(&[0.0, 1.0]), 2.0), (pt(&[1.0, 0.0]), 3.0), (pt(&[1.0, 1.0]), 5.0)]
                .into_iter()
                .collect();
        let b = IndexBox::new(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap();
        assert_eq!(rect_increment(&vals, &b).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_axis_reduces_dimension() {
        let vals: ValueMap = [(pt(&[0.0, 0.5]), 2.0), (pt(&[1.0, 0.5]), 7.0)].into_iter().collect();
        let b = IndexBox::new(pt(&[0.0, 0.5]), pt(&[1.0, 0.5])).unwrap();
        assert_eq!(rect_increment(&vals, &b).unwrap(), 5.0);
        let point = IndexBox::new(pt(&[1.0, 0.5]), pt(&[1.0, 0.5])).unwrap();
        assert_eq!(rect_increment(&vals, &point).unwrap(), 0.0);
    }

    #[test]
    fn missing_corner_is_named() {
        let vals: ValueMap = [(pt(&[0.0]), 1.0)].into_iter().collect();
        let b = IndexBox::new(pt(&[0.0]), pt(&[2.0])).unwrap();
        match rect_increment(&vals, &b) {
            Err(Error::MissingCorner(c)) => assert_eq!(c, vec![2.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn progressive_difference_cases() {
        let f = |p: &[f64]| -> Option<f64> {
            if p.iter().all(|c| (0.0..=1.0).contains(c)) {
                Some(p[0] * p[0] + 3.0 * p.get(1).copied().unwrap_or(0.0) + p[0] * p.get(1).copied().unwrap_or(0.0))
            } else {
                None
            }
        };
        let d = progressive_difference(&f, &[0.25], &[0.5], &[0]);
        assert_eq!(d, 0.75 * 0.75 - 0.25 * 0.25);
        // Mixed difference of x^2 + 3y + xy on [0,1]^2 is the xy coefficient.
        let d2 = progressive_difference(&f, &[0.0, 0.0], &[1.0, 1.0], &[0, 1]);
        let b = IndexBox::new(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap();
        assert_eq!(d2, rect_increment(&f, &b).unwrap());
        assert_eq!(d2, 1.0);
        assert_eq!(progressive_difference(&f, &[0.75], &[0.5], &[0]), 0.0);
        assert_eq!(progressive_difference(&f, &[0.3], &[0.5], &[]), f(&[0.3]).unwrap());
    }

    #[test]
    fn corner_sign_balance() {
        for k in 1..=3usize {
            let s = vec![0.0; 3];
            let mut t = vec![0.0; 3];
            for v in t.iter_mut().take(k) {
                *v = 1.0;
            }
            let corners = signed_corners(&s, &t);
            let pos = corners.iter().filter(|(sg, _)| *sg > 0.0).count();
            assert_eq!(corners.len(), 1 << k);
            assert_eq!(pos, 1 << (k - 1));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn antisymmetric_on_axis_swap(vals in proptest::collection::vec(-10.0f64..10.0, 4), swap in 0usize..2) {
                let corners = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
                let map: ValueMap = corners.iter().zip(&vals).map(|(c, v)| (pt(c), *v)).collect();
                let s = [0.0, 0.0];
                let t = [1.0, 1.0];
                let mut s2 = s;
                let mut t2 = t;
                std::mem::swap(&mut s2[swap], &mut t2[swap]);
                let a = corner_sum(&map, &s, &t).unwrap();
                let b = corner_sum(&map, &s2, &t2).unwrap();
                prop_assert!((a + b).abs() < 1e-12);
            }

            #[test]
            fn multilinear_in_corner_values(
                u in proptest::collection::vec(-5.0f64..5.0, 8),
                v in proptest::collection::vec(-5.0f64..5.0, 8),
                a in -3.0f64..3.0,
            ) {
                let spec = GridSpec::cube(3, 0.0, 1.0, 2).unwrap();
                let pts = lattice(&spec).unwrap();
                let mu: ValueMap = pts.iter().cloned().zip(u.iter().copied()).collect();
                let mv: ValueMap = pts.iter().cloned().zip(v.iter().copied()).collect();
                let mix: ValueMap = pts.iter().cloned().zip(u.iter().zip(&v).map(|(x, y)| a * x + y)).collect();
                let b = IndexBox::new(pt(&[0.0; 3]), pt(&[1.0; 3])).unwrap();
                let lhs = rect_increment(&mix, &b).unwrap();
                let rhs = a * rect_increment(&mu, &b).unwrap() + rect_increment(&mv, &b).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }

            #[test]
            fn increment_equals_progressive_difference(
                s0 in 0.0f64..1.0, s1 in 0.0f64..1.0, d0 in 0.0f64..1.0, d1 in 0.0f64..1.0, degenerate in any::<bool>(),
            ) {
                let f = |p: &[f64]| -> Option<f64> { Some((p[0] * 1.7).sin() + p[0] * p[1] * p[1]) };
                let d1 = if degenerate { 0.0 } else { d1 };
                let b = IndexBox::new(pt(&[s0, s1]), pt(&[s0 + d0, s1 + d1])).unwrap();
                let axes = b.active_axes();
                let direct = rect_increment(&f, &b).unwrap();
                let prog = progressive_difference(&f, &[s0, s1], &[d0, d1], &axes);
                prop_assert_eq!(direct, prog);
            }
        }
    }
}
