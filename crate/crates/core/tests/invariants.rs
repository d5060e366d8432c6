//! Property tests of the kernel and increment invariants.

use mbf_core::geometry::{corner_sum, rect_increment, IndexBox, Point};
use mbf_core::hurst::{Domain, HurstFamily, HurstFunction};
use mbf_core::kernels::{fbm_cov, fbs_cov, levy_cov, Family, KernelModel, ModelSpec, Normalization};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pt() -> impl Strategy<Value = f64> {
    0.0f64..2.0
}

fn points(dim: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(pt(), dim), n)
}

fn sine_field(dim: usize) -> KernelModel {
    let dom = Domain::new(vec![0.0; dim], vec![2.0; dim]).unwrap();
    let h =
        HurstFunction::new(HurstFamily::SmoothSine { base: 0.5, amplitude: 0.2, frequency: 2.0 }, Some(dom)).unwrap();
    KernelModel::new(ModelSpec::new(Family::MbField { hurst: h, dim }, Normalization::Unit)).unwrap()
}

fn min_eigenvalue(model: &KernelModel, pts: &[Vec<f64>]) -> (f64, f64) {
    let n = pts.len();
    let g = DMatrix::from_fn(n, n, |i, j| model.cov(&pts[i], &pts[j]).unwrap());
    let sym = (&g + g.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariances_are_symmetric(s in points(2, 1), t in points(2, 1), h in 0.05f64..0.95) {
        let (s, t) = (&s[0], &t[0]);
        prop_assert_eq!(levy_cov(s, t, h), levy_cov(t, s, h));
        prop_assert_eq!(fbs_cov(s, t, &[h, 1.0 - h]), fbs_cov(t, s, &[h, 1.0 - h]));
        let m = sine_field(2);
        let (a, b) = (m.cov(s, t).unwrap(), m.cov(t, s).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn levy_is_self_similar(s in points(3, 1), t in points(3, 1), h in 0.05f64..0.95, c in 0.1f64..10.0) {
        let (s, t) = (&s[0], &t[0]);
        let cs: Vec<f64> = s.iter().map(|x| c * x).collect();
        let ct: Vec<f64> = t.iter().map(|x| c * x).collect();
        let lhs = levy_cov(&cs, &ct, h);
        let rhs = c.powf(2.0 * h) * levy_cov(s, t, h);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn sheet_is_a_product_of_fbm(s in points(3, 1), t in points(3, 1), h in prop::collection::vec(0.05f64..0.95, 3)) {
        let (s, t) = (&s[0], &t[0]);
        let prod: f64 = (0..3).map(|i| fbm_cov(s[i], t[i], h[i])).product();
        prop_assert!((fbs_cov(s, t, &h) - prod).abs() <= 1e-14);
    }

    #[test]
    fn gram_matrices_are_psd(pts in points(2, 6), h in 0.05f64..0.95) {
        for m in [KernelModel::levy(h, 2).unwrap(), KernelModel::sheet(vec![h, 0.5]).unwrap(), sine_field(2)] {
            let (lo, hi) = min_eigenvalue(&m, &pts);
            prop_assert!(lo >= -1e-9 * hi.max(1.0), "{:?}: min eigenvalue {lo}", m.family());
        }
    }

    #[test]
    fn variance_vanishes_at_origin_and_increments_are_nonnegative(s in points(2, 1), t in points(2, 1)) {
        let m = sine_field(2);
        prop_assert!(m.variance(&[0.0, 0.0]).unwrap().abs() < 1e-14);
        prop_assert!(m.sq_increment(&s[0], &t[0]).unwrap() >= -1e-12);
    }

    #[test]
    fn rect_increment_of_a_product_is_a_product_of_differences(
        lo in points(3, 1), w in prop::collection::vec(0.0f64..1.0, 3)
    ) {
        let lo = &lo[0];
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
        let f = |p: &[f64]| Some(p[0].sin() * (1.0 + p[1] * p[1]) * p[2].exp());
        let bx = IndexBox::new(Point::new(lo.clone()).unwrap(), Point::new(hi.clone()).unwrap()).unwrap();
        let diffs = [
            if w[0] > 0.0 { hi[0].sin() - lo[0].sin() } else { lo[0].sin() },
            if w[1] > 0.0 { hi[1] * hi[1] - lo[1] * lo[1] } else { 1.0 + lo[1] * lo[1] },
            if w[2] > 0.0 { hi[2].exp() - lo[2].exp() } else { lo[2].exp() },
        ];
        let inc = rect_increment(&f, &bx).unwrap();
        if bx.is_degenerate() {
            prop_assert_eq!(inc, 0.0);
        } else {
            let expected: f64 = diffs.iter().product();
            prop_assert!((inc - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{inc} vs {expected}");
        }
    }

    #[test]
    fn rect_increment_is_additive_along_an_axis(
        lo in points(2, 1), w in prop::collection::vec(0.01f64..1.0, 2), cut in 0.0f64..1.0, axis in 0usize..2
    ) {
        let lo = lo[0].clone();
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
        let mut mid = lo.clone();
        mid[axis] += cut * w[axis];
        let f = |p: &[f64]| Some((p[0] * 3.0).cos() + p[0] * p[1] * p[1]);
        let bx = |a: &[f64], b: &[f64]| IndexBox::new(Point::new(a.to_vec()).unwrap(), Point::new(b.to_vec()).unwrap()).unwrap();
        let mut hi_left = hi.clone();
        hi_left[axis] = mid[axis];
        let mut lo_right = lo.clone();
        lo_right[axis] = mid[axis];
        let whole = rect_increment(&f, &bx(&lo, &hi)).unwrap();
        let parts = rect_increment(&f, &bx(&lo, &hi_left)).unwrap() + rect_increment(&f, &bx(&lo_right, &hi)).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * (1.0 + whole.abs()));
    }

    #[test]
    fn corner_sum_flips_sign_when_an_axis_is_swapped(s in points(3, 1), t in points(3, 1), axis in 0usize..3) {
        let (s, t) = (s[0].clone(), t[0].clone());
        prop_assume!(s[axis] != t[axis]);
        let f = |p: &[f64]| Some(p[0] + 2.0 * p[1] * p[2] + p[0] * p[1] * p[2]);
        let (mut s2, mut t2) = (s.clone(), t.clone());
        std::mem::swap(&mut s2[axis], &mut t2[axis]);
        let a = corner_sum(&f, &s, &t).unwrap();
        let b = corner_sum(&f, &s2, &t2).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn brownian_motion_covariance_is_min() {
    for (s, t) in [(0.2, 0.7), (1.5, 0.3), (0.0, 2.0)] {
        assert!((levy_cov(&[s], &[t], 0.5) - f64::min(s, t)).abs() < 1e-15);
    }
}
