use mbf_core::analysis::empirical_cov;
use mbf_core::geometry::GridSpec;
use mbf_core::kernels::KernelModel;
use mbf_core::synth::{Plan, Sampler};
use mbf_core::Error;

#[test]
fn same_seed_same_bits() {
    let m = KernelModel::levy(0.35, 2).unwrap();
    let g = GridSpec::cube(2, 0.1, 1.0, 6).unwrap();
    let s = Sampler::new(&m, &g).unwrap();
    let a = s.sample(11, 3);
    let b = s.sample(11, 3);
    for (x, y) in a.iter().zip(&b) {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.values), bits(&y.values));
    }
    assert_ne!(a[0].values, a[1].values);
    assert_ne!(a[0].values, s.sample_one(12, 0).values);
    // Replicates do not depend on how many are drawn.
    assert_eq!(s.sample_one(11, 2), a[2]);
}

#[test]
fn sheets_use_the_kronecker_plan_and_match_dense_covariances() {
    let m = KernelModel::sheet(vec![0.3, 0.7]).unwrap();
    let g = GridSpec::cube(2, 0.125, 1.0, 8).unwrap();
    let kron = Sampler::new(&m, &g).unwrap();
    assert!(matches!(kron.plan(), Plan::Kronecker(_)));
    assert!(kron.reconstruction_error(&m).unwrap() < 1e-10);
    let dense = Sampler::dense(&m, &g, 4096).unwrap();
    assert!(dense.reconstruction_error(&m).unwrap() < 1e-10);
}

#[test]
fn dense_cap_is_enforced() {
    let m = KernelModel::levy(0.5, 1).unwrap();
    let g = GridSpec::cube(1, 0.0, 1.0, 100).unwrap();
    let err = Sampler::with_cap(&m, &g, 50).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { points: 100, cap: 50 }), "{err}");
}

#[test]
fn empirical_covariance_tracks_the_kernel() {
    let m = KernelModel::levy(0.6, 1).unwrap();
    let g = GridSpec::cube(1, 0.25, 1.0, 4).unwrap();
    let samples = Sampler::new(&m, &g).unwrap().sample(5, 4000);
    for (s, t) in [(0.25, 0.5), (0.75, 1.0), (1.0, 1.0)] {
        let est = empirical_cov(&samples, &[s], &[t]).unwrap();
        let z = est.z_score(m.cov(&[s], &[t]).unwrap());
        assert!(z.abs() < 5.0, "({s}, {t}): z = {z}");
    }
}
