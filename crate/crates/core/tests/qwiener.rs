//! Sampling, covariance and time coupling of the truncated Q-Wiener field.

use core::f64::consts::PI;

use msym_core::qwiener::{step_count, BasisKind, QWienerError, QWienerField, SpectralBasis};

fn sine_quarter(truncation: usize) -> SpectralBasis {
    SpectralBasis::new(BasisKind::SineQuarter, -8.0, 8.0, SpectralBasis::DEFAULT_DECAY, truncation).unwrap()
}

fn periodic_basis() -> SpectralBasis {
    SpectralBasis::new(BasisKind::SineOverSqrtPi, -PI, PI, 6.0, 100).unwrap()
}

#[test]
fn increment_variance_matches_truncated_covariance() {
    let basis = sine_quarter(100);
    let nodes = [-6.3, -2.0, 0.1, 4.0];
    let dt = 0.01;
    let n = 100_000;
    let field = QWienerField::sample(&basis, &nodes, n as f64 * dt, dt, 11).unwrap();
    assert_eq!(field.steps(), n);
    for (i, &x) in nodes.iter().enumerate() {
        let m2: f64 = (0..n).map(|s| field.step(s)[i].powi(2)).sum::<f64>() / n as f64;
        let want = basis.covariance(x, x) * dt;
        assert!((m2 / want - 1.0).abs() < 0.03, "node {x}: {m2:e} vs {want:e}");
    }
}

#[test]
fn cross_covariance_and_step_independence() {
    let basis = periodic_basis();
    let nodes = [-1.0, -0.5, 2.0];
    let dt = 0.01;
    let n = 100_000;
    let f = QWienerField::sample(&basis, &nodes, n as f64 * dt, dt, 5).unwrap();
    let mean = |g: &dyn Fn(usize) -> f64| (0..n).map(g).sum::<f64>() / n as f64;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let c = mean(&|s| f.step(s)[a] * f.step(s)[b]);
        let want = basis.covariance(nodes[a], nodes[b]) * dt;
        let sd = (basis.covariance(nodes[a], nodes[a]) * basis.covariance(nodes[b], nodes[b])).sqrt() * dt;
        assert!((c - want).abs() < 0.03 * sd, "pair ({a},{b}): {c:e} vs {want:e}");
    }
    let v = mean(&|s| f.step(s)[0].powi(2));
    let lag = (0..n - 1).map(|s| f.step(s)[0] * f.step(s + 1)[0]).sum::<f64>() / (n - 1) as f64;
    assert!((lag / v).abs() < 0.01, "lag-one correlation {:e}", lag / v);
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let basis = sine_quarter(20);
    let nodes = [-1.0, 0.0, 1.0];
    let a = QWienerField::sample(&basis, &nodes, 1.0, 0.125, 42).unwrap();
    let b = QWienerField::sample(&basis, &nodes, 1.0, 0.125, 42).unwrap();
    let c = QWienerField::sample(&basis, &nodes, 1.0, 0.125, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.step(0), c.step(0));
    // Each mode stream is independent of the horizon.
    let long = QWienerField::sample(&basis, &nodes, 2.0, 0.125, 42).unwrap();
    for n in 0..8 {
        assert_eq!(a.mode_increments(n), long.mode_increments(n));
        assert_eq!(a.step(n), long.step(n));
    }
}

#[test]
fn sine_quarter_vanishes_at_domain_ends() {
    let basis = sine_quarter(100);
    for k in 1..=100 {
        assert!(basis.e(k, -8.0).abs() < 1e-14);
        assert!(basis.e(k, 8.0).abs() < 1e-13);
    }
    let f = QWienerField::sample(&basis, &[-8.0, 8.0], 1.0, 0.25, 1).unwrap();
    for n in 0..4 {
        assert!(f.step(n).iter().all(|v| v.abs() < 1e-13));
    }
}

#[test]
fn covariance_is_the_mode_sum() {
    let basis = periodic_basis();
    let (x, y) = (0.3, -1.1);
    let direct: f64 = (1..=100).map(|k| (k as f64).powi(-6) * (k as f64 * x).sin() * (k as f64 * y).sin() / PI).sum();
    assert!((basis.covariance(x, y) - direct).abs() < 1e-15);
    assert_eq!(basis.q(2), 2f64.powi(-6));
}

#[test]
fn coarsening_is_the_pairwise_sum() {
    let basis = sine_quarter(30);
    let nodes = [-3.0, 0.5, 7.0];
    let fine = QWienerField::sample(&basis, &nodes, 1.0, 1.0 / 64.0, 9).unwrap();
    let c2 = fine.coarsen(2).unwrap();
    for n in 0..c2.steps() {
        for i in 0..3 {
            assert_eq!(c2.step(n)[i], fine.step(2 * n)[i] + fine.step(2 * n + 1)[i]);
        }
    }
    let c4 = fine.coarsen(4).unwrap();
    assert_eq!(c4, c2.coarsen(2).unwrap());
    assert_eq!(c4.dt(), 1.0 / 16.0);
    let c64 = fine.coarsen(64).unwrap();
    let total: f64 = (0..64).map(|n| fine.step(n)[1]).sum();
    assert!((c64.step(0)[1] - total).abs() < 1e-14);
}

#[test]
fn refinement_sums_back_exactly() {
    let basis = sine_quarter(30);
    let nodes = [-3.0, 0.5, 7.0];
    let coarse = QWienerField::sample(&basis, &nodes, 1.0, 0.25, 3).unwrap();
    let fine = coarse.refine(8).unwrap();
    assert_eq!(fine.steps(), 32);
    for n in 0..4 {
        for i in 0..3 {
            let s: f64 = (0..8).map(|m| fine.step(8 * n + m)[i]).sum();
            assert!((s - coarse.step(n)[i]).abs() <= 1e-14, "step {n} node {i}");
        }
        for k in 0..30 {
            let s: f64 = (0..8).map(|m| fine.mode_increments(8 * n + m)[k]).sum();
            assert!((s - coarse.mode_increments(n)[k]).abs() <= 1e-14);
        }
    }
    let twice = coarse.refine(2).unwrap().refine(2).unwrap();
    let once = coarse.refine(4).unwrap();
    for n in 0..16 {
        for i in 0..3 {
            assert!((twice.step(n)[i] - once.step(n)[i]).abs() <= 1e-14);
        }
    }
}

#[test]
fn refined_increments_have_the_fine_variance() {
    let basis = SpectralBasis::new(BasisKind::SineOverSqrtPi, -PI, PI, 6.0, 1).unwrap();
    let coarse = QWienerField::sample(&basis, &[0.0], 2000.0, 1.0, 17).unwrap();
    let fine = coarse.refine(4).unwrap();
    let n = fine.steps();
    let v: f64 = (0..n).map(|s| fine.mode_increments(s)[0].powi(2)).sum::<f64>() / n as f64;
    assert!((v / 0.25 - 1.0).abs() < 0.05, "variance {v}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let basis = sine_quarter(10);
    assert!(matches!(
        SpectralBasis::new(BasisKind::SineQuarter, -8.0, 8.0, 6.0, 0),
        Err(QWienerError::Config { field: "truncation", .. })
    ));
    assert!(matches!(step_count(1.0, 0.3), Err(QWienerError::Config { field: "dt", .. })));
    assert!(matches!(step_count(1.0, -0.5), Err(QWienerError::Config { field: "dt", .. })));
    assert_eq!(step_count(1.0, 1.0 / 1024.0).unwrap(), 1024);
    assert!(matches!(QWienerField::sample(&basis, &[], 1.0, 0.5, 1), Err(QWienerError::Argument { field: "nodes", .. })));
    assert!(QWienerField::sample(&basis, &[9.0], 1.0, 0.5, 1).is_err());
    let f = QWienerField::sample(&basis, &[0.0], 1.0, 0.25, 1).unwrap();
    assert!(matches!(f.refine(3), Err(QWienerError::Argument { field: "factor", .. })));
    assert!(f.coarsen(8).is_err());
    assert!(f.coarsen(1).is_err());
}

#[test]
fn exported_increments_cover_every_step_and_node() {
    let basis = sine_quarter(5);
    let f = QWienerField::sample(&basis, &[-1.0, 1.0], 1.0, 0.25, 2).unwrap();
    let mut seen = Vec::new();
    f.for_each_increment(|n, i, v| seen.push((n, i, v)));
    assert_eq!(seen.len(), 8);
    assert_eq!(seen[3], (1, 1, f.step(1)[1]));
}
