//! Symplecticity of Runge–Kutta tableaux and the partitioned-family conditions.

use msym_core::tableau::{
    check_prk_kdv, check_prk_nls, check_prk_wave, is_symplectic, ButcherTableau, KdvPrkFamily, NlsPrkFamily,
    TableauError, WavePrkFamily,
};
use proptest::prelude::*;

const EPS: f64 = 1e-3;

fn close(found: f64, want: f64) -> bool {
    (found - want).abs() <= 1e-15
}

#[test]
fn builtin_tableaux() {
    assert!(is_symplectic(&ButcherTableau::midpoint()).max_residual() <= 1e-15);
    assert!(is_symplectic(&ButcherTableau::gauss2()).max_residual() <= 1e-15);
    assert_eq!(is_symplectic(&ButcherTableau::explicit_euler()).max_residual(), 1.0);
    assert_eq!(is_symplectic(&ButcherTableau::implicit_euler()).max_residual(), 1.0);
    let g = ButcherTableau::gauss2();
    assert!((g.c()[0] - (0.5 - 3f64.sqrt() / 6.0)).abs() < 1e-15);
    assert_eq!(g.weights(), &[0.5, 0.5]);
}

#[test]
fn perturbations_are_detected_at_their_size() {
    let m = ButcherTableau::midpoint();
    let r = is_symplectic(&m.with_a(0, 0, 0.5 + EPS)).max_residual();
    assert!(close(r, 2.0 * EPS), "{r:e}");
    let g = ButcherTableau::gauss2();
    let r = is_symplectic(&g.with_a(0, 1, g.a(0, 1) + EPS)).max_residual();
    assert!(close(r, 0.5 * EPS), "{r:e}");
    let r = is_symplectic(&g.with_b(1, 0.5 + EPS));
    assert!(r.max_residual() > 0.5 * EPS && !r.passes(1e-15));
    assert_eq!(r.failures(1e-15), vec!["symplectic"]);
}

#[test]
fn custom_tableau_from_rows() {
    let t = ButcherTableau::new(&[&[0.25, -0.25], &[0.75, 0.25]], &[0.5, 0.5]).unwrap();
    assert!(is_symplectic(&t).max_residual() <= 1e-15);
    assert!(matches!(ButcherTableau::new(&[], &[]), Err(TableauError::Empty(_))));
    assert!(matches!(ButcherTableau::new(&[&[0.5]], &[0.5, 0.5]), Err(TableauError::StageMismatch { .. })));
    assert!(matches!(ButcherTableau::by_name("rk4"), Err(TableauError::UnknownName(_))));
    assert_eq!(ButcherTableau::by_name("gauss2").unwrap(), ButcherTableau::gauss2());
}

#[test]
fn wave_families_pass() {
    for f in [
        WavePrkFamily::midpoint(),
        WavePrkFamily::gauss2(),
        WavePrkFamily::symplectic_euler(),
        WavePrkFamily::symplectic_euler_flipped(),
    ] {
        let r = check_prk_wave(&f).unwrap();
        assert_eq!(r.entries.len(), 3);
        assert!(r.max_residual() <= 1e-15, "{r:?}");
    }
}

#[test]
fn wave_family_perturbation() {
    let mut f = WavePrkFamily::midpoint();
    f.at1 = f.at1.with_a(0, 0, 0.5 + EPS);
    let r = check_prk_wave(&f).unwrap();
    assert!(close(r.get("temporal").unwrap(), EPS));
    assert!(close(r.get("temporal-noise").unwrap(), EPS));
    assert_eq!(r.get("spatial").unwrap(), 0.0);
    let mut f = WavePrkFamily::gauss2();
    f.a2 = f.a2.with_a(1, 0, f.a2.a(1, 0) + EPS);
    let r = check_prk_wave(&f).unwrap();
    assert_eq!(r.failures(1e-15), vec!["spatial"]);
    assert!(close(r.get("spatial").unwrap(), 0.5 * EPS));
}

#[test]
fn nls_families_pass() {
    for f in [
        NlsPrkFamily::midpoint(),
        NlsPrkFamily::uniform(ButcherTableau::gauss2()),
        NlsPrkFamily::symplectic_euler(),
        NlsPrkFamily::symplectic_euler_flipped(),
    ] {
        let r = check_prk_nls(&f).unwrap();
        assert_eq!(r.entries.len(), 8);
        assert!(r.max_residual() <= 1e-15, "{r:?}");
    }
}

#[test]
fn nls_family_perturbation() {
    let mut f = NlsPrkFamily::midpoint();
    f.abar2 = f.abar2.with_a(0, 0, 0.5 + EPS);
    let r = check_prk_nls(&f).unwrap();
    assert_eq!(r.failures(1e-15), vec!["temporal-noise", "noise-noise"]);
    assert!(close(r.max_residual(), EPS));
    // A weight mismatch is reported by name.
    let mut f = NlsPrkFamily::uniform(ButcherTableau::gauss2());
    f.a2 = f.a2.with_b(0, 0.5 + EPS);
    let r = check_prk_nls(&f).unwrap();
    assert!(r.failures(1e-15).contains(&"weights-spatial"));
    assert!(close(r.get("weights-spatial").unwrap(), EPS));
}

#[test]
fn kdv_families_pass() {
    for f in [
        KdvPrkFamily::midpoint(),
        KdvPrkFamily::uniform(ButcherTableau::gauss2()),
        KdvPrkFamily::symplectic_euler(),
        KdvPrkFamily::symplectic_euler_flipped(),
    ] {
        let r = check_prk_kdv(&f).unwrap();
        assert_eq!(r.entries.len(), 7);
        assert!(r.max_residual() <= 1e-15, "{r:?}");
    }
}

#[test]
fn kdv_family_perturbation() {
    let mut f = KdvPrkFamily::midpoint();
    f.abar = f.abar.with_a(0, 0, 0.5 + EPS);
    let r = check_prk_kdv(&f).unwrap();
    assert_eq!(r.failures(1e-15), vec!["noise-temporal"]);
    assert!(close(r.max_residual(), EPS));
}

#[test]
fn mismatched_stage_counts_are_rejected() {
    let mut f = WavePrkFamily::midpoint();
    f.at2 = ButcherTableau::gauss2();
    assert!(matches!(check_prk_wave(&f), Err(TableauError::StageMismatch { role: "at2", expected: 1, found: 2 })));
    let mut f = NlsPrkFamily::midpoint();
    f.a4 = ButcherTableau::gauss2();
    assert!(matches!(check_prk_nls(&f), Err(TableauError::StageMismatch { role: "a4", .. })));
    let mut f = KdvPrkFamily::midpoint();
    f.abar = ButcherTableau::gauss2();
    assert!(matches!(check_prk_kdv(&f), Err(TableauError::StageMismatch { role: "abar", .. })));
}

proptest! {
    #[test]
    fn symplecticity_is_permutation_invariant(swap in any::<bool>(), eps in -0.1f64..0.1) {
        let g = ButcherTableau::gauss2().with_a(0, 0, 0.25 + eps);
        let perm: &[usize] = if swap { &[1, 0] } else { &[0, 1] };
        let a = is_symplectic(&g).max_residual();
        let b = is_symplectic(&g.permuted(perm)).max_residual();
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn one_stage_family(a in -2.0f64..2.0) {
        // A one-stage tableau is symplectic exactly when a = b/2.
        let t = ButcherTableau::new(&[&[a]], &[1.0]).unwrap();
        let r = is_symplectic(&t).max_residual();
        prop_assert!((r - (1.0 - 2.0 * a).abs()).abs() <= 1e-15);
    }
}
