//! Structure matrices, Hamiltonian derivatives and initial data.

use msym_core::systems::{initial_data, make_system, HamiltonianSystem, Nonlinearity, Profile, SystemError, SystemSpec, DIM};
use proptest::prelude::*;

const NONLINEARITIES: [Nonlinearity; 5] =
    [Nonlinearity::Sin, Nonlinearity::Identity, Nonlinearity::Cubic, Nonlinearity::Zero, Nonlinearity::One];

fn all_systems() -> Vec<HamiltonianSystem> {
    let mut v = Vec::new();
    for f in NONLINEARITIES {
        for g in NONLINEARITIES {
            v.push(make_system(SystemSpec::Wave { f, g }).unwrap());
        }
    }
    v.push(make_system(SystemSpec::Nls).unwrap());
    v.push(make_system(SystemSpec::Kdv { beta: 1.0, lambda: 0.5 }).unwrap());
    v.push(make_system(SystemSpec::Kdv { beta: 0.02, lambda: 2.0 }).unwrap());
    v
}

fn central_gradient(f: impl Fn(&[f64; DIM]) -> f64, z: &[f64; DIM]) -> [f64; DIM] {
    let h = 1e-6;
    let mut g = [0.0; DIM];
    for c in 0..DIM {
        let (mut a, mut b) = (*z, *z);
        a[c] += h;
        b[c] -= h;
        g[c] = (f(&a) - f(&b)) / (2.0 * h);
    }
    g
}

#[test]
fn structure_matrices_are_skew() {
    for s in all_systems() {
        for i in 0..DIM {
            for j in 0..DIM {
                assert_eq!(s.m()[i][j], -s.m()[j][i], "{}", s.label());
                assert_eq!(s.k()[i][j], -s.k()[j][i], "{}", s.label());
            }
        }
    }
}

#[test]
fn wave_structure_and_placeholder() {
    let s = make_system(SystemSpec::Wave { f: Nonlinearity::Sin, g: Nonlinearity::Sin }).unwrap();
    assert_eq!(s.m()[0][2], 1.0);
    assert_eq!(s.k()[0][3], -1.0);
    assert_eq!(s.constraint_rows(), [false, true, false, true]);
    // The placeholder component enters nothing.
    for i in 0..DIM {
        assert_eq!(s.m()[1][i], 0.0);
        assert_eq!(s.k()[1][i], 0.0);
    }
    let z = [0.3, 0.0, -0.4, 1.2];
    assert_eq!(s.grad_s1(&z)[0], -(0.3f64).sin());
    assert_eq!(s.grad_s2(&z)[0], (0.3f64).sin());
}

#[test]
fn kdv_rejects_nonpositive_parameters() {
    assert!(matches!(make_system(SystemSpec::Kdv { beta: 0.0, lambda: 1.0 }), Err(SystemError::NonPositive(_))));
    assert!(matches!(make_system(SystemSpec::Kdv { beta: 1.0, lambda: -1.0 }), Err(SystemError::NonPositive(_))));
}

#[test]
fn nonlinearity_menu_is_closed() {
    assert!(matches!(Nonlinearity::from_name("tanh"), Err(SystemError::UnknownNonlinearity(_))));
    for n in NONLINEARITIES {
        assert_eq!(Nonlinearity::from_name(n.name()).unwrap(), n);
    }
    assert_eq!(Nonlinearity::from_name("u").unwrap(), Nonlinearity::Identity);
    assert_eq!(Nonlinearity::from_name("u3").unwrap(), Nonlinearity::Cubic);
}

#[test]
fn nonlinearity_derivatives_match_finite_differences() {
    let h = 1e-6;
    for n in NONLINEARITIES {
        for u in [-1.7, -0.2, 0.0, 0.9, 2.5] {
            let d = (n.eval(u + h) - n.eval(u - h)) / (2.0 * h);
            assert!((d - n.deriv(u)).abs() < 1e-7, "{n:?} at {u}");
            let a = (n.antideriv(u + h) - n.antideriv(u - h)) / (2.0 * h);
            assert!((a - n.eval(u)).abs() < 1e-7, "{n:?} at {u}");
        }
        assert_eq!(n.antideriv(0.0), 0.0);
    }
}

#[test]
fn initial_data_per_system() {
    let nodes = [-1.0, 0.0, 0.5];
    let wave = make_system(SystemSpec::Wave { f: Nonlinearity::Sin, g: Nonlinearity::Sin }).unwrap();
    let st = initial_data(&wave, Profile::Sech, &nodes, -8.0);
    assert_eq!(st.z[1], [0.0, 0.0, 1.0, 0.0]);
    assert!((st.z[0][2] - 1.0 / (1.0f64).cosh()).abs() < 1e-15);
    let nls = make_system(SystemSpec::Nls).unwrap();
    let st = initial_data(&nls, Profile::Sin, &nodes, -std::f64::consts::PI);
    assert!((st.z[2][0] - 0.5f64.sin()).abs() < 1e-15);
    assert!((st.z[2][2] - 0.5f64.cos()).abs() < 1e-15);
    let kdv = make_system(SystemSpec::Kdv { beta: 2.0, lambda: 1.0 }).unwrap();
    let st = initial_data(&kdv, Profile::Sin, &nodes, -std::f64::consts::PI);
    let u = 0.5f64.sin();
    assert!((st.z[2][1] - (0.5 * u * u - 2.0 * u)).abs() < 1e-15);
    // ρ is the antiderivative of u from the left end: −cos(x) − 1.
    assert!((st.z[2][2] - (-(0.5f64).cos() - 1.0)).abs() < 1e-14);
    assert!((st.z[2][3] - 0.5f64.cos()).abs() < 1e-15);
    let zero = initial_data(&kdv, Profile::Zero, &nodes, 0.0);
    assert_eq!(zero.max_abs(), 0.0);
}

proptest! {
    #[test]
    fn gradients_match_finite_differences(
        which in 0usize..28,
        z in proptest::array::uniform4(-1.5f64..1.5),
    ) {
        let s = &all_systems()[which];
        let g1 = s.grad_s1(&z);
        let g2 = s.grad_s2(&z);
        let f1 = central_gradient(|x| s.s1(x), &z);
        let f2 = central_gradient(|x| s.s2(x), &z);
        for c in 0..DIM {
            prop_assert!((g1[c] - f1[c]).abs() < 1e-6, "{} dS1 comp {}", s.label(), c);
            prop_assert!((g2[c] - f2[c]).abs() < 1e-6, "{} dS2 comp {}", s.label(), c);
        }
    }

    #[test]
    fn hessians_are_symmetric_and_match_gradients(
        which in 0usize..28,
        z in proptest::array::uniform4(-1.5f64..1.5),
    ) {
        let s = &all_systems()[which];
        let (h1, h2) = (s.hess_s1(&z), s.hess_s2(&z));
        for i in 0..DIM {
            let f1 = central_gradient(|x| s.grad_s1(x)[i], &z);
            let f2 = central_gradient(|x| s.grad_s2(x)[i], &z);
            for j in 0..DIM {
                prop_assert_eq!(h1[i][j], h1[j][i]);
                prop_assert_eq!(h2[i][j], h2[j][i]);
                prop_assert!((h1[i][j] - f1[j]).abs() < 1e-6);
                prop_assert!((h2[i][j] - f2[j]).abs() < 1e-6);
            }
        }
    }
}
