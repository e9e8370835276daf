use std::f64::consts::PI;

use faer::{c64, Mat};
use proptest::prelude::*;

use widomlab::coefficients::{frak_a, frak_u, w1_frak_u};
use widomlab::domains::Domain;
use widomlab::harness::fit_two_term;
use widomlab::linalg::{self, CMat};
use widomlab::spectra::TestFunction;
use widomlab::symbols::{Dependence, MatrixSymbol, Profile};

fn entry() -> impl Strategy<Value = f64> {
    -1.0..1.0f64
}

fn complex_matrix(n: usize) -> impl Strategy<Value = CMat> {
    proptest::collection::vec((entry(), entry()), n * n)
        .prop_map(move |v| Mat::from_fn(n, n, |i, j| c64::new(v[i * n + j].0, v[i * n + j].1)))
}

fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
    complex_matrix(n).prop_map(|m| linalg::hermitian_part(m.as_ref()))
}

fn hermitian_pair() -> impl Strategy<Value = (CMat, CMat)> {
    (1usize..=3).prop_flat_map(|n| (hermitian(n), hermitian(n)))
}

/// A symbol depending on both variables with entries mixed from `m`.
fn mixed_symbol(m: CMat) -> MatrixSymbol {
    let n = m.nrows();
    MatrixSymbol::from_fn(1, n, Dependence::Both, false, None, None, move |x, xi| {
        Mat::from_fn(n, n, |i, j| m[(i, j)] * c64::new((x[0] + i as f64).cos(), (xi[0] * (j + 1) as f64).sin()))
    })
    .unwrap()
}

fn dense_power(m: &CMat, p: u32) -> CMat {
    let mut acc = Mat::<c64>::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        acc = &acc * m;
    }
    acc
}

fn smooth_catalog() -> Vec<TestFunction> {
    vec![
        TestFunction::monomial(2).unwrap(),
        TestFunction::monomial(3).unwrap(),
        TestFunction::analytic_exp(0.7),
        TestFunction::smooth_bump(0.3, 0.8).unwrap(),
        TestFunction::polynomial(vec![0.0, 1.0, -1.0]).unwrap(),
    ]
}

/// `sup |g'|` on `[lo, hi]` by central differences on a fine grid.
fn derivative_bound(g: &TestFunction, lo: f64, hi: f64) -> f64 {
    let n = 4000;
    let step = 1e-6;
    (0..=n)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            ((g.eval(t + step) - g.eval(t - step)) / (2.0 * step)).abs()
        })
        .fold(0.0, f64::max)
}

fn trace_norm(m: &CMat) -> f64 {
    linalg::hermitian_eigenvalues(m.as_ref()).unwrap().iter().map(|l| l.abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn real_part_is_idempotent(m in complex_matrix(2), x in -2.0..2.0f64, xi in -2.0..2.0f64) {
        let a = mixed_symbol(m);
        let once = a.real_part();
        let twice = once.real_part();
        prop_assert!(once.hermitian());
        let diff = &once.eval(&[x], &[xi]) - &twice.eval(&[x], &[xi]);
        prop_assert!(linalg::max_abs(diff.as_ref()) <= 1e-14);
    }

    #[test]
    fn power_is_additive(m in complex_matrix(3), p in 1u32..4, q in 1u32..4, x in -2.0..2.0f64, xi in -2.0..2.0f64) {
        let a = mixed_symbol(m);
        let lhs = a.power(p + q).unwrap().eval(&[x], &[xi]);
        let rhs = &a.power(p).unwrap().eval(&[x], &[xi]) * &a.power(q).unwrap().eval(&[x], &[xi]);
        prop_assert!(linalg::max_abs((&lhs - &rhs).as_ref()) <= 1e-12);
    }

    #[test]
    fn scalar_trace_of_power_matches_dense_power(m in complex_matrix(3), p in 1u32..6) {
        let a = mixed_symbol(m.clone());
        let st = a.power(p).unwrap().scalar_trace();
        prop_assert_eq!(st.dim_n(), 1);
        // At least 100 sample points per case.
        for k in 0..100 {
            let x = -2.0 + 0.04 * k as f64;
            let xi = 1.5 - 0.03 * k as f64;
            let dense = dense_power(&a.eval(&[x], &[xi]), p);
            let tr = (0..3).fold(c64::new(0.0, 0.0), |s, i| s + dense[(i, i)]);
            let got = st.eval(&[x], &[xi])[(0, 0)];
            prop_assert!((got - tr).norm() <= 1e-11 * tr.norm().max(1.0));
        }
    }

    #[test]
    fn frak_u_is_symmetric((b1, b2) in hermitian_pair(), k in 0usize..5) {
        let g = &smooth_catalog()[k];
        let a = frak_u(g, b1.as_ref(), b2.as_ref()).unwrap();
        let b = frak_u(g, b2.as_ref(), b1.as_ref()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn frak_u_commuting_reduction(d1 in proptest::collection::vec(-1.0..1.0f64, 3), d2 in proptest::collection::vec(-1.0..1.0f64, 3), u in complex_matrix(3), k in 0usize..5) {
        // Shared eigenbasis taken from a random Hermitian matrix.
        let h = linalg::hermitian_part(u.as_ref());
        let (_, q) = linalg::hermitian_eigen(h.as_ref()).unwrap();
        let conj = |d: &[f64]| {
            let dm = linalg::diag_real(d);
            let t = &q * &dm;
            linalg::hermitian_part((&t * q.adjoint()).as_ref())
        };
        let g = &smooth_catalog()[k];
        let full = frak_u(g, conj(&d1).as_ref(), conj(&d2).as_ref()).unwrap();
        let split: f64 = (0..3)
            .map(|i| frak_u(g, linalg::diag_real(&[d1[i]]).as_ref(), linalg::diag_real(&[d2[i]]).as_ref()).unwrap())
            .sum();
        prop_assert!((full - split).abs() <= 1e-8 * full.abs().max(1.0));
    }

    #[test]
    fn frak_a_is_frak_u_against_zero(b in -1.0..1.0f64, k in 0usize..5) {
        let g = &smooth_catalog()[k];
        let a = frak_a(g, b).unwrap();
        let u = frak_u(g, linalg::diag_real(&[b]).as_ref(), linalg::diag_real(&[0.0]).as_ref()).unwrap();
        prop_assert!((a - u).abs() <= 1e-10);
    }

    #[test]
    fn w1_respects_the_derivative_bound((b1, b2) in hermitian_pair(), k in 0usize..5, two_d in any::<bool>()) {
        let g = &smooth_catalog()[k];
        let n = b1.nrows();
        let d = if two_d { 2 } else { 1 };
        let (lam, gam) = if two_d {
            (Domain::unit_square(), Domain::disk([0.0, 0.0], 1.0).unwrap())
        } else {
            (Domain::interval(0.0, 1.0).unwrap(), Domain::interval(-1.0, 1.0).unwrap())
        };
        let dl = lam.boundary_quadrature(200);
        let dg = gam.boundary_quadrature(200);
        let a1 = MatrixSymbol::constant(d, b1.clone()).unwrap();
        let a2 = MatrixSymbol::constant(d, b2.clone()).unwrap();
        let v = w1_frak_u(g, &a1, &a2, &dl, &dg).unwrap().value;
        let spec = |m: &CMat| linalg::hermitian_eigenvalues(m.as_ref()).unwrap();
        let all: Vec<f64> = spec(&b1).into_iter().chain(spec(&b2)).collect();
        let lo = all.iter().cloned().fold(0.0, f64::min);
        let hi = all.iter().cloned().fold(0.0, f64::max);
        let bound = 4.0 / (2.0 * PI) * dl.total_measure * dg.total_measure * derivative_bound(g, lo, hi)
            * (trace_norm(&b1) + trace_norm(&b2));
        prop_assert!(v.abs() <= bound + 1e-14, "n = {n}: |W1| = {} > {bound}", v.abs());
    }

    #[test]
    fn fit_recovers_exact_models(cd in -5.0..5.0f64, clog in -5.0..5.0f64, c1 in -5.0..5.0f64, d in 1usize..=2, start in 10.0..100.0f64) {
        let ls: Vec<f64> = (0..6).map(|k| start * 2f64.powi(k)).collect();
        let table: Vec<(f64, f64)> = ls
            .iter()
            .map(|&l| {
                let p = l.powi(d as i32 - 1);
                (l, cd * p * l + clog * p * l.ln() + c1 * p)
            })
            .collect();
        let f = fit_two_term(&table, d).unwrap();
        let scale = 1.0 + cd.abs() + clog.abs() + c1.abs();
        prop_assert!((f.full.c_d - cd).abs() <= 1e-9 * scale);
        prop_assert!((f.full.c_log - clog).abs() <= 1e-9 * scale);
        prop_assert!((f.full.c_1 - c1).abs() <= 1e-9 * scale);
        prop_assert!((f.upper_half.c_log - clog).abs() <= 1e-9 * scale);
        prop_assert!(f.residuals.iter().all(|r| r.abs() <= 1e-7 * scale * ls[5].powi(d as i32)));
    }
}

#[test]
fn declared_catalog_symbols_pass_sampling_checks() {
    let (sx, sz) = MatrixSymbol::noncommuting_pair(2).unwrap();
    let sep = MatrixSymbol::separable(
        2,
        Profile::Plateau { center: 0.5, inner: 0.2, outer: 0.4 },
        linalg::identity(2),
        Profile::CosPlateau { freq: 1.0, center: 0.0, inner: 1.0, outer: 1.5 },
    )
    .unwrap();
    for s in [sx, sz, sep, MatrixSymbol::windowed(1, linalg::identity(3), 1.0, 2.0).unwrap()] {
        s.verify_declarations().unwrap();
    }
}
