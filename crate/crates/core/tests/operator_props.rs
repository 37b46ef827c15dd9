use std::sync::OnceLock;

use focklab_core::localization::{
    compactness_indicator, decay_profile, local_norm, tail_curve, tail_norm, PairSampling,
};
use focklab_core::operators::{berezin, kernel_correlation, toeplitz_function, toeplitz_measure};
use focklab_core::symbol::Expr;
use focklab_core::{DiscreteMeasure, FockModel, Indicator, OpMatrix, QuadSpec, C64};
use proptest::prelude::*;

const N: usize = 30;

fn model() -> &'static FockModel {
    static M: OnceLock<FockModel> = OnceLock::new();
    M.get_or_init(|| FockModel::classical(1.0, N).unwrap())
}

fn chi() -> &'static OpMatrix {
    static T: OnceLock<OpMatrix> = OnceLock::new();
    T.get_or_init(|| toeplitz_function(model(), &Indicator::unit_disc(), &QuadSpec::default()).unwrap())
}

fn symbols() -> Vec<&'static str> {
    vec![
        "exp(-abs2(z))",
        "indicator(0.5+0.5*i, 1.5)",
        "z*exp(-abs2(z))",
        "(z+conj(z))*exp(-abs2(z)/2)/3",
        "i*indicator(-1, 0.75)",
    ]
}

fn arb_symbol() -> impl Strategy<Value = Expr> {
    (0..symbols().len()).prop_map(|i| Expr::parse(symbols()[i]).unwrap())
}

fn arb_point(r: f64) -> impl Strategy<Value = C64> {
    (0.0..r, 0.0..std::f64::consts::TAU).prop_map(|(a, t)| C64::from_polar(a, t))
}

fn arb_operator() -> impl Strategy<Value = OpMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), N * N)
        .prop_map(|v| OpMatrix::from_fn(N, |k, j| C64::new(v[k * N + j].0, v[k * N + j].1)))
}

#[test]
fn compact_symbol_indicators_fall_off() {
    let m = FockModel::classical(1.0, 40).unwrap();
    let t = toeplitz_function(&m, &Indicator::unit_disc(), &QuadSpec::default()).unwrap();
    assert!(tail_norm(&m, &t, 6.0).unwrap() < 1e-2);
    let rho = compactness_indicator(&m, &t, 1.0, &[6.0]).unwrap();
    assert!(rho.values[0] < 1e-2);
}

#[test]
fn product_keeps_half_the_decay_rate() {
    let m = model();
    let q = QuadSpec::default();
    let radii: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let plan = PairSampling::default();
    for src in ["indicator(0, 2)", "1/(1+abs2(z)) + z*exp(-abs2(z))/2", "(z+conj(z))/(2+abs2(z))"] {
        let t = toeplitz_function(m, &Expr::parse(src).unwrap(), &q).unwrap();
        let single = decay_profile(m, &t, &radii, &plan).unwrap().fit_gaussian_exponent().unwrap();
        let prod = decay_profile(m, &t.compose(&t), &radii, &plan).unwrap().fit_gaussian_exponent().unwrap();
        assert!(prod >= 0.5 * single, "{src}: {prod} {single}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adjoint_is_involution(a in arb_operator()) {
        prop_assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn conjugate_symbol_gives_adjoint(f in arb_symbol()) {
        let q = QuadSpec::default();
        let t = toeplitz_function(model(), &f, &q).unwrap();
        let tc = toeplitz_function(model(), &conj_expr(&f), &q).unwrap();
        prop_assert!(tc.sub(&t.adjoint()).max_abs() < 1e-10);
    }

    #[test]
    fn berezin_bounded_by_sup(f in arb_symbol(), z in arb_point(3.0)) {
        let t = toeplitz_function(model(), &f, &QuadSpec::default()).unwrap();
        let sup = sup_on_grid(&f);
        prop_assert!(berezin(model(), &t, z).norm() <= sup * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn toeplitz_correlation_decays(f in arb_symbol(), z in arb_point(2.0), w in arb_point(2.0)) {
        // |⟨T_f k_z, k_w⟩| ≤ sup|f| e^{−α|z−w|²/4}, sharper than e^{−α r²/8}.
        let t = toeplitz_function(model(), &f, &QuadSpec::default()).unwrap();
        let c = kernel_correlation(model(), &t, z, w).norm();
        let bound = sup_on_grid(&f) * (-(z - w).norm_sqr() / 4.0).exp();
        prop_assert!(c <= bound * (1.0 + 1e-6) + 1e-10, "{c} > {bound}");
    }

    #[test]
    fn positive_symbol_gives_psd(c in 0.1f64..2.0, r in 0.2f64..2.0, x in -1.0f64..1.0) {
        let f = Expr::parse(&format!("{c}*exp(-(z-({x}))*(conj(z)-({x}))/{r})")).unwrap();
        let t = toeplitz_function(model(), &f, &QuadSpec::default()).unwrap();
        let ev = t.hermitian_eigenvalues();
        prop_assert!(ev.iter().all(|e| *e >= -1e-8));
        let mut mu = DiscreteMeasure::empty();
        mu.push(C64::new(x, 0.0), C64::new(c, 0.0));
        let tm = toeplitz_measure(model(), &mu).unwrap();
        prop_assert!(tm.hermitian_eigenvalues().iter().all(|e| *e >= -1e-8));
    }

    #[test]
    fn tail_norm_nonincreasing(a in arb_operator(), r in 0.0f64..4.0, dr in 0.0f64..3.0) {
        let t1 = tail_norm(model(), &a, r).unwrap();
        let t2 = tail_norm(model(), &a, r + dr).unwrap();
        prop_assert!(t2 <= t1 * (1.0 + 1e-10) + 1e-12);
        let curve = tail_curve(model(), chi(), &[r, r + dr + 0.1]).unwrap();
        prop_assert!(curve.is_nonincreasing(1e-12));
    }

    #[test]
    fn local_norm_at_most_op_norm(a in arb_operator(), z in arb_point(2.0), d in 0.25f64..1.5) {
        let l = local_norm(model(), &a, z, d, &QuadSpec::default()).unwrap();
        prop_assert!(l <= a.op_norm() + 1e-6);
    }

    #[test]
    fn decay_profile_bounded_by_norm(a in arb_operator(), seed in 0u64..100) {
        let plan = PairSampling { directions: 8, base_points: 3, seed };
        let curve = decay_profile(model(), &a, &[0.0, 1.0, 2.0], &plan).unwrap();
        let norm = a.op_norm();
        prop_assert!(curve.values.iter().all(|v| *v <= norm * (1.0 + 1e-8)));
        let id = decay_profile(model(), &OpMatrix::identity(N), &[0.0], &plan).unwrap();
        prop_assert!((id.values[0] - 1.0).abs() < 1e-10);
    }
}

fn conj_expr(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(c.conj()),
        Expr::Z => Expr::ConjZ,
        Expr::ConjZ => Expr::Z,
        Expr::Abs2 | Expr::Indicator(..) => e.clone(),
        Expr::Exp(a) => Expr::Exp(Box::new(conj_expr(a))),
        Expr::Neg(a) => Expr::Neg(Box::new(conj_expr(a))),
        Expr::Add(a, b) => Expr::Add(Box::new(conj_expr(a)), Box::new(conj_expr(b))),
        Expr::Sub(a, b) => Expr::Sub(Box::new(conj_expr(a)), Box::new(conj_expr(b))),
        Expr::Mul(a, b) => Expr::Mul(Box::new(conj_expr(a)), Box::new(conj_expr(b))),
        Expr::Div(a, b) => Expr::Div(Box::new(conj_expr(a)), Box::new(conj_expr(b))),
        Expr::Pow(a, k) => Expr::Pow(Box::new(conj_expr(a)), *k),
    }
}

fn sup_on_grid(f: &Expr) -> f64 {
    use focklab_core::Symbol;
    let mut s = 0.0f64;
    for i in -60..=60 {
        for j in -60..=60 {
            s = s.max(f.eval(C64::new(0.1 * i as f64, 0.1 * j as f64)).norm());
        }
    }
    s
}
