//! Acceptance gate: one PASS/FAIL line per criterion, every tolerance pinned.
//! Failures are reported, not fatal; set `FOCKLAB_ACCEPTANCE_STRICT=1` to
//! exit nonzero on any FAIL line.

use std::f64::consts::PI;
use std::time::Instant;

use focklab_core::approximation::{
    heat_convergence_curve, heat_transform, point_mass_limit_curve, rank_one_from_pointmasses, verify_sharp,
    GridSymbol, SymbolPoly,
};
use focklab_core::frames::{
    frame_norm_scan, identity_deviation, identity_quadrature, make_cover, unit_square_samples,
};
use focklab_core::localization::{compactness_indicator, local_norm, local_norm_sup, tail_norm};
use focklab_core::operators::{berezin, toeplitz_function, trace_pairing};
use focklab_core::symbol::{Expr, Indicator};
use focklab_core::translations::{
    default_f_samples, shell_points, theta_with, translation_essnorm_with, weighted_translation,
};
use focklab_core::{CoeffVec, FockModel, OpMatrix, QuadSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failures: usize,
    started: Instant,
}

impl Gate {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "[{}] {id:<4} {detail}  ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            self.started.elapsed().as_secs_f64()
        );
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn classical(alpha: f64, n: usize) -> FockModel {
    FockModel::classical(alpha, n).expect("classical model")
}

fn random_disc_point(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>())
}

/// `π k! / α^{k+1}` by a running product.
fn moment_closed(alpha: f64, k: usize) -> f64 {
    (1..=k).fold(PI / alpha, |acc, i| acc * i as f64 / alpha)
}

fn criterion_1(g: &mut Gate) {
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.0, 2.0] {
        let m = classical(alpha, 8);
        for k in 0..=30 {
            let q = m.moments().quadrature_moment(k).unwrap();
            worst = worst.max((q / moment_closed(alpha, k) - 1.0).abs());
        }
    }
    g.line("1", worst <= TOL, format!("moments: max rel err {worst:.2e} <= {TOL:.0e} (k<=30, alpha in 0.5,1,2)"));
}

fn criterion_2(g: &mut Gate) {
    const TOL: f64 = 1e-6;
    let alpha = 1.0;
    let m = classical(alpha, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_w = 0.0f64;
    let mut worst_n = 0.0f64;
    for _ in 0..400 {
        let z = random_disc_point(&mut rng, 3.0);
        let w = random_disc_point(&mut rng, 3.0);
        let gauss = (-alpha * (z - w).norm_sqr() / 2.0).exp();
        // e^{-φ(z)} |K(z,w)| e^{-φ(w)} carries the Lebesgue normalization α/π.
        worst_w = worst_w.max((m.weighted_kernel_modulus(z, w) - alpha / PI * gauss).abs());
        let kz = m.normalized_kernel_vec(z);
        let kw = m.normalized_kernel_vec(w);
        worst_n = worst_n.max((kz.inner(&kw).norm() - gauss).abs());
    }
    let pass = worst_w <= TOL && worst_n <= TOL;
    g.line(
        "2",
        pass,
        format!("kernel Gaussian identity: weighted {worst_w:.2e}, normalized {worst_n:.2e} <= {TOL:.0e} (N=80, |z|,|w|<=3)"),
    );
}

fn criterion_3(g: &mut Gate) {
    const TOL: f64 = 1e-8;
    let n = 40;
    let m = classical(1.0, n);
    let grid = m.plane_grid(&QuadSpec::default(), &[], 0);
    let table = m.basis_table(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let deg = rng.gen_range(0..n / 2);
        let coeffs: Vec<C64> = (0..n)
            .map(|k| if k <= deg { c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) } else { c(0.0, 0.0) })
            .collect();
        let f = CoeffVec::from_vec(coeffs);
        let w = random_disc_point(&mut rng, 3.0);
        let bw = m.weighted_basis(w);
        // ⟨f, K(·,w)⟩ by plane quadrature, both sides scaled by e^{−φ(w)}.
        let mut ip = c(0.0, 0.0);
        for (p, wt) in grid.weights.iter().enumerate() {
            let row = &table[p * n..(p + 1) * n];
            let fu: C64 = row.iter().zip(f.as_slice()).map(|(b, c)| b * c).sum();
            let kw: C64 = row.iter().zip(&bw).map(|(b, e)| b * e.conj()).sum();
            ip += fu * kw.conj() * *wt;
        }
        let fw = m.eval_weighted(&f, w);
        let scale = m.phi(w).exp();
        worst = worst.max((ip - fw).norm() * scale);
    }
    g.line("3", worst <= TOL, format!("reproducing property: max |<f,K_w> - f(w)| {worst:.2e} <= {TOL:.0e} (20 polys, N=40)"));
}

fn criterion_4(g: &mut Gate) {
    const TOL: f64 = 1e-8;
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.0, 2.0] {
        let m = classical(alpha, 40);
        for a in 0..=3 {
            for b in 0..=3 {
                let f = SymbolPoly::monomial(a, 0, c(1.0, 0.0));
                let h = SymbolPoly::monomial(0, b, c(1.0, 0.0));
                worst = worst.max(verify_sharp(&m, &f, &h).unwrap());
            }
        }
    }
    // Closed case through the quadrature Toeplitz constructor.
    let mut closed = 0.0f64;
    for alpha in [0.5, 1.0, 2.0] {
        let m = classical(alpha, 40);
        let q = QuadSpec::default();
        let tz = toeplitz_function(&m, &Expr::Z, &q).unwrap();
        let tzb = toeplitz_function(&m, &Expr::ConjZ, &q).unwrap();
        let tabs = toeplitz_function(&m, &Expr::Abs2, &q).unwrap();
        let r = tz
            .compose(&tzb)
            .sub(&tabs)
            .add(&OpMatrix::identity(40).scale(c(1.0 / alpha, 0.0)))
            .leading_block(35)
            .op_norm();
        closed = closed.max(r);
    }
    g.line(
        "4",
        worst <= TOL && closed <= TOL,
        format!("sharp product: max residual {worst:.2e}, closed case {closed:.2e} <= {TOL:.0e} (a,b<=3, N=40)"),
    );
}

fn criterion_5(g: &mut Gate) {
    const TOL: f64 = 1e-4;
    let m = classical(1.0, 40);
    let t = toeplitz_function(&m, &Indicator::unit_disc(), &QuadSpec::default()).unwrap();
    let b = berezin(&m, &t, c(0.0, 0.0));
    let err = (b - c(1.0 - (-1.0f64).exp(), 0.0)).norm();
    g.line("5", err <= TOL, format!("Berezin B(T_chi)(0) = {:.8}, err {err:.2e} <= {TOL:.0e}", b.re));
}

fn criterion_6(g: &mut Gate) {
    let q = QuadSpec::default();
    let m40 = classical(1.0, 40);
    let m60 = classical(1.0, 60);
    let m120 = classical(1.0, 120);
    let chi = Indicator::unit_disc();
    let t40 = toeplitz_function(&m40, &chi, &q).unwrap();
    let t60 = toeplitz_function(&m60, &chi, &q).unwrap();

    let rho = compactness_indicator(&m40, &t40, 1.0, &[4.0]).unwrap().values[0];
    let tail = tail_norm(&m40, &t40, 6.0).unwrap();
    let local = local_norm(&m40, &t40, c(5.0, 0.0), 1.0, &q).unwrap();
    let shell = shell_points(&[3.0, 3.5, 4.0], 4);
    let us: Vec<_> = shell.iter().map(|z| weighted_translation(&m60, *z, &q).unwrap()).collect();
    let fs = default_f_samples(60, 0x5eed);
    let trans = translation_essnorm_with(&t60, &fs, &us).value;
    let outer: Vec<_> = us.iter().filter(|u| (u.z.norm() - 4.0).abs() < 1e-12).cloned().collect();
    let coherent = translation_essnorm_with(&t60, &fs[..1], &outer).value;
    let localized = translation_essnorm_with(&t60, &fs[..8], &outer).value;
    let spread = translation_essnorm_with(&t60, &fs[8..], &outer).value;
    let pass_chi = rho < 1e-3 && tail < 0.05 && local < 1e-2 && trans < 0.05;
    g.line(
        "6a",
        pass_chi,
        format!(
            "T_chi estimators: rho(4)={rho:.2e}<1e-3, tail(6)={tail:.2e}<0.05, local(5,1)={local:.2e}<1e-2, translation={trans:.2e}<0.05"
        ),
    );
    println!(
        "       info: translation at |z|=4 only: e_0 {coherent:.2e}, e_0..e_7 {localized:.2e}, random {spread:.2e}; {} of {} shifts beyond rho/2",
        us.iter().filter(|u| !u.trusted).count(),
        us.len()
    );

    let in_band = |v: f64| (0.9..=1.0 + 1e-6).contains(&v);
    let id40 = OpMatrix::identity(40);
    let rho_id = compactness_indicator(&m40, &id40, 1.0, &[4.0]).unwrap().values[0];
    let tail_id = tail_norm(&m120, &OpMatrix::identity(120), 6.0).unwrap();
    let local_id = local_norm_sup(&m120, &OpMatrix::identity(120), c(5.0, 0.0), &[1.0, 2.0, 3.0], &q).unwrap();
    let trans_id = translation_essnorm_with(&OpMatrix::identity(60), &fs, &us).value;
    let pass_id = [rho_id, tail_id, local_id, trans_id].iter().all(|v| in_band(*v));
    g.line(
        "6b",
        pass_id,
        format!(
            "Id estimators in [0.9, 1+1e-6]: rho(4)={rho_id:.6}, tail(6)[N=120]={tail_id:.6}, local sup_d(5)[N=120]={local_id:.6}, translation={trans_id:.6}"
        ),
    );
}

fn criterion_7(g: &mut Gate) {
    let mut cover_ok = true;
    for d in [0.5, 1.0, 2.0] {
        let rep = make_cover(d, 6.0).unwrap().verify(10_000, 7);
        cover_ok &= rep.passed;
    }
    g.line("7a", cover_ok, "cover: disjoint, tiling, overlap <= 4, diam <= 4d*sqrt(2) at 1e4 points (d=0.5,1,2)".into());

    const GRAM_TOL: f64 = 1e-6;
    let m80 = classical(1.0, 80);
    let lat: Vec<C64> = (-3..=3)
        .flat_map(|a| (-3..=3).map(move |b| c(a as f64, b as f64)))
        .collect();
    let vecs: Vec<CoeffVec> = lat.iter().map(|u| m80.tilde_kernel_vec(*u)).collect();
    let mut worst = 0.0f64;
    for i in 0..lat.len() {
        for j in 0..lat.len() {
            let want = 1.0 / PI * (-(lat[i] - lat[j]).norm_sqr() / 2.0).exp();
            worst = worst.max((vecs[i].inner(&vecs[j]).norm() - want).abs());
        }
    }
    g.line("7b", worst <= GRAM_TOL, format!("frame Gram decay: max err {worst:.2e} <= {GRAM_TOL:.0e} (|u|_inf<=3, N=80)"));

    let scan = frame_norm_scan(&m80, 4.0, &unit_square_samples(50, 77));
    g.line(
        "7c",
        scan.spread < 0.10,
        format!("frame norm scan: spread {:.2e} < 0.10 (R=4, 50 samples, norms {:.6}..{:.6})", scan.spread, scan.min, scan.max),
    );

    let m20 = classical(1.0, 20);
    let d1 = identity_deviation(&identity_quadrature(&m20, 0.1, 8.0).unwrap(), 10);
    let d2 = identity_deviation(&identity_quadrature(&m20, 0.05, 8.0).unwrap(), 10);
    g.line(
        "7d",
        d1 < 1e-3 && d2 <= 0.5 * d1,
        format!("resolution of identity: dev(0.1)={d1:.2e}<1e-3, dev(0.05)={d2:.2e} <= dev(0.1)/2"),
    );
}

fn criterion_8(g: &mut Gate) {
    let q = QuadSpec::default();
    let m30 = classical(1.0, 30);
    let curve = heat_convergence_curve(&m30, &Indicator::unit_disc(), &[0.2, 0.1, 0.05, 0.01], &q).unwrap();
    // Radii are stored ascending in t, so decreasing t means nondecreasing values.
    let mono = curve.is_nondecreasing(1e-9);
    let last = curve.value_at(0.01).unwrap();
    g.line(
        "8a",
        mono && last < 0.05,
        format!("heat convergence: values {:?} monotone in t, value(0.01)={last:.3e}<0.05", fmt_vals(&curve.values)),
    );

    const HEAT_TOL: f64 = 1e-6;
    let gauss = Expr::parse("exp(-abs2(z))").unwrap();
    let grid = GridSymbol::sample(&gauss, 6.0, 0.02).unwrap();
    let mut worst = 0.0f64;
    for t in [0.01, 0.1, 0.25] {
        let h = heat_transform(&grid, t).unwrap();
        for j in 0..h.ny {
            for i in 0..h.nx {
                let p = h.point(i, j);
                if p.re.abs() > 3.0 || p.im.abs() > 3.0 {
                    continue;
                }
                let s = 1.0 + 4.0 * t;
                let want = (-p.norm_sqr() / s).exp() / s;
                worst = worst.max((h.value(i, j).re - want).abs());
            }
        }
    }
    g.line("8b", worst <= HEAT_TOL, format!("Gaussian heat closed form: max err {worst:.2e} <= {HEAT_TOL:.0e}"));

    let pm = point_mass_limit_curve(&m30, c(0.0, 0.0), &[0.5, 0.25, 0.1], &q).unwrap();
    g.line(
        "8c",
        pm.is_strictly_increasing(),
        format!("point-mass limit: eps {:?} -> {:?} strictly decreasing as eps shrinks", pm.radii, fmt_vals(&pm.values)),
    );

    const R1_TOL: f64 = 1e-8;
    let m40 = classical(1.0, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 20 {
        let z = random_disc_point(&mut rng, m40.trust_radius());
        let w = random_disc_point(&mut rng, m40.trust_radius());
        match rank_one_from_pointmasses(&m40, z, w) {
            Ok(r) => {
                worst = worst.max(r.residual);
                count += 1;
            }
            Err(_) => continue,
        }
    }
    g.line("8d", worst < R1_TOL, format!("rank-one factorization: max residual {worst:.2e} < {R1_TOL:.0e} (20 trusted pairs, N=40)"));
}

fn fmt_vals(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3e}")).collect()
}

fn criterion_9(g: &mut Gate) {
    let m = classical(1.0, 50);
    let tp = trace_pairing(&m, &Indicator::unit_disc(), &OpMatrix::identity(50), &QuadSpec::default()).unwrap();
    let alpha_err = (tp.algebraic - c(1.0, 0.0)).norm();
    g.line(
        "9",
        tp.difference <= 1e-4 && alpha_err <= 2e-3,
        format!(
            "trace formula: |integral - algebraic| {:.2e} <= 1e-4, |tr - alpha| {alpha_err:.2e} <= 2e-3 (N=50)",
            tp.difference
        ),
    );
}

fn criterion_10(g: &mut Gate) {
    const TOL: f64 = 1e-5;
    let q = QuadSpec::default();
    let m = classical(1.0, 60);
    let rho = m.trust_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let zs: Vec<C64> = (0..5).map(|_| random_disc_point(&mut rng, 2.0)).collect();
    let mut mod_err = 0.0f64;
    let mut phase_err = 0.0f64;
    let mut samples = 0;
    let mut sq_err = 0.0f64;
    let mut min_block = usize::MAX;
    let mut full_err = 0.0f64;
    for z in &zs {
        let u = weighted_translation(&m, *z, &q).unwrap();
        let mut taken = 0;
        while taken < 10 {
            let w = random_disc_point(&mut rng, rho);
            if !m.is_trusted(*z - w) {
                continue;
            }
            let t = theta_with(&m, &u, w);
            mod_err = mod_err.max((t.theta.norm() - 1.0).abs());
            phase_err = phase_err.max((t.theta - t.expected).norm());
            taken += 1;
            samples += 1;
        }
        let b = u.trusted_block;
        min_block = min_block.min(b);
        sq_err = sq_err.max(u.matrix.compose(&u.matrix).leading_block(b).sub(&OpMatrix::identity(b)).op_norm());
        let full = u.matrix.compose(&u.matrix).leading_block(55).sub(&OpMatrix::identity(55)).op_norm();
        full_err = full_err.max(full);
    }
    g.line(
        "10a",
        mod_err <= TOL && phase_err <= TOL,
        format!("Theta phase: ||Theta|-1| {mod_err:.2e}, |Theta - e^(i Im z conj w)| {phase_err:.2e} <= {TOL:.0e} ({samples} trusted samples)"),
    );
    g.line(
        "10b",
        sq_err <= 1e-4 && min_block > 0,
        format!("U_z^2 = Id on trusted block: {sq_err:.2e} <= 1e-4 (|z|<=2, N=60, block >= {min_block})"),
    );
    println!("       info: on the (N-5) block the same residual is {full_err:.2e}");
}

fn main() {
    let mut g = Gate {
        failures: 0,
        started: Instant::now(),
    };
    println!("acceptance criteria (pinned tolerances)");
    criterion_1(&mut g);
    criterion_2(&mut g);
    criterion_3(&mut g);
    criterion_4(&mut g);
    criterion_5(&mut g);
    criterion_6(&mut g);
    criterion_7(&mut g);
    criterion_8(&mut g);
    criterion_9(&mut g);
    criterion_10(&mut g);
    println!("criterion 11 (CLI determinism) runs in crates/cli/tests/determinism.rs");
    if g.failures > 0 {
        println!("{} criteria FAILED", g.failures);
        if std::env::var_os("FOCKLAB_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
        return;
    }
    println!("all criteria passed");
}
