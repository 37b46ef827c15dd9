//! Executes one experiment and collects its artifacts and invariants.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use focklab_core::approximation::{heat_convergence_curve, sharp_product, verify_sharp, SymbolPoly};
use focklab_core::frames::{frame_norm_scan, identity_deviation, identity_quadrature, make_cover, unit_square_samples};
use focklab_core::localization::{compactness_indicator, decay_profile, essnorm_report, PairSampling};
use focklab_core::operators::berezin_scan;
use focklab_core::translations::{shell_points, theta_with, weighted_translation};
use focklab_core::weight::check_phi_condition;
use focklab_core::{FockModel, OpMatrix, QuadSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Expect, Kind};
use crate::presets::{self, BuiltOperator};

#[derive(Debug, Clone, Serialize)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Everything a run records about itself. Contains no timestamps or thread
/// counts, so identical configs give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub config_hash: String,
    pub config: Value,
    pub operator: Option<String>,
    pub trust_radius: f64,
    pub untrusted_samples: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub invariants: Vec<Invariant>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
    pub passed: bool,
}

pub struct Artifacts {
    pub stem: String,
    pub csv: Vec<u8>,
    pub json: Vec<u8>,
    pub manifest: Manifest,
}

impl Artifacts {
    pub fn manifest_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        v.push(b'\n');
        v
    }

    pub fn manifest_hash(&self) -> String {
        hex(&Sha256::digest(self.manifest_bytes()))
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.stem)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in [
            (format!("{}.csv", self.stem), &self.csv),
            (format!("{}.json", self.stem), &self.json),
            (self.manifest_name(), &self.manifest_bytes()),
        ] {
            let path = dir.join(&name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Default)]
struct Outcome {
    csv: Vec<u8>,
    json: Value,
    invariants: Vec<Invariant>,
    tolerances: BTreeMap<String, f64>,
    untrusted: usize,
    warnings: Vec<String>,
}

impl Outcome {
    /// Records `value <= tol`.
    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.tolerances.insert(name.to_string(), tol);
        self.invariants.push(Invariant {
            name: name.to_string(),
            value,
            tolerance: tol,
            pass: value <= tol,
        });
    }

    /// Records a boolean property; `value` is 1 when it holds.
    fn holds(&mut self, name: &str, ok: bool) {
        self.invariants.push(Invariant {
            name: name.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            pass: ok,
        });
    }
}

fn poly(terms: &Option<Vec<[f64; 4]>>, default: SymbolPoly) -> SymbolPoly {
    match terms {
        None => default,
        Some(list) => {
            let mut p = SymbolPoly::zero();
            for t in list {
                p.add_term(t[0] as u32, t[1] as u32, C64::new(t[2], t[3]));
            }
            p
        }
    }
}

fn poly_json(p: &SymbolPoly) -> Result<Value> {
    Ok(serde_json::from_str(&p.to_json()?)?)
}

fn csv_rows<S: Serialize>(rows: &[S]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn operator(op: &Option<BuiltOperator>) -> &BuiltOperator {
    op.as_ref().expect("validated config carries an operator")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let model = FockModel::new(cfg.weight.build()?, cfg.dim)?;
    let quad = QuadSpec::default();
    let op = match &cfg.operator {
        Some(spec) => Some(presets::build(&model, spec, &quad)?),
        None => None,
    };
    let p = &cfg.params;
    let rho = model.trust_radius();
    let mut out = Outcome::default();

    match cfg.kind {
        Kind::BerezinScan => {
            let a = &operator(&op).matrix;
            let radii = p.radii.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0]);
            let points = shell_points(&radii, p.directions.unwrap_or(8));
            let rows = berezin_scan(&model, a, &points);
            let mut buf = Vec::new();
            FockModel::write_scan_csv(&rows, &mut buf)?;
            out.csv = buf;
            let norm = a.op_norm();
            let max_b = rows.iter().map(|r| C64::new(r.value_re, r.value_im).norm()).fold(0.0, f64::max);
            out.untrusted = rows.iter().filter(|r| !r.trusted).count();
            out.at_most("berezin_excess_over_norm", max_b - norm, 1e-10);
            out.json = json!({ "op_norm": norm, "max_abs_berezin": max_b, "points": rows.len() });
        }
        Kind::DecayScan => {
            let a = &operator(&op).matrix;
            let radii = p.radii.clone().unwrap_or_else(|| (0..=8).map(|i| 0.5 * i as f64).collect());
            let plan = PairSampling { seed: cfg.seed, directions: p.directions.unwrap_or(32), ..Default::default() };
            let curve = decay_profile(&model, a, &radii, &plan)?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            out.csv = buf;
            let norm = a.op_norm();
            out.at_most("profile_excess_over_norm", curve.max_value() - norm * (1.0 + 1e-8), 0.0);
            out.untrusted = curve.untrusted_count();
            if !curve.omitted.is_empty() {
                out.warnings.push(format!("radii {:?} omitted: no trusted pair fits", curve.omitted));
            }
            out.json = json!({ "curve": curve, "gaussian_exponent": curve.fit_gaussian_exponent() });
        }
        Kind::Essnorm => {
            let a = &operator(&op).matrix;
            let radii = p.radii.clone().unwrap_or_else(|| (0..=6).map(|i| i as f64).collect());
            let z_radius = p.z_radius.unwrap_or(5.0);
            let d = p.d.unwrap_or(1.0);
            let big_r = p.big_r.unwrap_or(1.0);
            let rep = essnorm_report(&model, a, &radii, &[(z_radius, d)], &quad)?;
            let rho_curve = compactness_indicator(&model, a, big_r, &radii)?;
            let mut buf = Vec::new();
            rep.tail_curve.write_csv(&mut buf)?;
            out.csv = buf;
            out.holds("tail_norm_nonincreasing", rep.tail_monotone);
            let last_r = *radii.iter().max_by(|a, b| a.total_cmp(b)).expect("nonempty radii");
            let last = rep.tail_curve.value_at(last_r).unwrap_or(f64::NAN);
            match p.expect {
                Some(Expect::Compact) => out.at_most(&format!("tail_norm({last_r})"), last, 0.05),
                Some(Expect::Noncompact) => out.at_most(&format!("1 - tail_norm({last_r})"), 1.0 - last, 0.1),
                None => {}
            }
            out.untrusted = rep.tail_curve.untrusted_count()
                + rho_curve.untrusted_count()
                + rep.local_curve.iter().filter(|s| !s.trusted).count();
            out.json = json!({ "report": rep, "compactness_indicator": rho_curve, "R": big_r });
        }
        Kind::FrameCheck => {
            let d = p.d.unwrap_or(1.0);
            let cover = make_cover(d, p.window.unwrap_or(6.0))?.verify(10_000, cfg.seed);
            let samples = unit_square_samples(p.samples.unwrap_or(50), cfg.seed);
            let scan = frame_norm_scan(&model, p.big_r.unwrap_or(4.0), &samples);
            let mut buf = Vec::new();
            scan.write_csv(&mut buf)?;
            out.csv = buf;
            out.holds("cover_properties", cover.passed);
            out.at_most("frame_norm_spread", scan.spread, 0.10);
            out.untrusted = scan.untrusted_columns;
            out.json = json!({ "cover": cover, "min": scan.min, "max": scan.max, "spread": scan.spread });
        }
        Kind::ResolutionCheck => {
            let h = p.cell.unwrap_or(0.1);
            let radius = p.window.unwrap_or(8.0);
            let m = model.dim().min(10);
            let d1 = identity_deviation(&identity_quadrature(&model, h, radius)?, m);
            let d2 = identity_deviation(&identity_quadrature(&model, 0.5 * h, radius)?, m);
            #[derive(Serialize)]
            struct Row {
                cell: f64,
                deviation: f64,
            }
            out.csv = csv_rows(&[Row { cell: h, deviation: d1 }, Row { cell: 0.5 * h, deviation: d2 }])?;
            out.at_most("identity_deviation", d1, 1e-3);
            out.at_most("halving_ratio", d2 / d1, 0.5);
            if radius > rho {
                out.warnings.push(format!("domain radius {radius} exceeds trust radius {rho:.4}"));
                out.untrusted = 1;
            }
            out.json = json!({ "block": m, "deviation": [d1, d2] });
        }
        Kind::Heat => {
            let built = operator(&op);
            let sym = built
                .symbol
                .as_deref()
                .context("operator: heat needs a density symbol (preset with a symbol, or symbol)")?;
            let t_list = p.t_list.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.01]);
            let curve = heat_convergence_curve(&model, sym, &t_list, &quad)?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            out.csv = buf;
            out.holds("decreasing_as_t_shrinks", curve.is_nondecreasing(1e-9));
            out.untrusted = curve.untrusted_count();
            out.json = json!({ "curve": curve });
        }
        Kind::Sharp => {
            let f = poly(&p.f, SymbolPoly::z());
            let g = poly(&p.g, SymbolPoly::zbar());
            let prod = sharp_product(&f, &g, model.alpha())?;
            let residual = verify_sharp(&model, &f, &g)?;
            #[derive(Serialize)]
            struct Row {
                a: u32,
                b: u32,
                re: f64,
                im: f64,
            }
            let rows: Vec<Row> = prod.terms().map(|((a, b), c)| Row { a, b, re: c.re, im: c.im }).collect();
            out.csv = csv_rows(&rows)?;
            out.at_most("sharp_residual", residual, 1e-8);
            out.json = json!({
                "f": poly_json(&f)?,
                "g": poly_json(&g)?,
                "product": poly_json(&prod)?,
                "residual": residual,
            });
        }
        Kind::Translation => {
            let radii = p.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0]);
            let zs = shell_points(&radii, p.directions.unwrap_or(4));
            let per_z = p.samples.unwrap_or(5);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            #[derive(Serialize)]
            struct Row {
                z_re: f64,
                z_im: f64,
                w_re: f64,
                w_im: f64,
                theta_re: f64,
                theta_im: f64,
                residual: f64,
                trusted: bool,
            }
            let mut rows = Vec::new();
            let (mut phase, mut modulus, mut resid, mut square) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            let mut min_block = usize::MAX;
            for z in &zs {
                let u = weighted_translation(&model, *z, &quad)?;
                if !u.trusted {
                    out.untrusted += 1;
                    out.warnings.push(format!("|z| = {:.3} exceeds half the trust radius", z.norm()));
                }
                let b = u.trusted_block;
                min_block = min_block.min(b);
                if b > 0 {
                    let sq = u.matrix.compose(&u.matrix).leading_block(b).sub(&OpMatrix::identity(b)).op_norm();
                    square = square.max(sq);
                }
                let mut taken = 0;
                let mut tries = 0;
                while taken < per_z && tries < 100 * per_z {
                    tries += 1;
                    let w = C64::from_polar(rho * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>());
                    if !model.is_trusted(*z - w) {
                        continue;
                    }
                    let t = theta_with(&model, &u, w);
                    phase = phase.max((t.theta - t.expected).norm());
                    modulus = modulus.max((t.theta.norm() - 1.0).abs());
                    resid = resid.max(t.residual);
                    rows.push(Row {
                        z_re: z.re,
                        z_im: z.im,
                        w_re: w.re,
                        w_im: w.im,
                        theta_re: t.theta.re,
                        theta_im: t.theta.im,
                        residual: t.residual,
                        trusted: t.trusted,
                    });
                    taken += 1;
                }
            }
            out.csv = csv_rows(&rows)?;
            out.at_most("theta_modulus", modulus, 1e-5);
            out.at_most("theta_phase", phase, 1e-5);
            out.at_most("theta_factorization", resid, 1e-4);
            out.at_most("u_squared_on_trusted_block", square, 1e-4);
            out.holds("trusted_block_nonempty", min_block > 0 && min_block != usize::MAX);
            out.json = json!({ "samples": rows.len(), "min_trusted_block": min_block });
        }
        Kind::PhiCheck => {
            let r_max = p.r_max.unwrap_or(20.0);
            let n = p.samples.unwrap_or(2000);
            let grid: Vec<f64> = (0..n).map(|i| 0.01 + (r_max - 0.01) * i as f64 / (n.max(2) - 1) as f64).collect();
            let rep = check_phi_condition(model.weight(), &grid)?;
            #[derive(Serialize)]
            struct Row {
                r: f64,
                laplacian: f64,
            }
            let rows: Vec<Row> = grid.iter().map(|&r| Row { r, laplacian: model.weight().laplacian_fd(r) }).collect();
            out.csv = csv_rows(&rows)?;
            out.holds("phi_condition", rep.satisfied);
            out.json = json!({ "report": rep });
        }
    }

    let config = serde_json::to_value(cfg)?;
    let config_hash = hex(&Sha256::digest(serde_json::to_vec(&config)?))[..16].to_string();
    let stem = format!("{}_{}", cfg.kind.slug(), config_hash);
    let mut json_bytes = serde_json::to_vec_pretty(&out.json)?;
    json_bytes.push(b'\n');
    if out.untrusted > 0 {
        out.warnings.push(format!("{} samples lie beyond the trust radius {rho:.4}", out.untrusted));
    }
    let files = vec![
        FileEntry { name: format!("{stem}.csv"), sha256: hex(&Sha256::digest(&out.csv)) },
        FileEntry { name: format!("{stem}.json"), sha256: hex(&Sha256::digest(&json_bytes)) },
    ];
    let passed = out.invariants.iter().all(|i| i.pass);
    Ok(Artifacts {
        stem,
        csv: out.csv,
        json: json_bytes,
        manifest: Manifest {
            tool: "focklab",
            version: env!("CARGO_PKG_VERSION"),
            kind: cfg.kind.slug().to_string(),
            config_hash,
            config,
            operator: op.as_ref().map(|o| o.label.clone()),
            trust_radius: rho,
            untrusted_samples: out.untrusted,
            tolerances: out.tolerances,
            invariants: out.invariants,
            warnings: out.warnings,
            files,
            passed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(src: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(src).unwrap()
    }

    #[test]
    fn identity_berezin_is_one() {
        let art = run(&cfg("kind = \"berezin-scan\"\ndim = 20\n[operator]\npreset = \"identity\"\n")).unwrap();
        let text = String::from_utf8(art.csv).unwrap();
        for line in text.lines().skip(1) {
            let re: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!((re - 1.0).abs() < 1e-10, "{line}");
        }
        assert!(art.manifest.passed);
    }

    #[test]
    fn sharp_closed_case_passes() {
        let art = run(&cfg("kind = \"sharp\"\ndim = 40\n")).unwrap();
        assert!(art.manifest.passed);
        assert!(art.manifest.invariants[0].value < 1e-8);
    }

    #[test]
    fn essnorm_indicator_is_compact() {
        let art = run(&cfg(
            "kind = \"essnorm\"\ndim = 40\n[operator]\npreset = \"indicator-ball\"\n[params]\nexpect = \"compact\"\n",
        ))
        .unwrap();
        let inv = art.manifest.invariants.iter().find(|i| i.name == "tail_norm(6)").unwrap();
        assert!(inv.pass && inv.value < 0.05);
        assert!(art.manifest.trust_radius > 3.0);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let c = cfg("kind = \"decay-scan\"\ndim = 20\nseed = 3\n[operator]\nsymbol = \"exp(-abs2(z))\"\n");
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.manifest_hash(), b.manifest_hash());
    }
}
