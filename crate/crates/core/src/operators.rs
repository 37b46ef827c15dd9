//! Toeplitz quantization of densities and atomic measures, Berezin
//! transforms, coherent-state correlations, Carleson norms and the trace
//! pairing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FockError, Result};
use crate::fock::{FockModel, ScanRow};
use crate::linalg::{OpMatrix, C64, ZERO};
use crate::par;
use crate::quadrature::{QuadGrid, QuadSpec};
use crate::symbol::Symbol;

/// A point mass `c δ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: C64,
    pub mass: C64,
}

/// A finite complex combination of point masses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Unit point mass at `z`.
    pub fn dirac(z: C64) -> Self {
        Self {
            atoms: vec![Atom { z, mass: C64::new(1.0, 0.0) }],
        }
    }

    pub fn push(&mut self, z: C64, mass: C64) -> &mut Self {
        self.atoms.push(Atom { z, mass });
        self
    }

    /// Total variation `Σ |c_j|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass.norm()).sum()
    }

    /// `|μ|(B(z, r))` for the open disc.
    pub fn variation_on_disc(&self, z: C64, r: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.z - z).norm() < r)
            .map(|a| a.mass.norm())
            .sum()
    }
}

/// Either kind of symbol accepted by the Toeplitz constructors.
#[derive(Clone, Copy)]
pub enum MeasureRef<'a> {
    Atoms(&'a DiscreteMeasure),
    Density(&'a dyn Symbol),
}

impl MeasureRef<'_> {
    pub fn toeplitz(&self, model: &FockModel, quad: &QuadSpec) -> Result<OpMatrix> {
        match self {
            MeasureRef::Atoms(mu) => toeplitz_measure(model, mu),
            MeasureRef::Density(f) => toeplitz_function(model, *f, quad),
        }
    }
}

/// `∫ c ê_j conj(ê_k)` over a grid, with `c = weight · f`.
pub fn toeplitz_on_grid(model: &FockModel, f: &dyn Symbol, grid: &QuadGrid) -> OpMatrix {
    let table = model.basis_table(grid);
    let coef: Vec<C64> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(p, w)| f.eval(*p) * *w)
        .collect();
    model.assemble(&table, &coef)
}

/// Matrix of `T_f`: `⟨T_f e_j, e_k⟩ = ∫ f e_j conj(e_k) e^{−2φ} dv`.
///
/// Radial symbols give diagonal matrices, computed entry by entry with
/// adaptive radial quadrature. Other symbols use a polar grid; compactly
/// supported ones are integrated over their supporting disc only.
pub fn toeplitz_function(model: &FockModel, f: &dyn Symbol, quad: &QuadSpec) -> Result<OpMatrix> {
    let n = model.dim();
    let breaks = f.radial_breaks();
    if f.is_radial() {
        let diag = par::map_range(n, |k| {
            model
                .moments()
                .radial_average(k, |r| f.eval(C64::new(r, 0.0)), &breaks)
        });
        let diag = diag.into_iter().collect::<Result<Vec<_>>>()?;
        return Ok(OpMatrix::from_diagonal(&diag));
    }
    let angles = quad
        .n_angles
        .unwrap_or_else(|| model.default_angles(f.angular_bandwidth() + 32));
    let grid = match f.support() {
        Some((c, r)) => QuadGrid::disk(c, r, &[], quad.panel_width, quad.nodes_per_panel, angles),
        None => QuadGrid::polar(
            quad.r_max.unwrap_or(model.r_cut()),
            &breaks,
            quad.panel_width,
            quad.nodes_per_panel,
            angles,
        ),
    };
    Ok(toeplitz_on_grid(model, f, &grid))
}

fn check_trusted(model: &FockModel, z: C64, what: &str) -> Result<()> {
    if model.is_trusted(z) {
        Ok(())
    } else {
        Err(FockError::TrustRadius(
            format!("{what} at {z} lies beyond the trust radius"),
            model.trust_radius(),
        ))
    }
}

/// Matrix of `T_μ` for an atomic measure:
/// `⟨T_μ e_a, e_b⟩ = Σ_j c_j e_a(z_j) conj(e_b(z_j)) e^{−2φ(z_j)}`.
pub fn toeplitz_measure(model: &FockModel, mu: &DiscreteMeasure) -> Result<OpMatrix> {
    let n = model.dim();
    let mut m = OpMatrix::zeros(n);
    for atom in &mu.atoms {
        check_trusted(model, atom.z, "atom")?;
        let b = model.weighted_basis(atom.z);
        for k in 0..n {
            let ck = atom.mass * b[k].conj();
            for j in 0..n {
                m.0[(k, j)] += ck * b[j];
            }
        }
    }
    Ok(m)
}

/// `T_F` for the normalized indicator `F = χ_{B(w, ε)} / (π ε²)`.
pub fn toeplitz_indicator_ball(model: &FockModel, w: C64, eps: f64, quad: &QuadSpec) -> Result<OpMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("epsilon must be positive, got {eps}"));
    }
    // Below this the disc is not resolvable around w in double precision.
    if eps <= 1e-12 * w.norm().max(1.0) {
        return Err(FockError::QuadratureNonConvergence {
            a: 0.0,
            b: eps,
            depth: crate::quadrature::MAX_DEPTH,
        });
    }
    let grid = model.disk_grid(w, eps, quad);
    let table = model.basis_table(&grid);
    let scale = 1.0 / (PI * eps * eps);
    let coef: Vec<C64> = grid.weights.iter().map(|x| C64::new(x * scale, 0.0)).collect();
    Ok(model.assemble(&table, &coef))
}

/// Berezin transform `B(A)(z) = ⟨A k_z, k_z⟩`.
pub fn berezin(model: &FockModel, a: &OpMatrix, z: C64) -> C64 {
    let k = model.normalized_kernel_vec(z);
    a.apply(&k).inner(&k)
}

/// Berezin transform on a list of points, tagged with trust flags.
pub fn berezin_scan(model: &FockModel, a: &OpMatrix, points: &[C64]) -> Vec<ScanRow> {
    par::map_slice(points, |z| ScanRow::new(*z, berezin(model, a, *z), model.is_trusted(*z)))
}

/// `⟨A k_z, k_w⟩`.
pub fn kernel_correlation(model: &FockModel, a: &OpMatrix, z: C64, w: C64) -> C64 {
    let kz = model.normalized_kernel_vec(z);
    let kw = model.normalized_kernel_vec(w);
    a.apply(&kz).inner(&kw)
}

/// Square lattice of centres with the given spacing covering `[−h, h]²`.
pub fn square_centers(half_width: f64, spacing: f64) -> Vec<C64> {
    assert!(spacing > 0.0, "spacing must be positive");
    let m = (half_width / spacing).floor() as i64;
    let mut out = Vec::with_capacity(((2 * m + 1) * (2 * m + 1)) as usize);
    for i in -m..=m {
        for j in -m..=m {
            out.push(C64::new(i as f64 * spacing, j as f64 * spacing));
        }
    }
    out
}

/// `sup_z |μ|(B(z, 1))` over the given centres. Densities use a polar rule
/// on each unit disc.
pub fn carleson_norm(mu: MeasureRef<'_>, centers: &[C64]) -> f64 {
    let vals = match mu {
        MeasureRef::Atoms(m) => centers.iter().map(|z| m.variation_on_disc(*z, 1.0)).collect(),
        MeasureRef::Density(f) => {
            let unit = QuadGrid::disk(ZERO, 1.0, &[], 0.25, 12, 96);
            par::map_slice(centers, |z| {
                unit.points
                    .iter()
                    .zip(&unit.weights)
                    .map(|(p, w)| f.eval(z + p).norm() * w)
                    .sum::<f64>()
            })
        }
    };
    vals.into_iter().fold(0.0, f64::max)
}

/// Both sides of the trace formula.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePairing {
    /// `∫ g(w) ⟨X k̃_w, k̃_w⟩ dv(w)`.
    pub integral: C64,
    /// `tr(T_g X)` from matrix algebra.
    pub algebraic: C64,
    pub difference: f64,
}

/// Evaluates `tr(T_g X)` two ways: by integrating `g` against the diagonal of
/// `X`'s coherent-state symbol, and by forming `T_g` and multiplying.
pub fn trace_pairing(model: &FockModel, g: &dyn Symbol, x: &OpMatrix, quad: &QuadSpec) -> Result<TracePairing> {
    let n = model.dim();
    if x.dim() != n {
        return invalid(format!("operator has dimension {}, model has {n}", x.dim()));
    }
    let angles = quad
        .n_angles
        .unwrap_or_else(|| model.default_angles(g.angular_bandwidth() + 32));
    let grid = match g.support() {
        Some((c, r)) => QuadGrid::disk(c, r, &g.radial_breaks(), quad.panel_width, quad.nodes_per_panel, angles),
        None => QuadGrid::polar(
            quad.r_max.unwrap_or(model.r_cut()),
            &g.radial_breaks(),
            quad.panel_width,
            quad.nodes_per_panel,
            angles,
        ),
    };
    let terms = par::map_range(grid.len(), |i| {
        let p = grid.points[i];
        let gv = g.eval(p);
        if gv == ZERO {
            return ZERO;
        }
        let kt = model.tilde_kernel_vec(p);
        gv * x.apply(&kt).inner(&kt) * grid.weights[i]
    });
    let integral: C64 = terms.into_iter().sum();
    let tg = toeplitz_function(model, g, quad)?;
    let algebraic = tg.compose(x).trace();
    Ok(TracePairing {
        integral,
        algebraic,
        difference: (integral - algebraic).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{Constant, Expr, Indicator};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn model(n: usize) -> FockModel {
        FockModel::classical(1.0, n).unwrap()
    }

    #[test]
    fn constant_symbol_is_identity() {
        let m = model(20);
        let t = toeplitz_function(&m, &Constant(c(1.0, 0.0)), &QuadSpec::default()).unwrap();
        assert!(t.sub(&OpMatrix::identity(20)).max_abs() < 1e-12);
    }

    #[test]
    fn abs2_is_diagonal_shift() {
        let m = model(20);
        let t = toeplitz_function(&m, &Expr::Abs2, &QuadSpec::default()).unwrap();
        for k in 0..20 {
            assert!((t.get(k, k) - c((k + 1) as f64, 0.0)).norm() < 1e-10 * (k + 1) as f64);
        }
    }

    #[test]
    fn z_symbol_is_subdiagonal() {
        let m = model(15);
        let t = toeplitz_function(&m, &Expr::Z, &QuadSpec::default()).unwrap();
        for j in 0..14 {
            assert!((t.get(j + 1, j) - c(((j + 1) as f64).sqrt(), 0.0)).norm() < 1e-9);
        }
        let mut off = t.clone();
        for j in 0..14 {
            off.0[(j + 1, j)] = ZERO;
        }
        assert!(off.max_abs() < 1e-9);
    }

    #[test]
    fn dirac_at_origin() {
        let m = model(10);
        let t = toeplitz_measure(&m, &DiscreteMeasure::dirac(ZERO)).unwrap();
        assert!((t.get(0, 0) - c(1.0 / PI, 0.0)).norm() < 1e-15);
        assert!(t.0.iter().skip(1).all(|x| *x == ZERO));
        assert_eq!(toeplitz_measure(&m, &DiscreteMeasure::empty()).unwrap(), OpMatrix::zeros(10));
        assert!(toeplitz_measure(&m, &DiscreteMeasure::dirac(c(50.0, 0.0))).is_err());
    }

    #[test]
    fn berezin_of_unit_disc_at_origin() {
        let m = model(40);
        let t = toeplitz_function(&m, &Indicator::unit_disc(), &QuadSpec::default()).unwrap();
        let b = berezin(&m, &t, ZERO);
        assert!((b.re - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn indicator_mollifier_approaches_dirac() {
        let m = model(20);
        let q = QuadSpec::default();
        let d = toeplitz_measure(&m, &DiscreteMeasure::dirac(ZERO)).unwrap();
        let far = toeplitz_indicator_ball(&m, ZERO, 0.5, &q).unwrap().sub(&d).op_norm();
        let near = toeplitz_indicator_ball(&m, ZERO, 0.1, &q).unwrap().sub(&d).op_norm();
        assert!(near < far);
        assert!(toeplitz_indicator_ball(&m, ZERO, 0.0, &q).is_err());
    }

    #[test]
    fn carleson_examples() {
        let centers = square_centers(2.0, 0.5);
        let one = Constant(c(1.0, 0.0));
        let v = carleson_norm(MeasureRef::Density(&one), &centers);
        assert!((v - PI).abs() < 1e-12);
        let d = DiscreteMeasure::dirac(ZERO);
        assert_eq!(carleson_norm(MeasureRef::Atoms(&d), &centers), 1.0);
    }

    #[test]
    fn trace_pairing_identity_on_unit_disc() {
        let m = model(30);
        let tp = trace_pairing(&m, &Indicator::unit_disc(), &OpMatrix::identity(30), &QuadSpec::default()).unwrap();
        assert!(tp.difference < 1e-10, "{tp:?}");
        assert!((tp.algebraic.re - 1.0).abs() < 1e-10);
    }
}
