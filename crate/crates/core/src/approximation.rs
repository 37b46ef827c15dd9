//! Symbol calculus on the classical space and approximation of Toeplitz
//! operators: the sharp product, heat-transform smoothing, point-mass
//! mollification and the rank-one factorization through point masses.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FockError, Result};
use crate::fock::FockModel;
use crate::linalg::{OpMatrix, C64, ZERO};
use crate::localization::DecayCurve;
use crate::operators::{toeplitz_indicator_ball, toeplitz_measure, toeplitz_on_grid, DiscreteMeasure};
use crate::par;
use crate::quadrature::{QuadGrid, QuadSpec};
use crate::symbol::Symbol;

/// Rows and columns dropped from the end when comparing shift-type matrices.
pub const CORNER: usize = 5;

/// A polynomial `Σ c_{ab} z^a z̄^b`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolPoly {
    terms: BTreeMap<(u32, u32), C64>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    a: u32,
    b: u32,
    re: f64,
    im: f64,
}

impl SymbolPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(0, 0, c)
    }

    /// `c z^a z̄^b`.
    pub fn monomial(a: u32, b: u32, c: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(a, b, c);
        p
    }

    pub fn z() -> Self {
        Self::monomial(1, 0, C64::new(1.0, 0.0))
    }

    pub fn zbar() -> Self {
        Self::monomial(0, 1, C64::new(1.0, 0.0))
    }

    pub fn add_term(&mut self, a: u32, b: u32, c: C64) {
        let e = self.terms.entry((a, b)).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&(a, b));
        }
    }

    pub fn coeff(&self, a: u32, b: u32) -> C64 {
        self.terms.get(&(a, b)).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree `max(a + b)`; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((a, b), c) in other.terms() {
            out.add_term(a, b, c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero();
        for ((a, b), c) in self.terms() {
            out.add_term(a, b, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for ((a1, b1), c1) in self.terms() {
            for ((a2, b2), c2) in other.terms() {
                out.add_term(a1 + a2, b1 + b2, c1 * c2);
            }
        }
        out
    }

    /// `∂/∂z`.
    pub fn d_z(&self) -> Self {
        let mut out = Self::zero();
        for ((a, b), c) in self.terms() {
            if a > 0 {
                out.add_term(a - 1, b, c * a as f64);
            }
        }
        out
    }

    /// `∂/∂z̄`.
    pub fn d_zbar(&self) -> Self {
        let mut out = Self::zero();
        for ((a, b), c) in self.terms() {
            if b > 0 {
                out.add_term(a, b - 1, c * b as f64);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let v: Vec<TermJson> = self
            .terms()
            .map(|((a, b), c)| TermJson { a, b, re: c.re, im: c.im })
            .collect();
        Ok(serde_json::to_string(&v)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Vec<TermJson> = serde_json::from_str(s)?;
        let mut p = Self::zero();
        for t in v {
            if !(t.re.is_finite() && t.im.is_finite()) {
                return invalid("polynomial coefficients must be finite");
            }
            p.add_term(t.a, t.b, C64::new(t.re, t.im));
        }
        Ok(p)
    }
}

impl Symbol for SymbolPoly {
    fn eval(&self, z: C64) -> C64 {
        let zb = z.conj();
        self.terms().map(|((a, b), c)| c * z.powu(a) * zb.powu(b)).sum()
    }

    fn is_radial(&self) -> bool {
        self.terms.keys().all(|(a, b)| a == b)
    }

    fn angular_bandwidth(&self) -> usize {
        self.terms.keys().map(|(a, b)| a.abs_diff(*b) as usize).max().unwrap_or(0)
    }
}

/// `f ♯_α g = Σ_γ (−α)^{−γ}/γ! · ∂_z^γ f · ∂_z̄^γ g`, an exact finite sum.
pub fn sharp_product(f: &SymbolPoly, g: &SymbolPoly, alpha: f64) -> Result<SymbolPoly> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let mut out = SymbolPoly::zero();
    let mut df = f.clone();
    let mut dg = g.clone();
    let mut coef = 1.0;
    let mut gamma = 0u32;
    while !df.is_zero() && !dg.is_zero() {
        out = out.add(&df.mul(&dg).scale(C64::new(coef, 0.0)));
        gamma += 1;
        coef /= -alpha * gamma as f64;
        df = df.d_z();
        dg = dg.d_zbar();
    }
    Ok(out)
}

/// Exact Toeplitz matrix of a polynomial symbol from the moments:
/// `⟨T_{z^a z̄^b} e_j, e_k⟩ = δ_{k, j+a−b} m_{j+a} / √(m_j m_k)`.
pub fn toeplitz_poly(model: &FockModel, f: &SymbolPoly) -> Result<OpMatrix> {
    let n = model.dim();
    let kmax = model.moments().k_max();
    if (n - 1) + f.degree() as usize > kmax {
        return invalid(format!("symbol degree {} exceeds the moment table", f.degree()));
    }
    let lm = model.moments().log_moments();
    let mut m = OpMatrix::zeros(n);
    for ((a, b), c) in f.terms() {
        let (a, b) = (a as usize, b as usize);
        for j in 0..n {
            let Some(k) = (j + a).checked_sub(b) else { continue };
            if k >= n {
                continue;
            }
            let v = (lm[j + a] - 0.5 * (lm[j] + lm[k])).exp();
            m.0[(k, j)] += c * v;
        }
    }
    Ok(m)
}

/// `‖T_f T_g − T_{f ♯_α g}‖` on the leading `(N − 5)` block. Refuses
/// non-classical weights.
pub fn verify_sharp(model: &FockModel, f: &SymbolPoly, g: &SymbolPoly) -> Result<f64> {
    if !model.weight().is_classical() {
        return Err(FockError::NotClassical(
            "the sharp-product composition law holds only for the classical weight".into(),
        ));
    }
    let h = sharp_product(f, g, model.alpha())?;
    let tf = toeplitz_poly(model, f)?;
    let tg = toeplitz_poly(model, g)?;
    let th = toeplitz_poly(model, &h)?;
    let m = model.dim().saturating_sub(CORNER);
    Ok(tf.compose(&tg).sub(&th).leading_block(m).op_norm())
}

/// Complex samples on a rectangular grid `x_i = x0 + i h`, `y_j = y0 + j h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSymbol {
    pub origin: C64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * nx + i]`.
    pub values: Vec<C64>,
}

#[derive(Serialize)]
struct GridRow {
    x: f64,
    y: f64,
    re: f64,
    im: f64,
}

impl GridSymbol {
    /// Samples `f` on the square `[−half, half]²` with spacing `h`.
    pub fn sample(f: &dyn Symbol, half: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && half > 0.0 && half.is_finite()) {
            return invalid("grid spacing and half-width must be positive");
        }
        let m = (half / h).round() as usize;
        let n = 2 * m + 1;
        let origin = C64::new(-(m as f64) * h, -(m as f64) * h);
        let values = par::map_range(n * n, |idx| {
            let (i, j) = (idx % n, idx / n);
            f.eval(origin + C64::new(i as f64 * h, j as f64 * h))
        });
        let g = Self {
            origin,
            spacing: h,
            nx: n,
            ny: n,
            values,
        };
        if g.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return invalid("sampled symbol has non-finite values");
        }
        Ok(g)
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.origin + C64::new(i as f64 * self.spacing, j as f64 * self.spacing)
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.values[j * self.nx + i]
    }

    /// `h² Σ values`.
    pub fn mass(&self) -> C64 {
        self.values.iter().sum::<C64>() * (self.spacing * self.spacing)
    }

    /// CSV with columns `x, y, re, im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.point(i, j);
                let v = self.value(i, j);
                w.serialize(GridRow { x: p.re, y: p.im, re: v.re, im: v.im })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Symbol for GridSymbol {
    /// Bilinear interpolation; zero outside the grid.
    fn eval(&self, z: C64) -> C64 {
        let u = (z.re - self.origin.re) / self.spacing;
        let v = (z.im - self.origin.im) / self.spacing;
        if u < 0.0 || v < 0.0 || u > (self.nx - 1) as f64 || v > (self.ny - 1) as f64 {
            return ZERO;
        }
        let i = (u.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (v.floor() as usize).min(self.ny.saturating_sub(2));
        let (fu, fv) = (u - i as f64, v - j as f64);
        let (i1, j1) = ((i + 1).min(self.nx - 1), (j + 1).min(self.ny - 1));
        self.value(i, j) * ((1.0 - fu) * (1.0 - fv))
            + self.value(i1, j) * (fu * (1.0 - fv))
            + self.value(i, j1) * ((1.0 - fu) * fv)
            + self.value(i1, j1) * (fu * fv)
    }

    fn support(&self) -> Option<(C64, f64)> {
        let w = (self.nx - 1) as f64 * self.spacing;
        let h = (self.ny - 1) as f64 * self.spacing;
        Some((self.origin + C64::new(0.5 * w, 0.5 * h), 0.5 * (w * w + h * h).sqrt()))
    }
}

/// Normalized samples of `e^{−x²/4t}` out to six standard deviations.
fn heat_taps(t: f64, h: f64) -> Vec<f64> {
    let reach = 6.0 * (2.0 * t).sqrt();
    let m = (reach / h).floor() as i64;
    let raw: Vec<f64> = (-m..=m)
        .map(|i| {
            let x = i as f64 * h;
            (-x * x / (4.0 * t)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn convolve_axis(src: &[C64], nx: usize, ny: usize, taps: &[f64], along_x: bool) -> Vec<C64> {
    let m = (taps.len() / 2) as i64;
    let rows = par::map_range(ny, |j| {
        (0..nx)
            .map(|i| {
                let mut acc = ZERO;
                for (q, w) in taps.iter().enumerate() {
                    let off = q as i64 - m;
                    // Replicate the edge value beyond the grid.
                    let (ii, jj) = if along_x {
                        ((i as i64 + off).clamp(0, nx as i64 - 1) as usize, j)
                    } else {
                        (i, (j as i64 + off).clamp(0, ny as i64 - 1) as usize)
                    };
                    acc += src[jj * nx + ii] * *w;
                }
                acc
            })
            .collect::<Vec<C64>>()
    });
    rows.into_iter().flatten().collect()
}

/// `f̃^{(t)} = (4πt)^{−1} ∫ e^{−|z−w|²/4t} f(w) dv(w)` on the same grid.
///
/// The heat kernel factors into two one-dimensional Gaussians, so the
/// convolution is done axis by axis with taps normalized to unit mass and cut
/// at `6√(2t)`. Values beyond the grid edge are taken equal to the edge.
pub fn heat_transform(f: &GridSymbol, t: f64) -> Result<GridSymbol> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("t must be positive, got {t}"));
    }
    if 4.0 * t < f.spacing * f.spacing {
        return Err(FockError::HeatResolution { t, spacing: f.spacing });
    }
    let taps = heat_taps(t, f.spacing);
    let tmp = convolve_axis(&f.values, f.nx, f.ny, &taps, true);
    let values = convolve_axis(&tmp, f.nx, f.ny, &taps, false);
    Ok(GridSymbol { values, ..f.clone() })
}

/// Heat transform of an atomic measure, evaluated exactly on a grid shaped
/// like `like`.
pub fn heat_transform_measure(mu: &DiscreteMeasure, t: f64, like: &GridSymbol) -> Result<GridSymbol> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("t must be positive, got {t}"));
    }
    let nx = like.nx;
    let values = par::map_range(nx * like.ny, |idx| {
        let z = like.point(idx % nx, idx / nx);
        mu.atoms
            .iter()
            .map(|a| a.mass * (-(z - a.z).norm_sqr() / (4.0 * t)).exp())
            .sum::<C64>()
            / (4.0 * PI * t)
    });
    Ok(GridSymbol { values, ..like.clone() })
}

struct Difference<'a> {
    smooth: &'a GridSymbol,
    exact: &'a dyn Symbol,
}

impl Symbol for Difference<'_> {
    fn eval(&self, z: C64) -> C64 {
        self.smooth.eval(z) - self.exact.eval(z)
    }
}

/// Grid half-width and spacing used by [`heat_convergence_curve`].
pub const HEAT_GRID: (f64, f64) = (4.0, 0.02);

/// `t ↦ ‖T_{f̃^{(t)}} − T_f‖` on the classical model. `f̃` is the grid heat
/// transform of `f` sampled on `[−4, 4]²` with spacing `0.02`; the
/// difference symbol is integrated on a polar grid of radius 4 with `f`'s
/// radial breakpoints.
pub fn heat_convergence_curve(model: &FockModel, f: &dyn Symbol, t_list: &[f64], quad: &QuadSpec) -> Result<DecayCurve> {
    if !model.weight().is_classical() {
        return Err(FockError::NotClassical(
            "heat-transform convergence is stated for the classical space".into(),
        ));
    }
    let (half, h) = HEAT_GRID;
    let sampled = GridSymbol::sample(f, half, h)?;
    let angles = quad.n_angles.unwrap_or_else(|| model.default_angles(64));
    let grid = QuadGrid::polar(half, &f.radial_breaks(), quad.panel_width.min(0.25), quad.nodes_per_panel, angles);
    let mut pts = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let ft = heat_transform(&sampled, t)?;
        let d = toeplitz_on_grid(model, &Difference { smooth: &ft, exact: f }, &grid);
        pts.push((t, d.op_norm(), grid.len(), true));
    }
    DecayCurve::from_points(pts)
}

/// `ε ↦ ‖T_{F_w^ε} − T_{δ_w}‖`, sorted by ascending `ε`.
pub fn point_mass_limit_curve(model: &FockModel, w: C64, eps_list: &[f64], quad: &QuadSpec) -> Result<DecayCurve> {
    let delta = toeplitz_measure(model, &DiscreteMeasure::dirac(w))?;
    let mut pts = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        let t = toeplitz_indicator_ball(model, w, e, quad)?;
        pts.push((e, t.sub(&delta).op_norm(), 1, model.is_trusted(w)));
    }
    DecayCurve::from_points(pts)
}

/// Both sides of the point-mass factorization of `K(·,z) ⊗ K(·,w)`.
///
/// The matrices are reported scaled by `e^{−φ(z)−φ(w)}`, which keeps them
/// bounded; the residual is the relative Frobenius difference.
#[derive(Debug, Clone)]
pub struct RankOneReport {
    pub direct: OpMatrix,
    pub factored: OpMatrix,
    pub residual: f64,
    pub kernel: C64,
    pub trusted: bool,
}

/// Builds `e^{2φ(z)+2φ(w)} / conj(K(w,z)) · T_{δ_z} T_{δ_w}` and compares it
/// with the rank-one operator `f ↦ f(w) K(·, z)`.
pub fn rank_one_from_pointmasses(model: &FockModel, z: C64, w: C64) -> Result<RankOneReport> {
    let kwz = model.kernel(w, z);
    if !(kwz.value.norm() > 1e-12) {
        return Err(FockError::Degenerate(format!(
            "K_N(w, z) = {} vanishes for z = {z}, w = {w}; z lies in the zero set of K(w, ·)",
            kwz.value
        )));
    }
    let n = model.dim();
    let bz = model.weighted_basis(z);
    let bw = model.weighted_basis(w);
    let direct = OpMatrix::from_fn(n, |k, j| bw[j] * bz[k].conj());
    let tz = toeplitz_measure(model, &DiscreteMeasure::dirac(z))?;
    let tw = toeplitz_measure(model, &DiscreteMeasure::dirac(w))?;
    let khat: C64 = bw.iter().zip(&bz).map(|(a, b)| a * b.conj()).sum();
    let factored = tz.compose(&tw).scale(C64::new(1.0, 0.0) / khat.conj());
    let denom = direct.frobenius();
    let residual = direct.sub(&factored).frobenius() / if denom > 0.0 { denom } else { 1.0 };
    Ok(RankOneReport {
        direct,
        factored,
        residual,
        kernel: kwz.value,
        trusted: kwz.trusted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::toeplitz_function;
    use crate::symbol::{Constant, Expr};
    use crate::weight::{make_weight, WeightKind};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn sharp_examples() {
        let one = SymbolPoly::constant(c(1.0, 0.0));
        let g = SymbolPoly::monomial(2, 3, c(0.5, -1.0));
        assert_eq!(sharp_product(&one, &g, 1.3).unwrap(), g);
        let zz = sharp_product(&SymbolPoly::z(), &SymbolPoly::zbar(), 2.0).unwrap();
        assert_eq!(zz.coeff(1, 1), c(1.0, 0.0));
        assert_eq!(zz.coeff(0, 0), c(-0.5, 0.0));
        let z2 = SymbolPoly::monomial(2, 0, c(1.0, 0.0));
        let p = sharp_product(&z2, &SymbolPoly::zbar(), 1.0).unwrap();
        assert_eq!(p.coeff(2, 1), c(1.0, 0.0));
        assert_eq!(p.coeff(1, 0), c(-2.0, 0.0));
    }

    #[test]
    fn poly_json_round_trip() {
        let p = SymbolPoly::monomial(1, 2, c(0.25, -3.0)).add(&SymbolPoly::z());
        assert_eq!(SymbolPoly::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn moment_toeplitz_matches_quadrature() {
        let m = FockModel::classical(1.0, 20).unwrap();
        let q = QuadSpec::default();
        for (a, b) in [(1, 0), (0, 2), (2, 1), (1, 1)] {
            let p = SymbolPoly::monomial(a, b, c(1.0, 0.0));
            let exact = toeplitz_poly(&m, &p).unwrap();
            let quad = toeplitz_function(&m, &p, &q).unwrap();
            let scale = exact.max_abs();
            assert!(exact.sub(&quad).max_abs() < 1e-10 * scale, "({a},{b})");
        }
    }

    #[test]
    fn verify_sharp_classical_and_refusal() {
        let m = FockModel::classical(1.0, 30).unwrap();
        let r = verify_sharp(&m, &SymbolPoly::z(), &SymbolPoly::zbar()).unwrap();
        assert!(r < 1e-10);
        let fs = FockModel::new(make_weight(WeightKind::FockSobolev, 1.0, 1, 3.0).unwrap(), 20).unwrap();
        assert!(matches!(
            verify_sharp(&fs, &SymbolPoly::z(), &SymbolPoly::zbar()),
            Err(FockError::NotClassical(_))
        ));
    }

    #[test]
    fn heat_fixes_constants_and_rejects_small_t() {
        let g = GridSymbol::sample(&Constant(c(2.5, 0.0)), 1.0, 0.1).unwrap();
        let h = heat_transform(&g, 0.05).unwrap();
        assert!(h.values.iter().all(|v| (v - c(2.5, 0.0)).norm() < 1e-13));
        assert!(matches!(heat_transform(&g, 0.001), Err(FockError::HeatResolution { .. })));
    }

    #[test]
    fn heat_of_dirac_is_heat_kernel() {
        let like = GridSymbol::sample(&Constant(ZERO), 1.0, 0.5).unwrap();
        let h = heat_transform_measure(&DiscreteMeasure::dirac(ZERO), 0.25, &like).unwrap();
        let z = like.point(3, 2);
        let want = (-z.norm_sqr()).exp() / PI;
        assert!((h.value(3, 2).re - want).abs() < 1e-15);
    }

    #[test]
    fn rank_one_origin_and_degenerate() {
        let m = FockModel::classical(1.0, 2).unwrap();
        assert!(matches!(
            rank_one_from_pointmasses(&m, c(-1.0, 0.0), c(1.0, 0.0)),
            Err(FockError::Degenerate(_))
        ));
        let m = FockModel::classical(1.0, 20).unwrap();
        let r = rank_one_from_pointmasses(&m, ZERO, ZERO).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.direct.get(0, 0).re - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn grid_interpolation_is_exact_for_bilinear() {
        let f = Expr::parse("2 + z").unwrap();
        let g = GridSymbol::sample(&f, 1.0, 0.25).unwrap();
        let p = c(0.13, -0.41);
        assert!((g.eval(p) - f.eval(p)).norm() < 1e-14);
        assert_eq!(g.eval(c(5.0, 0.0)), ZERO);
    }
}
