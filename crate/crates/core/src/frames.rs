//! Lattice covers, pre-frame operators built from `k̃_{u+z}`, the discrete
//! resolution of the identity, and block estimators on lattice windows.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fock::FockModel;
use crate::linalg::{OpMatrix, C64, ZERO};
use crate::par;

/// Cubes `F_j = [−d, d)² + σ`, `σ ∈ 2dℤ²`, meeting the window
/// `[−W, W]²`, with dilates `G_j = [−2d, 2d)² + σ`.
///
/// The dilates are taken half-open so that every point of the plane lies in
/// exactly four of them.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCover {
    d: f64,
    window: f64,
    cells: Vec<(i64, i64)>,
}

/// Outcome of [`LatticeCover::verify`].
#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub cells: usize,
    pub samples: usize,
    /// No sample lies in two cubes.
    pub disjoint: bool,
    /// Every window sample lies in some cube.
    pub tiles: bool,
    pub max_overlap: usize,
    pub overlap_bound: usize,
    pub diameter: f64,
    pub diameter_bound: f64,
    pub passed: bool,
}

/// Builds the cover of the square window `[−window, window]²`.
pub fn make_cover(d: f64, window: f64) -> Result<LatticeCover> {
    if !(d > 0.0 && d.is_finite()) {
        return invalid(format!("d must be positive, got {d}"));
    }
    if !(window >= 0.0 && window.is_finite()) {
        return invalid(format!("window half-width must be finite and nonnegative, got {window}"));
    }
    // F at index i covers [(2i−1)d, (2i+1)d) per axis.
    let lo = ((-window / d - 1.0) / 2.0).floor() as i64;
    let hi = ((window / d + 1.0) / 2.0).ceil() as i64;
    let meets = |i: i64| {
        let a = (2 * i - 1) as f64 * d;
        let b = (2 * i + 1) as f64 * d;
        b > -window && a <= window
    };
    let axis: Vec<i64> = (lo..=hi).filter(|&i| meets(i)).collect();
    let cells = axis.iter().flat_map(|&i| axis.iter().map(move |&j| (i, j))).collect();
    Ok(LatticeCover { d, window, cells })
}

fn half_open(x: f64, center: f64, half: f64) -> bool {
    x >= center - half && x < center + half
}

impl LatticeCover {
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Centre `σ_j` of the `j`-th cube.
    pub fn center(&self, j: usize) -> C64 {
        let (a, b) = self.cells[j];
        C64::new(2.0 * self.d * a as f64, 2.0 * self.d * b as f64)
    }

    pub fn in_f(&self, j: usize, z: C64) -> bool {
        let c = self.center(j);
        half_open(z.re, c.re, self.d) && half_open(z.im, c.im, self.d)
    }

    pub fn in_g(&self, j: usize, z: C64) -> bool {
        let c = self.center(j);
        half_open(z.re, c.re, 2.0 * self.d) && half_open(z.im, c.im, 2.0 * self.d)
    }

    /// Number of cubes containing `z`.
    pub fn cube_count(&self, z: C64) -> usize {
        (0..self.len()).filter(|&j| self.in_f(j, z)).count()
    }

    /// Number of dilates containing `z`.
    pub fn overlap_count(&self, z: C64) -> usize {
        (0..self.len()).filter(|&j| self.in_g(j, z)).count()
    }

    /// Euclidean diameter of each dilate.
    pub fn g_diameter(&self) -> f64 {
        4.0 * self.d * 2f64.sqrt()
    }

    /// Checks disjointness, tiling and the overlap bound at `samples` seeded
    /// random window points, plus the diameter bound.
    pub fn verify(&self, samples: usize, seed: u64) -> CoverReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.window;
        let pts: Vec<C64> = (0..samples)
            .map(|_| C64::new(w * (2.0 * rng.gen::<f64>() - 1.0), w * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        let counts = par::map_slice(&pts, |z| (self.cube_count(*z), self.overlap_count(*z)));
        let mut distinct = self.cells.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let disjoint = distinct.len() == self.cells.len() && counts.iter().all(|c| c.0 <= 1);
        let tiles = counts.iter().all(|c| c.0 >= 1);
        let max_overlap = counts.iter().map(|c| c.1).max().unwrap_or(0);
        let diameter = self.g_diameter();
        let diameter_bound = 4.0 * self.d * 2f64.sqrt();
        CoverReport {
            cells: self.len(),
            samples,
            disjoint,
            tiles,
            max_overlap,
            overlap_bound: 4,
            diameter,
            diameter_bound,
            passed: disjoint && tiles && max_overlap <= 4 && diameter <= diameter_bound * (1.0 + 1e-12),
        }
    }
}

/// Lattice points `u ∈ ℤ²` with `|u|_∞ < r`.
pub fn lattice_points(r: f64) -> Vec<C64> {
    if r <= 0.0 {
        return Vec::new();
    }
    let m = (r.ceil() as i64) - 1;
    let mut out = Vec::new();
    for a in -m..=m {
        for b in -m..=m {
            if (a.abs().max(b.abs()) as f64) < r {
                out.push(C64::new(a as f64, b as f64));
            }
        }
    }
    out
}

/// Synthesis matrix `F_{z;R}` with columns `k̃_{u+z}`, `u ∈ ℤ²`, `|u|_∞ < R`.
#[derive(Debug, Clone)]
pub struct PreFrame {
    pub center: C64,
    pub radius: f64,
    pub points: Vec<C64>,
    pub trusted: Vec<bool>,
    pub matrix: DMatrix<C64>,
}

impl PreFrame {
    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn untrusted(&self) -> usize {
        self.trusted.iter().filter(|t| !**t).count()
    }

    pub fn norm(&self) -> f64 {
        rect_norm(&self.matrix)
    }
}

/// Largest singular value of a rectangular matrix.
pub fn rect_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// Builds `F_{z;R}`; columns beyond the trust radius are kept and flagged.
pub fn preframe(model: &FockModel, z: C64, r: f64) -> PreFrame {
    let points: Vec<C64> = lattice_points(r).into_iter().map(|u| u + z).collect();
    let cols = par::map_slice(&points, |p| model.tilde_kernel_vec(*p));
    let n = model.dim();
    let matrix = DMatrix::from_fn(n, points.len(), |k, j| cols[j].0[k]);
    PreFrame {
        center: z,
        radius: r,
        trusted: points.iter().map(|p| model.is_trusted(*p)).collect(),
        points,
        matrix,
    }
}

/// One row of a frame norm scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameScanRow {
    pub z_re: f64,
    pub z_im: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub norm: f64,
}

/// `‖F_{z;R}‖` over sampled centres.
#[derive(Debug, Clone, Serialize)]
pub struct FrameScan {
    pub rows: Vec<FrameScanRow>,
    pub max: f64,
    pub min: f64,
    /// `(max − min)/max`, zero for an empty lattice.
    pub spread: f64,
    pub untrusted_columns: usize,
}

impl FrameScan {
    /// CSV with columns `z_re, z_im, R, norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn frame_norm_scan(model: &FockModel, r: f64, z_samples: &[C64]) -> FrameScan {
    let out = par::map_slice(z_samples, |z| {
        let f = preframe(model, *z, r);
        (f.norm(), f.untrusted())
    });
    let rows: Vec<FrameScanRow> = z_samples
        .iter()
        .zip(&out)
        .map(|(z, (n, _))| FrameScanRow {
            z_re: z.re,
            z_im: z.im,
            r,
            norm: *n,
        })
        .collect();
    let max = rows.iter().map(|x| x.norm).fold(0.0, f64::max);
    let min = rows.iter().map(|x| x.norm).fold(f64::INFINITY, f64::min);
    let min = if rows.is_empty() { 0.0 } else { min };
    FrameScan {
        spread: if max > 0.0 { (max - min) / max } else { 0.0 },
        untrusted_columns: out.iter().map(|x| x.1).sum(),
        rows,
        max,
        min,
    }
}

/// Seeded uniform samples from `[0, 1)²`.
pub fn unit_square_samples(count: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| C64::new(rng.gen(), rng.gen())).collect()
}

/// Midpoint cells of the polar partition used by [`identity_quadrature`]:
/// rings of width `h`, each split into `max(8, ⌈2π r_c / h⌉)` equal sectors.
pub fn polar_cells(h: f64, radius: f64) -> Vec<(C64, f64)> {
    let rings = (radius / h).round() as usize;
    let mut out = Vec::new();
    for i in 0..rings {
        let rc = (i as f64 + 0.5) * h;
        let sectors = ((2.0 * PI * rc / h).ceil() as usize).max(8);
        let dth = 2.0 * PI / sectors as f64;
        let area = rc * h * dth;
        for s in 0..sectors {
            out.push((C64::from_polar(rc, (s as f64 + 0.5) * dth), area));
        }
    }
    out
}

/// `Σ_cells area · k̃_{z_c} ⊗ k̃_{z_c}` over a polar partition of the disc of
/// radius `domain_radius` into cells of size about `cell_size`.
pub fn identity_quadrature(model: &FockModel, cell_size: f64, domain_radius: f64) -> Result<OpMatrix> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return invalid(format!("cell size must be positive, got {cell_size}"));
    }
    if !(domain_radius >= 0.0 && domain_radius.is_finite()) {
        return invalid(format!("domain radius must be nonnegative, got {domain_radius}"));
    }
    let cells = polar_cells(cell_size, domain_radius);
    let pts: Vec<C64> = cells.iter().map(|c| c.0).collect();
    let table: Vec<C64> = par::map_slice(&pts, |p| model.weighted_basis(*p))
        .into_iter()
        .flatten()
        .collect();
    let coef: Vec<C64> = cells.iter().map(|c| C64::new(c.1, 0.0)).collect();
    Ok(model.assemble(&table, &coef))
}

/// Max entry deviation of the leading `m × m` block from the identity.
pub fn identity_deviation(q: &OpMatrix, m: usize) -> f64 {
    let b = q.leading_block(m);
    b.sub(&OpMatrix::identity(b.dim())).max_abs()
}

/// Lattice window `{u : |u|_∞ ≤ w}`.
pub fn lattice_window(w: i64) -> Vec<C64> {
    let mut out = Vec::new();
    for a in -w..=w {
        for b in -w..=w {
            out.push(C64::new(a as f64, b as f64));
        }
    }
    out
}

/// Norm of the off-diagonal block sum and its bookkeeping.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OffDiagReport {
    pub norm: f64,
    pub pairs: usize,
    pub untrusted_points: usize,
}

/// `‖Σ_{(u,v) ∈ Ω} ⟨B k̃_{v+η}, k̃_{u+ξ}⟩ e_u ⊗ e_v‖` with
/// `Ω = {(u, v) : |u|_∞, |v|_∞ ≤ window, |u − v| ≥ separation}`.
pub fn offdiag_block_norm(
    model: &FockModel,
    b: &OpMatrix,
    separation: f64,
    window: i64,
    eta: C64,
    xi: C64,
) -> Result<OffDiagReport> {
    if separation < 1.0 {
        return invalid(format!("separation must be at least 1, got {separation}"));
    }
    let in_unit = |p: C64| (0.0..1.0).contains(&p.re) && (0.0..1.0).contains(&p.im);
    if !in_unit(eta) || !in_unit(xi) {
        return invalid("eta and xi must lie in [0, 1)^2");
    }
    let lat = lattice_window(window);
    let bv = par::map_slice(&lat, |v| b.apply(&model.tilde_kernel_vec(v + eta)));
    let ku = par::map_slice(&lat, |u| model.tilde_kernel_vec(u + xi));
    let m = lat.len();
    let mut pairs = 0;
    let mut mat = DMatrix::from_element(m, m, ZERO);
    for i in 0..m {
        for j in 0..m {
            if (lat[i] - lat[j]).norm() >= separation {
                mat[(i, j)] = bv[j].inner(&ku[i]);
                pairs += 1;
            }
        }
    }
    let untrusted = lat
        .iter()
        .flat_map(|u| [u + eta, u + xi])
        .filter(|p| !model.is_trusted(*p))
        .count();
    Ok(OffDiagReport {
        norm: rect_norm(&mat),
        pairs,
        untrusted_points: untrusted,
    })
}

/// `‖F_{a;R}* A F_{a+b;R}‖`.
pub fn block_lower_bound(model: &FockModel, a_op: &OpMatrix, r: f64, a: C64, b: C64) -> Result<f64> {
    if b.re.abs().max(b.im.abs()) > 2.0 {
        return invalid(format!("|b|_inf must be at most 2, got {b}"));
    }
    let left = preframe(model, a, r);
    let right = preframe(model, a + b, r);
    let m = left.matrix.adjoint() * &a_op.0 * &right.matrix;
    Ok(rect_norm(&m))
}

/// Maximizer of the block probe over a grid of shifts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockSearch {
    pub value: f64,
    pub a: C64,
    pub b: C64,
    pub untrusted_points: usize,
}

/// Grid search of [`block_lower_bound`] over lattice `a` with
/// `|a|_∞ ∈ [lo, hi]` and `b` with both components in `{−1, 0, 1}`.
pub fn block_search(model: &FockModel, a_op: &OpMatrix, r: f64, lo: i64, hi: i64) -> Result<BlockSearch> {
    if lo < 0 || hi < lo {
        return invalid(format!("need 0 <= lo <= hi, got [{lo}, {hi}]"));
    }
    let avals: Vec<C64> = lattice_window(hi)
        .into_iter()
        .filter(|a| a.re.abs().max(a.im.abs()) >= lo as f64)
        .collect();
    let shifts: Vec<C64> = lattice_window(1);
    let mut tasks = Vec::new();
    for a in &avals {
        for b in &shifts {
            tasks.push((*a, *b));
        }
    }
    let vals = par::map_slice(&tasks, |(a, b)| block_lower_bound(model, a_op, r, *a, *b));
    let mut best = BlockSearch {
        value: 0.0,
        a: ZERO,
        b: ZERO,
        untrusted_points: 0,
    };
    let mut first = true;
    for ((a, b), v) in tasks.iter().zip(vals) {
        let v = v?;
        if first || v > best.value {
            best.value = v;
            best.a = *a;
            best.b = *b;
            first = false;
        }
    }
    best.untrusted_points = lattice_points(r)
        .iter()
        .flat_map(|u| [u + best.a, u + best.a + best.b])
        .filter(|p| !model.is_trusted(*p))
        .count();
    Ok(best)
}
