//! Truncated orthonormal model of `F²_φ`: basis evaluation, reproducing
//! kernels, coherent-state vectors and function norms.
//!
//! The basis is `e_k(z) = z^k / √m_k`, `k < N`. Almost every routine works with
//! the *weighted* values `ê_k(z) = e_k(z) e^{−φ(z)}`, which stay bounded where
//! the raw monomials and the moments overflow.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{CoeffVec, OpMatrix, C64, ZERO};
use crate::par;
use crate::quadrature::{QuadGrid, QuadSpec};
use crate::weight::{MomentTable, Weight};

/// Relative truncation tolerance defining the trust radius.
pub const TRUST_TOL: f64 = 1e-9;

/// Number of trailing basis elements compared when locating the trust radius.
pub const TRUST_TAIL: usize = 5;

/// The truncated model.
#[derive(Debug, Clone)]
pub struct FockModel {
    weight: Weight,
    moments: MomentTable,
    dim: usize,
    /// Complex dimension. Only `n = 1` is implemented.
    n: usize,
    /// `√(m_{k−1}/m_k)` for `k ≥ 1`.
    step: Vec<f64>,
    half_log_m0: f64,
    trust_radius: f64,
    r_cut: f64,
}

/// Kernel evaluation tagged with the trust check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub trusted: bool,
}

impl FockModel {
    /// Builds the model with moments up to `K_max = max(4N, N + 16)`.
    pub fn new(weight: Weight, dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("model dimension must be positive");
        }
        let moments = MomentTable::build(&weight, (4 * dim).max(dim + 16))?;
        let lm = moments.log_moments();
        let step = (0..dim + 8)
            .map(|k| if k == 0 { 1.0 } else { (0.5 * (lm[k - 1] - lm[k])).exp() })
            .collect();
        let r_cut = (0..(dim + 8).min(moments.k_max() + 1))
            .map(|k| moments.cutoff(k))
            .fold(0.0, f64::max);
        let mut model = FockModel {
            half_log_m0: 0.5 * lm[0],
            weight,
            moments,
            dim,
            n: 1,
            step,
            trust_radius: 0.0,
            r_cut,
        };
        model.trust_radius = model.locate_trust_radius();
        Ok(model)
    }

    /// Classical model `φ = α|z|²/2`.
    pub fn classical(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(Weight::classical(alpha), dim)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn moments(&self) -> &MomentTable {
        &self.moments
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn complex_dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.weight.alpha()
    }

    pub fn phi(&self, z: C64) -> f64 {
        self.weight.phi(z.norm())
    }

    /// Largest radius where the last five basis terms carry less than `1e-9`
    /// of `K_N(r, r)`.
    pub fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    /// Outer radius used for plane integrals.
    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    pub fn is_trusted(&self, z: C64) -> bool {
        z.norm() <= self.trust_radius * (1.0 + 1e-12)
    }

    fn tail_ratio(&self, r: f64) -> f64 {
        let v = self.weighted_basis(C64::new(r, 0.0));
        let total: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let start = self.dim.saturating_sub(TRUST_TAIL);
        let tail: f64 = v[start..].iter().map(|x| x.norm_sqr()).sum();
        if total == 0.0 {
            1.0
        } else {
            tail / total
        }
    }

    fn locate_trust_radius(&self) -> f64 {
        if self.dim <= TRUST_TAIL {
            return 0.0;
        }
        let step = 0.05;
        let mut lo = 0.0;
        let mut hi = None;
        let mut r = step;
        while r <= self.r_cut {
            if self.tail_ratio(r) >= TRUST_TOL {
                hi = Some(r);
                break;
            }
            lo = r;
            r += step;
        }
        let Some(mut hi) = hi else {
            return self.r_cut;
        };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.tail_ratio(mid) < TRUST_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `ê_k(z)` for `k < len`; `len` may exceed `N` by a few terms.
    pub fn weighted_basis_len(&self, z: C64, len: usize) -> Vec<C64> {
        assert!(len <= self.step.len(), "requested {len} basis terms");
        let r = z.norm();
        let phi = self.weight.phi(r);
        let mut out = Vec::with_capacity(len);
        if phi < 600.0 {
            let mut cur = C64::new((-phi - self.half_log_m0).exp(), 0.0);
            for k in 0..len {
                if k > 0 {
                    cur = cur * z * self.step[k];
                }
                out.push(cur);
            }
        } else {
            // e^{−φ} underflows; evaluate each term in log space.
            let lm = self.moments.log_moments();
            let (lr, th) = (r.ln(), z.arg());
            for k in 0..len {
                let mag = (k as f64 * lr - 0.5 * lm[k] - phi).exp();
                out.push(C64::from_polar(mag, k as f64 * th));
            }
        }
        out
    }

    /// `ê_k(z) = e_k(z) e^{−φ(z)}`, `k < N`.
    pub fn weighted_basis(&self, z: C64) -> Vec<C64> {
        self.weighted_basis_len(z, self.dim)
    }

    /// Raw basis values `e_k(z)`.
    pub fn basis(&self, z: C64) -> Vec<C64> {
        let s = self.phi(z).exp();
        self.weighted_basis(z).into_iter().map(|v| v * s).collect()
    }

    /// `f(z)` for `f = Σ c_k e_k`.
    pub fn eval(&self, f: &CoeffVec, z: C64) -> C64 {
        self.eval_weighted(f, z) * self.phi(z).exp()
    }

    /// `f(z) e^{−φ(z)}`.
    pub fn eval_weighted(&self, f: &CoeffVec, z: C64) -> C64 {
        self.weighted_basis(z)
            .iter()
            .zip(f.as_slice())
            .map(|(b, c)| b * c)
            .sum()
    }

    /// `K_N(z, w) = Σ_{k<N} e_k(z) conj(e_k(w))`.
    pub fn kernel(&self, z: C64, w: C64) -> KernelValue {
        let bz = self.weighted_basis(z);
        let bw = self.weighted_basis(w);
        let s: C64 = bz.iter().zip(&bw).map(|(a, b)| a * b.conj()).sum();
        KernelValue {
            value: s * (self.phi(z) + self.phi(w)).exp(),
            trusted: self.is_trusted(z) && self.is_trusted(w),
        }
    }

    /// `e^{−φ(z)} |K_N(z, w)| e^{−φ(w)}`, evaluated without forming the
    /// exponentials.
    pub fn weighted_kernel_modulus(&self, z: C64, w: C64) -> f64 {
        let bz = self.weighted_basis(z);
        let bw = self.weighted_basis(w);
        bz.iter().zip(&bw).map(|(a, b)| a * b.conj()).sum::<C64>().norm()
    }

    /// `K_N(z, z)`.
    pub fn kernel_diag(&self, z: C64) -> f64 {
        let s: f64 = self.weighted_basis(z).iter().map(|b| b.norm_sqr()).sum();
        s * (2.0 * self.phi(z)).exp()
    }

    /// Coefficients of `k_z = K(·, z)/√K(z, z)`: `conj(e_k(z))/√K_N(z, z)`.
    pub fn normalized_kernel_vec(&self, z: C64) -> CoeffVec {
        let b = self.weighted_basis(z);
        let n: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        CoeffVec::from_vec(b.into_iter().map(|x| x.conj() / n).collect())
    }

    /// Coefficients of `k̃_z = e^{−φ(z)} K(·, z)`: `conj(ê_k(z))`.
    pub fn tilde_kernel_vec(&self, z: C64) -> CoeffVec {
        CoeffVec::from_vec(self.weighted_basis(z).into_iter().map(|x| x.conj()).collect())
    }

    pub fn default_angles(&self, extra: usize) -> usize {
        2 * self.dim + 1 + extra
    }

    /// Polar grid on the plane sized for this model.
    pub fn plane_grid(&self, quad: &QuadSpec, breaks: &[f64], extra_angles: usize) -> QuadGrid {
        let r_max = quad.r_max.unwrap_or(self.r_cut);
        let n_angles = quad.n_angles.unwrap_or_else(|| self.default_angles(extra_angles));
        QuadGrid::polar(r_max, breaks, quad.panel_width, quad.nodes_per_panel, n_angles)
    }

    /// Polar grid on the disc `B(center, radius)`.
    pub fn disk_grid(&self, center: C64, radius: f64, quad: &QuadSpec) -> QuadGrid {
        let n_angles = quad
            .n_angles
            .unwrap_or_else(|| self.default_angles(32 + (4.0 * self.alpha() * center.norm() * radius) as usize));
        QuadGrid::disk(center, radius, &[], quad.panel_width, quad.nodes_per_panel, n_angles)
    }

    /// Point-major table of `ê_k` on a grid (`P × N`).
    pub fn basis_table(&self, grid: &QuadGrid) -> Vec<C64> {
        par::map_slice(&grid.points, |p| self.weighted_basis(*p))
            .into_iter()
            .flatten()
            .collect()
    }

    /// `M[k][j] = Σ_p c_p ê_j(p) conj(ê_k(p))`, i.e. the matrix of the form
    /// `∫ c ê_j conj(ê_k)` on a grid with weights already folded into `c`.
    pub fn assemble(&self, table: &[C64], coef: &[C64]) -> OpMatrix {
        assemble_sesquilinear(self.dim, table, table, coef)
    }

    /// Gram matrix of the basis under grid quadrature; the identity up to
    /// quadrature error.
    pub fn quadrature_gram(&self, quad: &QuadSpec) -> OpMatrix {
        let grid = self.plane_grid(quad, &[], 0);
        let table = self.basis_table(&grid);
        let coef: Vec<C64> = grid.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
        self.assemble(&table, &coef)
    }

    /// `‖f‖_{p} = (∫ |f|^p e^{−pφ} dv)^{1/p}`; `p = ∞` is the sup over grid points.
    pub fn p_norm(&self, f: &CoeffVec, p: f64, quad: &QuadSpec) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return invalid(format!("p must lie in [1, inf], got {p}"));
        }
        let grid = self.plane_grid(quad, &[], 0);
        let vals = par::map_slice(&grid.points, |z| self.eval_weighted(f, *z).norm());
        if p.is_infinite() {
            return Ok(vals.into_iter().fold(0.0, f64::max));
        }
        let s: f64 = vals.iter().zip(&grid.weights).map(|(v, w)| v.powf(p) * w).sum();
        Ok(s.powf(1.0 / p))
    }

    /// Ratio `|f(z)|^p e^{−pφ(z)} / ∫_{B(z,r)} |f|^p e^{−pφ} dv`; zero for `f = 0`.
    pub fn check_submeanvalue(
        &self,
        f: &CoeffVec,
        z: C64,
        r: f64,
        p: f64,
        quad: &QuadSpec,
    ) -> Result<SubmeanReport> {
        if !(r > 0.0) {
            return invalid(format!("ball radius must be positive, got {r}"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return invalid(format!("p must be finite and at least 1, got {p}"));
        }
        let point = self.eval_weighted(f, z).norm().powf(p);
        let grid = self.disk_grid(z, r, quad);
        let ball: f64 = grid
            .points
            .iter()
            .zip(&grid.weights)
            .map(|(u, w)| self.eval_weighted(f, *u).norm().powf(p) * w)
            .sum();
        let ratio = if point == 0.0 { 0.0 } else { point / ball };
        Ok(SubmeanReport {
            point_value: point,
            ball_integral: ball,
            ratio,
            trusted: self.is_trusted(z) && z.norm() + r <= self.trust_radius,
        })
    }

    /// CSV rows `z_re, z_im, value_re, value_im, trusted` for a scan.
    pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The classical closed form `(α/π) e^{α z w̄}`, only meaningful for the
    /// classical weight.
    pub fn classical_kernel(alpha: f64, z: C64, w: C64) -> C64 {
        (z * w.conj() * alpha).exp() * (alpha / PI)
    }
}

/// Output of [`FockModel::check_submeanvalue`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubmeanReport {
    pub point_value: f64,
    pub ball_integral: f64,
    pub ratio: f64,
    pub trusted: bool,
}

/// One row of a kernel or Berezin scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub z_re: f64,
    pub z_im: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub trusted: bool,
}

impl ScanRow {
    pub fn new(z: C64, value: C64, trusted: bool) -> Self {
        Self {
            z_re: z.re,
            z_im: z.im,
            value_re: value.re,
            value_im: value.im,
            trusted,
        }
    }
}

/// `M[k][j] = Σ_p coef_p · right_j(p) · conj(left_k(p))` for point-major
/// tables of width `n`.
pub(crate) fn assemble_sesquilinear(n: usize, left: &[C64], right: &[C64], coef: &[C64]) -> OpMatrix {
    let p = coef.len();
    debug_assert_eq!(left.len(), p * n);
    debug_assert_eq!(right.len(), p * n);
    let rows: Vec<Vec<C64>> = par::map_range(n, |k| {
        let mut row = vec![ZERO; n];
        for q in 0..p {
            let c = coef[q] * left[q * n + k].conj();
            if c == ZERO {
                continue;
            }
            let r = &right[q * n..(q + 1) * n];
            for (acc, v) in row.iter_mut().zip(r) {
                *acc += c * v;
            }
        }
        row
    });
    OpMatrix::from_fn(n, |k, j| rows[k][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kernel_at_origin_is_inverse_m0() {
        let m = FockModel::classical(1.5, 20).unwrap();
        let k = m.kernel(c(0.7, -0.2), c(0.0, 0.0));
        assert!((k.value - c(1.5 / PI, 0.0)).norm() < 1e-14);
        assert!(k.trusted);
    }

    #[test]
    fn classical_kernel_series() {
        let m = FockModel::classical(1.0, 60).unwrap();
        let k = m.kernel(c(1.0, 0.0), c(1.0, 0.0)).value;
        assert!((k.re - std::f64::consts::E / PI).abs() < 1e-10);
    }

    #[test]
    fn normalized_kernel_is_unit() {
        let m = FockModel::classical(1.0, 30).unwrap();
        let k0 = m.normalized_kernel_vec(c(0.0, 0.0));
        assert!((k0.0[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(k0.as_slice()[1..].iter().all(|x| *x == ZERO));
        for z in [c(0.3, 1.1), c(-2.0, 0.5)] {
            assert!((m.normalized_kernel_vec(z).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tilde_kernel_at_origin() {
        let m = FockModel::classical(2.0, 20).unwrap();
        let n2 = m.tilde_kernel_vec(c(0.0, 0.0)).norm().powi(2);
        assert!((n2 - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn trust_radius_grows_with_dimension() {
        let a = FockModel::classical(1.0, 40).unwrap();
        let b = FockModel::classical(1.0, 80).unwrap();
        // Poisson-tail bisection reference values.
        assert!((a.trust_radius() - 3.1938).abs() < 2e-3, "{}", a.trust_radius());
        assert!((b.trust_radius() - 5.8394).abs() < 2e-3, "{}", b.trust_radius());
        assert!(!a.kernel(c(4.0, 0.0), c(0.0, 0.0)).trusted);
    }

    #[test]
    fn p_norm_examples() {
        let m = FockModel::classical(1.0, 20).unwrap();
        let q = QuadSpec::default();
        let e0 = CoeffVec::basis(20, 0);
        assert!((m.p_norm(&e0, 2.0, &q).unwrap() - 1.0).abs() < 1e-8);
        // constant 1 = √m_0 e_0
        let one = CoeffVec::basis(20, 0).0 * c(PI.sqrt(), 0.0);
        assert!((m.p_norm(&CoeffVec(one), 2.0, &q).unwrap() - PI.sqrt()).abs() < 1e-8);
        assert!(m.p_norm(&e0, 0.5, &q).is_err());
    }

    #[test]
    fn submean_degenerate_and_origin() {
        let m = FockModel::classical(1.0, 20).unwrap();
        let q = QuadSpec::default();
        let zero = CoeffVec::zeros(20);
        let r = m.check_submeanvalue(&zero, c(0.5, 0.0), 1.0, 2.0, &q).unwrap();
        assert_eq!(r.ratio, 0.0);
        let e0 = CoeffVec::basis(20, 0);
        let r = m.check_submeanvalue(&e0, c(0.0, 0.0), 1.0, 2.0, &q).unwrap();
        // (1/π) / ((1/π) π (1 − e^{−1}))
        let expected = 1.0 / (PI * (1.0 - (-1.0f64).exp()));
        assert!((r.ratio - expected).abs() < 1e-10, "{}", r.ratio);
        assert!(m.check_submeanvalue(&e0, c(0.0, 0.0), 0.0, 2.0, &q).is_err());
    }
}
