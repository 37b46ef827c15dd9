//! Weighted translations `U_z h(w) = h(z − w) e^{α w z̄ − α|z|²/2}` on the
//! classical space, the phase `Θ(z, w)`, and the translation and Berezin
//! estimators built on them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, FockError, Result};
use crate::fock::{assemble_sesquilinear, FockModel};
use crate::linalg::{CoeffVec, OpMatrix, C64};
use crate::localization::{compactness_indicator, DecayCurve};
use crate::operators::berezin;
use crate::par;
use crate::quadrature::{QuadGrid, QuadSpec};

/// Largest `1 − ‖P_N U_z e_j‖²` allowed inside the trusted block.
const BLOCK_LEAK: f64 = 1e-8;

/// Matrix of `U_z` in the orthonormal basis.
#[derive(Debug, Clone)]
pub struct TranslationOp {
    pub z: C64,
    pub matrix: OpMatrix,
    /// `|z| ≤ ρ_N / 2`.
    pub trusted: bool,
    /// Leading block size on which truncation does not disturb `U_z`.
    pub trusted_block: usize,
}

fn require_classical(model: &FockModel) -> Result<()> {
    if model.weight().is_classical() {
        Ok(())
    } else {
        Err(FockError::NotClassical(
            "weighted translations are implemented for the classical weight only".into(),
        ))
    }
}

/// Number of leading columns `j` whose image `U_z e_j` keeps all but
/// `1e-8` of its squared norm inside the truncated space. `U_z` is an
/// isometry, so the column-norm deficit of the assembled matrix is exactly the
/// mass lost to truncation.
pub fn trusted_block(matrix: &OpMatrix) -> usize {
    let n = matrix.dim();
    (0..n)
        .take_while(|&j| (1.0 - matrix.0.column(j).norm_squared()).abs() <= BLOCK_LEAK)
        .count()
}

/// `⟨U_z e_j, e_k⟩ = ∫ ê_j(z − w) conj(ê_k(w)) e^{iα Im(w z̄)} dv(w)` by
/// polar quadrature.
pub fn weighted_translation(model: &FockModel, z: C64, quad: &QuadSpec) -> Result<TranslationOp> {
    require_classical(model)?;
    let alpha = model.alpha();
    let r_max = quad.r_max.unwrap_or(model.r_cut());
    let angles = quad
        .n_angles
        .unwrap_or_else(|| 2 * model.dim() + 2 * (alpha * r_max * z.norm()).ceil() as usize + 32);
    let grid = QuadGrid::polar(r_max, &[], quad.panel_width, quad.nodes_per_panel, angles);
    let n = model.dim();
    let left: Vec<C64> = par::map_slice(&grid.points, |p| model.weighted_basis(*p))
        .into_iter()
        .flatten()
        .collect();
    let right: Vec<C64> = par::map_slice(&grid.points, |p| model.weighted_basis(z - p))
        .into_iter()
        .flatten()
        .collect();
    let coef: Vec<C64> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(p, w)| C64::from_polar(*w, alpha * (p * z.conj()).im))
        .collect();
    let matrix = assemble_sesquilinear(n, &left, &right, &coef);
    Ok(TranslationOp {
        z,
        trusted: z.norm() <= 0.5 * model.trust_radius(),
        trusted_block: trusted_block(&matrix),
        matrix,
    })
}

/// `Θ(z, w) = ⟨U_z k_w, k_{z−w}⟩` and the factorization residual.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaReport {
    pub theta: C64,
    /// `e^{iα Im(z w̄)}`.
    pub expected: C64,
    /// `‖U_z k_w − Θ k_{z−w}‖`.
    pub residual: f64,
    pub trusted: bool,
}

/// Evaluates `Θ(z, w)` with a precomputed `U_z`.
pub fn theta_with(model: &FockModel, u: &TranslationOp, w: C64) -> ThetaReport {
    let z = u.z;
    let kw = model.normalized_kernel_vec(w);
    let kzw = model.normalized_kernel_vec(z - w);
    let ukw = u.matrix.apply(&kw);
    let theta = ukw.inner(&kzw);
    let residual = CoeffVec(&ukw.0 - &kzw.0 * theta).norm();
    ThetaReport {
        theta,
        expected: C64::from_polar(1.0, model.alpha() * (z * w.conj()).im),
        residual,
        trusted: model.is_trusted(z) && model.is_trusted(w) && model.is_trusted(z - w),
    }
}

pub fn theta(model: &FockModel, z: C64, w: C64, quad: &QuadSpec) -> Result<ThetaReport> {
    for p in [z, w, z - w] {
        if !model.is_trusted(p) {
            return Err(FockError::TrustRadius(
                format!("theta needs z, w and z - w trusted; {p} is not"),
                model.trust_radius(),
            ));
        }
    }
    let u = weighted_translation(model, z, quad)?;
    Ok(theta_with(model, &u, w))
}

/// The first eight basis vectors followed by eight seeded random unit vectors.
pub fn default_f_samples(n: usize, seed: u64) -> Vec<CoeffVec> {
    let mut out: Vec<CoeffVec> = (0..8.min(n)).map(|k| CoeffVec::basis(n, k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        out.push(CoeffVec::from_vec(v).normalized());
    }
    out
}

/// Shell of translation centres: each radius in `radii` times `directions`
/// equally spaced angles.
pub fn shell_points(radii: &[f64], directions: usize) -> Vec<C64> {
    radii
        .iter()
        .flat_map(|&r| (0..directions).map(move |j| C64::from_polar(r, 2.0 * PI * j as f64 / directions as f64)))
        .collect()
}

/// Value of the translation estimator with its shell.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TranslationEssNorm {
    pub value: f64,
    pub shell_min: f64,
    pub shell_max: f64,
    pub untrusted_translations: usize,
}

/// `max_f max_z ‖A U_z f‖` over precomputed translations.
pub fn translation_essnorm_with(a: &OpMatrix, f_samples: &[CoeffVec], translations: &[TranslationOp]) -> TranslationEssNorm {
    let vals = par::map_slice(translations, |u| {
        f_samples
            .iter()
            .map(|f| a.apply(&u.matrix.apply(f)).norm())
            .fold(0.0, f64::max)
    });
    let radii: Vec<f64> = translations.iter().map(|u| u.z.norm()).collect();
    TranslationEssNorm {
        value: vals.into_iter().fold(0.0, f64::max),
        shell_min: radii.iter().copied().fold(f64::INFINITY, f64::min),
        shell_max: radii.iter().copied().fold(0.0, f64::max),
        untrusted_translations: translations.iter().filter(|u| !u.trusted).count(),
    }
}

pub fn translation_essnorm(
    model: &FockModel,
    a: &OpMatrix,
    f_samples: &[CoeffVec],
    z_list: &[C64],
    quad: &QuadSpec,
) -> Result<TranslationEssNorm> {
    if z_list.is_empty() {
        return invalid("z_list must be nonempty");
    }
    let us = z_list
        .iter()
        .map(|z| weighted_translation(model, *z, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(translation_essnorm_with(a, f_samples, &us))
}

/// Paired Berezin and compactness curves.
#[derive(Debug, Clone, Serialize)]
pub struct BerezinEquivReport {
    /// `t ↦ sup_{|z| = t} |B(A)(z)|`.
    pub berezin_curve: DecayCurve,
    /// `t ↦ ρ(t)` at the given `R`.
    pub indicator_curve: DecayCurve,
    /// `|B(A)(z)| ≤ ρ(|z|)` held at every sampled `z`.
    pub dominated: bool,
}

/// Samples both curves on the same 16 directions per shell.
pub fn berezin_equiv_check(model: &FockModel, a: &OpMatrix, big_r: f64, shells: &[f64]) -> Result<BerezinEquivReport> {
    require_classical(model)?;
    let rho = compactness_indicator(model, a, big_r, shells)?;
    let mut pts = Vec::with_capacity(shells.len());
    for &t in shells {
        let zs = shell_points(&[t], 16);
        let v = zs.iter().map(|z| berezin(model, a, *z).norm()).fold(0.0, f64::max);
        pts.push((t, v, zs.len(), model.is_trusted(C64::new(t, 0.0))));
    }
    let b = DecayCurve::from_points(pts)?;
    let dominated = b
        .values
        .iter()
        .zip(&rho.values)
        .all(|(x, y)| *x <= *y * (1.0 + 1e-12) + 1e-15);
    Ok(BerezinEquivReport {
        berezin_curve: b,
        indicator_curve: rho,
        dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::weight::{make_weight, WeightKind};

    #[test]
    fn u0_is_parity() {
        let m = FockModel::classical(1.0, 20).unwrap();
        let u = weighted_translation(&m, ZERO, &QuadSpec::default()).unwrap();
        let want = OpMatrix::from_fn(20, |k, j| {
            if k == j {
                C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                ZERO
            }
        });
        assert!(u.matrix.sub(&want).max_abs() < 1e-10);
    }

    #[test]
    fn theta_at_origin_and_refusal() {
        let m = FockModel::classical(1.0, 30).unwrap();
        let t = theta(&m, ZERO, ZERO, &QuadSpec::default()).unwrap();
        assert!((t.theta - C64::new(1.0, 0.0)).norm() < 1e-10);
        let fs = FockModel::new(make_weight(WeightKind::FockSobolev, 1.0, 1, 3.0).unwrap(), 10).unwrap();
        assert!(weighted_translation(&fs, ZERO, &QuadSpec::default()).is_err());
    }

    #[test]
    fn zero_operator_estimator_is_zero() {
        let m = FockModel::classical(1.0, 20).unwrap();
        let u = weighted_translation(&m, C64::new(1.0, 0.0), &QuadSpec::default()).unwrap();
        let r = translation_essnorm_with(&OpMatrix::zeros(20), &default_f_samples(20, 1), &[u]);
        assert_eq!(r.value, 0.0);
    }
}
