//! Localization estimators: coherent-state decay profiles, the compactness
//! indicator, and the tail, local and Toeplitz essential-norm probes.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::FockModel;
use crate::linalg::{CoeffVec, OpMatrix, C64};
use crate::operators::{carleson_norm, square_centers, MeasureRef};
use crate::par;
use crate::quadrature::{QuadGrid, QuadSpec};

/// Negative Gram eigenvalues down to this are treated as quadrature noise.
pub const GRAM_NEG_TOL: f64 = 1e-10;

/// A sampled scalar curve `x ↦ value` with per-point sampling metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub trusted: Vec<bool>,
    /// Requested abscissae dropped because no admissible sample existed.
    #[serde(default)]
    pub omitted: Vec<f64>,
}

#[derive(Serialize)]
struct CurveRow {
    radius: f64,
    value: f64,
    n_samples: usize,
    trusted: bool,
}

impl DecayCurve {
    /// Builds a curve from unordered points; abscissae are sorted ascending
    /// and must be distinct.
    pub fn from_points(mut pts: Vec<(f64, f64, usize, bool)>) -> Result<Self> {
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite abscissae"));
        if pts.windows(2).any(|w| w[0].0 >= w[1].0) {
            return invalid("curve abscissae must be distinct");
        }
        if pts.iter().any(|p| !p.1.is_finite()) {
            return invalid("curve values must be finite");
        }
        Ok(Self {
            radii: pts.iter().map(|p| p.0).collect(),
            values: pts.iter().map(|p| p.1).collect(),
            n_samples: pts.iter().map(|p| p.2).collect(),
            trusted: pts.iter().map(|p| p.3).collect(),
            omitted: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Value at an abscissa present in the curve.
    pub fn value_at(&self, r: f64) -> Option<f64> {
        self.radii
            .iter()
            .position(|x| (x - r).abs() <= 1e-12 * r.abs().max(1.0))
            .map(|i| self.values[i])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Values never increase by more than `slack` along the abscissa.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Values increase strictly along the abscissa.
    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] + slack >= w[0])
    }

    pub fn untrusted_count(&self) -> usize {
        self.trusted.iter().filter(|t| !**t).count()
    }

    /// Least-squares fit of `ln value ≈ c − β r^power` over points with
    /// value above `floor`; returns `(β, c)`.
    pub fn fit_decay_rate(&self, power: f64, floor: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .radii
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v > floor)
            .map(|(r, v)| (r.powf(power), v.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        Some((-slope, my - slope * mx))
    }

    /// Gaussian exponent `β` in `value ≈ C e^{−β r²}`.
    pub fn fit_gaussian_exponent(&self) -> Option<f64> {
        self.fit_decay_rate(2.0, 1e-300).map(|(b, _)| b)
    }

    /// CSV with columns `radius, value, n_samples, trusted`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(CurveRow {
                radius: self.radii[i],
                value: self.values[i],
                n_samples: self.n_samples[i],
                trusted: self.trusted[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// How `(z, w)` pairs at a fixed separation are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    pub directions: usize,
    pub base_points: usize,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self {
            directions: 32,
            base_points: 8,
            seed: 0xdeca7,
        }
    }
}

/// `r ↦ sup |⟨A k_z, k_w⟩|` over sampled pairs with `|z − w| = r`.
///
/// Pairs are `b ± (r/2) e^{iθ}` with base points `b` drawn uniformly from the
/// disc of radius `ρ_N − r/2`, so both ends are trusted. Radii with no room
/// for such a disc are omitted.
pub fn decay_profile(model: &FockModel, a: &OpMatrix, radii: &[f64], plan: &PairSampling) -> Result<DecayCurve> {
    if plan.directions == 0 || plan.base_points == 0 {
        return invalid("pair sampling needs at least one direction and one base point");
    }
    if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return invalid("radii must be finite and nonnegative");
    }
    let rho = model.trust_radius();
    let mut pts = Vec::new();
    let mut omitted = Vec::new();
    for (idx, &r) in radii.iter().enumerate() {
        let room = rho - 0.5 * r;
        if room < 0.0 {
            omitted.push(r);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ (idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let bases: Vec<C64> = (0..plan.base_points)
            .map(|_| {
                let s = room * rng.gen::<f64>().sqrt();
                C64::from_polar(s, 2.0 * PI * rng.gen::<f64>())
            })
            .collect();
        let pairs: Vec<(C64, C64)> = bases
            .iter()
            .flat_map(|b| {
                (0..plan.directions).map(move |j| {
                    let h = C64::from_polar(0.5 * r, 2.0 * PI * j as f64 / plan.directions as f64);
                    (b + h, b - h)
                })
            })
            .collect();
        let vals = par::map_slice(&pairs, |(z, w)| {
            let kz = model.normalized_kernel_vec(*z);
            let kw = model.normalized_kernel_vec(*w);
            a.apply(&kz).inner(&kw).norm()
        });
        pts.push((r, vals.into_iter().fold(0.0, f64::max), pairs.len(), true));
    }
    let mut curve = DecayCurve::from_points(pts)?;
    curve.omitted = omitted;
    Ok(curve)
}

/// `ρ(t) = sup |⟨A k_z, k_w⟩|` over `|z| = t`, `w ∈ B(z, R)`.
///
/// `z` runs over 16 equally spaced directions; `w` over `z` itself and a
/// polar pattern of 4 radii × 16 angles inside the closed ball. A point is
/// trusted when the whole ball lies inside the trust radius.
pub fn compactness_indicator(model: &FockModel, a: &OpMatrix, big_r: f64, t_values: &[f64]) -> Result<DecayCurve> {
    if !(big_r > 0.0 && big_r.is_finite()) {
        return invalid(format!("R must be positive, got {big_r}"));
    }
    const DIRS: usize = 16;
    const RINGS: usize = 4;
    let offsets: Vec<C64> = std::iter::once(C64::new(0.0, 0.0))
        .chain((1..=RINGS).flat_map(|i| {
            let s = big_r * i as f64 / RINGS as f64;
            (0..DIRS).map(move |j| C64::from_polar(s, 2.0 * PI * (j as f64 + 0.5) / DIRS as f64))
        }))
        .collect();
    let mut pts = Vec::with_capacity(t_values.len());
    for &t in t_values {
        if !(t.is_finite() && t >= 0.0) {
            return invalid(format!("t must be finite and nonnegative, got {t}"));
        }
        let zs: Vec<C64> = (0..DIRS)
            .map(|j| C64::from_polar(t, 2.0 * PI * j as f64 / DIRS as f64))
            .collect();
        let vals = par::map_slice(&zs, |z| {
            let az = a.apply(&model.normalized_kernel_vec(*z));
            offsets
                .iter()
                .map(|o| az.inner(&model.normalized_kernel_vec(z + o)).norm())
                .fold(0.0, f64::max)
        });
        let trusted = t + big_r <= model.trust_radius();
        pts.push((t, vals.into_iter().fold(0.0, f64::max), zs.len() * offsets.len(), trusted));
    }
    DecayCurve::from_points(pts)
}

/// `√((m_k − γ_k(r))/m_k)` for `k < N`.
pub fn tail_weights(model: &FockModel, r: f64) -> Result<Vec<f64>> {
    if !(r.is_finite() && r >= 0.0) {
        return invalid(format!("r must be finite and nonnegative, got {r}"));
    }
    par::map_range(model.dim(), |k| model.moments().tail_fraction(k, r).map(f64::sqrt))
        .into_iter()
        .collect()
}

/// `‖M_{χ_{B(0,r)^c}} A‖`: the spectral norm of `G_r^{1/2} A` with the
/// diagonal tail Gram matrix `G_r`.
pub fn tail_norm(model: &FockModel, a: &OpMatrix, r: f64) -> Result<f64> {
    let s = tail_weights(model, r)?;
    let n = model.dim();
    let m = OpMatrix::from_fn(n, |k, j| a.get(k, j) * s[k]);
    Ok(m.op_norm())
}

/// `r ↦ tail_norm(A, r)`.
pub fn tail_curve(model: &FockModel, a: &OpMatrix, radii: &[f64]) -> Result<DecayCurve> {
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        pts.push((r, tail_norm(model, a, r)?, model.dim(), r <= model.trust_radius()));
    }
    DecayCurve::from_points(pts)
}

/// Gram matrix `H[k][j] = ∫_{B(z,d)} ê_j conj(ê_k) dv`.
pub fn ball_gram(model: &FockModel, z: C64, d: f64, quad: &QuadSpec) -> Result<OpMatrix> {
    if !(d > 0.0 && d.is_finite()) {
        return invalid(format!("ball radius must be positive, got {d}"));
    }
    let grid: QuadGrid = model.disk_grid(z, d, quad);
    let table = model.basis_table(&grid);
    let coef: Vec<C64> = grid.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
    Ok(model.assemble(&table, &coef))
}

/// `‖M_{χ_{B(z,d)}} A P M_{χ_{B(z,2d)}}‖ = ‖H_d^{1/2} A H_{2d}^{1/2}‖`.
pub fn local_norm(model: &FockModel, a: &OpMatrix, z: C64, d: f64, quad: &QuadSpec) -> Result<f64> {
    let hd = ball_gram(model, z, d, quad)?.psd_sqrt(GRAM_NEG_TOL)?;
    let h2d = ball_gram(model, z, 2.0 * d, quad)?.psd_sqrt(GRAM_NEG_TOL)?;
    Ok(hd.compose(a).compose(&h2d).op_norm())
}

/// `sup_d local_norm(A, z, d)` over the given radii.
pub fn local_norm_sup(model: &FockModel, a: &OpMatrix, z: C64, ds: &[f64], quad: &QuadSpec) -> Result<f64> {
    let mut best = 0.0f64;
    for &d in ds {
        best = best.max(local_norm(model, a, z, d, quad)?);
    }
    Ok(best)
}

/// One local-norm probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSample {
    pub z_radius: f64,
    pub d: f64,
    pub value: f64,
    pub trusted: bool,
}

/// Output of the essential-norm estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssNormReport {
    pub tail_curve: DecayCurve,
    /// `r ↦ sup_{|z|,|w| ≥ r} |⟨A k_z, k_w⟩|` (Toeplitz check only).
    pub far_curve: Option<DecayCurve>,
    pub local_curve: Vec<LocalSample>,
    /// Factor applied to the symbol's Carleson norm; values are reported
    /// for the unscaled operator.
    pub scale: f64,
    pub carleson_norm: Option<f64>,
    pub tail_monotone: bool,
    /// Every reported curve ends at most half its starting value (or is zero).
    pub co_decay: bool,
}

fn decays(c: &DecayCurve) -> bool {
    match (c.values.first(), c.values.last()) {
        (Some(&f), Some(&l)) => l <= 0.5 * f || f == 0.0,
        _ => true,
    }
}

/// Tail curve plus local probes at `z = z_radius` (positive real axis).
pub fn essnorm_report(
    model: &FockModel,
    a: &OpMatrix,
    r_list: &[f64],
    local: &[(f64, f64)],
    quad: &QuadSpec,
) -> Result<EssNormReport> {
    let tail = tail_curve(model, a, r_list)?;
    let mut local_curve = Vec::with_capacity(local.len());
    for &(zr, d) in local {
        local_curve.push(LocalSample {
            z_radius: zr,
            d,
            value: local_norm(model, a, C64::new(zr, 0.0), d, quad)?,
            trusted: zr + 2.0 * d <= model.trust_radius(),
        });
    }
    Ok(EssNormReport {
        tail_monotone: tail.is_nonincreasing(1e-10),
        co_decay: decays(&tail),
        tail_curve: tail,
        far_curve: None,
        local_curve,
        scale: 1.0,
        carleson_norm: None,
    })
}

/// `r ↦ sup |⟨A k_z, k_w⟩|` over `r ≤ |z| ≤ r + 1/2`, `|z − w| ≤ 1/2`, `|w| ≥ r`.
pub fn far_correlation_curve(model: &FockModel, a: &OpMatrix, r_list: &[f64]) -> Result<DecayCurve> {
    const DIRS: usize = 16;
    let mut pts = Vec::with_capacity(r_list.len());
    for &r in r_list {
        if !(r.is_finite() && r >= 0.0) {
            return invalid(format!("r must be finite and nonnegative, got {r}"));
        }
        let zs: Vec<C64> = [r, r + 0.5]
            .iter()
            .flat_map(|&s| (0..DIRS).map(move |j| C64::from_polar(s, 2.0 * PI * j as f64 / DIRS as f64)))
            .collect();
        let vals = par::map_slice(&zs, |z| {
            let az: CoeffVec = a.apply(&model.normalized_kernel_vec(*z));
            std::iter::once(C64::new(0.0, 0.0))
                .chain((0..8).map(|j| C64::from_polar(0.5, 2.0 * PI * j as f64 / 8.0)))
                .map(|o| z + o)
                .filter(|w| w.norm() >= r)
                .map(|w| az.inner(&model.normalized_kernel_vec(w)).norm())
                .fold(0.0, f64::max)
        });
        pts.push((r, vals.into_iter().fold(0.0, f64::max), zs.len() * 9, r + 1.0 <= model.trust_radius()));
    }
    DecayCurve::from_points(pts)
}

/// Paired tail and far-correlation curves for `T_μ`.
///
/// `‖μ‖_*` is estimated as the Carleson norm over centres in `[−8, 8]²`; the
/// report records the normalizing factor `1/max(1, ‖μ‖_*)` but the curves are
/// those of the unscaled operator.
pub fn toeplitz_essnorm_check(
    model: &FockModel,
    mu: MeasureRef<'_>,
    r_list: &[f64],
    quad: &QuadSpec,
) -> Result<EssNormReport> {
    let t = mu.toeplitz(model, quad)?;
    let cn = carleson_norm(mu, &square_centers(8.0, 0.5));
    let tail = tail_curve(model, &t, r_list)?;
    let far = far_correlation_curve(model, &t, r_list)?;
    Ok(EssNormReport {
        tail_monotone: tail.is_nonincreasing(1e-10),
        co_decay: decays(&tail) && decays(&far),
        tail_curve: tail,
        far_curve: Some(far),
        local_curve: Vec::new(),
        scale: 1.0 / cn.max(1.0),
        carleson_norm: Some(cn),
    })
}
