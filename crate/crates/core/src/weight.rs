//! Radial weights `φ`, the curvature check on `Δφ`, and the radial moment
//! tables that orthonormalize the monomials.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::C64;
use crate::par;
use crate::quadrature::{adaptive, adaptive_real, AdaptiveOptions};

/// Which family a weight belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Classical,
    FockSobolev,
    CustomRadial,
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial weight `φ(z) = profile(|z|)`.
#[derive(Clone)]
pub struct Weight {
    kind: WeightKind,
    alpha: f64,
    m: u32,
    big_a: f64,
    custom: Option<Profile>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("m", &self.m)
            .field("big_a", &self.big_a)
            .finish()
    }
}

/// Builds and validates a weight.
///
/// * classical: `φ(r) = α r² / 2`
/// * Fock–Sobolev: `φ(r) = α r² / 2 − (m/2) ln(A + r²)`, requiring `A > 2m/α`
pub fn make_weight(kind: WeightKind, alpha: f64, m: u32, big_a: f64) -> Result<Weight> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive and finite, got {alpha}"));
    }
    match kind {
        WeightKind::Classical => Ok(Weight::classical(alpha)),
        WeightKind::FockSobolev => {
            if !(big_a.is_finite() && big_a > 0.0) {
                return invalid(format!("A must be positive, got {big_a}"));
            }
            let bound = 2.0 * m as f64 / alpha;
            if big_a <= bound {
                return invalid(format!(
                    "Fock-Sobolev weight needs A > 2m/alpha = {bound}, got A = {big_a}"
                ));
            }
            Ok(Weight {
                kind,
                alpha,
                m,
                big_a,
                custom: None,
            })
        }
        WeightKind::CustomRadial => invalid("custom radial weights are built with Weight::custom"),
    }
}

impl Weight {
    pub fn classical(alpha: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        Self {
            kind: WeightKind::Classical,
            alpha,
            m: 0,
            big_a: 1.0,
            custom: None,
        }
    }

    /// A user-supplied radial profile. `alpha` is the nominal Gaussian rate,
    /// used only for default grid sizing.
    pub fn custom<F>(alpha: f64, profile: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: WeightKind::CustomRadial,
            alpha,
            m: 0,
            big_a: 1.0,
            custom: Some(Arc::new(profile)),
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn big_a(&self) -> f64 {
        self.big_a
    }

    pub fn is_classical(&self) -> bool {
        self.kind == WeightKind::Classical
    }

    /// `φ` at radius `r ≥ 0`.
    pub fn phi(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::Classical => 0.5 * self.alpha * r * r,
            WeightKind::FockSobolev => {
                0.5 * self.alpha * r * r - 0.5 * self.m as f64 * (self.big_a + r * r).ln()
            }
            WeightKind::CustomRadial => (self.custom.as_ref().expect("custom profile"))(r),
        }
    }

    /// Central-difference Laplacian `φ'' + φ'/r` of the radial profile.
    pub fn laplacian_fd(&self, r: f64) -> f64 {
        let h = (1e-3 * r.max(1.0)).min(0.5 * r);
        let (fm, f0, fp) = (self.phi(r - h), self.phi(r), self.phi(r + h));
        let d2 = (fp - 2.0 * f0 + fm) / (h * h);
        let d1 = (fp - fm) / (2.0 * h);
        d2 + d1 / r
    }

    /// Richardson estimate of the one-sided slope `φ'(0⁺)`; it vanishes
    /// exactly when the radial profile is differentiable at the origin.
    pub fn origin_slope(&self) -> f64 {
        let h = 1e-4;
        let f0 = self.phi(0.0);
        let d1 = (self.phi(h) - f0) / h;
        let d2 = (self.phi(2.0 * h) - f0) / (2.0 * h);
        2.0 * d1 - d2
    }
}

/// Result of [`check_phi_condition`].
#[derive(Debug, Clone, Serialize)]
pub struct PhiConditionReport {
    /// Smallest sampled `Δφ`.
    pub c_est: f64,
    /// Largest sampled `Δφ`.
    pub big_c_est: f64,
    /// Grid radii where `Δφ ≤ 0`.
    pub nonpositive_radii: Vec<f64>,
    /// Estimated `φ'(0⁺)`; nonzero means `φ(|z|)` has a cone point.
    pub origin_slope: f64,
    pub regular_at_origin: bool,
    /// Every profile value on the grid was finite.
    pub finite: bool,
    pub satisfied: bool,
}

/// Samples `Δφ` on `r_grid` and reports its range. The weight passes when the
/// Laplacian is strictly positive everywhere on the grid, finite, and the
/// profile is regular at the origin.
pub fn check_phi_condition(weight: &Weight, r_grid: &[f64]) -> Result<PhiConditionReport> {
    if r_grid.is_empty() {
        return invalid("r_grid must be nonempty");
    }
    if let Some(bad) = r_grid.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return invalid(format!("r_grid radii must be strictly positive, got {bad}"));
    }
    let lap: Vec<f64> = r_grid.iter().map(|&r| weight.laplacian_fd(r)).collect();
    let finite = lap.iter().all(|x| x.is_finite());
    let c_est = lap.iter().copied().fold(f64::INFINITY, f64::min);
    let big_c_est = lap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nonpositive_radii = r_grid
        .iter()
        .zip(&lap)
        .filter(|(_, l)| **l <= 0.0)
        .map(|(r, _)| *r)
        .collect();
    let origin_slope = weight.origin_slope();
    let regular_at_origin = origin_slope.abs() < 1e-6;
    Ok(PhiConditionReport {
        c_est,
        big_c_est,
        nonpositive_radii,
        origin_slope,
        regular_at_origin,
        finite,
        satisfied: finite && c_est > 0.0 && regular_at_origin,
    })
}

/// Radial moments `m_k = 2π ∫ r^{2k+1} e^{−2φ(r)} dr`, stored as logarithms.
#[derive(Debug, Clone)]
pub struct MomentTable {
    weight: Weight,
    log_moments: Vec<f64>,
    rel_err: Vec<f64>,
    // Per-k integrand shape: peak radius, log-peak value, cutoff radius and
    // the peak-normalized integral.
    peaks: Vec<f64>,
    log_peak: Vec<f64>,
    cutoffs: Vec<f64>,
    scaled_total: Vec<f64>,
}

/// Integrand values below `e^{-46}` of the peak are dropped.
const LOG_TAIL: f64 = 46.0;

fn quad_opts() -> AdaptiveOptions {
    AdaptiveOptions {
        rel_tol: 1e-14,
        ..Default::default()
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

struct Shape {
    peak: f64,
    log_peak: f64,
    cutoff: f64,
}

fn log_integrand(weight: &Weight, k: usize, r: f64) -> f64 {
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (2 * k + 1) as f64 * r.ln() - 2.0 * weight.phi(r)
}

fn integrand_shape(weight: &Weight, k: usize) -> Shape {
    let f = |r: f64| log_integrand(weight, k, r);
    // Bracket the maximum with geometric steps, then golden-section search.
    let mut a = 1e-3;
    let mut b = a * 1.25;
    while f(b) >= f(a) && b < 1e4 {
        a = b;
        b *= 1.25;
    }
    let mut lo = a / 1.25;
    let mut hi = b;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    let peak = 0.5 * (lo + hi);
    let log_peak = f(peak);
    let mut cutoff = peak + 0.25;
    while f(cutoff) - log_peak > -LOG_TAIL {
        cutoff += 0.25;
    }
    Shape {
        peak,
        log_peak,
        cutoff,
    }
}

impl MomentTable {
    /// Computes `m_0..=m_{k_max}` by adaptive radial quadrature. For the
    /// classical weight the stored value is the closed form `π k!/α^{k+1}`
    /// and `rel_err` records the quadrature's deviation from it.
    pub fn build(weight: &Weight, k_max: usize) -> Result<Self> {
        let rows: Vec<Result<(f64, f64, Shape, f64)>> = par::map_range(k_max + 1, |k| {
            let shape = integrand_shape(weight, k);
            let total = adaptive_real(
                |r| (log_integrand(weight, k, r) - shape.log_peak).exp(),
                0.0,
                shape.cutoff,
                &[shape.peak],
                quad_opts(),
            )?;
            let log_quad = (2.0 * PI).ln() + shape.log_peak + total.ln();
            let (log_m, rel) = if weight.is_classical() {
                let closed = PI.ln() + ln_factorial(k) - (k as f64 + 1.0) * weight.alpha().ln();
                (closed, ((log_quad - closed).exp() - 1.0).abs())
            } else {
                // Bisection-comparison error is far below this; report the
                // requested tolerance.
                (log_quad, quad_opts().rel_tol)
            };
            Ok((log_m, rel, shape, total))
        });
        let mut t = MomentTable {
            weight: weight.clone(),
            log_moments: Vec::with_capacity(k_max + 1),
            rel_err: Vec::with_capacity(k_max + 1),
            peaks: Vec::with_capacity(k_max + 1),
            log_peak: Vec::with_capacity(k_max + 1),
            cutoffs: Vec::with_capacity(k_max + 1),
            scaled_total: Vec::with_capacity(k_max + 1),
        };
        for row in rows {
            let (log_m, rel, shape, total) = row?;
            t.log_moments.push(log_m);
            t.rel_err.push(rel);
            t.peaks.push(shape.peak);
            t.log_peak.push(shape.log_peak);
            t.cutoffs.push(shape.cutoff);
            t.scaled_total.push(total);
        }
        Ok(t)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn k_max(&self) -> usize {
        self.log_moments.len() - 1
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.k_max() {
            return invalid(format!("moment index {k} exceeds K_max = {}", self.k_max()));
        }
        Ok(())
    }

    /// `m_k`. Overflows to `+inf` for very large `k`; use [`Self::log_moment`].
    pub fn moment(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        Ok(self.log_moments[k].exp())
    }

    pub fn log_moment(&self, k: usize) -> f64 {
        self.log_moments[k]
    }

    pub fn log_moments(&self) -> &[f64] {
        &self.log_moments
    }

    pub fn rel_err(&self, k: usize) -> f64 {
        self.rel_err[k]
    }

    /// `m_k` recomputed by quadrature, independent of any closed form.
    pub fn quadrature_moment(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        Ok(2.0 * PI * self.log_peak[k].exp() * self.scaled_total[k])
    }

    /// Radius beyond which the `k`-th moment integrand is negligible.
    pub fn cutoff(&self, k: usize) -> f64 {
        self.cutoffs[k]
    }

    fn scaled_partial(&self, k: usize, a: f64, b: f64) -> Result<f64> {
        let lp = self.log_peak[k];
        let w = &self.weight;
        adaptive_real(
            |r| (log_integrand(w, k, r) - lp).exp(),
            a,
            b,
            &[self.peaks[k]],
            quad_opts(),
        )
    }

    /// `γ_k(r) = 2π ∫_0^r s^{2k+1} e^{−2φ(s)} ds`.
    pub fn incomplete_moment(&self, k: usize, r: f64) -> Result<f64> {
        self.check_k(k)?;
        if r.is_nan() || r < 0.0 {
            return invalid(format!("radius must be nonnegative, got {r}"));
        }
        let frac = 1.0 - self.tail_fraction(k, r)?;
        Ok(frac * self.log_moments[k].exp())
    }

    /// `(m_k − γ_k(r)) / m_k`, the share of `|e_k|² e^{−2φ}` outside `B(0, r)`.
    pub fn tail_fraction(&self, k: usize, r: f64) -> Result<f64> {
        self.check_k(k)?;
        if r <= 0.0 {
            return Ok(1.0);
        }
        let cut = self.cutoffs[k];
        if r >= cut {
            return Ok(0.0);
        }
        let total = self.scaled_total[k];
        if r < self.peaks[k] {
            let head = self.scaled_partial(k, 0.0, r)?;
            Ok((1.0 - head / total).clamp(0.0, 1.0))
        } else {
            let tail = self.scaled_partial(k, r, cut)?;
            Ok((tail / total).clamp(0.0, 1.0))
        }
    }

    /// `(2π/m_k) ∫ g(r) r^{2k+1} e^{−2φ(r)} dr`, the `k`-th diagonal entry of
    /// the Toeplitz operator with radial symbol `g`. Normalized by the same
    /// quadrature as the moment, so `g ≡ 1` returns one to rounding.
    pub fn radial_average<G>(&self, k: usize, g: G, breaks: &[f64]) -> Result<C64>
    where
        G: Fn(f64) -> C64,
    {
        self.check_k(k)?;
        let lp = self.log_peak[k];
        let w = &self.weight;
        // Polynomially growing symbols shift mass outward; integrate a bit
        // further than the k-th cutoff.
        let upper = self.cutoffs[(k + 8).min(self.k_max())].max(self.cutoffs[k]);
        let mut cuts = breaks.to_vec();
        cuts.push(self.peaks[k]);
        let v = adaptive(
            |r| g(r) * (log_integrand(w, k, r) - lp).exp(),
            0.0,
            upper,
            &cuts,
            quad_opts(),
        )?;
        Ok(v.value / self.scaled_total[k])
    }

    /// CSV with columns `k, m_k, rel_err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            k: usize,
            m_k: f64,
            rel_err: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for k in 0..=self.k_max() {
            w.serialize(Row {
                k,
                m_k: self.log_moments[k].exp(),
                rel_err: self.rel_err[k],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}
