//! Quadrature rules: Gauss–Legendre nodes, adaptive bisection refinement on
//! intervals, and tensor polar grids on the plane and on discs.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FockError, Result};

/// Maximum number of bisection levels in [`adaptive`].
pub const MAX_DEPTH: usize = 40;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed Gauss–Legendre rule reused across many intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: &F, a: f64, b: f64) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 0.0,
            max_depth: MAX_DEPTH,
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// Each panel is accepted when the 10-point rule on the whole panel agrees
/// with the sum over its two halves. Interior `breaks` (discontinuities,
/// peaks) are honoured as panel boundaries.
pub fn adaptive<F>(f: F, a: f64, b: f64, breaks: &[f64], opts: AdaptiveOptions) -> Result<Integral>
where
    F: Fn(f64) -> Complex64,
{
    if b <= a {
        return Ok(Integral {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    let rule = GaussRule::new(10);
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    // Coarse estimate sets the absolute floor.
    let coarse: f64 = cuts
        .windows(2)
        .map(|w| rule.integrate(&f, w[0], w[1]).norm())
        .sum();
    let floor = opts.abs_tol.max(opts.rel_tol * coarse * 1e-3).max(f64::MIN_POSITIVE);

    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let whole = rule.integrate(&f, w[0], w[1]);
        let (v, e) = refine(&f, &rule, w[0], w[1], whole, 0, floor, opts)?;
        total += v;
        err += e;
    }
    Ok(Integral { value: total, error: err })
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> Complex64>(
    f: &F,
    rule: &GaussRule,
    a: f64,
    b: f64,
    whole: Complex64,
    depth: usize,
    floor: f64,
    opts: AdaptiveOptions,
) -> Result<(Complex64, f64)> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(f, a, m);
    let right = rule.integrate(f, m, b);
    let sum = left + right;
    let diff = (sum - whole).norm();
    if diff <= floor.max(opts.rel_tol * sum.norm()) {
        return Ok((sum, diff));
    }
    if depth + 1 >= opts.max_depth {
        return Err(FockError::QuadratureNonConvergence {
            a,
            b,
            depth: opts.max_depth,
        });
    }
    let (l, el) = refine(f, rule, a, m, left, depth + 1, floor, opts)?;
    let (r, er) = refine(f, rule, m, b, right, depth + 1, floor, opts)?;
    Ok((l + r, el + er))
}

/// Real-valued convenience wrapper around [`adaptive`].
pub fn adaptive_real<F>(f: F, a: f64, b: f64, breaks: &[f64], opts: AdaptiveOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive(|x| Complex64::new(f(x), 0.0), a, b, breaks, opts).map(|i| i.value.re)
}

/// Resolution parameters for two-dimensional grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Radial panel width.
    pub panel_width: f64,
    /// Gauss–Legendre nodes per radial panel.
    pub nodes_per_panel: usize,
    /// Uniform angular samples; `None` lets the caller pick from the model size.
    pub n_angles: Option<usize>,
    /// Outer radius of plane integrals; `None` uses the model cutoff.
    pub r_max: Option<f64>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            panel_width: 0.5,
            nodes_per_panel: 12,
            n_angles: None,
            r_max: None,
        }
    }
}

impl QuadSpec {
    pub fn with_angles(mut self, n: usize) -> Self {
        self.n_angles = Some(n);
        self
    }

    pub fn with_r_max(mut self, r: f64) -> Self {
        self.r_max = Some(r);
        self
    }
}

/// Nodes and weights of a two-dimensional rule.
#[derive(Debug, Clone, Default)]
pub struct QuadGrid {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tensor polar rule on the disc `|w - center| < radius`.
    ///
    /// Radial panels are cut at every entry of `breaks` lying in `(0, radius)`;
    /// angles are uniform, which integrates trigonometric polynomials of
    /// degree below `n_angles` exactly.
    pub fn disk(
        center: Complex64,
        radius: f64,
        breaks: &[f64],
        panel_width: f64,
        nodes_per_panel: usize,
        n_angles: usize,
    ) -> Self {
        if radius <= 0.0 || n_angles == 0 {
            return Self::default();
        }
        let rule = GaussRule::new(nodes_per_panel);
        let radial = radial_nodes(&rule, radius, breaks, panel_width);
        let dtheta = 2.0 * PI / n_angles as f64;
        let dirs: Vec<Complex64> = (0..n_angles)
            .map(|j| Complex64::from_polar(1.0, dtheta * j as f64))
            .collect();
        let mut points = Vec::with_capacity(radial.len() * n_angles);
        let mut weights = Vec::with_capacity(radial.len() * n_angles);
        for &(r, w) in &radial {
            for d in &dirs {
                points.push(center + d * r);
                weights.push(w * r * dtheta);
            }
        }
        Self { points, weights }
    }

    /// Polar rule on the disc `|w| < r_max` centred at the origin.
    pub fn polar(
        r_max: f64,
        breaks: &[f64],
        panel_width: f64,
        nodes_per_panel: usize,
        n_angles: usize,
    ) -> Self {
        Self::disk(
            Complex64::new(0.0, 0.0),
            r_max,
            breaks,
            panel_width,
            nodes_per_panel,
            n_angles,
        )
    }

    pub fn integrate<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| f(*p) * *w)
            .sum()
    }
}

fn radial_nodes(rule: &GaussRule, radius: f64, breaks: &[f64], panel_width: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = vec![0.0, radius];
    cuts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < radius));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let panels = ((len / panel_width).ceil() as usize).max(1);
        let h = len / panels as f64;
        for p in 0..panels {
            let a = w[0] + h * p as f64;
            out.extend(rule.mapped(a, a + h));
        }
    }
    out
}
