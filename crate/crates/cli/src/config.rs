//! TOML experiment configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use focklab_core::{make_weight, Weight, WeightKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    BerezinScan,
    DecayScan,
    Essnorm,
    FrameCheck,
    ResolutionCheck,
    Heat,
    Sharp,
    Translation,
    PhiCheck,
}

impl Kind {
    pub fn slug(self) -> &'static str {
        match self {
            Kind::BerezinScan => "berezin-scan",
            Kind::DecayScan => "decay-scan",
            Kind::Essnorm => "essnorm",
            Kind::FrameCheck => "frame-check",
            Kind::ResolutionCheck => "resolution-check",
            Kind::Heat => "heat",
            Kind::Sharp => "sharp",
            Kind::Translation => "translation",
            Kind::PhiCheck => "phi-check",
        }
    }

    fn needs_operator(self) -> bool {
        matches!(self, Kind::BerezinScan | Kind::DecayScan | Kind::Essnorm | Kind::Heat)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightName {
    Classical,
    FockSobolev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default = "WeightSpec::default_kind")]
    pub kind: WeightName,
    #[serde(default = "WeightSpec::default_alpha")]
    pub alpha: f64,
    /// Fock-Sobolev order.
    #[serde(default = "WeightSpec::default_m")]
    pub m: u32,
    /// Fock-Sobolev shift `A`.
    #[serde(default = "WeightSpec::default_a")]
    pub a: f64,
}

impl WeightSpec {
    fn default_kind() -> WeightName {
        WeightName::Classical
    }
    fn default_alpha() -> f64 {
        1.0
    }
    fn default_m() -> u32 {
        1
    }
    fn default_a() -> f64 {
        3.0
    }

    pub fn build(&self) -> Result<Weight> {
        let kind = match self.kind {
            WeightName::Classical => WeightKind::Classical,
            WeightName::FockSobolev => WeightKind::FockSobolev,
        };
        Ok(make_weight(kind, self.alpha, self.m, self.a)?)
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            kind: Self::default_kind(),
            alpha: Self::default_alpha(),
            m: Self::default_m(),
            a: Self::default_a(),
        }
    }
}

/// Exactly one of the three fields is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    /// Point masses as `[re, im, mass]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Compact,
    Noncompact,
}

/// Kind-specific parameters; every field is optional and defaulted by the runner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "R")]
    pub big_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Polynomial symbol terms `[a, b, re, im]` meaning `(re + i im) z^a z̄^b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Model dimension `N`.
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub params: Params,
}

pub const MAX_DIM: usize = 400;

fn check(cond: bool, path: &str, msg: impl fmt::Display) -> Result<()> {
    if cond {
        Ok(())
    } else {
        bail!("{path}: {msg}")
    }
}

fn positive(v: Option<f64>, path: &str) -> Result<()> {
    match v {
        Some(x) => check(x > 0.0 && x.is_finite(), path, format!("must be finite and positive, got {x}")),
        None => Ok(()),
    }
}

fn nonneg_list(v: &Option<Vec<f64>>, path: &str, strict: bool) -> Result<()> {
    if let Some(list) = v {
        check(!list.is_empty(), path, "must be nonempty")?;
        for (i, x) in list.iter().enumerate() {
            let ok = x.is_finite() && if strict { *x > 0.0 } else { *x >= 0.0 };
            check(ok, &format!("{path}[{i}]"), format!("out of range: {x}"))?;
        }
    }
    Ok(())
}

fn terms(v: &Option<Vec<[f64; 4]>>, path: &str) -> Result<()> {
    if let Some(list) = v {
        check(!list.is_empty(), path, "must be nonempty")?;
        for (i, t) in list.iter().enumerate() {
            let ok = t[0] >= 0.0 && t[1] >= 0.0 && t[0].fract() == 0.0 && t[1].fract() == 0.0 && t[0] <= 16.0 && t[1] <= 16.0;
            check(ok, &format!("{path}[{i}]"), "exponents must be integers in 0..=16")?;
            check(t[2].is_finite() && t[3].is_finite(), &format!("{path}[{i}]"), "coefficient must be finite")?;
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&src).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        check((1..=MAX_DIM).contains(&self.dim), "dim", format!("must be in 1..={MAX_DIM}, got {}", self.dim))?;
        let w = &self.weight;
        check(w.alpha > 0.0 && w.alpha <= 16.0, "weight.alpha", format!("must be in (0, 16], got {}", w.alpha))?;
        if w.kind == WeightName::FockSobolev {
            check(w.m <= 8, "weight.m", format!("must be at most 8, got {}", w.m))?;
            check(w.a > 0.0 && w.a.is_finite(), "weight.a", format!("must be positive, got {}", w.a))?;
        }
        if let Some(op) = &self.operator {
            let set = [op.preset.is_some(), op.symbol.is_some(), op.atoms.is_some()];
            check(
                set.iter().filter(|x| **x).count() == 1,
                "operator",
                "exactly one of preset, symbol, atoms must be given",
            )?;
            if let Some(atoms) = &op.atoms {
                check(!atoms.is_empty(), "operator.atoms", "must be nonempty")?;
                for (i, a) in atoms.iter().enumerate() {
                    check(a.iter().all(|x| x.is_finite()), &format!("operator.atoms[{i}]"), "must be finite")?;
                }
            }
        } else {
            check(!self.kind.needs_operator(), "operator", format!("required for kind {}", self.kind))?;
        }
        if matches!(self.kind, Kind::Translation | Kind::Sharp) {
            check(w.kind == WeightName::Classical, "weight.kind", format!("{} needs the classical weight", self.kind))?;
        }
        let p = &self.params;
        nonneg_list(&p.radii, "params.radii", false)?;
        nonneg_list(&p.t_list, "params.t_list", true)?;
        nonneg_list(&p.eps_list, "params.eps_list", true)?;
        for (v, path) in [
            (p.d, "params.d"),
            (p.big_r, "params.R"),
            (p.cell, "params.cell"),
            (p.window, "params.window"),
            (p.r_max, "params.r_max"),
        ] {
            positive(v, path)?;
        }
        if let Some(z) = p.z_radius {
            check(z >= 0.0 && z.is_finite(), "params.z_radius", format!("must be nonnegative, got {z}"))?;
        }
        if let Some(n) = p.directions {
            check((1..=256).contains(&n), "params.directions", format!("must be in 1..=256, got {n}"))?;
        }
        if let Some(n) = p.samples {
            check((1..=100_000).contains(&n), "params.samples", format!("must be in 1..=100000, got {n}"))?;
        }
        terms(&p.f, "params.f")?;
        terms(&p.g, "params.g")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(
            "kind = \"essnorm\"\ndim = 40\n[operator]\npreset = \"indicator-ball\"\n[params]\nradii = [0, 3, 6]\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Essnorm);
        assert_eq!(cfg.weight, WeightSpec::default());
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let err = ExperimentConfig::from_toml("kind = \"heat\"\ndim = 10\nbogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("bogus"));
        let err = ExperimentConfig::from_toml("kind = \"sharp\"\ndim = 10\n[params]\nd = -1\n").unwrap_err();
        assert!(err.to_string().starts_with("params.d"));
    }

    #[test]
    fn operator_must_be_unambiguous() {
        let err = ExperimentConfig::from_toml(
            "kind = \"berezin-scan\"\ndim = 10\n[operator]\npreset = \"identity\"\nsymbol = \"z\"\n",
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("operator"));
        assert!(ExperimentConfig::from_toml("kind = \"berezin-scan\"\ndim = 10\n").is_err());
    }
}
