//! Built-in operators.

use anyhow::{anyhow, bail, Result};
use focklab_core::operators::{toeplitz_function, toeplitz_measure};
use focklab_core::{DiscreteMeasure, Expr, FockModel, Indicator, OpMatrix, QuadSpec, Symbol, C64};

use crate::config::OperatorSpec;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Symbol expression, when the operator is a Toeplitz operator with a density.
    pub symbol: Option<&'static str>,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "identity", description: "Id", symbol: None },
    Preset { name: "zero", description: "0", symbol: None },
    Preset {
        name: "indicator-ball",
        description: "T of the indicator of B(0, r), r=1",
        symbol: Some("indicator(0, 1)"),
    },
    Preset {
        name: "point-mass",
        description: "T of the unit point mass at the origin",
        symbol: None,
    },
    Preset { name: "t-z", description: "T_z, symbol z", symbol: Some("z") },
    Preset { name: "t-conj-z", description: "T of conj(z)", symbol: Some("conj(z)") },
    Preset { name: "t-abs2", description: "T of |z|^2", symbol: Some("abs2(z)") },
    Preset {
        name: "gaussian",
        description: "T of exp(-|z|^2)",
        symbol: Some("exp(-abs2(z))"),
    },
];

/// One line per preset in a fixed order.
pub fn list_presets() -> String {
    let mut out = String::new();
    for p in PRESETS {
        let detail = match (p.name, p.symbol) {
            ("indicator-ball", _) => "indicator-ball r=1".to_string(),
            (_, Some(s)) => format!("symbol {s}"),
            ("point-mass", None) => "atoms [[0, 0, 1]]".to_string(),
            _ => "matrix".to_string(),
        };
        out.push_str(&format!("{:<16}{:<40}{}\n", p.name, p.description, detail));
    }
    out
}

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        anyhow!("operator.preset: unknown preset {name:?}; known: {}", names.join(", "))
    })
}

/// The operator matrix and, for density symbols, the parsed symbol.
pub struct BuiltOperator {
    pub matrix: OpMatrix,
    pub symbol: Option<Box<dyn Symbol>>,
    pub label: String,
}

fn from_expr(model: &FockModel, src: &str, quad: &QuadSpec) -> Result<BuiltOperator> {
    let expr = Expr::parse(src).map_err(|e| anyhow!("operator.symbol: {e}"))?;
    let matrix = toeplitz_function(model, &expr, quad)?;
    Ok(BuiltOperator {
        matrix,
        symbol: Some(Box::new(expr)),
        label: format!("T[{src}]"),
    })
}

pub fn build(model: &FockModel, spec: &OperatorSpec, quad: &QuadSpec) -> Result<BuiltOperator> {
    let n = model.dim();
    if let Some(name) = &spec.preset {
        let p = find(name)?;
        return match p.name {
            "identity" => Ok(BuiltOperator { matrix: OpMatrix::identity(n), symbol: None, label: "Id".into() }),
            "zero" => Ok(BuiltOperator { matrix: OpMatrix::zeros(n), symbol: None, label: "0".into() }),
            "point-mass" => Ok(BuiltOperator {
                matrix: toeplitz_measure(model, &DiscreteMeasure::dirac(C64::new(0.0, 0.0)))?,
                symbol: None,
                label: "T[delta_0]".into(),
            }),
            "indicator-ball" => {
                let ind = Indicator::unit_disc();
                Ok(BuiltOperator {
                    matrix: toeplitz_function(model, &ind, quad)?,
                    symbol: Some(Box::new(ind)),
                    label: "T[chi_B(0,1)]".into(),
                })
            }
            _ => from_expr(model, p.symbol.expect("preset symbol"), quad),
        };
    }
    if let Some(src) = &spec.symbol {
        return from_expr(model, src, quad);
    }
    if let Some(atoms) = &spec.atoms {
        let mut mu = DiscreteMeasure::empty();
        for a in atoms {
            mu.push(C64::new(a[0], a[1]), C64::new(a[2], 0.0));
        }
        return Ok(BuiltOperator {
            matrix: toeplitz_measure(model, &mu)?,
            symbol: None,
            label: format!("T[{} atoms]", atoms.len()),
        });
    }
    bail!("operator: exactly one of preset, symbol, atoms must be given")
}
