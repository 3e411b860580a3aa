//! Text form of a coefficient model.
//!
//! ```toml
//! schema = 1
//! name = "n-squared"
//!
//! [a]
//! family = "power"
//! gamma = 1.0
//! p = 2.0
//!
//! [b]
//! family = "zero"
//! ```
//!
//! An optional `[table]` with arrays `a` and `b` gives explicit head entries;
//! `builtin = "<name>"` refers to one of [`CoefficientModel::builtin`].

use crate::coefficients::{CoefficientModel, Diagonal, OffDiagonal, Table};
use crate::error::{JacobiError, Result};
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA: u32 = 1;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema: u32,
    name: Option<String>,
    builtin: Option<String>,
    a: Option<OffDiagonal>,
    b: Option<Diagonal>,
    table: Option<Table>,
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<CoefficientModel> {
    let f: ModelFile = toml::from_str(text).map_err(|e| JacobiError::Model(e.to_string()))?;
    if f.schema != MODEL_SCHEMA {
        return Err(JacobiError::Model(format!("schema {} is not supported (expected {MODEL_SCHEMA})", f.schema)));
    }
    if let Some(b) = &f.builtin {
        if f.a.is_some() || f.b.is_some() || f.table.is_some() {
            return Err(JacobiError::Model("`builtin` excludes [a], [b] and [table]".into()));
        }
        let mut m = CoefficientModel::builtin_named(b).ok_or_else(|| JacobiError::Model(format!("unknown builtin model `{b}`")))?;
        if let Some(n) = f.name {
            m.name = n;
        }
        return Ok(m);
    }
    let name = f.name.ok_or_else(|| JacobiError::Model("missing field `name`".into()))?;
    match (f.table, f.a, f.b) {
        (Some(t), a, b) => {
            let tail = match (a, b) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(JacobiError::Model("a tail needs both [a] and [b]".into())),
            };
            CoefficientModel::tabulated(&name, t, tail)
        }
        (None, Some(a), Some(b)) => CoefficientModel::family(&name, a, b),
        (None, Some(a), None) => CoefficientModel::family(&name, a, Diagonal::Zero),
        _ => Err(JacobiError::Model("need [a] (with optional [b]) or [table]".into())),
    }
}

pub fn model_to_toml(m: &CoefficientModel) -> String {
    let f = ModelFile {
        schema: MODEL_SCHEMA,
        name: Some(m.name.clone()),
        builtin: None,
        a: m.a.clone(),
        b: m.b.clone(),
        table: m.table.clone(),
    };
    toml::to_string(&f).expect("model serializes")
}

/// A built-in name, or otherwise a model document.
pub fn resolve_model(text: &str) -> Result<CoefficientModel> {
    match CoefficientModel::builtin_named(text.trim()) {
        Some(m) => Ok(m),
        None => parse_model(text),
    }
}
