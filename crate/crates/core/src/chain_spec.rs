//! JSON chain specifications.
//!
//! ```json
//! {
//!   "type": "homogeneous_rw",
//!   "g": 1, "d": 1,
//!   "increments": { "-1": 0.75, "1": 0.25 },
//!   "boundary_rows": [[0.75, 0.25]]
//! }
//! ```
//!
//! `"type": "band"` takes `i0` and `N` explicitly and allows `N` larger than
//! `max(g, d)` and more boundary rows than `g`. `limit_increments`, if given,
//! must equal `increments` (a JSON file cannot carry a row generator).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bounds::IncrementLaw;
use crate::error::Error;
use crate::kernel::{BandKernel, Row};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("line {line}, column {column}, at `{path}`: {message}")]
    Json {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },

    #[error("field `{field}`: {source}")]
    Chain { field: String, source: Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainType {
    HomogeneousRw,
    Band,
}

/// Parsed but not yet validated chain document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(rename = "type")]
    pub chain_type: ChainType,
    pub g: Option<usize>,
    pub d: Option<usize>,
    pub increments: BTreeMap<String, f64>,
    pub boundary_rows: Vec<Vec<f64>>,
    pub i0: Option<usize>,
    #[serde(rename = "N")]
    pub half_width: Option<usize>,
    pub limit_increments: Option<BTreeMap<String, f64>>,
}

fn chain_err(field: &str, source: Error) -> SpecError {
    SpecError::Chain {
        field: field.to_string(),
        source,
    }
}

fn parse_increments(field: &str, raw: &BTreeMap<String, f64>) -> Result<BTreeMap<i64, f64>, SpecError> {
    raw.iter()
        .map(|(key, &p)| {
            key.trim()
                .parse::<i64>()
                .map(|m| (m, p))
                .map_err(|_| chain_err(field, Error::InvalidArgument(format!("`{key}` is not an integer"))))
        })
        .collect()
}

fn dense_row(row: &[f64]) -> Row {
    row.iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(j, &p)| (j, p))
        .collect()
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            SpecError::Json {
                line: inner.line(),
                column: inner.column(),
                path,
                message: inner.to_string(),
            }
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, SpecError> {
        let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<BandKernel, SpecError> {
        let increments = parse_increments("increments", &self.increments)?;
        if let Some(limit) = &self.limit_increments {
            if parse_increments("limit_increments", limit)? != increments {
                return Err(chain_err(
                    "limit_increments",
                    Error::InvalidArgument(
                        "a JSON tail is homogeneous, so limit increments must equal increments".into(),
                    ),
                ));
            }
        }
        let rows: Vec<Row> = self.boundary_rows.iter().map(|r| dense_row(r)).collect();
        match self.chain_type {
            ChainType::HomogeneousRw => {
                let (g, d) = match (self.g, self.d) {
                    (Some(g), Some(d)) => (g, d),
                    _ => {
                        return Err(chain_err(
                            "g",
                            Error::InvalidArgument("homogeneous_rw needs both g and d".into()),
                        ))
                    }
                };
                if self.i0.is_some_and(|i0| i0 != g) {
                    return Err(chain_err("i0", Error::InvalidArgument(format!("must equal g = {g}"))));
                }
                if self.half_width.is_some_and(|n| n != g.max(d)) {
                    return Err(chain_err(
                        "N",
                        Error::InvalidArgument(format!("must equal max(g, d) = {}", g.max(d))),
                    ));
                }
                BandKernel::homogeneous_rw(g, d, &increments, rows).map_err(|e| chain_err(field_of(&e), e))
            }
            ChainType::Band => {
                let law = IncrementLaw::new(increments).map_err(|e| chain_err("increments", e))?;
                for (name, declared, actual) in [("g", self.g, law.g()), ("d", self.d, law.d())] {
                    if declared.is_some_and(|v| v != actual) {
                        return Err(chain_err(
                            name,
                            Error::InvalidArgument(format!("increments imply {name} = {actual}")),
                        ));
                    }
                }
                let i0 = self.i0.unwrap_or(rows.len());
                let n = self.half_width.unwrap_or(law.g().max(law.d()));
                BandKernel::band(i0, n, rows, law).map_err(|e| chain_err(field_of(&e), e))
            }
        }
    }
}

fn field_of(e: &Error) -> &'static str {
    match e {
        Error::NonStochasticRow { row: None, .. }
        | Error::NegativeEntry { row: None, .. }
        | Error::DegenerateIncrements { .. } => "increments",
        Error::InvalidArgument(_) => "N",
        _ => "boundary_rows",
    }
}

/// Reads and validates a chain file.
pub fn load_kernel(path: &Path) -> Result<BandKernel, SpecError> {
    ChainSpec::from_file(path)?.build()
}
