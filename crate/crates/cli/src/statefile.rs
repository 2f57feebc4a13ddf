//! JSON state documents:
//!
//! ```json
//! {"factors": [
//!   {"kind": "ghz", "labels": ["A", "B", "C", "D"], "dim": 2},
//!   {"kind": "w", "labels": ["E", "F", "G"]},
//!   {"kind": "amplitudes", "labels": ["H"], "dims": [2], "re": [1, 0], "im": [0, 0]}
//! ]}
//! ```

use std::fs;
use std::path::Path;

use kpem_core::{FactorSpec, StateSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StateFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("factors[{index}].{field}: {message}")]
    Field { index: usize, field: &'static str, message: String },
    #[error("factors[{index}]")]
    Factor {
        index: usize,
        #[source]
        source: kpem_core::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ghz,
    W,
    Maxent,
    Amplitudes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorRecord {
    pub kind: Kind,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub factors: Vec<FactorRecord>,
}

pub fn parse_state_file(path: &Path) -> Result<StateSpec, StateFileError> {
    let text =
        fs::read_to_string(path).map_err(|source| StateFileError::Io { path: path.display().to_string(), source })?;
    parse_state_text(&text)
}

pub fn parse_state_text(text: &str) -> Result<StateSpec, StateFileError> {
    let doc: StateDocument = serde_json::from_str(text).map_err(|e| StateFileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let spec = document_to_spec(&doc)?;
    check_labels(&spec)?;
    Ok(spec)
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn check_labels(spec: &StateSpec) -> Result<(), StateFileError> {
    let mut seen = std::collections::HashSet::new();
    for (index, f) in spec.factors.iter().enumerate() {
        for l in f.labels() {
            if !seen.insert(l.clone()) {
                return Err(StateFileError::Field {
                    index,
                    field: "labels",
                    message: format!("duplicate label `{l}`"),
                });
            }
        }
    }
    Ok(())
}

pub fn document_to_spec(doc: &StateDocument) -> Result<StateSpec, StateFileError> {
    let mut factors = Vec::with_capacity(doc.factors.len());
    for (index, r) in doc.factors.iter().enumerate() {
        let bad = |field: &'static str, message: String| StateFileError::Field { index, field, message };
        let forbid = |field: &'static str, present: bool| {
            if present {
                Err(bad(field, format!("not allowed for kind `{}`", kind_name(r.kind))))
            } else {
                Ok(())
            }
        };
        if r.labels.is_empty() {
            return Err(bad("labels", "at least one label is required".into()));
        }
        let f = match r.kind {
            Kind::Ghz | Kind::Maxent => {
                forbid("dims", r.dims.is_some())?;
                forbid("re", r.re.is_some())?;
                forbid("im", r.im.is_some())?;
                let dim = r.dim.unwrap_or(2);
                if r.kind == Kind::Ghz {
                    FactorSpec::Ghz { labels: r.labels.clone(), dim }
                } else {
                    if r.labels.len() != 2 {
                        return Err(bad("labels", format!("maxent needs 2 labels, found {}", r.labels.len())));
                    }
                    FactorSpec::MaxEnt { labels: r.labels.clone(), dim }
                }
            }
            Kind::W => {
                forbid("dims", r.dims.is_some())?;
                forbid("re", r.re.is_some())?;
                forbid("im", r.im.is_some())?;
                if r.dim.is_some_and(|d| d != 2) {
                    return Err(bad("dim", "w factors are qubits".into()));
                }
                FactorSpec::W { labels: r.labels.clone() }
            }
            Kind::Amplitudes => {
                forbid("dim", r.dim.is_some())?;
                let dims = r.dims.clone().ok_or_else(|| bad("dims", "required for amplitudes".into()))?;
                if dims.len() != r.labels.len() {
                    return Err(bad("dims", format!("{} labels but {} dims", r.labels.len(), dims.len())));
                }
                let total = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
                let total = total.ok_or_else(|| bad("dims", "dimension overflows".into()))?;
                let re = r.re.clone().ok_or_else(|| bad("re", "required for amplitudes".into()))?;
                if re.len() != total {
                    return Err(bad("re", format!("expected {total} entries, found {}", re.len())));
                }
                let im = r.im.clone().unwrap_or_else(|| vec![0.0; total]);
                if im.len() != total {
                    return Err(bad("im", format!("expected {total} entries, found {}", im.len())));
                }
                let amps = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                FactorSpec::Amplitudes { labels: r.labels.clone(), dims, amps }
            }
        };
        // surface dimension and normalisation problems with the factor index
        f.build().map_err(|source| StateFileError::Factor { index, source })?;
        factors.push(f);
    }
    Ok(StateSpec::new(factors))
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Ghz => "ghz",
        Kind::W => "w",
        Kind::Maxent => "maxent",
        Kind::Amplitudes => "amplitudes",
    }
}

pub fn spec_to_document(spec: &StateSpec) -> StateDocument {
    let factors = spec
        .factors
        .iter()
        .map(|f| match f {
            FactorSpec::Ghz { labels, dim } => FactorRecord {
                kind: Kind::Ghz,
                labels: labels.clone(),
                dim: Some(*dim),
                dims: None,
                re: None,
                im: None,
            },
            FactorSpec::W { labels } => {
                FactorRecord { kind: Kind::W, labels: labels.clone(), dim: None, dims: None, re: None, im: None }
            }
            FactorSpec::MaxEnt { labels, dim } => FactorRecord {
                kind: Kind::Maxent,
                labels: labels.clone(),
                dim: Some(*dim),
                dims: None,
                re: None,
                im: None,
            },
            FactorSpec::Amplitudes { labels, dims, amps } => FactorRecord {
                kind: Kind::Amplitudes,
                labels: labels.clone(),
                dim: None,
                dims: Some(dims.clone()),
                re: Some(amps.iter().map(|a| a.re).collect()),
                im: Some(amps.iter().map(|a| a.im).collect()),
            },
        })
        .collect();
    StateDocument { factors }
}

pub fn spec_to_json(spec: &StateSpec) -> String {
    serde_json::to_string_pretty(&spec_to_document(spec)).expect("plain data serialises")
}
