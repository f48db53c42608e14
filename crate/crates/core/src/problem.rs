//! JSON problem files.
//!
//! ```json
//! {
//!   "b": [[0, 1], [0, 0]],
//!   "f": ["t", "t^2"],
//!   "c0": [1.0],
//!   "x0": [5, 0],
//!   "t_end": 2.0,
//!   "step": 0.001,
//!   "tol": 1e-10
//! }
//! ```
//!
//! `f` holds one expression per component. `c0` is the initial value on the
//! terminal chain space and is required for regular chains only; `x0` is
//! classical initial data and is used only by the consistency check. `m`
//! optionally records the regularizing map the `c0` coordinates refer to.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::signal::{parse_signal, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub b: Vec<Vec<f64>>,
    pub f: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let p: ProblemFile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files always serialize");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let n = self.b.len();
        if n == 0 {
            return Err(ProblemError::Invalid(
                "b must be a non-empty square matrix".into(),
            ));
        }
        if let Some((i, r)) = self.b.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(ProblemError::Invalid(format!(
                "b must be square: row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        if self.f.len() != n {
            return Err(ProblemError::Invalid(format!(
                "f has {} components, b is {n}x{n}",
                self.f.len()
            )));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(ProblemError::Invalid(format!(
                    "x0 has {} entries, expected {n}",
                    x0.len()
                )));
            }
        }
        for (name, v) in [
            ("t_end", self.t_end),
            ("step", self.step),
            ("tol", self.tol),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ProblemError::Invalid(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Result<Matrix, ProblemError> {
        Matrix::from_rows(&self.b).map_err(|e| ProblemError::Invalid(format!("b: {e}")))
    }

    pub fn signal(&self) -> Result<Signal, ProblemError> {
        let components = self
            .f
            .iter()
            .enumerate()
            .map(|(i, text)| {
                parse_signal(text, 1)
                    .map(|s| s.components()[0].clone())
                    .map_err(|e| ProblemError::Invalid(format!("f[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Signal::new(components))
    }

    pub fn recorded_projector(&self) -> Result<Option<Matrix>, ProblemError> {
        self.m
            .as_ref()
            .map(|rows| {
                Matrix::from_rows(rows).map_err(|e| ProblemError::Invalid(format!("m: {e}")))
            })
            .transpose()
    }
}
