//! Problem files and result envelopes.
//!
//! A problem file is `{"version": "1", "kind": ..., "payload": {...}}`. Loaders
//! also accept a bare payload when the expected kind is known from context.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comb::BinaryRobustProblem;
use crate::eigen::EigenInstance;
use crate::maxcut::UncertainGraph;
use crate::pro::RobustSdpProblem;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("invalid JSON at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unsupported schema version {found:?} (expected {SCHEMA_VERSION:?})")]
    Version { found: String },
    #[error("expected a {expected} problem, found {found}")]
    WrongKind { expected: String, found: String },
}

impl IoError {
    /// JSON pointer of a schema error.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            IoError::Schema { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    RobustSdp,
    Eigen,
    Maxcut,
    Binary,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::RobustSdp => "robust_sdp",
            ProblemKind::Eigen => "eigen",
            ProblemKind::Maxcut => "maxcut",
            ProblemKind::Binary => "binary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    RobustSdp(RobustSdpProblem),
    Eigen(EigenInstance),
    Maxcut(UncertainGraph),
    Binary(BinaryRobustProblem),
}

impl Problem {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Problem::RobustSdp(_) => ProblemKind::RobustSdp,
            Problem::Eigen(_) => ProblemKind::Eigen,
            Problem::Maxcut(_) => ProblemKind::Maxcut,
            Problem::Binary(_) => ProblemKind::Binary,
        }
    }

    fn payload(&self) -> Value {
        let v = match self {
            Problem::RobustSdp(p) => serde_json::to_value(p),
            Problem::Eigen(p) => serde_json::to_value(p),
            Problem::Maxcut(p) => serde_json::to_value(p),
            Problem::Binary(p) => serde_json::to_value(p),
        };
        v.expect("problem types serialize to JSON")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub version: String,
    pub problem: Problem,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRaw {
    version: String,
    kind: ProblemKind,
    payload: Value,
}

/// `a.b[0]` style serde path as a JSON pointer under `prefix`.
fn pointer(prefix: &str, path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = prefix.to_string();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn from_value<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T, IoError> {
    serde_path_to_error::deserialize(v).map_err(|e| IoError::Schema {
        pointer: pointer(prefix, e.path()),
        message: e.inner().to_string(),
    })
}

fn parse_payload(kind: ProblemKind, v: Value, prefix: &str) -> Result<Problem, IoError> {
    Ok(match kind {
        ProblemKind::RobustSdp => Problem::RobustSdp(from_value(v, prefix)?),
        ProblemKind::Eigen => Problem::Eigen(from_value(v, prefix)?),
        ProblemKind::Maxcut => Problem::Maxcut(from_value(v, prefix)?),
        ProblemKind::Binary => Problem::Binary(from_value(v, prefix)?),
    })
}

impl ProblemFile {
    pub fn new(problem: Problem) -> Self {
        Self {
            version: SCHEMA_VERSION.to_string(),
            problem,
        }
    }

    pub fn parse_str(text: &str) -> Result<Self, IoError> {
        let v: Value = serde_json::from_str(text).map_err(|e| IoError::Schema {
            pointer: "/".into(),
            message: e.to_string(),
        })?;
        Self::from_json(v, None)
    }

    /// Parses an envelope, or a bare payload of kind `bare`.
    pub fn from_json(v: Value, bare: Option<ProblemKind>) -> Result<Self, IoError> {
        let is_envelope = v.get("payload").is_some() && v.get("kind").is_some();
        match (is_envelope, bare) {
            (false, Some(kind)) => Ok(Self::new(parse_payload(kind, v, "")?)),
            _ => {
                let raw: FileRaw = from_value(v, "")?;
                if raw.version != SCHEMA_VERSION {
                    return Err(IoError::Version { found: raw.version });
                }
                Ok(Self {
                    version: raw.version,
                    problem: parse_payload(raw.kind, raw.payload, "/payload")?,
                })
            }
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(FileRaw {
            version: self.version.clone(),
            kind: self.problem.kind(),
            payload: self.problem.payload(),
        })
        .expect("envelope serializes")
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("envelope serializes")
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a problem file; `bare` allows an unwrapped payload of that kind.
pub fn parse(path: &Path, bare: Option<ProblemKind>) -> Result<(ProblemFile, String), IoError> {
    let text = read_text(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| IoError::Schema {
        pointer: "/".into(),
        message: e.to_string(),
    })?;
    Ok((ProblemFile::from_json(v, bare)?, digest(text.as_bytes())))
}

/// Reads any JSON value type, e.g. a candidate matrix.
pub fn parse_value<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| IoError::Schema {
        pointer: pointer("", e.path()),
        message: e.inner().to_string(),
    })
}

/// Hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output record of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub instance_digest: Option<String>,
    pub command: String,
    pub parameters: Value,
    pub outputs: Value,
    pub wall_time_s: f64,
}
