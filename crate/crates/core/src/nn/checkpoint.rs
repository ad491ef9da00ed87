//! Versioned text checkpoint.
//!
//! ```text
//! ncc-checkpoint 1
//! meta <key> <value>
//! tensor <name> <rank> <dim>... <value>...
//! ```
//!
//! Values are written with 17 significant digits, so parsing restores every
//! `f64` bit-for-bit and identical parameters produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

pub const MAGIC: &str = "ncc-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported checkpoint version {0}")]
    Version(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("missing meta key `{0}`")]
    MissingMeta(String),
    #[error("tensor `{name}` has shape {got:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Named tensors plus string metadata, both kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    meta: Vec<(String, String)>,
    tensors: Vec<(String, Tensor)>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Parse {
        line,
        msg: msg.into(),
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(
            !key.contains(char::is_whitespace),
            "meta key `{key}` contains whitespace"
        );
        assert!(
            !value.contains('\n'),
            "meta value for `{key}` contains a newline"
        );
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CheckpointError::MissingMeta(key.to_string()))
    }

    pub fn push(&mut self, name: &str, shape: &[usize], values: &[f64]) {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "tensor `{name}` shape/value mismatch"
        );
        self.tensors.push((
            name.to_string(),
            Tensor {
                shape: shape.to_vec(),
                values: values.to_vec(),
            },
        ));
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    /// Fetches a tensor and checks its shape.
    pub fn tensor_with_shape(
        &self,
        name: &str,
        shape: &[usize],
    ) -> Result<&Tensor, CheckpointError> {
        let t = self.tensor(name)?;
        if t.shape != shape {
            return Err(CheckpointError::Shape {
                name: name.into(),
                expected: shape.to_vec(),
                got: t.shape.clone(),
            });
        }
        Ok(t)
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        for (name, t) in &self.tensors {
            write!(out, "tensor {name} {}", t.shape.len()).unwrap();
            for d in &t.shape {
                write!(out, " {d}").unwrap();
            }
            for v in &t.values {
                write!(out, " {v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty checkpoint"))?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(parse_err(1, format!("expected `{MAGIC}` header")));
        }
        match head.next() {
            Some(v) if v == VERSION.to_string() => {}
            other => return Err(CheckpointError::Version(other.unwrap_or("").to_string())),
        }
        let mut ck = Checkpoint::new();
        let mut seen = BTreeMap::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("meta") => {
                    let key = parts
                        .next()
                        .ok_or_else(|| parse_err(lineno, "meta without key"))?;
                    let rest = line.splitn(3, ' ').nth(2).unwrap_or("");
                    ck.meta.push((key.to_string(), rest.to_string()));
                }
                Some("tensor") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| parse_err(lineno, "tensor without name"))?;
                    if seen.insert(name.to_string(), ()).is_some() {
                        return Err(parse_err(lineno, format!("duplicate tensor `{name}`")));
                    }
                    let rank: usize = parts
                        .next()
                        .and_then(|r| r.parse().ok())
                        .ok_or_else(|| parse_err(lineno, "bad tensor rank"))?;
                    let shape = (0..rank)
                        .map(|_| parts.next().and_then(|d| d.parse().ok()))
                        .collect::<Option<Vec<usize>>>()
                        .ok_or_else(|| parse_err(lineno, "bad tensor shape"))?;
                    let values = parts
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<Vec<f64>, _>>()
                        .map_err(|e| parse_err(lineno, format!("bad value: {e}")))?;
                    if values.len() != shape.iter().product::<usize>() {
                        return Err(parse_err(
                            lineno,
                            format!(
                                "tensor `{name}` declares {shape:?} but has {} values",
                                values.len()
                            ),
                        ));
                    }
                    ck.tensors
                        .push((name.to_string(), Tensor { shape, values }));
                }
                Some(other) => return Err(parse_err(lineno, format!("unknown record `{other}`"))),
                None => {}
            }
        }
        Ok(ck)
    }
}
