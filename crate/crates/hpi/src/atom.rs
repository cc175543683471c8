//! Scalar hyperparameter values.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A single hyperparameter value: integer, real, categorical or boolean.
///
/// Serializes as a bare JSON scalar. On input, JSON numbers without a
/// fractional part become [`Atom::Int`], everything else numeric becomes
/// [`Atom::Real`], so `1` and `1.0` stay distinct. Discrete domains compare
/// atoms structurally (`Int(1) != Real(1.0)`); continuous domains compare
/// numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Atom {
    Bool(bool),
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Atom {
    /// Numeric view; `None` for categorical and boolean atoms.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Atom::Int(i) => Some(*i as f64),
            Atom::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Atom::Bool(_) => "bool",
            Atom::Int(_) => "int",
            Atom::Real(_) => "real",
            Atom::Cat(_) => "categorical",
        }
    }

    /// Appends a tagged byte encoding that distinguishes every atom that
    /// compares unequal. Backs stable configuration keys.
    pub(crate) fn write_canonical(&self, buf: &mut Vec<u8>) {
        match self {
            Atom::Bool(b) => {
                buf.push(0);
                buf.push(*b as u8);
            }
            Atom::Int(i) => {
                buf.push(1);
                buf.extend_from_slice(&i.to_le_bytes());
            }
            Atom::Real(x) => {
                buf.push(2);
                buf.extend_from_slice(&x.to_bits().to_le_bytes());
            }
            Atom::Cat(s) => {
                buf.push(3);
                buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
                buf.extend_from_slice(s.as_bytes());
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Bool(b) => write!(f, "{b}"),
            Atom::Int(i) => write!(f, "{i}"),
            Atom::Real(x) => write!(f, "{x}"),
            Atom::Cat(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for Atom {
    fn from(v: i64) -> Self {
        Atom::Int(v)
    }
}

impl From<f64> for Atom {
    fn from(v: f64) -> Self {
        Atom::Real(v)
    }
}

impl From<bool> for Atom {
    fn from(v: bool) -> Self {
        Atom::Bool(v)
    }
}

impl From<&str> for Atom {
    fn from(v: &str) -> Self {
        Atom::Cat(v.to_owned())
    }
}

impl From<String> for Atom {
    fn from(v: String) -> Self {
        Atom::Cat(v)
    }
}
