//! Parameter values and the distributions they may be drawn from.

use std::fmt;

use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Normal { mean: f64, std_dev: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("normal() standard deviation must be non-negative, got {0}")]
    NegativeStd(f64),
    #[error("uniform() range is empty: [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<(), SampleError> {
        match *self {
            Distribution::Normal { std_dev, .. } if !(std_dev >= 0.0) => Err(SampleError::NegativeStd(std_dev)),
            Distribution::Uniform { lo, hi } if !(lo <= hi) => Err(SampleError::EmptyRange { lo, hi }),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }
}

/// Draws one value. A degenerate distribution returns its single value
/// exactly without consuming randomness.
pub fn sample(dist: &Distribution, rng: &mut RngStream) -> Result<f64, SampleError> {
    dist.validate()?;
    Ok(match *dist {
        Distribution::Normal { mean, std_dev } => rng.normal(mean, std_dev),
        Distribution::Uniform { lo, hi } => rng.uniform(lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    /// Seconds.
    Duration(f64),
    Bool(bool),
    Str(String),
    Dist(Distribution),
}

impl ParamValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ParamValue::Int(_) => "integer",
            ParamValue::Real(_) => "real",
            ParamValue::Duration(_) => "duration",
            ParamValue::Bool(_) => "bool",
            ParamValue::Str(_) => "string",
            ParamValue::Dist(_) => "distribution",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Duration(v) => write!(f, "{v}s"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
            ParamValue::Dist(Distribution::Normal { mean, std_dev }) => write!(f, "normal({mean}, {std_dev})"),
            ParamValue::Dist(Distribution::Uniform { lo, hi }) => write!(f, "uniform({lo}, {hi})"),
        }
    }
}

/// A number with an optional time unit; `Some(true)` when a unit was given.
fn parse_quantity(text: &str) -> Option<(f64, bool)> {
    let t = text.trim();
    let (num, scale, unit) = if let Some(n) = t.strip_suffix("ms") {
        (n, 1e-3, true)
    } else if let Some(n) = t.strip_suffix('s') {
        (n, 1.0, true)
    } else {
        (t, 1.0, false)
    };
    let v: f64 = num.trim().parse().ok()?;
    v.is_finite().then_some((v * scale, unit))
}

fn parse_call(text: &str) -> Option<Result<(&str, Vec<f64>), String>> {
    let open = text.find('(')?;
    let name = text[..open].trim();
    if !name.chars().all(|c| c.is_ascii_alphabetic()) || name.is_empty() {
        return None;
    }
    let Some(inner) = text[open + 1..].strip_suffix(')') else {
        return Some(Err(format!("unterminated call `{text}`")));
    };
    let mut args = Vec::new();
    for a in inner.split(',') {
        match parse_quantity(a) {
            Some((v, _)) => args.push(v),
            None => return Some(Err(format!("bad argument `{}` in `{text}`", a.trim()))),
        }
    }
    Some(Ok((name, args)))
}

/// Parses the right-hand side of an assignment.
pub fn parse_value(text: &str) -> Result<ParamValue, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("missing value".into());
    }
    if let Some(rest) = t.strip_prefix('"') {
        return match rest.strip_suffix('"') {
            Some(s) if !s.contains('"') => Ok(ParamValue::Str(s.to_string())),
            _ => Err(format!("malformed quoted string {t}")),
        };
    }
    match t {
        "true" => return Ok(ParamValue::Bool(true)),
        "false" => return Ok(ParamValue::Bool(false)),
        _ => {}
    }
    if let Some(call) = parse_call(t) {
        let (name, args) = call?;
        let dist = match (name, args.as_slice()) {
            ("normal", [mean, std_dev]) => Distribution::Normal { mean: *mean, std_dev: *std_dev },
            ("uniform", [lo, hi]) => Distribution::Uniform { lo: *lo, hi: *hi },
            ("normal" | "uniform", _) => return Err(format!("{name}() takes two arguments")),
            _ => return Err(format!("unknown function `{name}`")),
        };
        return Ok(ParamValue::Dist(dist));
    }
    if let Ok(i) = t.parse::<i64>() {
        return Ok(ParamValue::Int(i));
    }
    if let Some((v, unit)) = parse_quantity(t) {
        return Ok(if unit { ParamValue::Duration(v) } else { ParamValue::Real(v) });
    }
    if t.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '.') {
        return Err(format!("malformed number `{t}`"));
    }
    Ok(ParamValue::Str(t.to_string()))
}
