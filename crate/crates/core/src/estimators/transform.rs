use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How an outcome is transformed before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    Identity,
    Log,
    Log1p,
    Arcsinh,
    /// 1[y > 0]
    Extensive,
    /// log y on the y > 0 subsample
    Intensive,
}

impl Transform {
    pub const OCCUPATION_SUITE: [Transform; 4] =
        [Transform::Extensive, Transform::Intensive, Transform::Log1p, Transform::Arcsinh];

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::Log1p => "log1p",
            Transform::Arcsinh => "arcsinh",
            Transform::Extensive => "extensive",
            Transform::Intensive => "intensive",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "level" | "none" => Transform::Identity,
            "log" => Transform::Log,
            "log1p" => Transform::Log1p,
            "arcsinh" | "asinh" => Transform::Arcsinh,
            "extensive" => Transform::Extensive,
            "intensive" => Transform::Intensive,
            other => return Err(Error::Config(format!("unknown transform `{other}`"))),
        })
    }
}

/// Transformed outcome plus the rows it keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub values: Vec<f64>,
    pub included: Vec<bool>,
}

pub fn transform_value(y: f64, kind: Transform) -> Result<Option<f64>> {
    if kind != Transform::Identity && !(y >= 0.0) {
        return Err(Error::InvalidInput(format!("{kind} transform needs nonnegative values, got {y}")));
    }
    Ok(match kind {
        Transform::Identity => Some(y),
        Transform::Log => {
            if y == 0.0 {
                return Err(Error::InvalidInput(
                    "log of zero; use intensive, log1p or arcsinh for outcomes with zeros".into(),
                ));
            }
            Some(y.ln())
        }
        Transform::Log1p => Some(y.ln_1p()),
        Transform::Arcsinh => Some((y + (y * y + 1.0).sqrt()).ln()),
        Transform::Extensive => Some(if y > 0.0 { 1.0 } else { 0.0 }),
        Transform::Intensive => (y > 0.0).then(|| y.ln()),
    })
}

/// Applies `kind` elementwise. Excluded rows (intensive zeros) hold NaN.
pub fn transform_outcome(values: &[f64], kind: Transform) -> Result<Transformed> {
    let mut out = Transformed {
        values: Vec::with_capacity(values.len()),
        included: Vec::with_capacity(values.len()),
    };
    for &y in values {
        let t = transform_value(y, kind)?;
        out.included.push(t.is_some());
        out.values.push(t.unwrap_or(f64::NAN));
    }
    Ok(out)
}
