//! Resource-cost generators `b: ℕ → ℝ_{>0}`.
//!
//! Every basis is positive and non-decreasing on `x ≥ 1`, and its associated
//! cost `c(x) = x·b(x)` is convex (semi-convexity). The value at zero is
//! fixed to `b(0) = 0` so that `c(0) = 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub degree: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "BasisSpec")]
pub enum BasisFunction {
    /// `b(x) = x^degree`, real `degree ≥ 0`.
    Monomial { degree: f64 },
    /// `b(x) = Σ coeff·x^degree`.
    Polynomial { terms: Vec<PolyTerm> },
    /// `b(x) = base^x`, `base ≥ 1`.
    Exponential { base: f64 },
    /// `values[x-1] = b(x)` for `x = 1..=values.len()`; beyond the table `b`
    /// continues affinely with the last first-difference.
    Table { values: Vec<f64> },
}

// Deserialization goes through this mirror so that every parsed basis is validated.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum BasisSpec {
    Monomial { degree: f64 },
    Polynomial { terms: Vec<PolyTerm> },
    Exponential { base: f64 },
    Table { values: Vec<f64> },
}

impl TryFrom<BasisSpec> for BasisFunction {
    type Error = Error;

    fn try_from(spec: BasisSpec) -> Result<Self> {
        let b = match spec {
            BasisSpec::Monomial { degree } => BasisFunction::Monomial { degree },
            BasisSpec::Polynomial { terms } => BasisFunction::Polynomial { terms },
            BasisSpec::Exponential { base } => BasisFunction::Exponential { base },
            BasisSpec::Table { values } => BasisFunction::Table { values },
        };
        b.validate()?;
        Ok(b)
    }
}

impl BasisFunction {
    pub fn monomial(degree: f64) -> Result<Self> {
        let b = BasisFunction::Monomial { degree };
        b.validate()?;
        Ok(b)
    }

    pub fn polynomial(terms: Vec<PolyTerm>) -> Result<Self> {
        let b = BasisFunction::Polynomial { terms };
        b.validate()?;
        Ok(b)
    }

    pub fn exponential(base: f64) -> Result<Self> {
        let b = BasisFunction::Exponential { base };
        b.validate()?;
        Ok(b)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        let b = BasisFunction::Table { values };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BasisFunction::Monomial { degree } => {
                if !degree.is_finite() || *degree < 0.0 {
                    return Err(Error::InvalidBasis(format!(
                        "monomial degree must be finite and >= 0, got {degree}"
                    )));
                }
            }
            BasisFunction::Polynomial { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidBasis("polynomial has no terms".into()));
                }
                for t in terms {
                    if !t.coeff.is_finite() || t.coeff < 0.0 {
                        return Err(Error::InvalidBasis(format!(
                            "polynomial coefficient must be finite and >= 0, got {}",
                            t.coeff
                        )));
                    }
                    if !t.degree.is_finite() || t.degree < 0.0 {
                        return Err(Error::InvalidBasis(format!(
                            "polynomial degree must be finite and >= 0, got {}",
                            t.degree
                        )));
                    }
                }
                if terms.iter().all(|t| t.coeff == 0.0) {
                    return Err(Error::InvalidBasis("polynomial is identically zero".into()));
                }
            }
            BasisFunction::Exponential { base } => {
                if !base.is_finite() || *base < 1.0 {
                    return Err(Error::InvalidBasis(format!(
                        "exponential base must be finite and >= 1, got {base}"
                    )));
                }
            }
            BasisFunction::Table { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidBasis("table has no values".into()));
                }
                for (idx, &val) in values.iter().enumerate() {
                    if !val.is_finite() || val <= 0.0 {
                        return Err(Error::InvalidBasis(format!(
                            "table value b({}) must be finite and > 0, got {val}",
                            idx + 1
                        )));
                    }
                }
                for x in 1..values.len() {
                    if values[x] < values[x - 1] {
                        return Err(Error::InvalidBasis(format!(
                            "table is decreasing: b({}) = {} < b({}) = {}",
                            x + 1,
                            values[x],
                            x,
                            values[x - 1]
                        )));
                    }
                }
                // c(x) = x·b(x) with c(0) = 0 must have non-decreasing first differences.
                let cost = |x: usize| {
                    if x == 0 {
                        0.0
                    } else {
                        x as f64 * values[x - 1]
                    }
                };
                for x in 1..values.len() {
                    let left = cost(x) - cost(x - 1);
                    let right = cost(x + 1) - cost(x);
                    if right < left {
                        return Err(Error::InvalidBasis(format!(
                            "x·b(x) is not convex at x = {x}: {right} < {left}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `b(x)` on the integers, with `b(0) = 0`.
    pub fn value(&self, x: usize) -> f64 {
        if x == 0 {
            return 0.0;
        }
        match self {
            BasisFunction::Table { values } => {
                let len = values.len();
                if x <= len {
                    values[x - 1]
                } else {
                    let last = values[len - 1];
                    let slope = if len >= 2 {
                        last - values[len - 2]
                    } else {
                        0.0
                    };
                    last + slope * (x - len) as f64
                }
            }
            _ => self.eval_positive(x as f64),
        }
    }

    /// `c(x) = x·b(x)`.
    pub fn cost(&self, x: usize) -> f64 {
        x as f64 * self.value(x)
    }

    /// `b(x)` at a positive real argument; tables have no canonical real extension.
    pub fn value_real(&self, x: f64) -> Result<f64> {
        match self {
            BasisFunction::Table { .. } => Err(Error::UnsupportedBasis(
                "table bases cannot be evaluated at non-integer arguments".into(),
            )),
            _ if x <= 0.0 => Ok(0.0),
            _ => Ok(self.eval_positive(x)),
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self, BasisFunction::Table { .. })
    }

    fn eval_positive(&self, x: f64) -> f64 {
        match self {
            BasisFunction::Monomial { degree } => x.powf(*degree),
            BasisFunction::Polynomial { terms } => {
                terms.iter().map(|t| t.coeff * x.powf(t.degree)).sum()
            }
            BasisFunction::Exponential { base } => base.powf(x),
            BasisFunction::Table { .. } => unreachable!("tables are evaluated on integers"),
        }
    }
}

impl fmt::Display for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFunction::Monomial { degree } => write!(f, "x^{degree}"),
            BasisFunction::Polynomial { terms } => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{}*x^{}", t.coeff, t.degree))
                    .collect();
                write!(f, "{}", parts.join(" + "))
            }
            BasisFunction::Exponential { base } => write!(f, "{base}^x"),
            BasisFunction::Table { values } => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "table[{}]", parts.join(","))
            }
        }
    }
}
