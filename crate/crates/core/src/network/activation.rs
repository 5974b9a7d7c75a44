//! Squashing functions for activation nodes.
//!
//! Beliefs fed back through recurrent edges must stay bounded, otherwise cubic
//! monomials of the previous belief blow up within a few turns. Three options
//! are provided: logistic, clip and softclip (identity in the middle, shifted
//! sigmoids in the tails).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.01;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Identity on `(epsilon, 1 - epsilon)`, sigmoid tails outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Softclip {
    epsilon: f64,
    offset: f64,
}

/// Which piece of a piecewise activation an input falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Lower,
    Middle,
    Upper,
}

impl Softclip {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "softclip epsilon must lie in (0, 0.5), got {epsilon}"
            )));
        }
        // sigmoid(epsilon - 0.5 + offset) == epsilon
        let offset = 0.5 - epsilon - (1.0 / epsilon - 1.0).ln();
        Ok(Softclip { epsilon, offset })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The sigmoid shift that makes both tails meet the identity piece.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn branch(&self, x: f64) -> Branch {
        if x <= self.epsilon {
            Branch::Lower
        } else if x >= 1.0 - self.epsilon {
            Branch::Upper
        } else {
            Branch::Middle
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self.branch(x) {
            Branch::Lower => sigmoid(x - 0.5 + self.offset),
            Branch::Middle => x,
            Branch::Upper => sigmoid(x - 0.5 - self.offset),
        }
    }

    /// Derivative with the one-sided sigmoid slope at the two kinks.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.branch(x) {
            Branch::Lower => sigmoid_derivative(x - 0.5 + self.offset),
            Branch::Middle => 1.0,
            Branch::Upper => sigmoid_derivative(x - 0.5 - self.offset),
        }
    }
}

impl Default for Softclip {
    fn default() -> Self {
        Softclip::new(DEFAULT_EPSILON).expect("default epsilon is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum ActivationSpec {
    /// Activation nodes pass their input through unchanged.
    #[default]
    None,
    Clip,
    Logistic {
        l: f64,
        eta: f64,
        x0: f64,
    },
    Softclip(Softclip),
}

impl ActivationSpec {
    pub fn softclip(epsilon: f64) -> Result<Self> {
        Softclip::new(epsilon).map(ActivationSpec::Softclip)
    }

    pub fn logistic(l: f64, eta: f64, x0: f64) -> Result<Self> {
        if !(l.is_finite() && eta.is_finite() && x0.is_finite()) || l <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "logistic parameters must be finite with L > 0 (L={l}, eta={eta}, x0={x0})"
            )));
        }
        Ok(ActivationSpec::Logistic { l, eta, x0 })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ActivationSpec::None)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationSpec::None => "none",
            ActivationSpec::Clip => "clip",
            ActivationSpec::Logistic { .. } => "logistic",
            ActivationSpec::Softclip(_) => "softclip",
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::None => x,
            ActivationSpec::Clip => x.clamp(0.0, 1.0),
            ActivationSpec::Logistic { l, eta, x0 } => l / (1.0 + (-eta * (x - x0)).exp()),
            ActivationSpec::Softclip(s) => s.apply(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::None => 1.0,
            ActivationSpec::Clip => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationSpec::Logistic { l, eta, x0 } => {
                let f = l / (1.0 + (-eta * (x - x0)).exp());
                eta * f * (1.0 - f / l)
            }
            ActivationSpec::Softclip(s) => s.derivative(x),
        }
    }

    /// Piece of the function `x` falls on; smooth functions have a single piece.
    pub fn branch(&self, x: f64) -> Branch {
        match self {
            ActivationSpec::Softclip(s) => s.branch(x),
            ActivationSpec::Clip => {
                if x < 0.0 {
                    Branch::Lower
                } else if x > 1.0 {
                    Branch::Upper
                } else {
                    Branch::Middle
                }
            }
            _ => Branch::Middle,
        }
    }
}

/// File representation: `{"variant": "softclip", "epsilon": 0.01}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct ActivationRecord {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
}

impl From<&ActivationSpec> for ActivationRecord {
    fn from(spec: &ActivationSpec) -> Self {
        let mut rec = ActivationRecord {
            variant: spec.name().to_string(),
            epsilon: None,
            l: None,
            eta: None,
            x0: None,
        };
        match *spec {
            ActivationSpec::Softclip(s) => rec.epsilon = Some(s.epsilon()),
            ActivationSpec::Logistic { l, eta, x0 } => {
                rec.l = Some(l);
                rec.eta = Some(eta);
                rec.x0 = Some(x0);
            }
            _ => {}
        }
        rec
    }
}

impl TryFrom<ActivationRecord> for ActivationSpec {
    type Error = Error;

    fn try_from(rec: ActivationRecord) -> Result<Self> {
        match rec.variant.as_str() {
            "none" => Ok(ActivationSpec::None),
            "clip" => Ok(ActivationSpec::Clip),
            "softclip" => ActivationSpec::softclip(rec.epsilon.unwrap_or(DEFAULT_EPSILON)),
            "logistic" => {
                let eta = rec.eta.ok_or_else(|| {
                    Error::InvalidConfig("logistic activation requires eta".into())
                })?;
                ActivationSpec::logistic(rec.l.unwrap_or(1.0), eta, rec.x0.unwrap_or(0.5))
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown activation variant {other:?}"
            ))),
        }
    }
}
