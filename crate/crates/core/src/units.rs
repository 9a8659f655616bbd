//! Pressure units and signal values.
//!
//! Every public interface speaks vacuum in mbar relative to atmosphere
//! (positive = below atmospheric). The solver works in absolute pascal.

use serde::{Deserialize, Serialize};

use crate::pneumatics::DomainError;

/// Standard atmosphere in Pa.
pub const ATMOSPHERE_PA: f64 = 101_325.0;

/// Pa per mbar.
pub const PA_PER_MBAR: f64 = 100.0;

/// Absolute pressure in pascal.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Pressure(f64);

impl Pressure {
    pub fn from_pascal(pa: f64) -> Result<Self, DomainError> {
        if pa.is_finite() && pa > 0.0 {
            Ok(Pressure(pa))
        } else {
            Err(DomainError::NonPositive {
                name: "absolute pressure",
                value: pa,
            })
        }
    }

    /// From a relative vacuum reading ("750 mbar,rel" is `750.0`).
    pub fn from_vacuum_mbar(vacuum: f64) -> Result<Self, DomainError> {
        Self::from_pascal(vacuum_to_pascal(vacuum))
    }

    pub fn pascal(self) -> f64 {
        self.0
    }

    pub fn vacuum_mbar(self) -> f64 {
        pascal_to_vacuum(self.0)
    }
}

#[inline]
pub fn vacuum_to_pascal(vacuum_mbar: f64) -> f64 {
    ATMOSPHERE_PA - vacuum_mbar * PA_PER_MBAR
}

#[inline]
pub fn pascal_to_vacuum(pa: f64) -> f64 {
    (ATMOSPHERE_PA - pa) / PA_PER_MBAR
}

/// Whether a signal is compared with a tolerance or exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Continuous,
    Discrete,
}

/// A single sampled signal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SignalValue {
    Continuous(f64),
    /// Drawn from a finite alphabet: logic voltages, status bytes.
    Discrete(f64),
}

impl SignalValue {
    pub fn new(kind: SignalKind, value: f64) -> Self {
        match kind {
            SignalKind::Continuous => SignalValue::Continuous(value),
            SignalKind::Discrete => SignalValue::Discrete(value),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SignalValue::Continuous(v) | SignalValue::Discrete(v) => v,
        }
    }

    pub fn kind(self) -> SignalKind {
        match self {
            SignalValue::Continuous(_) => SignalKind::Continuous,
            SignalValue::Discrete(_) => SignalKind::Discrete,
        }
    }

    /// A logic input counts as asserted when it carries any positive level.
    pub fn is_active(self) -> bool {
        self.value() > 0.0
    }

    /// Discrete values compare exactly; continuous values within `tol`.
    pub fn matches(self, other: SignalValue, tol: f64) -> bool {
        match (self, other) {
            (SignalValue::Discrete(a), SignalValue::Discrete(b)) => a == b,
            (a, b) => (a.value() - b.value()).abs() <= tol,
        }
    }
}

/// Compare two raw values under a signal kind.
#[inline]
pub fn values_match(kind: SignalKind, a: f64, b: f64, tol: f64) -> bool {
    match kind {
        SignalKind::Discrete => a == b,
        SignalKind::Continuous => (a - b).abs() <= tol,
    }
}
