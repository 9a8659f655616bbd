//! Lumped pneumatic component laws.
//!
//! Sign conventions: vacuum arguments are mbar,rel (positive below
//! atmosphere). [`ejector_flow`] returns volumetric flow *out of* the
//! system, so suction is positive and blow-off negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::SignalValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("target beyond capability: p0 = {p0} is below pv = {pv}")]
    TargetBeyondCapability { p0: f64, pv: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DomainError::NonPositive { name, value })
    }
}

/// Vacuum ejector datasheet values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EjectorParams {
    /// Suction capacity at zero vacuum, m³/s.
    pub s_max: f64,
    /// Maximum achievable vacuum, mbar,rel.
    pub pv_max: f64,
    /// Blow-off inflow at maximum vacuum, m³/s.
    pub blow_flow: f64,
    /// Steady state during blow-off, mbar,rel (negative = overpressure).
    pub blow_overpressure: f64,
    pub has_check_valve: bool,
}

impl EjectorParams {
    pub const DEFAULT_BLOW_OVERPRESSURE: f64 = -12.0;

    pub fn validate(&self) -> Result<(), DomainError> {
        positive("s_max", self.s_max)?;
        if !(self.pv_max > 0.0 && self.pv_max <= 1013.0) {
            return Err(DomainError::OutOfRange {
                name: "pv_max",
                value: self.pv_max,
                range: "(0, 1013] mbar,rel",
            });
        }
        if !(self.blow_flow >= 0.0 && self.blow_flow.is_finite()) {
            return Err(DomainError::OutOfRange {
                name: "blow_flow",
                value: self.blow_flow,
                range: "[0, inf) m3/s",
            });
        }
        if !(self.blow_overpressure < self.pv_max && self.blow_overpressure > -1000.0) {
            return Err(DomainError::OutOfRange {
                name: "blow_overpressure",
                value: self.blow_overpressure,
                range: "(-1000, pv_max) mbar,rel",
            });
        }
        Ok(())
    }
}

/// Volumetric flow out of the system at vacuum `p_sys` (mbar,rel).
///
/// Blow-off wins over suction. With both signals off the check valve
/// blocks inflow, but overpressure still vents through the exhaust.
pub fn ejector_flow(
    params: &EjectorParams,
    p_sys: f64,
    suction: SignalValue,
    blow: SignalValue,
) -> f64 {
    if blow.is_active() {
        // Linear inflow law: zero at the blow-off steady state,
        // `blow_flow` at maximum vacuum.
        let span = params.pv_max - params.blow_overpressure;
        -params.blow_flow * (p_sys - params.blow_overpressure) / span
    } else if suction.is_active() {
        params.s_max * (1.0 - p_sys / params.pv_max).max(0.0)
    } else {
        let vent = -params.s_max * p_sys / params.pv_max;
        if params.has_check_valve {
            vent.max(0.0)
        } else {
            vent
        }
    }
}

/// Hose geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoseParams {
    /// m
    pub length: f64,
    /// m
    pub inner_diameter: f64,
    /// Number of lumped volume segments.
    pub segments: usize,
    /// Pa·s
    pub viscosity: f64,
}

impl HoseParams {
    pub const DEFAULT_SEGMENTS: usize = 8;
    /// Air at 20 °C.
    pub const AIR_VISCOSITY: f64 = 1.81e-5;

    pub fn volume(&self) -> f64 {
        let r = self.inner_diameter / 2.0;
        self.length * std::f64::consts::PI * r * r
    }

    pub fn resistance(&self) -> Result<f64, DomainError> {
        hose_resistance(self.inner_diameter, self.length, self.viscosity)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        positive("length", self.length)?;
        positive("inner_diameter", self.inner_diameter)?;
        positive("viscosity", self.viscosity)?;
        if self.segments == 0 {
            return Err(DomainError::NonPositive {
                name: "segments",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Hagen–Poiseuille resistance `128·μ·L / (π·d⁴)` in Pa·s/m³.
pub fn hose_resistance(d: f64, length: f64, mu: f64) -> Result<f64, DomainError> {
    positive("inner_diameter", d)?;
    positive("length", length)?;
    positive("viscosity", mu)?;
    Ok(128.0 * mu * length / (std::f64::consts::PI * d.powi(4)))
}

/// Vacuum switching thresholds in mbar,rel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub h5: f64,
}

impl Default for ThresholdConfig {
    /// Factory settings of the loading/unloading unit.
    fn default() -> Self {
        ThresholdConfig {
            h2: 550.0,
            h3: 500.0,
            h4: 600.0,
            h5: 750.0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, v) in [
            ("h2", self.h2),
            ("h3", self.h3),
            ("h4", self.h4),
            ("h5", self.h5),
        ] {
            if !(v > 0.0 && v < 1013.0) {
                return Err(DomainError::OutOfRange {
                    name,
                    value: v,
                    range: "(0, 1013) mbar,rel",
                });
            }
        }
        Ok(())
    }
}

/// Logic high level of the switching outputs, V.
pub const LOGIC_HIGH: f64 = 24.0;

/// Switching outputs at vacuum `p`: the H2 voltage and the PDI status
/// byte with bit 4 = H3, bit 5 = H4, bit 6 = H5.
pub fn threshold_outputs(p: f64, cfg: &ThresholdConfig) -> (f64, u8) {
    let h2 = if p >= cfg.h2 { LOGIC_HIGH } else { 0.0 };
    let mut byte = 0u8;
    if p >= cfg.h3 {
        byte |= 1 << 4;
    }
    if p >= cfg.h4 {
        byte |= 1 << 5;
    }
    if p >= cfg.h5 {
        byte |= 1 << 6;
    }
    (h2, byte)
}

/// Inputs of the closed-form evacuation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvacuationParams {
    /// System volume, m³.
    pub volume: f64,
    /// Maximum suction capacity, m³/s.
    pub suction_capacity: f64,
    /// First pressure argument (numerator of the log ratio).
    pub p0: f64,
    /// Second pressure argument (denominator).
    pub pv: f64,
}

impl EvacuationParams {
    pub fn time(&self) -> Result<f64, DomainError> {
        evacuation_time_mdt2(self.volume, self.suction_capacity, self.p0, self.pv)
    }
}

/// Closed-form evacuation time `t = V/S · ln(p0/pv)`.
///
/// Only the ratio of the pressure arguments matters, so any consistent
/// positive unit works. The result depends on the total volume alone, never
/// on how that volume is arranged.
pub fn evacuation_time_mdt2(volume: f64, capacity: f64, p0: f64, pv: f64) -> Result<f64, DomainError> {
    positive("volume", volume)?;
    positive("suction capacity", capacity)?;
    positive("p0", p0)?;
    positive("pv", pv)?;
    if p0 < pv {
        return Err(DomainError::TargetBeyondCapability { p0, pv });
    }
    Ok(volume / capacity * (p0 / pv).ln())
}
