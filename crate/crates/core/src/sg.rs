//! Synchronous generator swing dynamics, droop governor, and COI aggregation.
//!
//! Powers passed in are on the system base; the swing equation divides them
//! by the machine rating, so `H` stays on the machine base.

use crate::linalg::{ComplexValue, Phasor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    /// Machine-base power per unit of speed deviation.
    pub droop_gain: f64,
    pub time_constant_s: f64,
    pub enabled: bool,
}

impl GovernorParams {
    pub fn disabled() -> Self {
        GovernorParams { droop_gain: 0.0, time_constant_s: 1.0, enabled: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgParams {
    pub inertia_h: f64,
    /// Rating on the system base.
    pub rated_power_s: f64,
    pub emf_magnitude: f64,
    pub governor: GovernorParams,
    pub initial_angle: f64,
    /// System base.
    pub initial_mech_power: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SgError {
    #[error("sg parameter {field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("COI aggregation needs at least one machine")]
    NoMembers,
}

impl SgParams {
    pub fn validate(&self) -> Result<(), SgError> {
        let check = |field, value: f64| if value > 0.0 { Ok(()) } else { Err(SgError::NonPositive { field, value }) };
        check("inertia_h", self.inertia_h)?;
        check("rated_power_s", self.rated_power_s)?;
        check("emf_magnitude", self.emf_magnitude)?;
        if self.governor.enabled {
            check("governor.time_constant_s", self.governor.time_constant_s)?;
        }
        Ok(())
    }

    /// S·H weight used by the COI definitions.
    pub fn weight(&self) -> f64 {
        self.inertia_h * self.rated_power_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwingState {
    pub angle: f64,
    pub speed: f64,
}

/// `(dδ/dt, dω/dt)` with `dδ/dt = ω0 (ω − 1)` and
/// `dω/dt = (Pm − Pe) / (2 H S)`.
pub fn swing_derivatives(state: SwingState, p_mech: f64, p_elec: f64, params: &SgParams, omega0: f64) -> (f64, f64) {
    let d_angle = omega0 * (state.speed - 1.0);
    let d_speed = (p_mech - p_elec) / (2.0 * params.inertia_h * params.rated_power_s);
    (d_angle, d_speed)
}

/// Derivative of the first-order governor state `x` (machine base):
/// `T dx/dt = −K Δω − x`. Disabled governors stay at zero.
pub fn governor_derivative(x: f64, speed_deviation: f64, gov: &GovernorParams) -> f64 {
    if !gov.enabled {
        return 0.0;
    }
    (-gov.droop_gain * speed_deviation - x) / gov.time_constant_s
}

/// Mechanical power increment on the system base for governor state `x`.
pub fn governor_power(x: f64, params: &SgParams) -> f64 {
    if params.governor.enabled {
        params.rated_power_s * x
    } else {
        0.0
    }
}

/// How member EMFs are averaged into the COI EMF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoiEmfAverage {
    /// Arithmetic mean of the complex phasors.
    #[default]
    ComplexMean,
    /// Mean magnitude with the S·H weighted mean angle.
    MagnitudeAngle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoiParams {
    pub coi_inertia_h: f64,
    pub total_rating: f64,
    pub coi_emf: Phasor,
    pub member_weights: Vec<f64>,
}

/// Combines member EMFs according to `mode`.
pub fn coi_emf(emfs: &[Phasor], weights: &[f64], mode: CoiEmfAverage) -> Phasor {
    let n = emfs.len() as f64;
    match mode {
        CoiEmfAverage::ComplexMean => {
            let sum: ComplexValue = emfs.iter().map(|e| e.to_complex()).sum();
            Phasor::from_complex(sum / n)
        }
        CoiEmfAverage::MagnitudeAngle => {
            let wsum: f64 = weights.iter().sum();
            let mag = emfs.iter().map(|e| e.magnitude).sum::<f64>() / n;
            let ang = emfs.iter().zip(weights).map(|(e, w)| w * e.angle).sum::<f64>() / wsum;
            Phasor::new(mag, ang)
        }
    }
}

/// COI parameters and speed: `ω = Σ S H ω / Σ S H`, `H = Σ S H / Σ S`.
pub fn aggregate_coi(
    members: &[(SgParams, SwingState)],
    mode: CoiEmfAverage,
) -> Result<(CoiParams, f64), SgError> {
    if members.is_empty() {
        return Err(SgError::NoMembers);
    }
    let weights: Vec<f64> = members.iter().map(|(p, _)| p.weight()).collect();
    let wsum: f64 = weights.iter().sum();
    let total_rating: f64 = members.iter().map(|(p, _)| p.rated_power_s).sum();
    let speed = members.iter().zip(&weights).map(|((_, s), w)| w * s.speed).sum::<f64>() / wsum;
    let emfs: Vec<Phasor> = members.iter().map(|(p, s)| Phasor::new(p.emf_magnitude, s.angle)).collect();
    let params = CoiParams {
        coi_inertia_h: wsum / total_rating,
        total_rating,
        coi_emf: coi_emf(&emfs, &weights, mode),
        member_weights: weights,
    };
    Ok((params, speed))
}
