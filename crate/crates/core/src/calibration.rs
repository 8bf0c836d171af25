//! Interaction strength from measured pair rates.
//!
//! In the weak-coupling regime the detected pair rate per mW of pump is
//! `flux·T1·T2·sin²(κ√P) ≈ flux·T1·T2·κ²P`, so `κ = √(rate/(flux·T1·T2))` in
//! units of θ per √mW.

use serde::{Deserialize, Serialize};

use crate::error::{CpcError, Result};

/// Above this per-pulse θ the small-angle rate equation no longer holds.
pub const SMALL_ANGLE_LIMIT: f64 = 0.1;

/// How the arm figures are read, echoed in every report.
pub const TRANSMISSION_NOTE: &str =
    "arm_transmissions are end-to-end detection transmissions of each arm, not loss fractions";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Detected pairs per second per mW of pump.
    pub pair_rate: f64,
    /// Photons per second in the input mode.
    pub input_flux: f64,
    pub arm_transmissions: (f64, f64),
    /// Pump power in mW.
    pub pump_power: f64,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        let (t1, t2) = self.arm_transmissions;
        for (name, v) in [
            ("pair_rate", self.pair_rate),
            ("input_flux", self.input_flux),
            ("T1", t1),
            ("T2", t2),
            ("pump_power", self.pump_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CpcError::invalid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if t1 > 1.0 || t2 > 1.0 {
            return Err(CpcError::invalid("arm transmissions cannot exceed 1"));
        }
        Ok(())
    }
}

/// κ in θ per √mW.
pub fn estimate_kappa(params: &ExperimentParams) -> Result<f64> {
    params.validate()?;
    let (t1, t2) = params.arm_transmissions;
    Ok((params.pair_rate / (params.input_flux * t1 * t2)).sqrt())
}

pub fn theta_at_power(kappa: f64, power_mw: f64) -> Result<f64> {
    check_non_negative("kappa", kappa)?;
    check_non_negative("power", power_mw)?;
    Ok(kappa * power_mw.sqrt())
}

/// Pump power in mW needed to reach `theta`.
pub fn power_for_theta(kappa: f64, theta: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(CpcError::invalid(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    check_non_negative("theta", theta)?;
    Ok((theta / kappa).powi(2))
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CpcError::invalid(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRequirement {
    pub theta: f64,
    pub power_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub params: ExperimentParams,
    pub kappa: f64,
    /// θ at `params.pump_power`.
    pub theta: f64,
    /// Powers for θ = π/2 and θ = π.
    pub requirements: Vec<PowerRequirement>,
    pub interpretation: String,
    pub warnings: Vec<String>,
}

pub fn calibrate(params: &ExperimentParams) -> Result<CalibrationReport> {
    let kappa = estimate_kappa(params)?;
    let theta = theta_at_power(kappa, params.pump_power)?;
    let requirements = [std::f64::consts::FRAC_PI_2, std::f64::consts::PI]
        .into_iter()
        .map(|t| {
            Ok(PowerRequirement {
                theta: t,
                power_mw: power_for_theta(kappa, t)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    if theta > SMALL_ANGLE_LIMIT {
        warnings.push(format!(
            "theta = {theta:.4} rad exceeds {SMALL_ANGLE_LIMIT} rad; the linearized rate equation is unreliable"
        ));
    }
    Ok(CalibrationReport {
        params: *params,
        kappa,
        theta,
        requirements,
        interpretation: TRANSMISSION_NOTE.to_string(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured() -> ExperimentParams {
        ExperimentParams {
            pair_rate: 1.45,
            input_flux: 2e5 * 76e6,
            arm_transmissions: (0.026, 0.146),
            pump_power: 1000.0,
        }
    }

    #[test]
    fn measured_kappa() {
        let k = estimate_kappa(&measured()).unwrap();
        assert!((k - 5.0e-6).abs() < 0.1e-6, "{k}");
        let theta = theta_at_power(k, 1000.0).unwrap();
        assert!((1e-4..2e-4).contains(&theta));
    }

    #[test]
    fn lossless_kappa() {
        let p = ExperimentParams {
            arm_transmissions: (1.0, 1.0),
            ..measured()
        };
        let k = estimate_kappa(&p).unwrap();
        assert!((k - 3.0886e-7).abs() < 1e-10);
    }

    #[test]
    fn zero_theta_needs_no_power() {
        assert_eq!(power_for_theta(5e-6, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_params() {
        let mut p = measured();
        p.pair_rate = 0.0;
        assert!(estimate_kappa(&p).is_err());
        let mut p = measured();
        p.arm_transmissions.1 = 1.5;
        assert!(estimate_kappa(&p).is_err());
        assert!(power_for_theta(0.0, 1.0).is_err());
    }

    #[test]
    fn strong_coupling_warns() {
        let quiet = calibrate(&measured()).unwrap();
        assert!(quiet.warnings.is_empty());
        let p = ExperimentParams {
            pair_rate: 1.45e6,
            ..measured()
        };
        let loud = calibrate(&p).unwrap();
        assert_eq!(loud.warnings.len(), 1);
        assert_eq!(loud.requirements.len(), 2);
    }
}
