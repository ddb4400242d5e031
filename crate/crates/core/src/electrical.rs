//! Junction electrics: barrier thickness to normal-state resistance,
//! Ambegaokar-Baratoff critical current, transmon energies, and the inverse
//! chain from a frequency target back to the required resistance.
//!
//! Conventions: Ic in nA, Rn in ohm, areas in um², energies as frequencies
//! (EJ/h in GHz, EC/h in MHz), temperatures in K. The critical current
//! density jc is the density through the *active* barrier area, i.e.
//! jc = Ic / (active_area_fraction * area).

use crate::barrier::BarrierModel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const ELEMENTARY_CHARGE_C: f64 = 1.602176634e-19;
pub const PLANCK_H_J_S: f64 = 6.62607015e-34;
pub const BOLTZMANN_K_J_PER_K: f64 = 1.380649e-23;
pub const FLUX_QUANTUM_WB: f64 = PLANCK_H_J_S / (2.0 * ELEMENTARY_CHARGE_C);

/// EJ/EC below this the charge dispersion is no longer negligible and the
/// two-level frequency formula loses accuracy.
pub const TRANSMON_REGIME_MIN_EJ_OVER_EC: f64 = 20.0;

#[derive(Debug, Error)]
pub enum ElectricalError {
    #[error("{parameter} must be positive, got {value}")]
    NonPositive { parameter: &'static str, value: f64 },
    #[error("temperature must be finite and >= 0, got {0} K")]
    InvalidTemperature(f64),
    #[error("frequency sensitivity undefined at EJ/EC = {0} (requires EJ/EC > 1/8)")]
    SensitivityUndefined(f64),
    #[error(transparent)]
    Barrier(#[from] crate::barrier::BarrierError),
}

/// Material constants for the Ic <-> Rn conversion. Only the gap is
/// configurable; the SI constants are fixed above.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Superconducting gap of the aluminum film, ueV.
    pub gap_delta_uev: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { gap_delta_uev: 180.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<(), ElectricalError> {
        if !(self.gap_delta_uev.is_finite() && self.gap_delta_uev > 0.0) {
            return Err(ElectricalError::NonPositive {
                parameter: "gap_delta_uev",
                value: self.gap_delta_uev,
            });
        }
        Ok(())
    }

    /// Ic*Rn product in volts: pi*Delta/(2e) * tanh(Delta / 2 k_B T).
    /// The gap in ueV cancels one factor of e, leaving pi*gap*1e-6/2 volts
    /// at T = 0.
    pub fn ic_rn_product_v(&self, temperature_k: f64) -> f64 {
        let v0 = PI * self.gap_delta_uev * 1e-6 / 2.0;
        if temperature_k <= 0.0 {
            v0
        } else {
            let gap_j = self.gap_delta_uev * 1e-6 * ELEMENTARY_CHARGE_C;
            v0 * (gap_j / (2.0 * BOLTZMANN_K_J_PER_K * temperature_k)).tanh()
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonParams {
    /// Charging energy EC/h, MHz.
    pub ec_over_h_mhz: f64,
    /// Josephson energy EJ/h, GHz.
    pub ej_over_h_ghz: f64,
}

impl TransmonParams {
    pub fn validate(&self) -> Result<(), ElectricalError> {
        if !(self.ec_over_h_mhz.is_finite() && self.ec_over_h_mhz > 0.0) {
            return Err(ElectricalError::NonPositive {
                parameter: "ec_over_h_mhz",
                value: self.ec_over_h_mhz,
            });
        }
        if !(self.ej_over_h_ghz.is_finite() && self.ej_over_h_ghz > 0.0) {
            return Err(ElectricalError::NonPositive {
                parameter: "ej_over_h_ghz",
                value: self.ej_over_h_ghz,
            });
        }
        Ok(())
    }

    pub fn ej_over_ec(&self) -> f64 {
        self.ej_over_h_ghz * 1e3 / self.ec_over_h_mhz
    }

    pub fn in_transmon_regime(&self) -> bool {
        self.ej_over_ec() >= TRANSMON_REGIME_MIN_EJ_OVER_EC
    }
}

/// Measured or derived electrics of one junction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JunctionElectrics {
    pub rn_ohm: f64,
    pub ic_na: f64,
    /// Current density through the active barrier area, A/um².
    pub jc_a_per_um2: f64,
    pub area_um2: f64,
}

/// Result of inverting a frequency target back to junction requirements.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JunctionTarget {
    pub ej_over_h_ghz: f64,
    pub ic_na: f64,
    pub rn_ohm: f64,
}

/// Critical current from the normal-state resistance, nA.
pub fn ic_from_rn(
    rn_ohm: f64,
    constants: &PhysicalConstants,
    temperature_k: f64,
) -> Result<f64, ElectricalError> {
    constants.validate()?;
    if !(rn_ohm.is_finite() && rn_ohm > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "rn_ohm",
            value: rn_ohm,
        });
    }
    if !(temperature_k.is_finite() && temperature_k >= 0.0) {
        return Err(ElectricalError::InvalidTemperature(temperature_k));
    }
    Ok(constants.ic_rn_product_v(temperature_k) / rn_ohm * 1e9)
}

/// EJ/h in GHz for a critical current in nA. EJ = Phi0*Ic/(2*pi), and with
/// Phi0 = h/(2e) this reduces to EJ/h = Ic / (4*pi*e).
pub fn ej_over_h_ghz_from_ic_na(ic_na: f64) -> Result<f64, ElectricalError> {
    if !(ic_na.is_finite() && ic_na > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "ic_na",
            value: ic_na,
        });
    }
    Ok(ic_na * 1e-9 / (4.0 * PI * ELEMENTARY_CHARGE_C) / 1e9)
}

/// Inverse of `ej_over_h_ghz_from_ic_na`.
pub fn ic_na_from_ej_over_h_ghz(ej_over_h_ghz: f64) -> Result<f64, ElectricalError> {
    if !(ej_over_h_ghz.is_finite() && ej_over_h_ghz > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "ej_over_h_ghz",
            value: ej_over_h_ghz,
        });
    }
    Ok(ej_over_h_ghz * 1e9 * 4.0 * PI * ELEMENTARY_CHARGE_C * 1e9)
}

/// Transmon qubit frequency f01 = sqrt(8*EJ*EC) - EC, GHz.
///
/// Callers should check `params.in_transmon_regime()` and surface a warning
/// below EJ/EC = 20; the formula itself stays defined.
pub fn transmon_f01(params: &TransmonParams) -> Result<f64, ElectricalError> {
    params.validate()?;
    let ec_ghz = params.ec_over_h_mhz * 1e-3;
    Ok((8.0 * params.ej_over_h_ghz * ec_ghz).sqrt() - ec_ghz)
}

/// Invert a frequency target: f01 -> EJ -> Ic -> Rn at T = 0.
pub fn target_rn_for_frequency(
    f01_ghz: f64,
    ec_over_h_mhz: f64,
    constants: &PhysicalConstants,
) -> Result<JunctionTarget, ElectricalError> {
    constants.validate()?;
    if !(f01_ghz.is_finite() && f01_ghz > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "f01_ghz",
            value: f01_ghz,
        });
    }
    if !(ec_over_h_mhz.is_finite() && ec_over_h_mhz > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "ec_over_h_mhz",
            value: ec_over_h_mhz,
        });
    }
    let ec_ghz = ec_over_h_mhz * 1e-3;
    let s = f01_ghz + ec_ghz;
    let ej_ghz = s * s / (8.0 * ec_ghz);
    let ic_na = ic_na_from_ej_over_h_ghz(ej_ghz)?;
    let rn_ohm = constants.ic_rn_product_v(0.0) / (ic_na * 1e-9);
    Ok(JunctionTarget {
        ej_over_h_ghz: ej_ghz,
        ic_na,
        rn_ohm,
    })
}

/// Normal-state resistance for a barrier of thickness `d_nm` over a junction
/// of geometric area `area_um2`.
///
/// Rn = rho0 * exp(d / lambda) / (active_area_fraction * area), with rho0
/// pinned so that at the model's anchor exposure the resistance reproduces
/// the calibrated jc law through the Ambegaokar-Baratoff relation. Away from
/// the anchor the exponential in d governs, which is what makes barrier
/// thickness dispersion the dominant resistance-spread mechanism.
pub fn rn_from_barrier(
    d_nm: f64,
    area_um2: f64,
    model: &BarrierModel,
    constants: &PhysicalConstants,
) -> Result<f64, ElectricalError> {
    model.validate()?;
    constants.validate()?;
    if !(d_nm.is_finite() && d_nm > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "d_nm",
            value: d_nm,
        });
    }
    if !(area_um2.is_finite() && area_um2 > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "area_um2",
            value: area_um2,
        });
    }
    let d_anchor = model.thickness_at_exposure_nm(model.anchor_exposure_mbar_s);
    let jc_anchor = model.jc_at_exposure(model.anchor_exposure_mbar_s);
    let rho0 = constants.ic_rn_product_v(0.0) / jc_anchor * (-d_anchor / model.lambda_nm).exp();
    Ok(rho0 * (d_nm / model.lambda_nm).exp() / (model.active_area_fraction * area_um2))
}

/// Full junction electrics from a measured resistance.
pub fn junction_electrics(
    rn_ohm: f64,
    area_um2: f64,
    active_area_fraction: f64,
    constants: &PhysicalConstants,
    temperature_k: f64,
) -> Result<JunctionElectrics, ElectricalError> {
    if !(area_um2.is_finite() && area_um2 > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "area_um2",
            value: area_um2,
        });
    }
    if !(active_area_fraction.is_finite() && active_area_fraction > 0.0) {
        return Err(ElectricalError::NonPositive {
            parameter: "active_area_fraction",
            value: active_area_fraction,
        });
    }
    let ic_na = ic_from_rn(rn_ohm, constants, temperature_k)?;
    Ok(JunctionElectrics {
        rn_ohm,
        ic_na,
        jc_a_per_um2: ic_na * 1e-9 / (active_area_fraction * area_um2),
        area_um2,
    })
}

/// Logarithmic sensitivity of f01 to EJ (equivalently to Ic, since EJ is
/// proportional to Ic): d(ln f01)/d(ln EJ) = u / (2u - 1) with
/// u = sqrt(2 * EJ/EC). Approaches 1/2 from above deep in the transmon
/// regime, so relative frequency spread is about half the relative critical
/// current spread.
pub fn frequency_sensitivity(ej_over_ec: f64) -> Result<f64, ElectricalError> {
    if !(ej_over_ec.is_finite() && ej_over_ec > 0.125) {
        return Err(ElectricalError::SensitivityUndefined(ej_over_ec));
    }
    let u = (2.0 * ej_over_ec).sqrt();
    Ok(u / (2.0 * u - 1.0))
}
