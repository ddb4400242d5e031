//! Tunnel barrier formation from oxidation exposure.
//!
//! Barrier thickness follows a logarithmic growth law in the exposure
//! E = P * t, and critical current density follows a calibrated power law
//! in the same exposure, so both depend on pressure and time only through
//! their product. Barrier thickness dispersion is driven by the roughness
//! of the bottom electrode (grain grooving thins the oxide over ridges)
//! and, for static oxidation, by chamber leaks that perturb the pressure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("invalid {parameter}: {value} ({constraint})")]
    InvalidParameter {
        parameter: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("oxidation exposure must be positive, got {exposure} mbar*s")]
    NonPositiveExposure { exposure: f64 },
    #[error("calibration needs at least two points with distinct exposures, got {points}")]
    TooFewCalibrationPoints { points: usize },
    #[error("calibration point {index}: {reason}")]
    BadCalibrationPoint { index: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OxidationMethod {
    /// Chamber sealed at the target pressure; leaks add pressure spread.
    Static,
    /// Continuous flow holds the pressure; leak term vanishes.
    Dynamic,
}

impl std::fmt::Display for OxidationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OxidationMethod::Static => write!(f, "static"),
            OxidationMethod::Dynamic => write!(f, "dynamic"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OxidationSpec {
    pub pressure_mbar: f64,
    pub time_s: f64,
    pub method: OxidationMethod,
}

impl Default for OxidationSpec {
    fn default() -> Self {
        Self {
            pressure_mbar: 0.05,
            time_s: 600.0,
            method: OxidationMethod::Dynamic,
        }
    }
}

impl OxidationSpec {
    pub fn exposure_mbar_s(&self) -> f64 {
        self.pressure_mbar * self.time_s
    }

    pub fn validate(&self) -> Result<(), BarrierError> {
        if !(self.pressure_mbar.is_finite()
            && (1e-4..=100.0).contains(&self.pressure_mbar))
        {
            return Err(BarrierError::InvalidParameter {
                parameter: "pressure_mbar",
                value: self.pressure_mbar,
                constraint: "must lie in [1e-4, 100]",
            });
        }
        if !(self.time_s.is_finite() && self.time_s > 0.0) {
            return Err(BarrierError::InvalidParameter {
                parameter: "time_s",
                value: self.time_s,
                constraint: "must be finite and > 0",
            });
        }
        Ok(())
    }
}

/// Phenomenological barrier model.
///
/// `jc_prefactor_a_per_um2` and `jc_exponent` come from `calibrate_oxidation`
/// against measured jc-vs-exposure data. `anchor_exposure_mbar_s` is the
/// exposure at which the resistance law is pinned to the jc law (see
/// `electrical::rn_from_barrier`). `groove_coupling` and `leak_coeff_mbar`
/// are dispersion couplings; their defaults are placeholders until
/// calibrated against measured spreads.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierModel {
    /// Native oxide thickness at zero exposure, nm.
    pub d0_nm: f64,
    /// Logarithmic growth amplitude, nm per e-fold of (1 + E/E0).
    pub c_nm: f64,
    /// Exposure scale E0, mbar*s.
    pub e0_mbar_s: f64,
    /// Tunneling attenuation length, nm.
    pub lambda_nm: f64,
    /// jc at the exposure scale E0, A/um².
    pub jc_prefactor_a_per_um2: f64,
    /// Power-law exponent b in jc = prefactor * (E/E0)^-b.
    pub jc_exponent: f64,
    /// Static-oxidation pressure spread from chamber leaks, mbar.
    pub leak_coeff_mbar: f64,
    /// Fraction of the nominal overlap that actually carries current.
    pub active_area_fraction: f64,
    /// Coupling from bottom-electrode RMS roughness to barrier thickness
    /// spread: sigma_d = groove_coupling * rms.
    pub groove_coupling: f64,
    /// Exposure at which Rn(d) is anchored to the jc law, mbar*s.
    pub anchor_exposure_mbar_s: f64,
}

impl Default for BarrierModel {
    fn default() -> Self {
        Self {
            d0_nm: 0.5,
            c_nm: 0.25,
            e0_mbar_s: 0.1,
            lambda_nm: 0.069,
            jc_prefactor_a_per_um2: 1.2e-4,
            jc_exponent: 0.5,
            leak_coeff_mbar: 0.002,
            active_area_fraction: 0.10,
            groove_coupling: 0.10,
            anchor_exposure_mbar_s: 30.0,
        }
    }
}

impl BarrierModel {
    pub fn validate(&self) -> Result<(), BarrierError> {
        let positive = [
            ("d0_nm", self.d0_nm),
            ("c_nm", self.c_nm),
            ("e0_mbar_s", self.e0_mbar_s),
            ("lambda_nm", self.lambda_nm),
            ("jc_prefactor_a_per_um2", self.jc_prefactor_a_per_um2),
            ("anchor_exposure_mbar_s", self.anchor_exposure_mbar_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(BarrierError::InvalidParameter {
                    parameter: name,
                    value: v,
                    constraint: "must be finite and > 0",
                });
            }
        }
        let nonneg = [
            ("jc_exponent", self.jc_exponent),
            ("leak_coeff_mbar", self.leak_coeff_mbar),
            ("groove_coupling", self.groove_coupling),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(BarrierError::InvalidParameter {
                    parameter: name,
                    value: v,
                    constraint: "must be finite and >= 0",
                });
            }
        }
        if !(self.active_area_fraction.is_finite()
            && self.active_area_fraction > 0.0
            && self.active_area_fraction <= 1.0)
        {
            return Err(BarrierError::InvalidParameter {
                parameter: "active_area_fraction",
                value: self.active_area_fraction,
                constraint: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    /// d(E) = d0 + c * ln(1 + E/E0); used internally and by `electrical`.
    pub fn thickness_at_exposure_nm(&self, exposure_mbar_s: f64) -> f64 {
        self.d0_nm + self.c_nm * (1.0 + exposure_mbar_s / self.e0_mbar_s).ln()
    }

    /// jc(E) = prefactor * (E/E0)^-b, A/um².
    pub fn jc_at_exposure(&self, exposure_mbar_s: f64) -> f64 {
        self.jc_prefactor_a_per_um2
            * (exposure_mbar_s / self.e0_mbar_s).powf(-self.jc_exponent)
    }
}

/// Mean barrier thickness for an oxidation step, nm.
pub fn barrier_thickness(spec: &OxidationSpec, model: &BarrierModel) -> Result<f64, BarrierError> {
    spec.validate()?;
    model.validate()?;
    Ok(model.thickness_at_exposure_nm(spec.exposure_mbar_s()))
}

/// Critical current density for an oxidation step, A/um² (through the
/// active barrier area).
pub fn critical_current_density(
    spec: &OxidationSpec,
    model: &BarrierModel,
) -> Result<f64, BarrierError> {
    spec.validate()?;
    model.validate()?;
    let e = spec.exposure_mbar_s();
    if e <= 0.0 {
        return Err(BarrierError::NonPositiveExposure { exposure: e });
    }
    Ok(model.jc_at_exposure(e))
}

/// Result of fitting the jc power law to measured (exposure, jc) points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OxidationFit {
    pub jc_prefactor_a_per_um2: f64,
    pub jc_exponent: f64,
    /// RMS residual of ln(jc) about the fit.
    pub rms_log_residual: f64,
    /// Largest relative jc residual over the input points.
    pub max_rel_residual: f64,
}

/// Least-squares fit of ln(jc) = ln(prefactor) - b * ln(E/E0).
pub fn calibrate_oxidation(
    points: &[(f64, f64)],
    e0_mbar_s: f64,
) -> Result<OxidationFit, BarrierError> {
    if !(e0_mbar_s.is_finite() && e0_mbar_s > 0.0) {
        return Err(BarrierError::InvalidParameter {
            parameter: "e0_mbar_s",
            value: e0_mbar_s,
            constraint: "must be finite and > 0",
        });
    }
    if points.len() < 2 {
        return Err(BarrierError::TooFewCalibrationPoints {
            points: points.len(),
        });
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (i, &(e, jc)) in points.iter().enumerate() {
        if !(e.is_finite() && e > 0.0) {
            return Err(BarrierError::BadCalibrationPoint {
                index: i,
                reason: "exposure must be finite and > 0",
            });
        }
        if !(jc.is_finite() && jc > 0.0) {
            return Err(BarrierError::BadCalibrationPoint {
                index: i,
                reason: "jc must be finite and > 0",
            });
        }
        xs.push((e / e0_mbar_s).ln());
        ys.push(jc.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(BarrierError::TooFewCalibrationPoints { points: 1 });
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let b = -slope;
    let prefactor = intercept.exp();
    let mut ss = 0.0;
    let mut max_rel = 0.0f64;
    for (x, y) in xs.iter().zip(&ys) {
        let resid = y - (intercept + slope * x);
        ss += resid * resid;
        max_rel = max_rel.max(resid.exp_m1().abs());
    }
    Ok(OxidationFit {
        jc_prefactor_a_per_um2: prefactor,
        jc_exponent: b,
        rms_log_residual: (ss / n).sqrt(),
        max_rel_residual: max_rel,
    })
}

/// Per-junction barrier statistics for one oxidation step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarrierSample {
    pub mean_d_nm: f64,
    /// Gaussian spread of the barrier thickness from electrode roughness.
    pub sigma_d_nm: f64,
    /// Relative junction-to-junction spread from pressure leaks (static
    /// oxidation only).
    pub sigma_leak_rel: f64,
}

/// Barrier thickness statistics given the bottom-electrode RMS roughness.
pub fn barrier_dispersion(
    rms_bottom_nm: f64,
    spec: &OxidationSpec,
    model: &BarrierModel,
) -> Result<BarrierSample, BarrierError> {
    if !(rms_bottom_nm.is_finite() && rms_bottom_nm >= 0.0) {
        return Err(BarrierError::InvalidParameter {
            parameter: "rms_bottom_nm",
            value: rms_bottom_nm,
            constraint: "must be finite and >= 0",
        });
    }
    let mean = barrier_thickness(spec, model)?;
    let sigma_leak = match spec.method {
        OxidationMethod::Static => model.leak_coeff_mbar / spec.pressure_mbar,
        OxidationMethod::Dynamic => 0.0,
    };
    Ok(BarrierSample {
        mean_d_nm: mean,
        sigma_d_nm: model.groove_coupling * rms_bottom_nm,
        sigma_leak_rel: sigma_leak,
    })
}
