//! Monte Carlo propagation of process dispersions into junction electrics.
//!
//! A [`ProcessScenario`] bundles the deposition geometry, both electrode
//! processes, the oxidation recipe and the electrical targets for one wafer
//! run. Sampling turns the scenario into an ensemble of junction
//! realizations: per-die linewidths come from the deterministic shadow
//! geometry, stochastic jitter comes from growth-derived roughness cells,
//! and the electrical chain maps each sampled junction to Rn, Ic and f01.
//!
//! Roughness enters through cells: the RMS and line-edge roughness of a
//! film depend only on (angle, thickness, rate), so each distinct cell is
//! simulated once with fixed derived seeds and reused for every Monte
//! Carlo sample. Per-sample lattice growth would be unaffordable and adds
//! nothing, the roughness is a property of the process, not of the die.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{
    barrier_dispersion, BarrierError, BarrierModel, OxidationMethod, OxidationSpec,
};
use crate::electrical::{
    ej_over_h_ghz_from_ic_na, ic_from_rn, rn_from_barrier, transmon_f01, ElectricalError,
    PhysicalConstants, TransmonParams,
};
use crate::filmgrowth::{
    grow_surface, line_edge_roughness, rate_to_mobility, rms_roughness, GrowthConfig, GrowthError,
    GrowthMode, DEFAULT_CONTAMINATION_CONST_NM_PER_S, DEFAULT_MONOLAYER_NM,
};
use crate::geometry::{
    dolan_linewidth, local_shadow_angle_deg, GeometryError, JunctionDesign, MaskStack,
    SourceGeometry, WaferLayout,
};
use crate::stats;

/// Barrier-grooving coupling used by the stock scenarios. Calibrated so
/// the two standard deposition schemes land on the 5.8% / 4.7% relative
/// Ic spread pair for the 150x200 nm design; see `fit_groove_coupling`.
pub const DEFAULT_GROOVE_COUPLING: f64 = 2.26e-3;

/// Static oxidation pressure of the stock scenarios, mbar. Sits in the
/// low-pressure regime where the pressure-leak term matters.
pub const DEFAULT_STATIC_PRESSURE_MBAR: f64 = 0.056;

/// Oxygen exposure of the stock scenarios, mbar*s.
pub const DEFAULT_EXPOSURE_MBAR_S: f64 = 30.0;

#[derive(Debug, Error)]
pub enum VariabilityError {
    #[error("invalid parameter {parameter}: {value} ({constraint})")]
    InvalidParameter {
        parameter: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("unknown sweep axis {axis:?}; valid axes: {valid}")]
    UnknownAxis { axis: String, valid: String },
    #[error("axis {axis:?} expects a {expected} value")]
    AxisValueMismatch { axis: String, expected: &'static str },
    #[error("optimize needs 1 to 3 free parameters, got {0}")]
    BadParameterCount(usize),
    #[error("bounds for {param:?} must be finite with low < high")]
    BadBounds { param: String },
    #[error("design {design:?} is not part of the scenario")]
    UnknownDesign { design: String },
    #[error("objective was not finite at any grid point")]
    ObjectiveNeverFinite,
    #[error("groove fit needs a point with positive bottom roughness")]
    DegenerateGrooveFit,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Electrical(#[from] ElectricalError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
}

/// One evaporation step: what gets deposited and how.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectrodeProcess {
    pub thickness_nm: f64,
    /// Stage tilt during this deposition, deg.
    pub angle_deg: f64,
    pub rate_nm_per_s: f64,
}

impl Default for ElectrodeProcess {
    fn default() -> Self {
        Self {
            thickness_nm: 25.0,
            angle_deg: 45.0,
            rate_nm_per_s: 0.6,
        }
    }
}

impl ElectrodeProcess {
    pub fn validate(&self) -> Result<(), VariabilityError> {
        if !(self.thickness_nm.is_finite() && self.thickness_nm > 0.0) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "thickness_nm",
                value: self.thickness_nm,
                constraint: "must be finite and > 0",
            });
        }
        if !(self.angle_deg.is_finite() && (0.0..90.0).contains(&self.angle_deg)) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "angle_deg",
                value: self.angle_deg,
                constraint: "must lie in [0, 90)",
            });
        }
        if !(self.rate_nm_per_s.is_finite() && self.rate_nm_per_s > 0.0) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "rate_nm_per_s",
                value: self.rate_nm_per_s,
                constraint: "must be finite and > 0",
            });
        }
        Ok(())
    }
}

/// Lattice sizes and ensemble depths for the roughness cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSimSettings {
    pub monolayer_nm: f64,
    pub rms_lattice_width: usize,
    pub rms_seeds: u64,
    pub ler_seeds: u64,
    /// Mask wall height above the film target, monolayers.
    pub ler_wall_margin_ml: u32,
    /// Salt mixed into every derived cell seed.
    pub cell_seed: u64,
}

impl Default for GrowthSimSettings {
    fn default() -> Self {
        Self {
            monolayer_nm: DEFAULT_MONOLAYER_NM,
            rms_lattice_width: 512,
            rms_seeds: 15,
            ler_seeds: 5,
            ler_wall_margin_ml: 30,
            cell_seed: 0,
        }
    }
}

impl GrowthSimSettings {
    pub fn validate(&self) -> Result<(), VariabilityError> {
        if !(self.monolayer_nm.is_finite() && self.monolayer_nm > 0.0) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "monolayer_nm",
                value: self.monolayer_nm,
                constraint: "must be finite and > 0",
            });
        }
        if self.rms_lattice_width < 16 {
            return Err(VariabilityError::InvalidParameter {
                parameter: "rms_lattice_width",
                value: self.rms_lattice_width as f64,
                constraint: "must be >= 16",
            });
        }
        if self.rms_seeds == 0 || self.ler_seeds == 0 {
            return Err(VariabilityError::InvalidParameter {
                parameter: "rms_seeds/ler_seeds",
                value: 0.0,
                constraint: "need at least one seed per cell",
            });
        }
        Ok(())
    }
}

/// Gap, charging energy and bath temperature for the electrical chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectricalSettings {
    pub constants: PhysicalConstants,
    pub ec_over_h_mhz: f64,
    pub temperature_k: f64,
}

impl Default for ElectricalSettings {
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::default(),
            ec_over_h_mhz: 250.0,
            temperature_k: 0.0,
        }
    }
}

impl ElectricalSettings {
    pub fn validate(&self) -> Result<(), VariabilityError> {
        self.constants.validate()?;
        if !(self.ec_over_h_mhz.is_finite() && self.ec_over_h_mhz > 0.0) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "ec_over_h_mhz",
                value: self.ec_over_h_mhz,
                constraint: "must be finite and > 0",
            });
        }
        if !(self.temperature_k.is_finite() && self.temperature_k >= 0.0) {
            return Err(VariabilityError::InvalidParameter {
                parameter: "temperature_k",
                value: self.temperature_k,
                constraint: "must be finite and >= 0",
            });
        }
        Ok(())
    }
}

/// Full description of one wafer run.
///
/// `source.tilt_alpha_deg` is ignored: each electrode supplies its own
/// stage tilt, the source only contributes throw, lobe and offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessScenario {
    pub source: SourceGeometry,
    pub wafer: WaferLayout,
    pub mask: MaskStack,
    pub bottom: ElectrodeProcess,
    pub top: ElectrodeProcess,
    pub oxidation: OxidationSpec,
    pub barrier: BarrierModel,
    pub electrical: ElectricalSettings,
    pub designs: Vec<JunctionDesign>,
    pub sample_count: u64,
    pub rng_seed: u64,
    pub growth_sim: GrowthSimSettings,
}

impl Default for ProcessScenario {
    fn default() -> Self {
        let bottom = ElectrodeProcess::default();
        let top = ElectrodeProcess {
            thickness_nm: 25.0,
            angle_deg: 0.0,
            rate_nm_per_s: 0.6,
        };
        Self {
            source: SourceGeometry::default(),
            wafer: WaferLayout::default(),
            mask: MaskStack::default(),
            designs: standard_designs(bottom.angle_deg, top.angle_deg),
            bottom,
            top,
            oxidation: OxidationSpec {
                pressure_mbar: DEFAULT_STATIC_PRESSURE_MBAR,
                time_s: DEFAULT_EXPOSURE_MBAR_S / DEFAULT_STATIC_PRESSURE_MBAR,
                method: OxidationMethod::Static,
            },
            barrier: BarrierModel {
                groove_coupling: DEFAULT_GROOVE_COUPLING,
                ..BarrierModel::default()
            },
            electrical: ElectricalSettings::default(),
            sample_count: 10_000,
            rng_seed: 1,
            growth_sim: GrowthSimSettings::default(),
        }
    }
}

/// The three stock junction designs, dosed for the given stage tilts.
pub fn standard_designs(bottom_angle_deg: f64, top_angle_deg: f64) -> Vec<JunctionDesign> {
    [("100x100", 100.0, 100.0), ("150x200", 150.0, 200.0), ("150x600", 150.0, 600.0)]
        .into_iter()
        .map(|(name, w, l)| JunctionDesign {
            name: name.to_string(),
            bottom_width_nm: w,
            top_width_nm: l,
            bottom_angle_deg,
            top_angle_deg,
        })
        .collect()
}

impl ProcessScenario {
    pub fn validate(&self) -> Result<(), VariabilityError> {
        self.source.validate()?;
        self.wafer.validate()?;
        self.mask.validate()?;
        self.bottom.validate()?;
        self.top.validate()?;
        self.oxidation.validate()?;
        self.barrier.validate()?;
        self.electrical.validate()?;
        self.growth_sim.validate()?;
        if self.designs.is_empty() {
            return Err(VariabilityError::InvalidParameter {
                parameter: "designs",
                value: 0.0,
                constraint: "need at least one junction design",
            });
        }
        for d in &self.designs {
            d.validate()?;
        }
        if self.sample_count == 0 {
            return Err(VariabilityError::InvalidParameter {
                parameter: "sample_count",
                value: 0.0,
                constraint: "must be >= 1",
            });
        }
        Ok(())
    }

    /// Source geometry of one evaporation step.
    fn source_at(&self, tilt_deg: f64) -> SourceGeometry {
        SourceGeometry {
            tilt_alpha_deg: tilt_deg,
            ..self.source.clone()
        }
    }
}

/// Derived per-scenario dispersion inputs for the sampler.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScenarioDispersions {
    /// Gaussian width jitter of the bottom-defined dimension, nm.
    pub sigma_bottom_width_nm: f64,
    /// Gaussian width jitter of the top-defined dimension, nm.
    pub sigma_top_width_nm: f64,
    pub mean_d_nm: f64,
    pub sigma_d_nm: f64,
    /// Relative one-sigma resistance jitter from pressure leaks.
    pub sigma_leak_rel: f64,
    /// Bottom-electrode RMS roughness behind `sigma_d_nm`, nm.
    pub rms_bottom_nm: f64,
    pub ler_bottom_nm: f64,
    pub ler_top_nm: f64,
}

/// Memo for roughness cells, keyed by the quantized cell parameters.
/// Reusable across scenarios: a cell is a property of (angle, thickness,
/// rate) plus the simulation settings, not of the scenario around it.
#[derive(Debug, Default)]
pub struct RoughnessCellCache {
    map: HashMap<CellKey, f64>,
}

impl RoughnessCellCache {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CellKey {
    kind: u8,
    angle_millideg: i64,
    thickness_ml: u32,
    rate_micro: u64,
    width: u64,
    seeds: u64,
    salt: u64,
}

const CELL_RMS: u8 = 1;
const CELL_LER: u8 = 2;

fn fnv64(parts: &[u64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn cell_key(kind: u8, angle_deg: f64, ml: u32, rate: f64, width: u64, s: &GrowthSimSettings) -> CellKey {
    CellKey {
        kind,
        angle_millideg: (angle_deg * 1000.0).round() as i64,
        thickness_ml: ml,
        rate_micro: (rate * 1e6).round() as u64,
        width,
        seeds: if kind == CELL_RMS { s.rms_seeds } else { s.ler_seeds },
        salt: s.cell_seed,
    }
}

fn cell_run_seed(key: &CellKey, sample: u64) -> u64 {
    fnv64(&[
        key.salt,
        key.kind as u64,
        key.angle_millideg as u64,
        key.thickness_ml as u64,
        key.rate_micro,
        key.width,
        sample,
    ])
}

fn thickness_to_ml(thickness_nm: f64, monolayer_nm: f64) -> u32 {
    ((thickness_nm / monolayer_nm).round() as u32).max(1)
}

/// Lattice width for an edge cell: wide enough that the mask shadow stays
/// clear of the three-quarter-width validity limit.
fn ler_lattice_width(wall_ml: u32, angle_deg: f64) -> usize {
    let shadow = wall_ml as f64 * angle_deg.to_radians().tan();
    let need = (shadow / 0.7).ceil() as usize;
    need.max(128).next_multiple_of(32)
}

fn rms_cell(
    proc: &ElectrodeProcess,
    settings: &GrowthSimSettings,
    cache: &mut RoughnessCellCache,
) -> Result<f64, VariabilityError> {
    let ml = thickness_to_ml(proc.thickness_nm, settings.monolayer_nm);
    let key = cell_key(
        CELL_RMS,
        proc.angle_deg,
        ml,
        proc.rate_nm_per_s,
        settings.rms_lattice_width as u64,
        settings,
    );
    if let Some(&v) = cache.map.get(&key) {
        return Ok(v);
    }
    let (steps, contamination) =
        rate_to_mobility(proc.rate_nm_per_s, DEFAULT_CONTAMINATION_CONST_NM_PER_S)?;
    let mut vals = Vec::with_capacity(settings.rms_seeds as usize);
    for s in 0..settings.rms_seeds {
        let cfg = GrowthConfig {
            lattice_width_sites: settings.rms_lattice_width,
            target_mean_height_ml: ml as f64,
            incidence_angle_deg: proc.angle_deg,
            diffusion_steps_per_particle: steps,
            contamination_per_site: contamination,
            rng_seed: cell_run_seed(&key, s),
            mode: GrowthMode::BallisticShadowed,
        };
        let surf = grow_surface(&cfg)?;
        vals.push(rms_roughness(&surf, settings.monolayer_nm)?);
    }
    let v = stats::median(&vals).expect("at least one seed");
    cache.map.insert(key, v);
    Ok(v)
}

fn ler_cell(
    proc: &ElectrodeProcess,
    settings: &GrowthSimSettings,
    cache: &mut RoughnessCellCache,
) -> Result<f64, VariabilityError> {
    let ml = thickness_to_ml(proc.thickness_nm, settings.monolayer_nm);
    let wall = ml + settings.ler_wall_margin_ml;
    let width = ler_lattice_width(wall, proc.angle_deg);
    let key = cell_key(CELL_LER, proc.angle_deg, ml, proc.rate_nm_per_s, width as u64, settings);
    if let Some(&v) = cache.map.get(&key) {
        return Ok(v);
    }
    let (steps, contamination) =
        rate_to_mobility(proc.rate_nm_per_s, DEFAULT_CONTAMINATION_CONST_NM_PER_S)?;
    let mut vals = Vec::with_capacity(settings.ler_seeds as usize);
    for s in 0..settings.ler_seeds {
        let cfg = GrowthConfig {
            lattice_width_sites: width,
            target_mean_height_ml: ml as f64,
            incidence_angle_deg: proc.angle_deg,
            diffusion_steps_per_particle: steps,
            contamination_per_site: contamination,
            rng_seed: cell_run_seed(&key, s),
            mode: GrowthMode::BallisticShadowed,
        };
        vals.push(line_edge_roughness(&cfg, wall, settings.monolayer_nm)?);
    }
    let v = stats::median(&vals).expect("at least one seed");
    cache.map.insert(key, v);
    Ok(v)
}

/// Growth- and oxidation-derived dispersion inputs for a scenario.
///
/// Edge roughness enters each patterned dimension through both of its
/// edges, hence the sqrt(2) on the width sigmas.
pub fn derive_dispersions(
    scenario: &ProcessScenario,
    cache: &mut RoughnessCellCache,
) -> Result<ScenarioDispersions, VariabilityError> {
    scenario.validate()?;
    let rms_bottom = rms_cell(&scenario.bottom, &scenario.growth_sim, cache)?;
    let ler_bottom = ler_cell(&scenario.bottom, &scenario.growth_sim, cache)?;
    let ler_top = ler_cell(&scenario.top, &scenario.growth_sim, cache)?;
    let sample = barrier_dispersion(rms_bottom, &scenario.oxidation, &scenario.barrier)?;
    Ok(ScenarioDispersions {
        sigma_bottom_width_nm: 2f64.sqrt() * ler_bottom,
        sigma_top_width_nm: 2f64.sqrt() * ler_top,
        mean_d_nm: sample.mean_d_nm,
        sigma_d_nm: sample.sigma_d_nm,
        sigma_leak_rel: sample.sigma_leak_rel,
        rms_bottom_nm: rms_bottom,
        ler_bottom_nm: ler_bottom,
        ler_top_nm: ler_top,
    })
}

/// One sampled junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionRealization {
    pub index: u64,
    pub design: String,
    pub chip: u32,
    pub die_x_mm: f64,
    pub die_y_mm: f64,
    pub area_um2: f64,
    pub d_nm: f64,
    pub rn_ohm: f64,
    pub ic_na: f64,
    pub f01_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub realizations: Vec<JunctionRealization>,
    /// Samples whose draws left no physical junction (vanished line,
    /// non-positive barrier or resistance). Excluded from statistics.
    pub dead_count: u64,
}

struct DieSite {
    chip: u32,
    x_mm: f64,
    y_mm: f64,
}

/// Deterministic per-die effective linewidths for every design:
/// `widths[die][design] = (bottom_nm, top_nm)`.
fn effective_widths(
    scenario: &ProcessScenario,
) -> Result<(Vec<DieSite>, Vec<Vec<(f64, f64)>>), VariabilityError> {
    let src_bottom = scenario.source_at(scenario.bottom.angle_deg);
    let src_top = scenario.source_at(scenario.top.angle_deg);
    let mut sites = Vec::new();
    let mut widths = Vec::new();
    for (chip, center) in scenario.wafer.chip_positions_mm.iter().enumerate() {
        for die in scenario.wafer.die_positions(*center) {
            let local_bottom = local_shadow_angle_deg(&src_bottom, die);
            let local_top = local_shadow_angle_deg(&src_top, die);
            let mut per_design = Vec::with_capacity(scenario.designs.len());
            for d in &scenario.designs {
                let b = dolan_linewidth(d.bottom_width_nm, &scenario.mask, local_bottom, d.bottom_angle_deg)?;
                let t = dolan_linewidth(d.top_width_nm, &scenario.mask, local_top, d.top_angle_deg)?;
                per_design.push((b.width_nm, t.width_nm));
            }
            sites.push(DieSite {
                chip: chip as u32,
                x_mm: die[0],
                y_mm: die[1],
            });
            widths.push(per_design);
        }
    }
    Ok((sites, widths))
}

/// Sample the scenario with explicitly given dispersions.
///
/// Realization `i` draws from an RNG stream derived from
/// (`scenario.rng_seed`, `i`) alone, with a fixed draw order of
/// [bottom width, top width, barrier thickness, leak], so the ensemble is
/// independent of thread count and every realization is reproducible in
/// isolation.
pub fn sample_with_dispersions(
    scenario: &ProcessScenario,
    disp: &ScenarioDispersions,
) -> Result<EnsembleResult, VariabilityError> {
    scenario.validate()?;
    if !(disp.mean_d_nm.is_finite() && disp.mean_d_nm > 0.0) {
        return Err(VariabilityError::InvalidParameter {
            parameter: "mean_d_nm",
            value: disp.mean_d_nm,
            constraint: "must be finite and > 0",
        });
    }
    let (sites, widths) = effective_widths(scenario)?;
    let n_designs = scenario.designs.len() as u64;
    let n_dies = sites.len() as u64;
    let realize = |i: u64| -> Option<JunctionRealization> {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        rng.set_stream(i);
        let z_w: f64 = StandardNormal.sample(&mut rng);
        let z_l: f64 = StandardNormal.sample(&mut rng);
        let z_d: f64 = StandardNormal.sample(&mut rng);
        let z_leak: f64 = StandardNormal.sample(&mut rng);
        let design_idx = (i % n_designs) as usize;
        let die_idx = ((i / n_designs) % n_dies) as usize;
        let (eff_b, eff_t) = widths[die_idx][design_idx];
        let w = eff_b + disp.sigma_bottom_width_nm * z_w;
        let l = eff_t + disp.sigma_top_width_nm * z_l;
        let d = disp.mean_d_nm + disp.sigma_d_nm * z_d;
        let leak = 1.0 + disp.sigma_leak_rel * z_leak;
        if w <= 0.0 || l <= 0.0 || d <= 0.0 || leak <= 0.0 {
            return None;
        }
        let area_um2 = w * l * 1e-6;
        let rn = rn_from_barrier(d, area_um2, &scenario.barrier, &scenario.electrical.constants)
            .ok()?
            * leak;
        let ic = ic_from_rn(rn, &scenario.electrical.constants, scenario.electrical.temperature_k)
            .ok()?;
        let ej = ej_over_h_ghz_from_ic_na(ic).ok()?;
        let f01 = transmon_f01(&TransmonParams {
            ec_over_h_mhz: scenario.electrical.ec_over_h_mhz,
            ej_over_h_ghz: ej,
        })
        .ok()?;
        if f01 <= 0.0 {
            return None;
        }
        let site = &sites[die_idx];
        Some(JunctionRealization {
            index: i,
            design: scenario.designs[design_idx].name.clone(),
            chip: site.chip,
            die_x_mm: site.x_mm,
            die_y_mm: site.y_mm,
            area_um2,
            d_nm: d,
            rn_ohm: rn,
            ic_na: ic,
            f01_ghz: f01,
        })
    };
    let drawn: Vec<Option<JunctionRealization>> =
        (0..scenario.sample_count).into_par_iter().map(realize).collect();
    let dead_count = drawn.iter().filter(|r| r.is_none()).count() as u64;
    Ok(EnsembleResult {
        realizations: drawn.into_iter().flatten().collect(),
        dead_count,
    })
}

/// Sample the scenario, deriving dispersions from its growth cells.
pub fn sample_ensemble(scenario: &ProcessScenario) -> Result<EnsembleResult, VariabilityError> {
    let mut cache = RoughnessCellCache::new();
    sample_ensemble_cached(scenario, &mut cache)
}

/// [`sample_ensemble`] with a caller-owned cell cache, for sweeps and
/// repeated evaluations that share cells.
pub fn sample_ensemble_cached(
    scenario: &ProcessScenario,
    cache: &mut RoughnessCellCache,
) -> Result<EnsembleResult, VariabilityError> {
    let disp = derive_dispersions(scenario, cache)?;
    sample_with_dispersions(scenario, &disp)
}

/// How to pool realizations into summary groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    ByDesign,
    ByChip,
}

/// Population statistics of one group of realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub key: String,
    pub sample_count: u64,
    pub mean_ic_na: f64,
    pub sigma_over_mean_ic: f64,
    pub mean_f01_ghz: f64,
    pub sigma_over_mean_f01: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub groups: Vec<DistributionSummary>,
    pub dead_count: u64,
    pub warnings: Vec<String>,
}

/// Pool an ensemble into per-group population statistics. Groups with
/// fewer than two live realizations are skipped with a warning, as are
/// expected groups that never produced a live sample.
pub fn summarize(
    scenario: &ProcessScenario,
    ensemble: &EnsembleResult,
    grouping: Grouping,
) -> SummaryReport {
    let expected: Vec<String> = match grouping {
        Grouping::ByDesign => scenario.designs.iter().map(|d| d.name.clone()).collect(),
        Grouping::ByChip => (0..scenario.wafer.chip_positions_mm.len())
            .map(|i| format!("chip{i}"))
            .collect(),
    };
    let mut pools: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &ensemble.realizations {
        let key = match grouping {
            Grouping::ByDesign => r.design.clone(),
            Grouping::ByChip => format!("chip{}", r.chip),
        };
        let pool = pools.entry(key).or_default();
        pool.0.push(r.ic_na);
        pool.1.push(r.f01_ghz);
    }
    let mut groups = Vec::new();
    let mut warnings = Vec::new();
    for key in expected {
        match pools.get(&key) {
            Some((ic, f01)) if ic.len() >= 2 => {
                let mean_ic = stats::mean(ic).expect("non-empty");
                let mean_f01 = stats::mean(f01).expect("non-empty");
                groups.push(DistributionSummary {
                    key,
                    sample_count: ic.len() as u64,
                    mean_ic_na: mean_ic,
                    sigma_over_mean_ic: stats::population_std(ic).expect("non-empty") / mean_ic,
                    mean_f01_ghz: mean_f01,
                    sigma_over_mean_f01: stats::population_std(f01).expect("non-empty") / mean_f01,
                });
            }
            Some((ic, _)) => warnings.push(format!(
                "group {key} has {} live realization(s); skipped",
                ic.len()
            )),
            None => warnings.push(format!("group {key} has no live realizations; skipped")),
        }
    }
    SummaryReport {
        groups,
        dead_count: ensemble.dead_count,
        warnings,
    }
}

/// Scalar (or method) value for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Method(OxidationMethod),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Method(m) => write!(f, "{m}"),
        }
    }
}

/// Parameter axes `sweep` and `optimize` can drive.
pub const SWEEP_AXES: [&str; 9] = [
    "bottom_thickness_nm",
    "bottom_angle_deg",
    "bottom_rate_nm_per_s",
    "top_thickness_nm",
    "top_angle_deg",
    "top_rate_nm_per_s",
    "oxidation_pressure_mbar",
    "oxidation_time_s",
    "oxidation_method",
];

fn unknown_axis(axis: &str) -> VariabilityError {
    VariabilityError::UnknownAxis {
        axis: axis.to_string(),
        valid: SWEEP_AXES.join(", "),
    }
}

fn numeric(axis: &str, value: &SweepValue) -> Result<f64, VariabilityError> {
    match value {
        SweepValue::Number(v) => Ok(*v),
        SweepValue::Method(_) => Err(VariabilityError::AxisValueMismatch {
            axis: axis.to_string(),
            expected: "numeric",
        }),
    }
}

/// Point one scenario parameter at a new value. Angle axes also retune
/// the dose angle of every design: a mask is always written for the tilt
/// it will be evaporated at.
pub fn apply_axis(
    scenario: &mut ProcessScenario,
    axis: &str,
    value: &SweepValue,
) -> Result<(), VariabilityError> {
    match axis {
        "bottom_thickness_nm" => scenario.bottom.thickness_nm = numeric(axis, value)?,
        "bottom_angle_deg" => {
            let v = numeric(axis, value)?;
            scenario.bottom.angle_deg = v;
            for d in &mut scenario.designs {
                d.bottom_angle_deg = v;
            }
        }
        "bottom_rate_nm_per_s" => scenario.bottom.rate_nm_per_s = numeric(axis, value)?,
        "top_thickness_nm" => scenario.top.thickness_nm = numeric(axis, value)?,
        "top_angle_deg" => {
            let v = numeric(axis, value)?;
            scenario.top.angle_deg = v;
            for d in &mut scenario.designs {
                d.top_angle_deg = v;
            }
        }
        "top_rate_nm_per_s" => scenario.top.rate_nm_per_s = numeric(axis, value)?,
        "oxidation_pressure_mbar" => scenario.oxidation.pressure_mbar = numeric(axis, value)?,
        "oxidation_time_s" => scenario.oxidation.time_s = numeric(axis, value)?,
        "oxidation_method" => match value {
            SweepValue::Method(m) => scenario.oxidation.method = *m,
            SweepValue::Number(_) => {
                return Err(VariabilityError::AxisValueMismatch {
                    axis: axis.to_string(),
                    expected: "method",
                })
            }
        },
        _ => return Err(unknown_axis(axis)),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: SweepValue,
    pub summary: SummaryReport,
}

/// Evaluate the template at each axis value. Every point reuses the
/// template's seed, so points differ only through the parameter under
/// study (common random numbers), and cells are shared where parameters
/// coincide.
pub fn sweep(
    template: &ProcessScenario,
    axis: &str,
    values: &[SweepValue],
) -> Result<Vec<SweepPoint>, VariabilityError> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(unknown_axis(axis));
    }
    let mut cache = RoughnessCellCache::new();
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let mut scenario = template.clone();
        apply_axis(&mut scenario, axis, v)?;
        let ensemble = sample_ensemble_cached(&scenario, &mut cache)?;
        out.push(SweepPoint {
            value: *v,
            summary: summarize(&scenario, &ensemble, Grouping::ByDesign),
        });
    }
    Ok(out)
}

/// One free parameter of an optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeParameter {
    pub axis: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSettings {
    pub points_per_axis: usize,
    pub refinement_rounds: usize,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            points_per_axis: 7,
            refinement_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub values: Vec<f64>,
    /// None when the scenario produced no usable objective.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeOutcome {
    pub best: Vec<(String, f64)>,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
}

fn linspace(low: f64, high: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| low + (high - low) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Coordinate grid search with shrinking bounds around the incumbent.
///
/// `objective` returns Ok(None) when a point is evaluable but yields no
/// usable value (for instance every sample died); such points are kept in
/// the trace and skipped for the argmin. Deterministic: ties keep the
/// earliest grid point.
pub fn optimize_with<F>(
    template: &ProcessScenario,
    params: &[FreeParameter],
    settings: &OptimizeSettings,
    mut objective: F,
) -> Result<OptimizeOutcome, VariabilityError>
where
    F: FnMut(&ProcessScenario) -> Result<Option<f64>, VariabilityError>,
{
    if params.is_empty() || params.len() > 3 {
        return Err(VariabilityError::BadParameterCount(params.len()));
    }
    if settings.points_per_axis < 2 {
        return Err(VariabilityError::InvalidParameter {
            parameter: "points_per_axis",
            value: settings.points_per_axis as f64,
            constraint: "must be >= 2",
        });
    }
    for p in params {
        if p.axis == "oxidation_method" || !SWEEP_AXES.contains(&p.axis.as_str()) {
            return Err(unknown_axis(&p.axis));
        }
        if !(p.low.is_finite() && p.high.is_finite() && p.low < p.high) {
            return Err(VariabilityError::BadBounds {
                param: p.axis.clone(),
            });
        }
    }
    let n = settings.points_per_axis;
    let rounds = settings.refinement_rounds.max(1);
    let mut bounds: Vec<(f64, f64)> = params.iter().map(|p| (p.low, p.high)).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    for round in 0..rounds {
        let grids: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| linspace(lo, hi, n)).collect();
        let mut idx = vec![0usize; params.len()];
        loop {
            let values: Vec<f64> = idx.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
            let mut scenario = template.clone();
            for (p, &v) in params.iter().zip(&values) {
                apply_axis(&mut scenario, &p.axis, &SweepValue::Number(v))?;
            }
            let obj = objective(&scenario)?.filter(|v| v.is_finite());
            trace.push(TraceRow {
                round,
                values: values.clone(),
                objective: obj,
            });
            if let Some(o) = obj {
                if best.as_ref().map_or(true, |(_, b)| o < *b) {
                    best = Some((values, o));
                }
            }
            // Odometer over the grid, last axis fastest.
            let mut k = params.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if k == usize::MAX {
                break;
            }
        }
        let Some((center, _)) = &best else { continue };
        for (b, (&c, p)) in bounds.iter_mut().zip(center.iter().zip(params)) {
            let cell = (b.1 - b.0) / (n - 1) as f64;
            *b = ((c - cell).max(p.low), (c + cell).min(p.high));
        }
    }
    let (values, objective) = best.ok_or(VariabilityError::ObjectiveNeverFinite)?;
    Ok(OptimizeOutcome {
        best: params
            .iter()
            .map(|p| p.axis.clone())
            .zip(values)
            .map(|(a, v)| (a, v))
            .collect(),
        objective,
        trace,
    })
}

/// Minimize the relative Ic spread of one design over up to three
/// process parameters.
pub fn optimize(
    template: &ProcessScenario,
    params: &[FreeParameter],
    design: &str,
    settings: &OptimizeSettings,
) -> Result<OptimizeOutcome, VariabilityError> {
    if !template.designs.iter().any(|d| d.name == design) {
        return Err(VariabilityError::UnknownDesign {
            design: design.to_string(),
        });
    }
    let mut cache = RoughnessCellCache::new();
    optimize_with(template, params, settings, move |scenario| {
        let ensemble = sample_ensemble_cached(scenario, &mut cache)?;
        let report = summarize(scenario, &ensemble, Grouping::ByDesign);
        Ok(report
            .groups
            .iter()
            .find(|g| g.key == design)
            .map(|g| g.sigma_over_mean_ic))
    })
}

/// One scheme in a groove-coupling calibration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrooveCalibrationPoint {
    /// Measured (target) relative Ic spread of the scheme.
    pub target_rel_sigma: f64,
    /// Simulated relative Ic spread of the scheme with grooving disabled.
    pub baseline_rel_sigma: f64,
    /// Bottom-electrode RMS roughness of the scheme, nm.
    pub rms_bottom_nm: f64,
}

/// Least-squares groove coupling from scheme spread targets.
///
/// Grooving adds kappa^2 * (rms/lambda)^2 to the squared relative spread
/// on top of the groove-free baseline, so with rho = rms/lambda the
/// normal-equation solution is
/// kappa^2 = sum(rho^2 (T^2 - B^2)) / sum(rho^4), clamped at zero.
pub fn fit_groove_coupling(
    points: &[GrooveCalibrationPoint],
    lambda_nm: f64,
) -> Result<f64, VariabilityError> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(VariabilityError::InvalidParameter {
            parameter: "lambda_nm",
            value: lambda_nm,
            constraint: "must be finite and > 0",
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for p in points {
        for (name, v) in [
            ("target_rel_sigma", p.target_rel_sigma),
            ("baseline_rel_sigma", p.baseline_rel_sigma),
            ("rms_bottom_nm", p.rms_bottom_nm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(VariabilityError::InvalidParameter {
                    parameter: name,
                    value: v,
                    constraint: "must be finite and >= 0",
                });
            }
        }
        let rho2 = (p.rms_bottom_nm / lambda_nm).powi(2);
        num += rho2 * (p.target_rel_sigma.powi(2) - p.baseline_rel_sigma.powi(2));
        den += rho2 * rho2;
    }
    if den == 0.0 {
        return Err(VariabilityError::DegenerateGrooveFit);
    }
    Ok((num / den).max(0.0).sqrt())
}
