//! Process-variability models for shadow-evaporated Al/AlOx/Al tunnel
//! junctions, plus analysis tooling for probe-station and qubit data.
//!
//! The crate is organised along the fabrication chain:
//!
//! * [`geometry`]: evaporation flux over a tilted wafer, resist-bridge
//!   shadowing, junction overlap areas, throw calibration.
//! * [`filmgrowth`]: stochastic lattice deposition for surface roughness
//!   and line-edge roughness of the electrodes.
//! * [`barrier`]: oxidation exposure to barrier thickness, critical
//!   current density scaling, barrier dispersion.
//! * [`electrical`]: normal resistance, critical current and transmon
//!   frequency, forward and inverse.
//! * [`variability`]: Monte Carlo junction ensembles, sweeps and grid
//!   optimization over process parameters.
//! * [`analysis`]: measurement ingestion, outlier policy, grouped
//!   statistics, qubit tables.
//! * [`report`]: deterministic CSV and SVG emitters.

pub mod analysis;
pub mod barrier;
pub mod electrical;
pub mod filmgrowth;
pub mod geometry;
pub mod report;
pub mod stats;
pub mod variability;
