//! Ingestion and statistics for measured data: probe-station resistance
//! tables and qubit tables, outlier rejection, per-design Ic spreads and
//! wafer heatmaps.
//!
//! All spread figures use the population convention (divide by N); the
//! qubit-table statistics only reproduce their reference values under
//! that convention, which pins it for the whole crate.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::electrical::{ic_from_rn, ElectricalError, PhysicalConstants};
use crate::report::{render_heatmap, HeatmapCell, ReportError};
use crate::stats;

pub const MEASUREMENT_HEADER: &str =
    "chip_id,die_row,die_col,x_mm,y_mm,design_width_nm,design_length_nm,resistance_ohm,status";
pub const QUBIT_HEADER: &str = "chip_id,qubit_id,f01_ghz,t1_us,t2star_us";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: &'static str,
        message: String,
    },
    #[error("header mismatch: expected \"{expected}\", found \"{found}\"")]
    Header {
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: duplicate key ({key})")]
    DuplicateKey { line: u64, key: String },
    #[error("no records to analyze")]
    EmptyInput,
    #[error("invalid policy {parameter}: {value} ({constraint})")]
    InvalidPolicy {
        parameter: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Electrical(#[from] ElectricalError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Disposition of one probed junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Open,
    Short,
    Rejected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Open => "open",
            Status::Short => "short",
            Status::Rejected => "rejected",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(Status::Ok),
            "open" => Ok(Status::Open),
            "short" => Ok(Status::Short),
            "rejected" => Ok(Status::Rejected),
            other => Err(format!(
                "unknown status {other:?}; expected ok, open, short or rejected"
            )),
        }
    }
}

/// One probed junction on a wafer.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub chip_id: String,
    pub die_row: i32,
    pub die_col: i32,
    pub x_mm: f64,
    pub y_mm: f64,
    pub design_width_nm: f64,
    pub design_length_nm: f64,
    pub resistance_ohm: f64,
    pub status: Status,
}

impl MeasurementRecord {
    /// Group key of the junction design, e.g. "150x200".
    pub fn design_key(&self) -> String {
        format!("{}x{}", self.design_width_nm, self.design_length_nm)
    }
}

/// One measured qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRecord {
    pub chip_id: String,
    pub qubit_id: String,
    pub f01_ghz: f64,
    pub t1_us: f64,
    pub t2star_us: f64,
}

/// Population statistics of one value over one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsSummary {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub population_sigma: f64,
    pub sigma_over_mean_percent: f64,
}

fn summary(group: String, values: &[f64]) -> StatsSummary {
    let mean = stats::mean(values).expect("non-empty group");
    let sigma = stats::population_std(values).expect("non-empty group");
    StatsSummary {
        group,
        n: values.len(),
        mean,
        population_sigma: sigma,
        sigma_over_mean_percent: sigma / mean * 100.0,
    }
}

fn parse_field<T: std::str::FromStr>(
    line: u64,
    column: &'static str,
    raw: &str,
) -> Result<T, AnalysisError> {
    raw.parse().map_err(|_| AnalysisError::Parse {
        line,
        column,
        message: format!("cannot parse {raw:?}"),
    })
}

fn parse_finite(line: u64, column: &'static str, raw: &str) -> Result<f64, AnalysisError> {
    let v: f64 = parse_field(line, column, raw)?;
    if !v.is_finite() {
        return Err(AnalysisError::Parse {
            line,
            column,
            message: format!("{raw:?} is not finite"),
        });
    }
    Ok(v)
}

fn check_header<R: Read>(
    reader: &mut csv::Reader<R>,
    expected: &'static str,
) -> Result<(), AnalysisError> {
    let found = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(AnalysisError::Header { expected, found });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parse a probe-station CSV. The header must match
/// [`MEASUREMENT_HEADER`] exactly; every row must parse; a repeated
/// (chip, die, design) key is an error naming both the key and the line.
pub fn ingest_measurements<R: Read>(input: R) -> Result<Vec<MeasurementRecord>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    check_header(&mut reader, MEASUREMENT_HEADER)?;
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = record_line(&row);
        // Dedup on the raw strings: two rows that differ only in number
        // formatting still denote the same junction.
        let key = format!("{},{},{},{},{}", &row[0], &row[1], &row[2], &row[5], &row[6]);
        if seen.insert(key.clone(), line).is_some() {
            return Err(AnalysisError::DuplicateKey { line, key });
        }
        let status: Status = row[8].parse().map_err(|message| AnalysisError::Parse {
            line,
            column: "status",
            message,
        })?;
        let resistance_ohm = parse_finite(line, "resistance_ohm", &row[7])?;
        if status == Status::Ok && resistance_ohm <= 0.0 {
            return Err(AnalysisError::Parse {
                line,
                column: "resistance_ohm",
                message: format!("{resistance_ohm} must be > 0 for status ok"),
            });
        }
        out.push(MeasurementRecord {
            chip_id: row[0].to_string(),
            die_row: parse_field(line, "die_row", &row[1])?,
            die_col: parse_field(line, "die_col", &row[2])?,
            x_mm: parse_finite(line, "x_mm", &row[3])?,
            y_mm: parse_finite(line, "y_mm", &row[4])?,
            design_width_nm: parse_finite(line, "design_width_nm", &row[5])?,
            design_length_nm: parse_finite(line, "design_length_nm", &row[6])?,
            resistance_ohm,
            status,
        });
    }
    Ok(out)
}

/// Write records in the ingestion format. Floats use the shortest
/// representation that round-trips, so ingest -> export -> ingest is a
/// fixed point.
pub fn export_measurements<W: Write>(
    records: &[MeasurementRecord],
    mut out: W,
) -> Result<(), AnalysisError> {
    writeln!(out, "{MEASUREMENT_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.chip_id,
            r.die_row,
            r.die_col,
            r.x_mm,
            r.y_mm,
            r.design_width_nm,
            r.design_length_nm,
            r.resistance_ohm,
            r.status
        )?;
    }
    Ok(())
}

/// Parse a qubit table. Header must match [`QUBIT_HEADER`] exactly; all
/// three measured quantities must be positive.
pub fn ingest_qubits<R: Read>(input: R) -> Result<Vec<QubitRecord>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    check_header(&mut reader, QUBIT_HEADER)?;
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = record_line(&row);
        let key = format!("{},{}", &row[0], &row[1]);
        if seen.insert(key.clone(), line).is_some() {
            return Err(AnalysisError::DuplicateKey { line, key });
        }
        let rec = QubitRecord {
            chip_id: row[0].to_string(),
            qubit_id: row[1].to_string(),
            f01_ghz: parse_finite(line, "f01_ghz", &row[2])?,
            t1_us: parse_finite(line, "t1_us", &row[3])?,
            t2star_us: parse_finite(line, "t2star_us", &row[4])?,
        };
        for (column, v) in [
            ("f01_ghz", rec.f01_ghz),
            ("t1_us", rec.t1_us),
            ("t2star_us", rec.t2star_us),
        ] {
            if v <= 0.0 {
                return Err(AnalysisError::Parse {
                    line,
                    column,
                    message: format!("{v} must be > 0"),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn export_qubits<W: Write>(records: &[QubitRecord], mut out: W) -> Result<(), AnalysisError> {
    writeln!(out, "{QUBIT_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.chip_id, r.qubit_id, r.f01_ghz, r.t1_us, r.t2star_us
        )?;
    }
    Ok(())
}

/// Thresholds of the outlier rule. The rule is an artifact of this
/// toolkit, not a community standard, so every report discloses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierPolicy {
    pub short_threshold_ohm: f64,
    pub open_threshold_ohm: f64,
    pub mad_k: f64,
}

impl Default for OutlierPolicy {
    fn default() -> Self {
        Self {
            short_threshold_ohm: 100.0,
            open_threshold_ohm: 1e6,
            mad_k: 5.0,
        }
    }
}

impl OutlierPolicy {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (parameter, value) in [
            ("short_threshold_ohm", self.short_threshold_ohm),
            ("open_threshold_ohm", self.open_threshold_ohm),
            ("mad_k", self.mad_k),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(AnalysisError::InvalidPolicy {
                    parameter,
                    value,
                    constraint: "must be finite and > 0",
                });
            }
        }
        if self.short_threshold_ohm >= self.open_threshold_ohm {
            return Err(AnalysisError::InvalidPolicy {
                parameter: "short_threshold_ohm",
                value: self.short_threshold_ohm,
                constraint: "must be below open_threshold_ohm",
            });
        }
        Ok(())
    }

    /// Human-readable statement of the rule, for report disclosure.
    pub fn describe(&self) -> String {
        format!(
            "short if R < {} ohm; open if R > {} ohm; rejected if \
             |R - median| > {} * MAD within the design group (MAD = 0 \
             skips the robust filter)",
            self.short_threshold_ohm, self.open_threshold_ohm, self.mad_k
        )
    }
}

/// Tally of one outlier-rejection pass, including the disclosed policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub policy: OutlierPolicy,
    pub policy_description: String,
    pub input_count: usize,
    pub kept_count: usize,
    pub short_count: usize,
    pub open_count: usize,
    pub mad_rejected_count: usize,
    /// Rows that arrived already flagged (status not ok).
    pub preflagged_count: usize,
}

/// Classify records as short / open / robust-filter outliers.
///
/// Kept and rejected partition the input exactly, in input order. Rows
/// arriving with a non-ok status pass straight to the rejected set
/// unchanged; the thresholds and the per-design-group median/MAD filter
/// apply to the rest.
pub fn reject_outliers(
    records: &[MeasurementRecord],
    policy: &OutlierPolicy,
) -> Result<(Vec<MeasurementRecord>, Vec<MeasurementRecord>, OutlierReport), AnalysisError> {
    policy.validate()?;
    let mut verdicts: Vec<Option<Status>> = Vec::with_capacity(records.len());
    let mut report = OutlierReport {
        policy: *policy,
        policy_description: policy.describe(),
        input_count: records.len(),
        kept_count: 0,
        short_count: 0,
        open_count: 0,
        mad_rejected_count: 0,
        preflagged_count: 0,
    };
    for r in records {
        let verdict = if r.status != Status::Ok {
            report.preflagged_count += 1;
            Some(r.status)
        } else if r.resistance_ohm < policy.short_threshold_ohm {
            report.short_count += 1;
            Some(Status::Short)
        } else if r.resistance_ohm > policy.open_threshold_ohm {
            report.open_count += 1;
            Some(Status::Open)
        } else {
            None
        };
        verdicts.push(verdict);
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if verdicts[i].is_none() {
            groups.entry(r.design_key()).or_default().push(i);
        }
    }
    for indices in groups.values() {
        let values: Vec<f64> = indices.iter().map(|&i| records[i].resistance_ohm).collect();
        let median = stats::median(&values).expect("non-empty group");
        let Some(mad) = stats::mad(&values) else { continue };
        if mad == 0.0 {
            continue;
        }
        for &i in indices {
            if (records[i].resistance_ohm - median).abs() > policy.mad_k * mad {
                verdicts[i] = Some(Status::Rejected);
                report.mad_rejected_count += 1;
            }
        }
    }
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (r, verdict) in records.iter().zip(verdicts) {
        match verdict {
            None => kept.push(r.clone()),
            Some(status) => {
                let mut r = r.clone();
                r.status = status;
                rejected.push(r);
            }
        }
    }
    report.kept_count = kept.len();
    Ok((kept, rejected, report))
}

/// Grouped spread statistics plus notes about ignored records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedStats {
    pub groups: Vec<StatsSummary>,
    pub warnings: Vec<String>,
}

/// Per-design relative spread of the critical current.
///
/// Each resistance converts to Ic through the gap relation first; the
/// spread is computed on the Ic values. Since Ic is proportional to
/// 1/Rn, this differs from the spread of Rn itself at second order in
/// the spread, so the two must not be conflated.
pub fn group_sigma_over_mean(
    records: &[MeasurementRecord],
    constants: &PhysicalConstants,
    temperature_k: f64,
) -> Result<GroupedStats, AnalysisError> {
    let mut warnings = Vec::new();
    let mut pools: BTreeMap<String, (f64, Vec<f64>)> = BTreeMap::new();
    let mut ignored = 0usize;
    for r in records {
        if r.status != Status::Ok {
            ignored += 1;
            continue;
        }
        let ic = ic_from_rn(r.resistance_ohm, constants, temperature_k)?;
        pools
            .entry(r.design_key())
            .or_insert_with(|| (r.design_width_nm * r.design_length_nm, Vec::new()))
            .1
            .push(ic);
    }
    if ignored > 0 {
        warnings.push(format!("{ignored} non-ok record(s) ignored"));
    }
    if pools.is_empty() {
        warnings.push("no usable records; no groups".to_string());
    }
    let mut keyed: Vec<(f64, String, Vec<f64>)> = pools
        .into_iter()
        .map(|(key, (area, ics))| (area, key, ics))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let groups = keyed
        .into_iter()
        .map(|(_, key, ics)| summary(key, &ics))
        .collect();
    Ok(GroupedStats { groups, warnings })
}

/// Statistics of one chip (or of the whole table) for all three
/// measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipStats {
    pub chip_id: String,
    pub f01: StatsSummary,
    pub t1: StatsSummary,
    pub t2star: StatsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QubitTableStats {
    pub chips: Vec<ChipStats>,
    pub total: ChipStats,
}

fn chip_stats(chip_id: &str, records: &[&QubitRecord]) -> ChipStats {
    let f01: Vec<f64> = records.iter().map(|r| r.f01_ghz).collect();
    let t1: Vec<f64> = records.iter().map(|r| r.t1_us).collect();
    let t2: Vec<f64> = records.iter().map(|r| r.t2star_us).collect();
    ChipStats {
        chip_id: chip_id.to_string(),
        f01: summary(format!("{chip_id} f01_ghz"), &f01),
        t1: summary(format!("{chip_id} t1_us"), &t1),
        t2star: summary(format!("{chip_id} t2star_us"), &t2),
    }
}

/// Per-chip and whole-table statistics for f01, T1 and T2*.
/// Population sigma throughout; chips are ordered by id.
pub fn qubit_table_stats(records: &[QubitRecord]) -> Result<QubitTableStats, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut by_chip: BTreeMap<&str, Vec<&QubitRecord>> = BTreeMap::new();
    for r in records {
        by_chip.entry(&r.chip_id).or_default().push(r);
    }
    let chips = by_chip
        .iter()
        .map(|(chip_id, rows)| chip_stats(chip_id, rows))
        .collect();
    let all: Vec<&QubitRecord> = records.iter().collect();
    Ok(QubitTableStats {
        chips,
        total: chip_stats("total", &all),
    })
}

/// SVG resistance map of one design group, one cell per die. Only
/// status-ok rows are drawn; shorts and opens would drown the scale.
pub fn wafer_heatmap(
    records: &[MeasurementRecord],
    design_width_nm: f64,
    design_length_nm: f64,
) -> Result<String, AnalysisError> {
    let cells: Vec<HeatmapCell> = records
        .iter()
        .filter(|r| {
            r.status == Status::Ok
                && r.design_width_nm == design_width_nm
                && r.design_length_nm == design_length_nm
        })
        .map(|r| HeatmapCell {
            x_mm: r.x_mm,
            y_mm: r.y_mm,
            value: r.resistance_ohm,
        })
        .collect();
    if cells.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(render_heatmap(&cells, "resistance_ohm")?)
}
