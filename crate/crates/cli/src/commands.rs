//! Subcommand implementations.
//!
//! Handlers return single-line `Err` strings; `main` prints them to
//! stderr and exits nonzero. File-writing commands funnel artifacts
//! through [`OutputSet`] so every run ends with a hashed manifest.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use jjfab_core::analysis::{
    self, export_measurements, group_sigma_over_mean, ingest_measurements, ingest_qubits,
    qubit_table_stats, reject_outliers, OutlierPolicy, StatsSummary,
};
use jjfab_core::barrier::{calibrate_oxidation, OxidationMethod};
use jjfab_core::electrical::{
    ej_over_h_ghz_from_ic_na, frequency_sensitivity, ic_from_rn, junction_electrics,
    target_rn_for_frequency, transmon_f01, PhysicalConstants, TransmonParams,
};
use jjfab_core::geometry::{
    calibrate_linewidth_throw, calibrate_throw, linewidth_map, nonuniformity, thickness_map,
    MaskStack, SourceGeometry, WaferLayout,
};
use jjfab_core::report::{field_cells, field_csv, render_heatmap};
use jjfab_core::variability::{
    derive_dispersions, optimize as optimize_scenario, sample_with_dispersions, summarize,
    sweep as sweep_scenario, EnsembleResult, FreeParameter, Grouping, OptimizeSettings,
    RoughnessCellCache, SweepValue,
};

use crate::config::{OutputFormat, RunConfig};
use crate::outputs::OutputSet;
use crate::{
    AnalyzeArgs, CalibrateCommand, JunctionArgs, OptimizeArgs, ReportArgs, SimulateArgs, SweepArgs,
};

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>, String> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| format!("cannot encode JSON: {e}"))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn resolve_dir(flag: &Option<PathBuf>, cfg: &RunConfig, default_name: &str) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn open_input(path: &PathBuf) -> Result<BufReader<File>, String> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))
}

/// Round to two decimals with ties away from zero. A bare `(x*100).round()`
/// turns a mean that is mathematically x.xx5 but stored as ...4999 into the
/// lower step; the nudge restores the intended decimal tie-break.
fn round2(x: f64) -> f64 {
    (x * 100.0 + x.signum() * 1e-7).round() / 100.0
}

fn realizations_csv(ensemble: &EnsembleResult) -> Result<Vec<u8>, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &ensemble.realizations {
        w.serialize(r)
            .map_err(|e| format!("cannot encode realizations: {e}"))?;
    }
    w.into_inner()
        .map_err(|e| format!("cannot encode realizations: {e}"))
}

pub fn simulate(args: &SimulateArgs) -> Result<(), String> {
    let cfg = RunConfig::load(&args.config)?;
    let scenario = &cfg.scenario;
    let mut cache = RoughnessCellCache::new();
    let dispersions = derive_dispersions(scenario, &mut cache).map_err(|e| e.to_string())?;
    let ensemble = sample_with_dispersions(scenario, &dispersions).map_err(|e| e.to_string())?;
    let by_design = summarize(scenario, &ensemble, Grouping::ByDesign);
    let by_chip = summarize(scenario, &ensemble, Grouping::ByChip);

    let mut out = OutputSet::create(resolve_dir(&args.output_dir, &cfg, "simulate_out"))?;
    out.write("dispersions.json", &pretty_json(&dispersions)?)?;
    out.write(
        "summary.json",
        &pretty_json(&json!({ "by_design": by_design, "by_chip": by_chip }))?,
    )?;
    match cfg.format {
        OutputFormat::Csv => out.write("realizations.csv", &realizations_csv(&ensemble)?)?,
        OutputFormat::Json => out.write("realizations.json", &pretty_json(&ensemble)?)?,
    }
    out.finish("simulate", Some(cfg.seed))
}

fn parse_sweep_values(axis: &str, raw: &str) -> Result<Vec<SweepValue>, String> {
    let values: Vec<SweepValue> = raw
        .split(',')
        .map(str::trim)
        .filter(|tok| !tok.is_empty())
        .map(|tok| {
            if axis == "oxidation_method" {
                match tok {
                    "static" => Ok(SweepValue::Method(OxidationMethod::Static)),
                    "dynamic" => Ok(SweepValue::Method(OxidationMethod::Dynamic)),
                    _ => Err(format!(
                        "axis oxidation_method takes the values static and dynamic, got {tok:?}"
                    )),
                }
            } else {
                tok.parse::<f64>().map(SweepValue::Number).map_err(|_| {
                    format!("cannot parse {tok:?} as a number for axis {axis}")
                })
            }
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("--values is empty".to_string());
    }
    Ok(values)
}

pub fn sweep(args: &SweepArgs) -> Result<(), String> {
    let cfg = RunConfig::load(&args.config)?;
    let values = parse_sweep_values(&args.axis, &args.values)?;
    let points = sweep_scenario(&cfg.scenario, &args.axis, &values).map_err(|e| e.to_string())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "axis",
        "value",
        "design",
        "n",
        "mean_ic_na",
        "sigma_over_mean_ic_percent",
        "mean_f01_ghz",
        "sigma_over_mean_f01_percent",
        "dead_count",
    ])
    .map_err(|e| format!("cannot encode sweep table: {e}"))?;
    for p in &points {
        for g in &p.summary.groups {
            w.write_record([
                args.axis.clone(),
                p.value.to_string(),
                g.key.clone(),
                g.sample_count.to_string(),
                g.mean_ic_na.to_string(),
                (100.0 * g.sigma_over_mean_ic).to_string(),
                g.mean_f01_ghz.to_string(),
                (100.0 * g.sigma_over_mean_f01).to_string(),
                p.summary.dead_count.to_string(),
            ])
            .map_err(|e| format!("cannot encode sweep table: {e}"))?;
        }
    }
    let table = w
        .into_inner()
        .map_err(|e| format!("cannot encode sweep table: {e}"))?;

    let mut out = OutputSet::create(resolve_dir(&args.output_dir, &cfg, "sweep_out"))?;
    out.write("sweep.csv", &table)?;
    out.write(
        "sweep.json",
        &pretty_json(&json!({ "axis": args.axis, "points": points }))?,
    )?;
    out.finish("sweep", Some(cfg.seed))
}

fn parse_param(raw: &str) -> Result<FreeParameter, String> {
    let usage = || format!("--param must look like axis=low..high, got {raw:?}");
    let (axis, range) = raw.split_once('=').ok_or_else(usage)?;
    let (low, high) = range.split_once("..").ok_or_else(usage)?;
    let low: f64 = low.trim().parse().map_err(|_| usage())?;
    let high: f64 = high.trim().parse().map_err(|_| usage())?;
    Ok(FreeParameter {
        axis: axis.trim().to_string(),
        low,
        high,
    })
}

pub fn optimize(args: &OptimizeArgs) -> Result<(), String> {
    let cfg = RunConfig::load(&args.config)?;
    let params: Vec<FreeParameter> = args
        .params
        .iter()
        .map(|raw| parse_param(raw))
        .collect::<Result<_, _>>()?;
    let settings = OptimizeSettings {
        points_per_axis: args.points,
        refinement_rounds: args.rounds,
    };
    let outcome = optimize_scenario(&cfg.scenario, &params, &args.design, &settings)
        .map_err(|e| e.to_string())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["round".to_string()];
    header.extend(params.iter().map(|p| p.axis.clone()));
    header.push("sigma_over_mean_ic".to_string());
    w.write_record(&header)
        .map_err(|e| format!("cannot encode trace: {e}"))?;
    for row in &outcome.trace {
        let mut record = vec![row.round.to_string()];
        record.extend(row.values.iter().map(|v| v.to_string()));
        record.push(row.objective.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&record)
            .map_err(|e| format!("cannot encode trace: {e}"))?;
    }
    let trace = w
        .into_inner()
        .map_err(|e| format!("cannot encode trace: {e}"))?;

    let mut out = OutputSet::create(resolve_dir(&args.output_dir, &cfg, "optimize_out"))?;
    out.write("optimize.json", &pretty_json(&outcome)?)?;
    out.write("trace.csv", &trace)?;
    out.finish("optimize", Some(cfg.seed))
}

fn rounded_summary(s: &StatsSummary) -> serde_json::Value {
    json!({
        "n": s.n,
        "mean": round2(s.mean),
        "st_dev_percent": round2(s.sigma_over_mean_percent),
    })
}

fn rounded_chip(chip: &analysis::ChipStats) -> serde_json::Value {
    json!({
        "chip_id": chip.chip_id,
        "f01_ghz": rounded_summary(&chip.f01),
        "t1_us": rounded_summary(&chip.t1),
        "t2star_us": rounded_summary(&chip.t2star),
    })
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), String> {
    if args.measurements.is_none() && args.qubits.is_none() {
        return Err("nothing to analyze: provide --measurements and/or --qubits".to_string());
    }
    let mut out = OutputSet::create(args.output_dir.clone())?;

    if let Some(path) = &args.measurements {
        let records = ingest_measurements(open_input(path)?)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let policy = OutlierPolicy {
            short_threshold_ohm: args.short_threshold_ohm,
            open_threshold_ohm: args.open_threshold_ohm,
            mad_k: args.mad_k,
        };
        let (kept, rejected, report) =
            reject_outliers(&records, &policy).map_err(|e| e.to_string())?;
        let stats = group_sigma_over_mean(&kept, &PhysicalConstants::default(), 0.0)
            .map_err(|e| e.to_string())?;

        let mut buf = Vec::new();
        export_measurements(&kept, &mut buf).map_err(|e| e.to_string())?;
        out.write("kept.csv", &buf)?;
        let mut buf = Vec::new();
        export_measurements(&rejected, &mut buf).map_err(|e| e.to_string())?;
        out.write("rejected.csv", &buf)?;
        out.write("outliers.json", &pretty_json(&report)?)?;
        out.write("junction_stats.json", &pretty_json(&stats)?)?;

        let mut designs: Vec<(String, f64, f64)> = kept
            .iter()
            .map(|r| (r.design_key(), r.design_width_nm, r.design_length_nm))
            .collect();
        designs.sort_by(|a, b| a.0.cmp(&b.0));
        designs.dedup_by(|a, b| a.0 == b.0);
        for (key, width, length) in designs {
            let svg = analysis::wafer_heatmap(&kept, width, length).map_err(|e| e.to_string())?;
            out.write(&format!("heatmap_{key}.svg"), svg.as_bytes())?;
        }
    }

    if let Some(path) = &args.qubits {
        let records =
            ingest_qubits(open_input(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        let stats = qubit_table_stats(&records).map_err(|e| e.to_string())?;
        let table = json!({
            "chips": stats.chips.iter().map(rounded_chip).collect::<Vec<_>>(),
            "total": rounded_chip(&stats.total),
        });
        out.write("qubit_stats.json", &pretty_json(&table)?)?;
        out.write("qubit_stats_full.json", &pretty_json(&stats)?)?;
    }

    out.finish("analyze", None)
}

pub fn calibrate(cmd: &CalibrateCommand) -> Result<(), String> {
    let value = match cmd {
        CalibrateCommand::Throw {
            tilt_deg,
            nonuniformity_percent,
            grid_step_mm,
        } => {
            let throw = calibrate_throw(
                nonuniformity_percent / 100.0,
                *tilt_deg,
                &SourceGeometry::default(),
                &WaferLayout::default(),
                *grid_step_mm,
            )
            .map_err(|e| e.to_string())?;
            json!({
                "throw_distance_mm": throw,
                "tilt_alpha_deg": tilt_deg,
                "nonuniformity_percent": nonuniformity_percent,
                "grid_step_mm": grid_step_mm,
            })
        }
        CalibrateCommand::Linewidth {
            reduction_percent,
            line_width_nm,
            design_angle_deg,
        } => {
            let throw = calibrate_linewidth_throw(
                reduction_percent / 100.0,
                *line_width_nm,
                &MaskStack::default(),
                &WaferLayout::default(),
                *design_angle_deg,
            )
            .map_err(|e| e.to_string())?;
            json!({
                "throw_distance_mm": throw,
                "reduction_percent": reduction_percent,
                "line_width_nm": line_width_nm,
                "design_angle_deg": design_angle_deg,
            })
        }
        CalibrateCommand::Oxidation {
            data,
            anchor_exposure_mbar_s,
        } => {
            let points = read_oxidation_points(data)?;
            let fit = calibrate_oxidation(&points, *anchor_exposure_mbar_s)
                .map_err(|e| e.to_string())?;
            json!({
                "anchor_exposure_mbar_s": anchor_exposure_mbar_s,
                "jc_prefactor_a_per_um2": fit.jc_prefactor_a_per_um2,
                "jc_exponent": fit.jc_exponent,
                "rms_log_residual": fit.rms_log_residual,
                "max_rel_residual": fit.max_rel_residual,
            })
        }
    };
    println!("{value:#}");
    Ok(())
}

fn read_oxidation_points(path: &PathBuf) -> Result<Vec<(f64, f64)>, String> {
    let mut reader = csv::Reader::from_reader(open_input(path)?);
    let context = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let headers = reader.headers().map_err(|e| context(&e))?;
    let expected = ["exposure_mbar_s", "jc_a_per_um2"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format!(
            "{}: expected header {}, found {}",
            path.display(),
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| context(&e))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, String> {
            row.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or(format!(
                    "{} line {line}: cannot parse {} as a number",
                    path.display(),
                    expected[i]
                ))
        };
        points.push((field(0)?, field(1)?));
    }
    Ok(points)
}

pub fn junction(args: &JunctionArgs) -> Result<(), String> {
    let constants = PhysicalConstants {
        gap_delta_uev: args.gap_uev,
    };
    let (f01, ej_ghz, ic_na, rn_ohm) = match (args.input.f01_ghz, args.input.rn_ohm) {
        (Some(f01), None) => {
            let target = target_rn_for_frequency(f01, args.ec_mhz, &constants)
                .map_err(|e| e.to_string())?;
            (f01, target.ej_over_h_ghz, target.ic_na, target.rn_ohm)
        }
        (None, Some(rn)) => {
            let ic = ic_from_rn(rn, &constants, args.temperature_k).map_err(|e| e.to_string())?;
            let ej = ej_over_h_ghz_from_ic_na(ic).map_err(|e| e.to_string())?;
            let f01 = transmon_f01(&TransmonParams {
                ec_over_h_mhz: args.ec_mhz,
                ej_over_h_ghz: ej,
            })
            .map_err(|e| e.to_string())?;
            (f01, ej, ic, rn)
        }
        // Clap's argument group enforces exactly one input.
        _ => unreachable!(),
    };
    let params = TransmonParams {
        ec_over_h_mhz: args.ec_mhz,
        ej_over_h_ghz: ej_ghz,
    };
    let ratio = params.ej_over_ec();
    let mut value = json!({
        "f01_ghz": f01,
        "ec_over_h_mhz": args.ec_mhz,
        "ej_over_h_ghz": ej_ghz,
        "ej_over_ec": ratio,
        "transmon_regime": params.in_transmon_regime(),
        "ic_na": ic_na,
        "rn_ohm": rn_ohm,
        "frequency_sensitivity": frequency_sensitivity(ratio).map_err(|e| e.to_string())?,
    });
    if let Some(area) = args.area_um2 {
        let electrics = junction_electrics(
            rn_ohm,
            area,
            args.active_area_fraction,
            &constants,
            args.temperature_k,
        )
        .map_err(|e| e.to_string())?;
        value["area_um2"] = json!(area);
        value["active_area_fraction"] = json!(args.active_area_fraction);
        value["jc_a_per_um2"] = json!(electrics.jc_a_per_um2);
    }
    println!("{value:#}");
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<(), String> {
    let cfg = RunConfig::load(&args.config)?;
    let scenario = &cfg.scenario;
    let design = scenario
        .designs
        .first()
        .ok_or("scenario has no designs to map")?;
    let mut out = OutputSet::create(resolve_dir(&args.output_dir, &cfg, "report_out"))?;
    let mut spreads = serde_json::Map::new();
    let electrodes = [
        ("bottom", &scenario.bottom, design.bottom_width_nm),
        ("top", &scenario.top, design.top_width_nm),
    ];
    for (label, electrode, nominal_w_nm) in electrodes {
        let src = SourceGeometry {
            tilt_alpha_deg: electrode.angle_deg,
            ..scenario.source.clone()
        };
        let thickness = thickness_map(&src, &scenario.wafer, args.grid_step_mm)
            .map_err(|e| e.to_string())?;
        let widths = linewidth_map(
            &src,
            &scenario.wafer,
            &scenario.mask,
            nominal_w_nm,
            args.grid_step_mm,
        )
        .map_err(|e| e.to_string())?;
        for (kind, field, unit) in [
            ("thickness", &thickness, "relative_rate"),
            ("linewidth", &widths, "width_nm"),
        ] {
            out.write(
                &format!("{kind}_{label}.csv"),
                field_csv(field).as_bytes(),
            )?;
            let svg = render_heatmap(&field_cells(field), unit).map_err(|e| e.to_string())?;
            out.write(&format!("{kind}_{label}.svg"), svg.as_bytes())?;
            spreads.insert(
                format!("{label}_{kind}_nonuniformity"),
                nonuniformity(field.values())
                    .map_err(|e| e.to_string())?
                    .into(),
            );
        }
    }
    out.write(
        "nonuniformity.json",
        &pretty_json(&json!({
            "grid_step_mm": args.grid_step_mm,
            "values": serde_json::Value::Object(spreads),
        }))?,
    )?;
    out.finish("report", None)
}
