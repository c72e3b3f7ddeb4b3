//! Command dispatch and run records.
//!
//! [`execute`] is pure: it returns the run record and the CSV tables without
//! touching the disk. [`run`] adds timing metadata and, when the config names
//! an output directory, writes
//!
//! - `summary.json`: the [`RunRecord`], byte-identical for identical configs;
//! - `metadata.json`: wall-clock data ([`RunMetadata`]);
//! - one CSV per table, each tagged with the config hash;
//! - `environment.json` for `generate-bath`.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::benchmark::{
    fit_gain_decay, gain_series, run_benchmark, run_campaign_on, BenchmarkRecord, CampaignStats,
    GainFit, GainSeries,
};
use crate::config::{Command, RunConfig};
use crate::environment::QubitEnvironment;
use crate::io::{self, num, opt, Table};
use crate::loss_budget::{
    area_grid, evaluate, sweep_gate_area, AreaPoint, GateGeometry, LossBudget, T1Limit, WiringMode,
};
use crate::optimizer::{optimize, OptimizationResult};
use crate::spectroscopy::{swap_spectroscopy, SwapRaster};
use crate::{Error, Result, TOOL_VERSION};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopySummary {
    pub freq_points: usize,
    pub field_points: usize,
    pub hold_time_us: f64,
    pub min_population: f64,
    /// Darkest probe frequency of each field column, in field order.
    pub darkest_frequency_ghz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub qubit_freq_ghz: f64,
    /// Noise-free T1 before the sweep, at the starting field.
    pub true_t1_before_us: f64,
    /// Noise-free T1 at the chosen field after the sweep.
    pub true_t1_after_us: f64,
    pub optimization: OptimizationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub qubit_freq_ghz: f64,
    pub chosen_field_v_per_m: f64,
    pub mean_reference_us: f64,
    pub mean_optimized_us: f64,
    pub mean_gain: f64,
    pub std_reference_us: f64,
    pub std_optimized_us: f64,
    pub samples: usize,
    pub dropped_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instantaneous_fit: Option<GainFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_fit: Option<GainFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub stats: CampaignStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_instantaneous_fit: Option<GainFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_average_fit: Option<GainFit>,
    pub ensemble_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSweepSummary {
    pub mode: WiringMode,
    pub points: usize,
    pub min_total_ms: T1Limit,
    pub area_at_min_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudgetReport {
    pub budget: LossBudget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GateGeometry>,
    /// The same circuit in every wiring mode.
    pub modes: Vec<LossBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<AreaSweepSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSummary {
    pub defects: usize,
    pub field_immune_defects: usize,
    pub thermal_fluctuators: usize,
    pub metastable_fluctuators: usize,
    pub background_t1_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunResult {
    Spectroscopy(SpectroscopySummary),
    Optimize(OptimizeSummary),
    Benchmark(BenchmarkSummary),
    Campaign(CampaignSummary),
    LossBudget(LossBudgetReport),
    GenerateBath(BathSummary),
}

/// Deterministic part of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub result: RunResult,
}

/// Wall-clock part of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub elapsed_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub tables: Vec<Table>,
    /// Set by `generate-bath`.
    pub environment: Option<QubitEnvironment>,
}

fn background_t1(env: &QubitEnvironment) -> f64 {
    1.0 / env.background_gamma()
}

fn raster_table(raster: &SwapRaster) -> Table {
    let mut header = vec!["freq_ghz".to_string()];
    header.extend(raster.fields_v_per_m.iter().map(|f| num(*f)));
    let mut t = Table {
        name: "raster.csv".into(),
        header,
        rows: Vec::new(),
    };
    for (j, f) in raster.frequencies_ghz.iter().enumerate() {
        let mut row = vec![num(*f)];
        row.extend(raster.populations.iter().map(|col| num(col[j])));
        t.push(row);
    }
    t
}

fn optimization_tables(opt_result: &OptimizationResult) -> Vec<Table> {
    let mut coarse = Table::new("coarse.csv", &["field_v_per_m", "t1_us", "smoothed_t1_us"]);
    for p in &opt_result.coarse_curve {
        coarse.push(vec![num(p.field_v_per_m), num(p.t1_us), num(p.smoothed_t1_us)]);
    }
    let mut fine = Table::new("fine.csv", &["field_v_per_m", "t1_us"]);
    for p in &opt_result.fine_curve {
        fine.push(vec![num(p.field_v_per_m), num(p.t1_us)]);
    }
    vec![coarse, fine]
}

fn gain_table(name: &str, gains: &GainSeries) -> Table {
    let mut t = Table::new(name, &["t_s", "instantaneous_gain", "average_gain"]);
    for (i, a) in gains.instantaneous.iter().zip(&gains.average) {
        t.push(vec![num(i.t_s), num(i.gain), num(a.gain)]);
    }
    t
}

fn series_rows(t: &mut Table, record: &BenchmarkRecord, with_freq: bool) {
    let n = record.reference_series.len().max(record.optimized_series.len());
    for k in 0..n {
        let r = record.reference_series.get(k);
        let o = record.optimized_series.get(k);
        let mut row = Vec::new();
        if with_freq {
            row.push(num(record.qubit_freq_ghz));
        }
        row.push(num(r.or(o).map(|p| p.t_s).unwrap_or(f64::NAN)));
        row.push(opt(r.and_then(|p| p.t1_us)));
        row.push(opt(o.and_then(|p| p.t1_us)));
        t.push(row);
    }
}

fn run_spectroscopy(config: &RunConfig, env: &mut QubitEnvironment) -> Result<(RunResult, Vec<Table>)> {
    let s = &config.spectroscopy;
    let raster = swap_spectroscopy(env, &s.frequencies(), &s.fields(), s.hold_time_us, s.column_dwell_s)?;
    let summary = SpectroscopySummary {
        freq_points: raster.frequencies_ghz.len(),
        field_points: raster.fields_v_per_m.len(),
        hold_time_us: raster.hold_time_us,
        min_population: raster
            .populations
            .iter()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        darkest_frequency_ghz: (0..raster.fields_v_per_m.len())
            .map(|i| raster.frequencies_ghz[raster.column_argmin(i)])
            .collect(),
    };
    Ok((RunResult::Spectroscopy(summary), vec![raster_table(&raster)]))
}

fn run_optimize(config: &RunConfig, env: &mut QubitEnvironment) -> Result<(RunResult, Vec<Table>)> {
    let cfg = config.measurement.resolve(background_t1(env))?;
    let f = config.qubit_freq_ghz;
    let before = 1.0 / env.relaxation_rate(f);
    let result = optimize(env, f, &config.plan, &cfg)?;
    let after = 1.0 / env.relaxation_rate(f);
    let tables = optimization_tables(&result);
    Ok((
        RunResult::Optimize(OptimizeSummary {
            qubit_freq_ghz: f,
            true_t1_before_us: before,
            true_t1_after_us: after,
            optimization: result,
        }),
        tables,
    ))
}

fn run_single_benchmark(config: &RunConfig, env: &mut QubitEnvironment) -> Result<(RunResult, Vec<Table>)> {
    let cfg = config.measurement.resolve(background_t1(env))?;
    config.schedule.validate(&cfg)?;
    let record = run_benchmark(env, config.qubit_freq_ghz, &config.schedule, &config.plan, &cfg)?;
    let gains = gain_series(&record);
    let mut series = Table::new("series.csv", &["t_s", "reference_t1_us", "optimized_t1_us"]);
    series_rows(&mut series, &record, false);
    let mut tables = vec![series, gain_table("gain.csv", &gains)];
    if let Some(o) = &record.optimization {
        tables.extend(optimization_tables(o));
    }
    let summary = BenchmarkSummary {
        qubit_freq_ghz: record.qubit_freq_ghz,
        chosen_field_v_per_m: record.chosen_field_v_per_m,
        mean_reference_us: record.mean_reference_us,
        mean_optimized_us: record.mean_optimized_us,
        mean_gain: record.mean_gain,
        std_reference_us: record.std_reference_us,
        std_optimized_us: record.std_optimized_us,
        samples: record.reference_series.len(),
        dropped_samples: gains.dropped.len(),
        instantaneous_fit: fit_gain_decay(&gains.instantaneous),
        average_fit: fit_gain_decay(&gains.average),
        optimization: record.optimization,
        optimization_error: record.optimization_error,
    };
    Ok((RunResult::Benchmark(summary), tables))
}

fn run_campaign_command(config: &RunConfig, env: &QubitEnvironment) -> Result<(RunResult, Vec<Table>)> {
    let cfg = config.measurement.resolve(background_t1(env))?;
    config.campaign.schedule.validate(&cfg)?;
    let result = run_campaign_on(env, &config.campaign, &config.plan, &cfg, config.seed)?;
    let mut table = Table::new(
        "campaign.csv",
        &[
            "qubit_freq_ghz",
            "chosen_field_v_per_m",
            "mean_reference_us",
            "mean_optimized_us",
            "std_reference_us",
            "std_optimized_us",
            "mean_gain",
        ],
    );
    for r in &result.stats.table {
        table.push(vec![
            num(r.qubit_freq_ghz),
            num(r.chosen_field_v_per_m),
            num(r.mean_reference_us),
            num(r.mean_optimized_us),
            num(r.std_reference_us),
            num(r.std_optimized_us),
            num(r.mean_gain),
        ]);
    }
    let mut series = Table::new(
        "series.csv",
        &["qubit_freq_ghz", "t_s", "reference_t1_us", "optimized_t1_us"],
    );
    let mut records: Vec<&BenchmarkRecord> = result.records.iter().collect();
    records.sort_by(|a, b| a.qubit_freq_ghz.total_cmp(&b.qubit_freq_ghz));
    for r in records {
        series_rows(&mut series, r, true);
    }
    let tables = vec![table, series, gain_table("ensemble_gain.csv", &result.ensemble_gain)];
    let summary = CampaignSummary {
        ensemble_instantaneous_fit: result.ensemble_gain.instantaneous_fit,
        ensemble_average_fit: result.ensemble_gain.average_fit,
        ensemble_dropped: result.ensemble_gain.dropped.len(),
        stats: result.stats,
    };
    Ok((RunResult::Campaign(summary), tables))
}

fn area_table(points: &[AreaPoint]) -> Table {
    let mut t = Table::new(
        "area_sweep.csv",
        &[
            "area_m2",
            "c_c_ff",
            "c_f_ff",
            "f01_ghz",
            "t1_radiative_ms",
            "t1_dielectric_ms",
            "t1_total_ms",
        ],
    );
    for p in points {
        t.push(vec![
            num(p.area_m2),
            num(p.c_c_ff),
            num(p.c_f_ff),
            num(p.f01_ghz),
            opt(p.t1_radiative_ms.ms()),
            opt(p.t1_dielectric_ms.ms()),
            opt(p.t1_total_ms.ms()),
        ]);
    }
    t
}

fn run_loss_budget(config: &RunConfig) -> Result<(RunResult, Vec<Table>)> {
    let spec = &config.loss_budget;
    let (mut params, geometry) = spec.circuit.resolve()?;
    if let Some(mode) = spec.mode {
        params.mode = mode;
    }
    let budget = evaluate(&params)?;
    let modes = WiringMode::ALL
        .into_iter()
        .map(|m| {
            let mut p = params.clone();
            p.mode = m;
            evaluate(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    let sweep = match spec.sweep {
        None => None,
        Some(s) => {
            let geometry = geometry.as_ref().ok_or_else(|| {
                Error::Config("an area sweep needs a gate geometry (reference circuit or custom geometry)".into())
            })?;
            let areas = area_grid(s.min_m2, s.max_m2, s.points)?;
            let points = sweep_gate_area(&params, geometry, &areas, params.mode)?;
            let worst = points
                .iter()
                .max_by(|a, b| a.t1_total_ms.rate_per_ms().total_cmp(&b.t1_total_ms.rate_per_ms()))
                .expect("area grid is non-empty");
            let summary = AreaSweepSummary {
                mode: params.mode,
                points: points.len(),
                min_total_ms: worst.t1_total_ms,
                area_at_min_m2: worst.area_m2,
            };
            tables.push(area_table(&points));
            Some(summary)
        }
    };
    Ok((
        RunResult::LossBudget(LossBudgetReport {
            budget,
            geometry,
            modes,
            sweep,
        }),
        tables,
    ))
}

fn bath_summary(env: &QubitEnvironment) -> BathSummary {
    let metastable = env.fluctuators().iter().filter(|f| f.is_metastable()).count();
    BathSummary {
        defects: env.defects().len(),
        field_immune_defects: env
            .defects()
            .iter()
            .filter(|d| d.dipole_e_angstrom == 0.0)
            .count(),
        thermal_fluctuators: env.fluctuators().len() - metastable,
        metastable_fluctuators: metastable,
        background_t1_us: background_t1(env),
    }
}

/// Run the configured command without writing anything.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut environment = None;
    let (result, tables) = match config.command {
        Command::LossBudget => run_loss_budget(config)?,
        command => {
            let mut env = config.environment.load(config.seed)?;
            match command {
                Command::Spectroscopy => run_spectroscopy(config, &mut env)?,
                Command::Optimize => run_optimize(config, &mut env)?,
                Command::Benchmark => run_single_benchmark(config, &mut env)?,
                Command::Campaign => run_campaign_command(config, &env)?,
                Command::GenerateBath => {
                    let summary = bath_summary(&env);
                    environment = Some(env);
                    (RunResult::GenerateBath(summary), Vec::new())
                }
                Command::LossBudget => unreachable!(),
            }
        }
    };
    Ok(RunOutput {
        record: RunRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config.hash(),
            config: config.snapshot(),
            result,
        },
        tables,
        environment,
    })
}

/// Write every artifact of `output` into `dir`. Returns the written paths.
pub fn write_outputs(dir: &Path, output: &RunOutput, metadata: &RunMetadata) -> Result<Vec<PathBuf>> {
    io::create_dir(dir)?;
    let hash = &output.record.config_hash;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    io::write_json(&summary, &output.record)?;
    written.push(summary);
    let meta = dir.join("metadata.json");
    io::write_json(&meta, metadata)?;
    written.push(meta);
    for t in &output.tables {
        written.push(io::write_table(dir, t, hash)?);
    }
    if let Some(env) = &output.environment {
        let path = dir.join("environment.json");
        io::write_json(&path, env)?;
        written.push(path);
    }
    Ok(written)
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Execute, time, and write outputs when `config.output_dir` is set.
pub fn run(config: &RunConfig) -> Result<(RunOutput, RunMetadata, Vec<PathBuf>)> {
    let started_unix_s = unix_now();
    let clock = Instant::now();
    let output = execute(config)?;
    let metadata = RunMetadata {
        config_hash: output.record.config_hash.clone(),
        tool_version: TOOL_VERSION.to_string(),
        started_unix_s,
        finished_unix_s: unix_now(),
        elapsed_s: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    let written = match &config.output_dir {
        Some(dir) => write_outputs(dir, &output, &metadata)?,
        None => Vec::new(),
    };
    Ok((output, metadata, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CircuitSpec;
    use crate::config::GateReference;

    #[test]
    fn loss_budget_global_reference() {
        let out = execute(&RunConfig::new(Command::LossBudget)).unwrap();
        let RunResult::LossBudget(report) = out.record.result else {
            panic!("wrong result kind")
        };
        let t1 = report.budget.t1_total_ms.ms().unwrap();
        assert!((3.0..12.0).contains(&t1), "{t1}");
        assert_eq!(report.modes.len(), 3);
    }

    #[test]
    fn sweep_without_geometry_is_rejected() {
        let (params, _) = CircuitSpec::Reference(GateReference::Local).resolve().unwrap();
        let mut cfg = RunConfig::new(Command::LossBudget);
        cfg.loss_budget.circuit = CircuitSpec::Custom { params, geometry: None };
        cfg.loss_budget.sweep = Some("1e-8:1e-6:3".parse().unwrap());
        assert!(matches!(execute(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn generate_bath_returns_environment() {
        let out = execute(&RunConfig::new(Command::GenerateBath)).unwrap();
        let env = out.environment.unwrap();
        let RunResult::GenerateBath(s) = out.record.result else {
            panic!("wrong result kind")
        };
        assert_eq!(s.defects, env.defects().len());
        assert_eq!(s.field_immune_defects, 1);
    }
}
