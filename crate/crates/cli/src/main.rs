//! `tlsopt` command line tool.
//!
//! Every subcommand builds a [`RunConfig`] (from `--config` or defaults),
//! applies the flags on top and hands it to the runner. Errors are printed to
//! stderr as a JSON document `{"error": {"kind", "message", ...}}`; usage
//! errors exit with status 2, everything else with 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tlsopt_core::config::{load_config, AreaSweep, CircuitSpec, Command, GateReference, RunConfig};
use tlsopt_core::io::read_table;
use tlsopt_core::loss_budget::WiringMode;
use tlsopt_core::runner::run;
use tlsopt_core::Error;

#[derive(Parser, Debug)]
#[command(name = "tlsopt", version, about = "Simulate and optimize TLS-limited transmon T1 with a DC electric field")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON). Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory. Without one the summary is printed to stdout.
    #[arg(long, global = true, env = "TLSOPT_OUT_DIR", value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ScheduleArgs {
    /// Monitoring window per phase, s.
    #[arg(long)]
    window: Option<f64>,
    /// Time between measurements, s.
    #[arg(long)]
    interval: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the command named in the config file.
    Run,
    /// Swap-spectroscopy raster over frequency and field.
    Spectroscopy,
    /// Two-pass field sweep at one qubit frequency.
    Optimize {
        #[arg(long, value_name = "GHZ")]
        freq: Option<f64>,
    },
    /// Reference and optimized T1 monitoring at one qubit frequency.
    Benchmark {
        #[arg(long, value_name = "GHZ")]
        freq: Option<f64>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Benchmark over a grid of qubit frequencies.
    Campaign {
        #[arg(long)]
        frequencies: Option<usize>,
        /// Freeze every fluctuator.
        #[arg(long)]
        no_fluctuators: bool,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// T1 limits imposed by the DC gate wiring.
    LossBudget {
        /// Built-in gate design.
        #[arg(long, value_parser = ["global", "local"])]
        reference: Option<String>,
        #[arg(long, value_parser = ["rf_50ohm", "dc_wire", "floating"])]
        mode: Option<String>,
        /// Gate-area sweep as min:max:n (m², log spaced).
        #[arg(long, value_name = "MIN:MAX:N")]
        sweep_area: Option<String>,
    },
    /// Draw a random defect bath and write it as an environment document.
    GenerateBath,
    /// Print a human-readable digest of an output directory.
    Report {
        dir: PathBuf,
    },
}

fn build_config(common: &Common, cmd: &Cmd) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let command = match cmd {
        Cmd::Run => {
            if common.config.is_none() {
                return Err(Error::Argument("`run` needs --config".into()));
            }
            cfg.command
        }
        Cmd::Spectroscopy => Command::Spectroscopy,
        Cmd::Optimize { .. } => Command::Optimize,
        Cmd::Benchmark { .. } => Command::Benchmark,
        Cmd::Campaign { .. } => Command::Campaign,
        Cmd::LossBudget { .. } => Command::LossBudget,
        Cmd::GenerateBath => Command::GenerateBath,
        Cmd::Report { .. } => unreachable!("report does not run a config"),
    };
    if common.config.is_some() && command != cfg.command && !matches!(cmd, Cmd::Run) {
        log::warn!(
            "config names command `{}`, running `{}`",
            cfg.command.name(),
            command.name()
        );
    }
    cfg.command = command;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    match cmd {
        Cmd::Optimize { freq } => {
            if let Some(f) = freq {
                cfg.qubit_freq_ghz = *f;
            }
        }
        Cmd::Benchmark { freq, schedule } => {
            if let Some(f) = freq {
                cfg.qubit_freq_ghz = *f;
            }
            apply_schedule(&mut cfg.schedule, schedule);
        }
        Cmd::Campaign {
            frequencies,
            no_fluctuators,
            schedule,
        } => {
            if let Some(n) = frequencies {
                cfg.campaign.frequencies = *n;
            }
            if *no_fluctuators {
                cfg.campaign.fluctuators = false;
            }
            apply_schedule(&mut cfg.campaign.schedule, schedule);
        }
        Cmd::LossBudget {
            reference,
            mode,
            sweep_area,
        } => {
            match reference.as_deref() {
                Some("global") => cfg.loss_budget.circuit = CircuitSpec::Reference(GateReference::Global),
                Some("local") => cfg.loss_budget.circuit = CircuitSpec::Reference(GateReference::Local),
                _ => {}
            }
            if let Some(m) = mode {
                cfg.loss_budget.mode = Some(m.parse::<WiringMode>()?);
            }
            if let Some(s) = sweep_area {
                cfg.loss_budget.sweep = Some(s.parse::<AreaSweep>()?);
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn apply_schedule(target: &mut tlsopt_core::benchmark::MonitorSchedule, args: &ScheduleArgs) {
    if let Some(w) = args.window {
        target.window_s = w;
    }
    if let Some(i) = args.interval {
        target.sample_interval_s = i;
    }
}

fn error_json(err: &Error) -> Value {
    let mut body = json!({ "kind": err.kind(), "message": err.to_string() });
    match err {
        Error::Schema { path, .. } => body["path"] = json!(path),
        Error::Io { path, .. } => body["file"] = json!(path),
        _ => {}
    }
    json!({ "error": body })
}

fn print_json(v: Value) -> Result<(), Error> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(&v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed reader (e.g. `| head`) is not an error.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn report(dir: &Path) -> Result<(), Error> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let summary: Value = serde_json::from_str(&text)?;
    let hash = summary["config_hash"].as_str().unwrap_or_default().to_string();
    let result = &summary["result"];
    println!("command      {}", summary["config"]["command"].as_str().unwrap_or("?"));
    println!("seed         {}", summary["config"]["seed"]);
    println!("config hash  {hash}");
    println!("tool version {}", summary["tool_version"].as_str().unwrap_or("?"));
    let fmt = |v: &Value| match v.as_f64() {
        Some(x) if x == 0.0 || (1e-3..1e6).contains(&x.abs()) => format!("{x:.4}"),
        Some(x) => format!("{x:.4e}"),
        None => "n/a".into(),
    };
    match result["kind"].as_str().unwrap_or_default() {
        "campaign" => {
            let s = &result["stats"];
            println!("frequencies  {}", s["records"]);
            println!("mean gain    {}", fmt(&s["mean_gain"]));
            println!("best gain    {}", fmt(&s["best_gain"]));
            println!(
                "fractions    improved {} / >10% {} / >20% {}",
                fmt(&s["fraction_improved"]),
                fmt(&s["fraction_above_10pct"]),
                fmt(&s["fraction_above_20pct"])
            );
            if let Some(p) = s["gain_trend"]["p_increasing"].as_f64() {
                println!("gain trend   p(increasing) = {p:.4}");
            }
            if let Some(fit) = result["ensemble_instantaneous_fit"].as_object() {
                println!(
                    "gain decay   A = {} B = {} min",
                    fmt(&fit["amplitude"]),
                    fmt(&fit["decay_time_min"])
                );
            }
        }
        "benchmark" => {
            println!("qubit        {} GHz", fmt(&result["qubit_freq_ghz"]));
            println!("field        {} V/m", fmt(&result["chosen_field_v_per_m"]));
            println!(
                "mean T1      {} -> {} us",
                fmt(&result["mean_reference_us"]),
                fmt(&result["mean_optimized_us"])
            );
            println!("mean gain    {}", fmt(&result["mean_gain"]));
        }
        "optimize" => {
            let o = &result["optimization"];
            println!("qubit        {} GHz", fmt(&result["qubit_freq_ghz"]));
            println!("chosen field {} V/m", fmt(&o["chosen_field_v_per_m"]));
            println!(
                "true T1      {} -> {} us",
                fmt(&result["true_t1_before_us"]),
                fmt(&result["true_t1_after_us"])
            );
        }
        "loss-budget" => {
            let b = &result["budget"];
            println!("mode         {}", b["mode"].as_str().unwrap_or("?"));
            println!("f01          {} GHz", fmt(&b["f01_ghz"]));
            println!(
                "T1 (ms)      radiative {} dielectric {} total {}",
                fmt(&b["t1_radiative_ms"]),
                fmt(&b["t1_dielectric_ms"]),
                fmt(&b["t1_total_ms"])
            );
            if let Some(s) = result["sweep"].as_object() {
                println!(
                    "area sweep   min total {} ms at {} m²",
                    fmt(&s["min_total_ms"]),
                    fmt(&s["area_at_min_m2"])
                );
            }
        }
        "spectroscopy" => {
            println!("raster       {} x {}", result["freq_points"], result["field_points"]);
            println!("min pop.     {}", fmt(&result["min_population"]));
        }
        "generate-bath" => {
            println!("defects      {}", result["defects"]);
            println!(
                "fluctuators  {} thermal, {} metastable",
                result["thermal_fluctuators"], result["metastable_fluctuators"]
            );
        }
        other => println!("result kind  {other}"),
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for p in entries {
        let (h, t) = read_table(&p)?;
        let status = if h == hash { "ok" } else { "HASH MISMATCH" };
        println!("{:<20} {:>7} rows  {status}", t.name, t.rows.len());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    if let Cmd::Report { dir } = &cli.command {
        return report(dir);
    }
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(format!("cannot set up {n} threads: {e}")))?;
    }
    let cfg = build_config(&cli.common, &cli.command)?;
    let (output, metadata, written) = run(&cfg)?;
    log::info!("{} finished in {:.2} s", cfg.command.name(), metadata.elapsed_s);
    if written.is_empty() {
        match &output.environment {
            Some(env) => print_json(serde_json::to_value(env)?)?,
            None => print_json(serde_json::to_value(&output.record)?)?,
        }
    } else {
        for p in written {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let doc = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{doc}");
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
