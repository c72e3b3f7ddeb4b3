//! Run configuration.
//!
//! A [`RunConfig`] is a JSON document. Every section has defaults, so `{}`
//! with a command is a valid configuration. Unknown fields are rejected and
//! reported with their dotted path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::{generate_bath, BathSpec};
use crate::benchmark::{CampaignConfig, MonitorSchedule};
use crate::environment::QubitEnvironment;
use crate::loss_budget::{
    global_gate_reference, local_gate_reference, params_from_geometry, CircuitParams, GateGeometry,
    WiringMode,
};
use crate::measurement::{log_delay_grid, MeasurementConfig, DEFAULT_DELAY_POINTS, DEFAULT_MAX_DELAY_FACTOR, DEFAULT_MIN_DELAY_US};
use crate::optimizer::SweepPlan;
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectroscopy,
    Optimize,
    Benchmark,
    Campaign,
    LossBudget,
    GenerateBath,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Spectroscopy,
        Command::Optimize,
        Command::Benchmark,
        Command::Campaign,
        Command::LossBudget,
        Command::GenerateBath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectroscopy => "spectroscopy",
            Command::Optimize => "optimize",
            Command::Benchmark => "benchmark",
            Command::Campaign => "campaign",
            Command::LossBudget => "loss-budget",
            Command::GenerateBath => "generate-bath",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown command `{s}`")))
    }
}

/// Where the qubit environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentSource {
    /// Random bath drawn from the run seed.
    Generate(BathSpec),
    /// Environment document embedded in the config.
    Inline(QubitEnvironment),
    /// Path to an environment document, relative to the working directory.
    File(PathBuf),
}

impl Default for EnvironmentSource {
    fn default() -> Self {
        EnvironmentSource::Generate(BathSpec::default())
    }
}

impl EnvironmentSource {
    pub fn load(&self, seed: u64) -> Result<QubitEnvironment> {
        match self {
            EnvironmentSource::Generate(spec) => generate_bath(spec, seed),
            EnvironmentSource::Inline(env) => Ok(env.clone()),
            EnvironmentSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                from_json_str(&text)
            }
        }
    }
}

/// Measurement protocol. Unset fields take the defaults of
/// [`MeasurementConfig::for_expected_t1`]; without an explicit delay grid the
/// grid is scaled to the environment's background T1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_grid_us: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots_per_delay: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_wall_time_s: Option<f64>,
    pub noiseless: bool,
}

impl MeasurementSpec {
    pub fn resolve(&self, expected_t1_us: f64) -> Result<MeasurementConfig> {
        let mut cfg = MeasurementConfig::for_expected_t1(expected_t1_us);
        if let Some(grid) = &self.delay_grid_us {
            cfg.delay_grid_us = grid.clone();
        } else if !(expected_t1_us.is_finite() && expected_t1_us > DEFAULT_MIN_DELAY_US) {
            return Err(Error::Config(format!(
                "cannot scale the delay grid to a background T1 of {expected_t1_us} µs; set measurement.delay_grid_us"
            )));
        } else {
            cfg.delay_grid_us = log_delay_grid(
                DEFAULT_MIN_DELAY_US,
                DEFAULT_MAX_DELAY_FACTOR * expected_t1_us,
                DEFAULT_DELAY_POINTS,
            );
        }
        if let Some(s) = self.shots_per_delay {
            cfg.shots_per_delay = s;
        }
        if let Some(f) = self.readout_fidelity {
            cfg.readout_fidelity = f;
        }
        if let Some(w) = self.measurement_wall_time_s {
            cfg.measurement_wall_time_s = w;
        }
        cfg.noiseless = self.noiseless;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroscopySpec {
    pub freq_min_ghz: f64,
    pub freq_max_ghz: f64,
    pub freq_points: usize,
    pub field_min_v_per_m: f64,
    pub field_max_v_per_m: f64,
    pub field_points: usize,
    pub hold_time_us: f64,
    /// Simulated time spent on one field column, s.
    pub column_dwell_s: f64,
}

impl Default for SpectroscopySpec {
    fn default() -> Self {
        Self {
            freq_min_ghz: 4.5,
            freq_max_ghz: 5.5,
            freq_points: 201,
            field_min_v_per_m: -60e3,
            field_max_v_per_m: 60e3,
            field_points: 121,
            hold_time_us: 10.0,
            column_dwell_s: 10.0,
        }
    }
}

fn linear_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![min],
        _ => (0..n)
            .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SpectroscopySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq_min_ghz > 0.0 && self.freq_max_ghz >= self.freq_min_ghz) {
            return Err(Error::Config("spectroscopy: need 0 < freq_min <= freq_max".into()));
        }
        if self.freq_points == 0 || self.field_points == 0 {
            return Err(Error::Config("spectroscopy: grids need at least one point".into()));
        }
        if !(self.field_min_v_per_m.is_finite() && self.field_max_v_per_m.is_finite()) {
            return Err(Error::Config("spectroscopy: field bounds must be finite".into()));
        }
        if !(self.column_dwell_s >= 0.0 && self.column_dwell_s.is_finite()) {
            return Err(Error::Config("spectroscopy: column_dwell_s must be >= 0".into()));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        linear_grid(self.freq_min_ghz, self.freq_max_ghz, self.freq_points)
    }

    pub fn fields(&self) -> Vec<f64> {
        linear_grid(self.field_min_v_per_m, self.field_max_v_per_m, self.field_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReference {
    Global,
    Local,
}

/// Circuit for the loss budget: one of the built-in gate designs, or explicit
/// parameters. With a custom `geometry` the coupling and filter capacitances
/// of `params` are replaced by the geometric ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitSpec {
    Reference(GateReference),
    Custom {
        params: CircuitParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry: Option<GateGeometry>,
    },
}

impl CircuitSpec {
    pub fn resolve(&self) -> Result<(CircuitParams, Option<GateGeometry>)> {
        match self {
            CircuitSpec::Reference(GateReference::Global) => {
                global_gate_reference().map(|(p, g)| (p, Some(g)))
            }
            CircuitSpec::Reference(GateReference::Local) => {
                local_gate_reference().map(|(p, g)| (p, Some(g)))
            }
            CircuitSpec::Custom { params, geometry: None } => Ok((params.clone(), None)),
            CircuitSpec::Custom {
                params,
                geometry: Some(g),
            } => Ok((params_from_geometry(params, g)?, Some(g.clone()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSweep {
    pub min_m2: f64,
    pub max_m2: f64,
    pub points: usize,
}

impl std::str::FromStr for AreaSweep {
    type Err = Error;

    /// Parse `min:max:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("area sweep must look like min:max:n, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(AreaSweep {
            min_m2: parts[0].trim().parse().map_err(|_| bad())?,
            max_m2: parts[1].trim().parse().map_err(|_| bad())?,
            points: parts[2].trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossBudgetSpec {
    pub circuit: CircuitSpec,
    /// Overrides the wiring mode of the circuit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<WiringMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<AreaSweep>,
}

impl Default for LossBudgetSpec {
    fn default() -> Self {
        Self {
            circuit: CircuitSpec::Reference(GateReference::Global),
            mode: None,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub seed: u64,
    pub environment: EnvironmentSource,
    /// Qubit frequency for `optimize` and `benchmark`.
    pub qubit_freq_ghz: f64,
    pub plan: SweepPlan,
    pub measurement: MeasurementSpec,
    /// Monitoring schedule for `benchmark`.
    pub schedule: MonitorSchedule,
    pub campaign: CampaignConfig,
    pub spectroscopy: SpectroscopySpec,
    pub loss_budget: LossBudgetSpec,
    /// Not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            command: Command::Campaign,
            seed: 0,
            environment: EnvironmentSource::default(),
            qubit_freq_ghz: 5.0,
            plan: SweepPlan::default(),
            measurement: MeasurementSpec::default(),
            schedule: MonitorSchedule::default(),
            campaign: CampaignConfig::default(),
            spectroscopy: SpectroscopySpec::default(),
            loss_budget: LossBudgetSpec::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            ..Self::default()
        }
    }

    /// Checks that do not need the environment.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.command {
            Command::Optimize | Command::Benchmark => {
                if !(self.qubit_freq_ghz > 0.0 && self.qubit_freq_ghz.is_finite()) {
                    return Err(Error::Config("qubit_freq_ghz must be > 0".into()));
                }
                self.plan.validate()
            }
            Command::Campaign => {
                self.campaign.validate()?;
                self.plan.validate()
            }
            Command::Spectroscopy => self.spectroscopy.validate(),
            Command::LossBudget | Command::GenerateBath => Ok(()),
        }
    }

    /// Copy with the output directory cleared; this is what gets hashed and
    /// recorded.
    pub fn snapshot(&self) -> RunConfig {
        RunConfig {
            output_dir: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON of [`RunConfig::snapshot`], hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.snapshot()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Deserialize JSON, reporting the field path of the first violation.
pub fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = from_json_str(r#"{"command":"loss-budget"}"#).unwrap();
        assert_eq!(cfg.command, Command::LossBudget);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.plan, SweepPlan::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = RunConfig::new(Command::Benchmark);
        cfg.seed = u64::MAX;
        cfg.measurement.shots_per_delay = Some(300);
        cfg.loss_budget.sweep = Some("1e-8:1e-4:5".parse().unwrap());
        cfg.loss_budget.mode = Some(WiringMode::Floating);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_field_reports_path() {
        let err = from_json_str::<RunConfig>(r#"{"command":"campaign","plan":{"stepp":1}}"#).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "plan.stepp"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seed() {
        let a = RunConfig::new(Command::Campaign);
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn auto_delay_grid_follows_background() {
        let cfg = MeasurementSpec::default().resolve(80.0).unwrap();
        assert!((cfg.max_delay() - 240.0).abs() < 1e-9);
        let spec = MeasurementSpec {
            shots_per_delay: Some(10),
            ..Default::default()
        };
        assert_eq!(spec.resolve(80.0).unwrap().shots_per_delay, 10);
    }

    #[test]
    fn area_sweep_parsing() {
        let s: AreaSweep = "1e-8:1e-4:9".parse().unwrap();
        assert_eq!((s.min_m2, s.max_m2, s.points), (1e-8, 1e-4, 9));
        assert!("1:2".parse::<AreaSweep>().is_err());
        assert!("a:2:3".parse::<AreaSweep>().is_err());
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
        assert!("plot".parse::<Command>().is_err());
    }
}
