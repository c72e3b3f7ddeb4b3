//! Emulated T1 measurements.
//!
//! A measurement excites the qubit, waits for each delay of the grid and reads
//! out the excited population with `shots_per_delay` single shots. Each shot is
//! misassigned with probability `1 − readout_fidelity`. The decay rate is
//! frozen for the duration of one trace; afterwards the environment clock and
//! its thermal fluctuators advance by `measurement_wall_time_s`.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::environment::QubitEnvironment;
use crate::fit::fit_decay;
use crate::{Error, Result};

/// Default number of delay points.
pub const DEFAULT_DELAY_POINTS: usize = 40;
/// Default shortest delay, µs.
pub const DEFAULT_MIN_DELAY_US: f64 = 0.5;
/// Default longest delay as a multiple of the expected T1.
pub const DEFAULT_MAX_DELAY_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Strictly increasing delays, µs.
    pub delay_grid_us: Vec<f64>,
    pub shots_per_delay: u32,
    /// Probability of assigning a shot to the correct state, in (0.5, 1].
    pub readout_fidelity: f64,
    /// Simulated duration of one full measurement, s.
    pub measurement_wall_time_s: f64,
    /// Use exact expectation values instead of sampled shots.
    #[serde(default)]
    pub noiseless: bool,
}

/// Logarithmically spaced grid of `points` delays from `min_us` to `max_us`.
pub fn log_delay_grid(min_us: f64, max_us: f64, points: usize) -> Vec<f64> {
    let steps = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| min_us * (max_us / min_us).powf(i as f64 / steps))
        .collect()
}

impl MeasurementConfig {
    /// Default protocol for a qubit with T1 around `expected_t1_us`: 40 log
    /// spaced delays from 0.5 µs to 3·T1, 1000 shots, 99% readout fidelity,
    /// 2 s per measurement.
    pub fn for_expected_t1(expected_t1_us: f64) -> Self {
        Self {
            delay_grid_us: log_delay_grid(
                DEFAULT_MIN_DELAY_US,
                DEFAULT_MAX_DELAY_FACTOR * expected_t1_us,
                DEFAULT_DELAY_POINTS,
            ),
            shots_per_delay: 1000,
            readout_fidelity: 0.99,
            measurement_wall_time_s: 2.0,
            noiseless: false,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let grid = &self.delay_grid_us;
        if grid.len() < 2 {
            return Err(Error::Config("delay grid needs at least 2 points".into()));
        }
        if grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Config("delays must be finite and >= 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("delay grid must be strictly increasing".into()));
        }
        if self.shots_per_delay == 0 {
            return Err(Error::Config("shots_per_delay must be >= 1".into()));
        }
        if !(self.readout_fidelity > 0.5 && self.readout_fidelity <= 1.0) {
            return Err(Error::Config(format!(
                "readout_fidelity must be in (0.5, 1], got {}",
                self.readout_fidelity
            )));
        }
        if !(self.measurement_wall_time_s >= 0.0 && self.measurement_wall_time_s.is_finite()) {
            return Err(Error::Config("measurement_wall_time_s must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Longest delay, µs.
    pub fn max_delay(&self) -> f64 {
        self.delay_grid_us.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub delay_us: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Measurement {
    pub trace: Vec<TracePoint>,
    /// Fitted T1 in µs; NaN-free only when `fit_ok`.
    pub t1_fit_us: f64,
    pub t1_stderr_us: f64,
    pub fit_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Decay rate that generated the trace, 1/µs.
    pub true_gamma_per_us: f64,
    /// Environment clock at the start of the measurement, s.
    pub started_at_s: f64,
}

impl T1Measurement {
    pub fn t1(&self) -> Option<f64> {
        self.fit_ok.then_some(self.t1_fit_us)
    }
}

/// Measure T1 at `qubit_freq_ghz` and advance the environment by one
/// measurement duration.
pub fn measure_t1(
    env: &mut QubitEnvironment,
    qubit_freq_ghz: f64,
    cfg: &MeasurementConfig,
) -> Result<T1Measurement> {
    cfg.validate()?;
    if !(qubit_freq_ghz > 0.0) {
        return Err(Error::Argument(format!(
            "qubit frequency must be > 0, got {qubit_freq_ghz}"
        )));
    }
    let gamma = env.relaxation_rate(qubit_freq_ghz);
    let started_at_s = env.clock();
    let fidelity = cfg.readout_fidelity;
    let trace: Vec<TracePoint> = cfg
        .delay_grid_us
        .iter()
        .map(|&delay| {
            let excited = (-gamma * delay).exp();
            let p_read = fidelity * excited + (1.0 - fidelity) * (1.0 - excited);
            let probability = if cfg.noiseless {
                p_read
            } else {
                let n = cfg.shots_per_delay as u64;
                let dist = Binomial::new(n, p_read.clamp(0.0, 1.0))
                    .expect("probability clamped to [0, 1]");
                dist.sample(env.rng_mut()) as f64 / n as f64
            };
            TracePoint {
                delay_us: delay,
                probability,
            }
        })
        .collect();

    let (ts, ys): (Vec<f64>, Vec<f64>) = trace.iter().map(|p| (p.delay_us, p.probability)).unzip();
    let (t1_fit_us, t1_stderr_us, fit_ok, diagnostic) = match fit_decay(&ts, &ys) {
        Ok(fit) => (fit.t1, fit.t1_stderr, true, None),
        Err(msg) => (f64::NAN, f64::NAN, false, Some(msg)),
    };
    if fit_ok && t1_fit_us > cfg.max_delay() {
        log::debug!(
            "fitted T1 {t1_fit_us:.2} µs exceeds the longest delay {:.2} µs",
            cfg.max_delay()
        );
    }
    env.advance_fluctuators(cfg.measurement_wall_time_s)?;
    Ok(T1Measurement {
        trace,
        t1_fit_us,
        t1_stderr_us,
        fit_ok,
        diagnostic,
        true_gamma_per_us: gamma,
        started_at_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TlsDefect;

    #[test]
    fn noiseless_trace_recovers_t1() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0).noiseless();
        let m = measure_t1(&mut env, 5.0, &cfg).unwrap();
        assert!(m.fit_ok);
        assert!((m.t1_fit_us - 20.0).abs() < 0.02, "{}", m.t1_fit_us);
    }

    #[test]
    fn far_detuned_bath_gives_background_t1() {
        let defects = vec![TlsDefect::new(0.0, 3.0, 0.1, 1.0, 1.0)];
        let mut env = QubitEnvironment::new(defects, vec![], 0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0).noiseless();
        let m = measure_t1(&mut env, 5.0, &cfg).unwrap();
        assert!((m.t1_fit_us - 20.0).abs() / 20.0 < 1e-3);
    }

    #[test]
    fn clock_advances_by_wall_time() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0);
        measure_t1(&mut env, 5.0, &cfg).unwrap();
        measure_t1(&mut env, 5.0, &cfg).unwrap();
        assert_eq!(env.clock(), 4.0);
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let mut env = QubitEnvironment::empty(0.05, 4).unwrap();
        let mut cfg = MeasurementConfig::for_expected_t1(20.0);
        cfg.shots_per_delay = 3;
        for _ in 0..20 {
            let m = measure_t1(&mut env, 5.0, &cfg).unwrap();
            assert!(m.trace.iter().all(|p| (0.0..=1.0).contains(&p.probability)));
            if m.fit_ok {
                assert!(m.t1_fit_us > 0.0);
            } else {
                assert!(m.diagnostic.is_some());
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = MeasurementConfig::for_expected_t1(20.0);
        let mut c = base.clone();
        c.delay_grid_us = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.delay_grid_us = vec![1.0, 1.0, 2.0];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.shots_per_delay = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.readout_fidelity = 0.5;
        assert!(c.validate().is_err());
        let mut c = base;
        c.readout_fidelity = 1.0;
        assert!(c.validate().is_ok());
    }
}
