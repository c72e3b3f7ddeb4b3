//! Paired reference/optimized T1 monitoring and gain statistics.
//!
//! A benchmark monitors T1 at zero field for one window, runs the optimizer,
//! then monitors T1 at the chosen field for a second window, all on the same
//! evolving environment. Measurements are taken every `sample_interval_s`;
//! the environment idles between measurements so that the simulated clock
//! covers the full window even when the interval exceeds the measurement
//! duration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{generate_bath, BathSpec};
use crate::environment::QubitEnvironment;
use crate::fit::fit_pure_decay;
use crate::measurement::{measure_t1, MeasurementConfig};
use crate::optimizer::{optimize, OptimizationResult, SweepPlan};
use crate::rng::{derive_seed, FREQUENCY_STREAM};
use crate::stats::{mann_kendall, mean, std_dev, MannKendall};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSchedule {
    pub window_s: f64,
    /// Time between the starts of consecutive measurements. Must not be
    /// shorter than the measurement wall time.
    pub sample_interval_s: f64,
}

impl Default for MonitorSchedule {
    /// 30-minute window, one measurement every 2 s.
    fn default() -> Self {
        Self {
            window_s: 1800.0,
            sample_interval_s: 2.0,
        }
    }
}

impl MonitorSchedule {
    pub fn validate(&self, cfg: &MeasurementConfig) -> Result<()> {
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::Argument(format!(
                "monitoring window must be > 0, got {}",
                self.window_s
            )));
        }
        if !(self.sample_interval_s > 0.0 && self.sample_interval_s.is_finite()) {
            return Err(Error::Argument("sample interval must be > 0".into()));
        }
        if self.sample_interval_s < cfg.measurement_wall_time_s {
            return Err(Error::Argument(format!(
                "sample interval {} s is shorter than the measurement wall time {} s",
                self.sample_interval_s, cfg.measurement_wall_time_s
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        ((self.window_s / self.sample_interval_s) + 1e-9).floor().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Time since the start of the monitoring window, s.
    pub t_s: f64,
    /// `None` when the fit failed.
    pub t1_us: Option<f64>,
}

fn valid_t1s(series: &[SeriesPoint]) -> Vec<f64> {
    series.iter().filter_map(|p| p.t1_us).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub qubit_freq_ghz: f64,
    pub reference_series: Vec<SeriesPoint>,
    pub optimized_series: Vec<SeriesPoint>,
    pub chosen_field_v_per_m: f64,
    pub mean_reference_us: f64,
    pub mean_optimized_us: f64,
    pub mean_gain: f64,
    pub std_reference_us: f64,
    pub std_optimized_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization_error: Option<String>,
}

impl BenchmarkRecord {
    /// Assemble a record, computing the summary statistics from the series.
    pub fn from_series(
        qubit_freq_ghz: f64,
        reference_series: Vec<SeriesPoint>,
        optimized_series: Vec<SeriesPoint>,
        chosen_field_v_per_m: f64,
    ) -> Self {
        let r = valid_t1s(&reference_series);
        let o = valid_t1s(&optimized_series);
        let mean_reference_us = mean(&r);
        let mean_optimized_us = mean(&o);
        Self {
            qubit_freq_ghz,
            chosen_field_v_per_m,
            mean_reference_us,
            mean_optimized_us,
            mean_gain: (mean_optimized_us - mean_reference_us) / mean_reference_us,
            std_reference_us: std_dev(&r),
            std_optimized_us: std_dev(&o),
            reference_series,
            optimized_series,
            optimization: None,
            optimization_error: None,
        }
    }

    /// `std_optimized / std_reference − 1`.
    pub fn std_ratio_change(&self) -> f64 {
        self.std_optimized_us / self.std_reference_us - 1.0
    }
}

fn monitor(
    env: &mut QubitEnvironment,
    qubit_freq_ghz: f64,
    schedule: &MonitorSchedule,
    cfg: &MeasurementConfig,
) -> Result<Vec<SeriesPoint>> {
    let start = env.clock();
    let idle = schedule.sample_interval_s - cfg.measurement_wall_time_s;
    let mut series = Vec::with_capacity(schedule.samples());
    for _ in 0..schedule.samples() {
        let t_s = env.clock() - start;
        let m = measure_t1(env, qubit_freq_ghz, cfg)?;
        series.push(SeriesPoint { t_s, t1_us: m.t1() });
        env.advance_fluctuators(idle)?;
    }
    Ok(series)
}

/// Reference monitoring at zero field, optimization, then monitoring at the
/// chosen field. If the optimizer fails the error is recorded and the second
/// window is monitored at zero field.
pub fn run_benchmark(
    env: &mut QubitEnvironment,
    qubit_freq_ghz: f64,
    schedule: &MonitorSchedule,
    plan: &SweepPlan,
    cfg: &MeasurementConfig,
) -> Result<BenchmarkRecord> {
    schedule.validate(cfg)?;
    cfg.validate()?;
    plan.validate()?;
    env.set_field(0.0)?;
    let reference = monitor(env, qubit_freq_ghz, schedule, cfg)?;
    let (optimization, optimization_error, chosen) = match optimize(env, qubit_freq_ghz, plan, cfg) {
        Ok(r) => {
            let chosen = r.chosen_field_v_per_m;
            (Some(r), None, chosen)
        }
        Err(Error::Optimization(msg)) => {
            log::warn!("optimization at {qubit_freq_ghz} GHz failed: {msg}");
            env.set_field(0.0)?;
            (None, Some(msg), 0.0)
        }
        Err(e) => return Err(e),
    };
    let optimized = monitor(env, qubit_freq_ghz, schedule, cfg)?;
    let mut record = BenchmarkRecord::from_series(qubit_freq_ghz, reference, optimized, chosen);
    record.optimization = optimization;
    record.optimization_error = optimization_error;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub t_s: f64,
    pub gain: f64,
}

/// `gain(t) = A·exp(−t/B)` with B in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    pub amplitude: f64,
    pub decay_time_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSeries {
    pub instantaneous: Vec<GainPoint>,
    /// `average[k]` is the mean of `instantaneous[0..=k]`.
    pub average: Vec<GainPoint>,
    /// Sample indices dropped because a T1 was missing or the reference was
    /// not positive.
    pub dropped: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instantaneous_fit: Option<GainFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_fit: Option<GainFit>,
}

/// Fit `A·exp(−t/B)` to gain points; `None` when the fit fails.
pub fn fit_gain_decay(points: &[GainPoint]) -> Option<GainFit> {
    let ts: Vec<f64> = points.iter().map(|p| p.t_s / 60.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.gain).collect();
    match fit_pure_decay(&ts, &ys) {
        Ok(f) if f.amplitude.is_finite() && f.decay_time.is_finite() => Some(GainFit {
            amplitude: f.amplitude,
            decay_time_min: f.decay_time,
        }),
        Ok(_) => None,
        Err(msg) => {
            log::debug!("gain fit failed: {msg}");
            None
        }
    }
}

fn running_average(points: &[GainPoint]) -> Vec<GainPoint> {
    let mut sum = 0.0;
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            sum += p.gain;
            GainPoint {
                t_s: p.t_s,
                gain: sum / (k + 1) as f64,
            }
        })
        .collect()
}

fn assemble(instantaneous: Vec<GainPoint>, dropped: Vec<usize>, with_fit: bool) -> GainSeries {
    let average = running_average(&instantaneous);
    let (instantaneous_fit, average_fit) = if with_fit {
        (fit_gain_decay(&instantaneous), fit_gain_decay(&average))
    } else {
        (None, None)
    };
    GainSeries {
        instantaneous,
        average,
        dropped,
        instantaneous_fit,
        average_fit,
    }
}

/// Instantaneous and running-average gain of one record, pairing the two
/// series by index. No decay fit is attempted on a single record.
pub fn gain_series(record: &BenchmarkRecord) -> GainSeries {
    let mut instantaneous = Vec::new();
    let mut dropped = Vec::new();
    let n = record.reference_series.len().min(record.optimized_series.len());
    for k in 0..n {
        let r = record.reference_series[k];
        let o = record.optimized_series[k];
        match (r.t1_us, o.t1_us) {
            (Some(tr), Some(to)) if tr > 0.0 => instantaneous.push(GainPoint {
                t_s: o.t_s,
                gain: (to - tr) / tr,
            }),
            _ => dropped.push(k),
        }
    }
    assemble(instantaneous, dropped, false)
}

/// Instantaneous gain averaged over records at each sample index, with its
/// running average and exponential fits. An index is dropped only when every
/// record dropped it.
pub fn ensemble_gain(records: &[BenchmarkRecord]) -> GainSeries {
    let singles: Vec<GainSeries> = records.iter().map(gain_series).collect();
    let n = records
        .iter()
        .map(|r| r.reference_series.len().min(r.optimized_series.len()))
        .max()
        .unwrap_or(0);
    let mut sums = vec![(0.0, 0usize, f64::NAN); n];
    for (rec, single) in records.iter().zip(&singles) {
        let mut it = single.instantaneous.iter();
        for k in 0..rec.reference_series.len().min(rec.optimized_series.len()) {
            if single.dropped.binary_search(&k).is_ok() {
                continue;
            }
            let p = it.next().expect("one gain per kept index");
            let slot = &mut sums[k];
            slot.0 += p.gain;
            slot.1 += 1;
            if slot.2.is_nan() {
                slot.2 = p.t_s;
            }
        }
    }
    let mut instantaneous = Vec::new();
    let mut dropped = Vec::new();
    for (k, (sum, count, t_s)) in sums.into_iter().enumerate() {
        if count == 0 {
            dropped.push(k);
        } else {
            instantaneous.push(GainPoint {
                t_s,
                gain: sum / count as f64,
            });
        }
    }
    assemble(instantaneous, dropped, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub qubit_freq_ghz: f64,
    pub chosen_field_v_per_m: f64,
    pub mean_reference_us: f64,
    pub mean_optimized_us: f64,
    pub std_reference_us: f64,
    pub std_optimized_us: f64,
    pub mean_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub records: usize,
    pub mean_gain: f64,
    pub fraction_improved: f64,
    pub fraction_above_10pct: f64,
    pub fraction_above_20pct: f64,
    pub best_gain: f64,
    /// Mean of `std_optimized / std_reference − 1` over records with a
    /// positive reference spread.
    pub mean_std_ratio_change: f64,
    pub fraction_std_increased: f64,
    /// Mann-Kendall test on the ensemble instantaneous gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_trend: Option<MannKendall>,
    /// Rows sorted by qubit frequency.
    pub table: Vec<FrequencyRow>,
}

/// Campaign statistics. Records are sorted by frequency (then gain) before
/// any reduction, which makes the result independent of record order.
pub fn aggregate_campaign(records: &[BenchmarkRecord]) -> Result<CampaignStats> {
    if records.is_empty() {
        return Err(Error::Argument("campaign aggregation needs at least one record".into()));
    }
    let mut sorted: Vec<&BenchmarkRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.qubit_freq_ghz
            .total_cmp(&b.qubit_freq_ghz)
            .then(a.mean_gain.total_cmp(&b.mean_gain))
            .then(a.chosen_field_v_per_m.total_cmp(&b.chosen_field_v_per_m))
    });
    let n = sorted.len() as f64;
    let gains: Vec<f64> = sorted.iter().map(|r| r.mean_gain).collect();
    let fraction = |pred: &dyn Fn(f64) -> bool| gains.iter().filter(|g| pred(**g)).count() as f64 / n;
    let ratios: Vec<f64> = sorted
        .iter()
        .filter(|r| r.std_reference_us > 0.0)
        .map(|r| r.std_ratio_change())
        .collect();
    let std_up = sorted
        .iter()
        .filter(|r| r.std_optimized_us > r.std_reference_us)
        .count() as f64;
    let owned: Vec<BenchmarkRecord> = sorted.iter().map(|r| (*r).clone()).collect();
    let ensemble = ensemble_gain(&owned);
    let trend_values: Vec<f64> = ensemble.instantaneous.iter().map(|p| p.gain).collect();
    let gain_trend = (trend_values.len() >= 3).then(|| mann_kendall(&trend_values));
    Ok(CampaignStats {
        records: sorted.len(),
        mean_gain: mean(&gains),
        fraction_improved: fraction(&|g| g > 0.0),
        fraction_above_10pct: fraction(&|g| g > 0.1),
        fraction_above_20pct: fraction(&|g| g > 0.2),
        best_gain: gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean_std_ratio_change: if ratios.is_empty() { f64::NAN } else { mean(&ratios) },
        fraction_std_increased: std_up / n,
        gain_trend,
        table: sorted
            .iter()
            .map(|r| FrequencyRow {
                qubit_freq_ghz: r.qubit_freq_ghz,
                chosen_field_v_per_m: r.chosen_field_v_per_m,
                mean_reference_us: r.mean_reference_us,
                mean_optimized_us: r.mean_optimized_us,
                std_reference_us: r.std_reference_us,
                std_optimized_us: r.std_optimized_us,
                mean_gain: r.mean_gain,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub frequencies: usize,
    pub band_min_ghz: f64,
    pub band_max_ghz: f64,
    pub schedule: MonitorSchedule,
    pub fluctuators: bool,
}

impl Default for CampaignConfig {
    /// 59 frequencies uniformly spaced over 4.5–5.5 GHz, 30-minute windows.
    fn default() -> Self {
        Self {
            frequencies: 59,
            band_min_ghz: 4.5,
            band_max_ghz: 5.5,
            schedule: MonitorSchedule::default(),
            fluctuators: true,
        }
    }
}

impl CampaignConfig {
    pub fn frequency_grid(&self) -> Vec<f64> {
        match self.frequencies {
            0 => vec![],
            1 => vec![0.5 * (self.band_min_ghz + self.band_max_ghz)],
            n => (0..n)
                .map(|i| {
                    self.band_min_ghz
                        + (self.band_max_ghz - self.band_min_ghz) * i as f64 / (n - 1) as f64
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies == 0 {
            return Err(Error::Config("campaign needs at least one frequency".into()));
        }
        if !(self.band_min_ghz > 0.0 && self.band_max_ghz >= self.band_min_ghz) {
            return Err(Error::Config("campaign band must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub records: Vec<BenchmarkRecord>,
    pub stats: CampaignStats,
    pub ensemble_gain: GainSeries,
}

/// Benchmark every campaign frequency on its own copy of `base`. Copy `i`
/// draws from seed `derive_seed(seed, FREQUENCY_STREAM + i)`, so the result
/// does not depend on the number of worker threads. Each copy starts from a
/// fresh stationary draw of the thermal fluctuator states, as if the
/// frequencies had been measured far apart in time.
pub fn run_campaign_on(
    base: &QubitEnvironment,
    campaign: &CampaignConfig,
    plan: &SweepPlan,
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<CampaignResult> {
    campaign.validate()?;
    let base = if campaign.fluctuators {
        base.clone()
    } else {
        base.without_fluctuators()
    };
    let records = campaign
        .frequency_grid()
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let mut env = base.clone();
            env.reseed(derive_seed(seed, FREQUENCY_STREAM + i as u64));
            env.thermalize();
            run_benchmark(&mut env, f, &campaign.schedule, plan, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = aggregate_campaign(&records)?;
    let ensemble_gain = ensemble_gain(&records);
    Ok(CampaignResult {
        records,
        stats,
        ensemble_gain,
    })
}

/// Generate a bath from `spec` and `seed`, then run the campaign on it.
pub fn run_campaign(
    spec: &BathSpec,
    campaign: &CampaignConfig,
    plan: &SweepPlan,
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<CampaignResult> {
    let env = generate_bath(spec, seed)?;
    run_campaign_on(&env, campaign, plan, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(t1s: &[f64]) -> Vec<SeriesPoint> {
        t1s.iter()
            .enumerate()
            .map(|(k, &t)| SeriesPoint {
                t_s: 2.0 * k as f64,
                t1_us: Some(t),
            })
            .collect()
    }

    fn record_with_gain(f: f64, gain: f64) -> BenchmarkRecord {
        BenchmarkRecord::from_series(f, series(&[10.0, 10.0]), series(&[10.0 * (1.0 + gain); 2]), 0.0)
    }

    #[test]
    fn identical_series_give_zero_gain() {
        let r = BenchmarkRecord::from_series(5.0, series(&[10.0, 12.0, 9.0]), series(&[10.0, 12.0, 9.0]), 0.0);
        let g = gain_series(&r);
        assert!(g.instantaneous.iter().all(|p| p.gain == 0.0));
        assert_eq!(r.mean_gain, 0.0);
    }

    #[test]
    fn doubled_series_give_unit_gain() {
        let r = BenchmarkRecord::from_series(5.0, series(&[10.0, 12.0, 9.0]), series(&[20.0, 24.0, 18.0]), 0.0);
        let g = gain_series(&r);
        assert!(g.instantaneous.iter().all(|p| p.gain == 1.0));
        assert!(g.average.iter().all(|p| p.gain == 1.0));
    }

    #[test]
    fn missing_points_dropped() {
        let mut r = series(&[10.0, 12.0, 9.0]);
        r[1].t1_us = None;
        let rec = BenchmarkRecord::from_series(5.0, r, series(&[20.0, 24.0, 18.0]), 0.0);
        let g = gain_series(&rec);
        assert_eq!(g.dropped, vec![1]);
        assert_eq!(g.instantaneous.len(), 2);
    }

    #[test]
    fn hand_computed_campaign() {
        let records: Vec<_> = [-0.1, 0.15, 0.3, 0.25]
            .iter()
            .enumerate()
            .map(|(i, &g)| record_with_gain(4.5 + 0.1 * i as f64, g))
            .collect();
        let s = aggregate_campaign(&records).unwrap();
        assert!((s.fraction_improved - 0.75).abs() < 1e-12);
        assert!((s.fraction_above_10pct - 0.75).abs() < 1e-12);
        assert!((s.fraction_above_20pct - 0.5).abs() < 1e-12);
        assert!((s.mean_gain - 0.15).abs() < 1e-12);
        assert!((s.best_gain - 0.3).abs() < 1e-12);
    }

    #[test]
    fn singleton_campaign() {
        let s = aggregate_campaign(&[record_with_gain(5.0, 0.5)]).unwrap();
        assert_eq!(
            (s.fraction_improved, s.fraction_above_10pct, s.fraction_above_20pct),
            (1.0, 1.0, 1.0)
        );
        assert!((s.best_gain - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_campaign_rejected() {
        assert!(aggregate_campaign(&[]).is_err());
    }

    #[test]
    fn zero_window_rejected() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0);
        let schedule = MonitorSchedule {
            window_s: 0.0,
            sample_interval_s: 2.0,
        };
        assert!(run_benchmark(&mut env, 5.0, &schedule, &SweepPlan::default(), &cfg).is_err());
    }

    #[test]
    fn monitoring_covers_the_window() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0);
        let schedule = MonitorSchedule {
            window_s: 60.0,
            sample_interval_s: 10.0,
        };
        let plan = SweepPlan::new(-8e3, 8e3, 4e3);
        let rec = run_benchmark(&mut env, 5.0, &schedule, &plan, &cfg).unwrap();
        assert_eq!(rec.reference_series.len(), 6);
        assert_eq!(rec.optimized_series.len(), 6);
        assert_eq!(rec.reference_series.last().unwrap().t_s, 50.0);
        assert_eq!(rec.optimized_series.last().unwrap().t_s, 50.0);
    }
}
