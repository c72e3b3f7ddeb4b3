//! Two-pass DC-field optimization of T1.
//!
//! 1. Coarse pass: ramp the field from `start` to `stop` in `step`s, measuring
//!    T1 at every point. The curve is smoothed with a 3-point nearest-neighbour
//!    mean and its maximum becomes the candidate field. Ties go to the point
//!    closest to `start`.
//! 2. The field is reset to `start` and ramped to the candidate, so that
//!    metastable fluctuators end up in the same state as during the coarse
//!    pass.
//! 3. Fine pass over `candidate ± fine_window` in `fine_step`s. Points are
//!    visited in two monotone segments that both run in the sweep direction:
//!    first `candidate → candidate + window`, then (after a fresh approach from
//!    `start`) `candidate − window → candidate − fine_step`. The pass stops at
//!    the first point whose T1 reaches `closeness_fraction` of the coarse
//!    maximum; otherwise the best fine point wins.
//!
//! Failed fits contribute no point to either curve.

use serde::{Deserialize, Serialize};

use crate::environment::QubitEnvironment;
use crate::measurement::{measure_t1, MeasurementConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub start_v_per_m: f64,
    pub stop_v_per_m: f64,
    pub step_v_per_m: f64,
    pub fine_step_v_per_m: f64,
    pub fine_window_v_per_m: f64,
    pub closeness_fraction: f64,
}

impl Default for SweepPlan {
    /// −60 kV/m → +60 kV/m in 2 kV/m steps (61 points).
    fn default() -> Self {
        Self::new(-60e3, 60e3, 2e3)
    }
}

impl SweepPlan {
    /// Plan with the default fine pass: window `2·step`, fine step `step/5`,
    /// closeness 0.9.
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self {
            start_v_per_m: start,
            stop_v_per_m: stop,
            step_v_per_m: step,
            fine_step_v_per_m: step / 5.0,
            fine_window_v_per_m: 2.0 * step,
            closeness_fraction: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.start_v_per_m,
            self.stop_v_per_m,
            self.step_v_per_m,
            self.fine_step_v_per_m,
            self.fine_window_v_per_m,
            self.closeness_fraction,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep plan values must be finite".into()));
        }
        if self.start_v_per_m == self.stop_v_per_m {
            return Err(Error::Config("sweep start and stop must differ".into()));
        }
        if self.step_v_per_m <= 0.0 {
            return Err(Error::Config("step must be > 0".into()));
        }
        if !(self.fine_step_v_per_m > 0.0 && self.fine_step_v_per_m < self.step_v_per_m) {
            return Err(Error::Config("fine_step must satisfy 0 < fine_step < step".into()));
        }
        if self.fine_window_v_per_m < 0.0 {
            return Err(Error::Config("fine_window must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.closeness_fraction) {
            return Err(Error::Config("closeness_fraction must lie in [0, 1]".into()));
        }
        let points = self.coarse_fields().len();
        if points < 8 {
            log::warn!("coarse sweep has only {points} points");
        }
        Ok(())
    }

    /// +1 for upward sweeps, −1 for downward ones.
    pub fn direction(&self) -> f64 {
        (self.stop_v_per_m - self.start_v_per_m).signum()
    }

    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.start_v_per_m, self.stop_v_per_m);
        (a.min(b), a.max(b))
    }

    /// Coarse grid from start towards stop; stop is included when the step
    /// divides the span.
    pub fn coarse_fields(&self) -> Vec<f64> {
        let span = (self.stop_v_per_m - self.start_v_per_m).abs();
        let n = (span / self.step_v_per_m + 1e-9).floor() as usize;
        let dir = self.direction();
        (0..=n)
            .map(|k| self.start_v_per_m + dir * k as f64 * self.step_v_per_m)
            .collect()
    }

    /// Fine points as the two monotone segments described in the module docs.
    pub fn fine_segments(&self, candidate: f64) -> [Vec<f64>; 2] {
        let m = (self.fine_window_v_per_m / self.fine_step_v_per_m + 1e-9).floor() as usize;
        let dir = self.direction();
        let at = |k: f64| candidate + dir * k * self.fine_step_v_per_m;
        let upper = (0..=m).map(|k| at(k as f64)).collect();
        let lower = (1..=m).rev().map(|k| at(-(k as f64))).collect();
        [upper, lower]
    }
}

/// 3-point nearest-neighbour mean; edge elements average their two existing
/// neighbours. Written as an offset from the centre value so constant series
/// come back bit-exact.
pub fn smooth3(values: &[f64]) -> Result<Vec<f64>> {
    match values.len() {
        0 => Err(Error::Argument("cannot smooth an empty series".into())),
        1 => Ok(values.to_vec()),
        n => Ok((0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                let c = values[i];
                c + values[lo..=hi].iter().map(|v| v - c).sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePoint {
    pub field_v_per_m: f64,
    pub t1_us: f64,
    pub smoothed_t1_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinePoint {
    pub field_v_per_m: f64,
    pub t1_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSweep {
    pub curve: Vec<CoarsePoint>,
    pub candidate_v_per_m: f64,
    pub max_t1_us: f64,
    pub failed_fits: usize,
}

/// Index of the first maximum.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn coarse_sweep(
    env: &mut QubitEnvironment,
    qubit_freq_ghz: f64,
    plan: &SweepPlan,
    cfg: &MeasurementConfig,
) -> Result<CoarseSweep> {
    plan.validate()?;
    let mut raw = Vec::new();
    let mut failed_fits = 0;
    for field in plan.coarse_fields() {
        env.set_field(field)?;
        match measure_t1(env, qubit_freq_ghz, cfg)?.t1() {
            Some(t1) => raw.push((field, t1)),
            None => failed_fits += 1,
        }
    }
    if raw.is_empty() {
        return Err(Error::Optimization(format!(
            "all {failed_fits} coarse-sweep fits failed"
        )));
    }
    let t1s: Vec<f64> = raw.iter().map(|p| p.1).collect();
    let smoothed = smooth3(&t1s)?;
    let best = first_argmax(smoothed.iter().copied()).expect("non-empty");
    let curve = raw
        .iter()
        .zip(&smoothed)
        .map(|(&(field, t1), &s)| CoarsePoint {
            field_v_per_m: field,
            t1_us: t1,
            smoothed_t1_us: s,
        })
        .collect::<Vec<_>>();
    Ok(CoarseSweep {
        candidate_v_per_m: curve[best].field_v_per_m,
        max_t1_us: t1s.iter().cloned().fold(f64::MIN, f64::max),
        curve,
        failed_fits,
    })
}

fn approach_from_start(env: &mut QubitEnvironment, target: f64, plan: &SweepPlan) -> Result<()> {
    env.set_field(plan.start_v_per_m)?;
    env.set_field(target)
}

/// Reset the field to the sweep start, then ramp to `candidate` in the sweep
/// direction.
pub fn approach_field(env: &mut QubitEnvironment, candidate: f64, plan: &SweepPlan) -> Result<()> {
    let (lo, hi) = plan.span();
    if !(candidate >= lo && candidate <= hi) {
        return Err(Error::Argument(format!(
            "candidate {candidate} V/m outside the sweep span [{lo}, {hi}]"
        )));
    }
    approach_from_start(env, candidate, plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub coarse_curve: Vec<CoarsePoint>,
    pub fine_curve: Vec<FinePoint>,
    pub candidate_field_v_per_m: f64,
    pub chosen_field_v_per_m: f64,
    pub coarse_max_t1_us: f64,
    pub achieved_t1_us: f64,
    pub passes: u32,
    /// The fine pass reached `closeness_fraction · coarse_max_t1_us`.
    pub success: bool,
    pub failed_fits: usize,
}

impl OptimizationResult {
    /// Every field at which T1 was measured.
    pub fn evaluated_fields(&self) -> impl Iterator<Item = f64> + '_ {
        self.coarse_curve
            .iter()
            .map(|p| p.field_v_per_m)
            .chain(self.fine_curve.iter().map(|p| p.field_v_per_m))
    }
}

/// Run both passes and leave the environment at the chosen field.
pub fn optimize(
    env: &mut QubitEnvironment,
    qubit_freq_ghz: f64,
    plan: &SweepPlan,
    cfg: &MeasurementConfig,
) -> Result<OptimizationResult> {
    let coarse = coarse_sweep(env, qubit_freq_ghz, plan, cfg)?;
    let candidate = coarse.candidate_v_per_m;
    approach_field(env, candidate, plan)?;

    let threshold = plan.closeness_fraction * coarse.max_t1_us;
    let mut fine_curve = Vec::new();
    let mut failed_fits = coarse.failed_fits;
    let mut reached = None;
    'segments: for (s, segment) in plan.fine_segments(candidate).iter().enumerate() {
        if s > 0 {
            if let Some(&first) = segment.first() {
                approach_from_start(env, first, plan)?;
            }
        }
        for &field in segment {
            env.set_field(field)?;
            match measure_t1(env, qubit_freq_ghz, cfg)?.t1() {
                Some(t1) => {
                    fine_curve.push(FinePoint {
                        field_v_per_m: field,
                        t1_us: t1,
                    });
                    if t1 >= threshold {
                        reached = Some(fine_curve.len() - 1);
                        break 'segments;
                    }
                }
                None => failed_fits += 1,
            }
        }
    }

    let success = reached.is_some();
    let (chosen, achieved) = match reached.or_else(|| first_argmax(fine_curve.iter().map(|p| p.t1_us))) {
        Some(i) => (fine_curve[i].field_v_per_m, fine_curve[i].t1_us),
        None => {
            let raw = coarse
                .curve
                .iter()
                .find(|p| p.field_v_per_m == candidate)
                .map(|p| p.t1_us)
                .unwrap_or(f64::NAN);
            (candidate, raw)
        }
    };
    if !success {
        log::info!(
            "fine pass never reached {:.2} µs; settling on {chosen:.1} V/m",
            threshold
        );
        approach_from_start(env, chosen, plan)?;
    }
    Ok(OptimizationResult {
        coarse_curve: coarse.curve,
        fine_curve,
        candidate_field_v_per_m: candidate,
        chosen_field_v_per_m: chosen,
        coarse_max_t1_us: coarse.max_t1_us,
        achieved_t1_us: achieved,
        passes: 2,
        success,
        failed_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Fluctuator, TlsDefect};

    #[test]
    fn smooth3_examples() {
        assert_eq!(smooth3(&[5.0; 4]).unwrap(), vec![5.0; 4]);
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]).unwrap(), vec![1.5, 1.0, 1.5]);
        assert_eq!(smooth3(&[2.0]).unwrap(), vec![2.0]);
        assert!(smooth3(&[]).is_err());
    }

    #[test]
    fn coarse_grid_includes_both_ends() {
        let plan = SweepPlan::new(-60e3, 60e3, 4e3);
        let f = plan.coarse_fields();
        assert_eq!(f.len(), 31);
        assert_eq!(f[0], -60e3);
        assert!((f[30] - 60e3).abs() < 1e-6);
        let down = SweepPlan::new(10.0, -10.0, 5.0).coarse_fields();
        assert_eq!(down, vec![10.0, 5.0, 0.0, -5.0, -10.0]);
    }

    #[test]
    fn fine_segments_run_in_sweep_direction() {
        let plan = SweepPlan::new(0.0, 100.0, 10.0);
        let [upper, lower] = plan.fine_segments(50.0);
        assert_eq!(upper.len(), 11);
        assert_eq!(upper[0], 50.0);
        assert!(upper.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(lower.len(), 10);
        assert!((lower[0] - 30.0).abs() < 1e-9);
        assert!(lower.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn plan_validation() {
        assert!(SweepPlan::new(1.0, 1.0, 0.1).validate().is_err());
        assert!(SweepPlan::new(0.0, 1.0, -0.1).validate().is_err());
        let mut p = SweepPlan::new(0.0, 1.0, 0.1);
        p.fine_step_v_per_m = 0.2;
        assert!(p.validate().is_err());
        assert!(SweepPlan::default().validate().is_ok());
    }

    #[test]
    fn flat_landscape_picks_first_point() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0).noiseless();
        let plan = SweepPlan::new(-20e3, 20e3, 4e3);
        let c = coarse_sweep(&mut env, 5.0, &plan, &cfg).unwrap();
        assert_eq!(c.candidate_v_per_m, -20e3);
    }

    #[test]
    fn candidate_avoids_dip_center() {
        // Defect crosses 5 GHz at E = 0 with a steep slope.
        let d = TlsDefect::new(3.0, 4.0, 1.0, 1.0, 1.0);
        let mut env = QubitEnvironment::new(vec![d], vec![], 0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0).noiseless();
        let plan = SweepPlan::new(-20e3, 20e3, 2e3);
        let c = coarse_sweep(&mut env, 5.0, &plan, &cfg).unwrap();
        assert_ne!(c.candidate_v_per_m, 0.0);
        let dip = c
            .curve
            .iter()
            .min_by(|a, b| a.t1_us.total_cmp(&b.t1_us))
            .unwrap();
        assert!(dip.field_v_per_m.abs() < 1.0);
    }

    #[test]
    fn approach_rejects_out_of_span() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let plan = SweepPlan::new(-10.0, 10.0, 1.0);
        assert!(approach_field(&mut env, 11.0, &plan).is_err());
        approach_field(&mut env, -10.0, &plan).unwrap();
        assert_eq!(env.field(), -10.0);
    }

    #[test]
    fn approach_to_start_matches_reset() {
        let fl = vec![Fluctuator::metastable(0, 5.0, -5.0, false)];
        let plan = SweepPlan::new(-10.0, 10.0, 1.0);
        let mut a = QubitEnvironment::new(vec![], fl, 0.05, 0).unwrap();
        a.set_field(10.0).unwrap();
        let mut b = a.clone();
        approach_field(&mut a, -10.0, &plan).unwrap();
        b.set_field(-10.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_closeness_stops_at_candidate() {
        let d = TlsDefect::new(3.0, 4.0, 1.0, 1.0, 1.0);
        let mut env = QubitEnvironment::new(vec![d], vec![], 0.05, 0).unwrap();
        let cfg = MeasurementConfig::for_expected_t1(20.0);
        let mut plan = SweepPlan::new(-20e3, 20e3, 2e3);
        plan.closeness_fraction = 0.0;
        let r = optimize(&mut env, 5.0, &plan, &cfg).unwrap();
        assert_eq!(r.fine_curve.len(), 1);
        assert_eq!(r.chosen_field_v_per_m, r.candidate_field_v_per_m);
        assert!(r.success);
        assert_eq!(env.field(), r.chosen_field_v_per_m);
    }
}
