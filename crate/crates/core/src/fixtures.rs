//! Small hand-built environments with known behavior.

use crate::environment::{Fluctuator, QubitEnvironment, TlsDefect};
use crate::optimizer::SweepPlan;

/// Upward switching threshold of the hysteresis fixture, V/m.
pub const HYSTERESIS_UP_V_PER_M: f64 = 20e3;
/// Downward switching threshold of the hysteresis fixture, V/m.
pub const HYSTERESIS_DOWN_V_PER_M: f64 = -20e3;

/// One tunable defect linked to a metastable fluctuator with thresholds at
/// ±20 kV/m, plus the −60 → +60 kV/m sweep plan that straddles them.
///
/// The fluctuator starts in state 0 at zero field. The upward coarse sweep
/// flips it at +20 kV/m, so any field between the thresholds sees state 0 on
/// the way up but state 1 when approached downward from the sweep stop. In
/// state 1 the defect's asymmetry moves by +60 MHz.
pub fn hysteresis_fixture() -> (QubitEnvironment, SweepPlan) {
    let defect = TlsDefect::new(0.6, 4.9, 0.5, 0.5, 20.0).with_link(0, 0.06);
    let fluctuator = Fluctuator::metastable(0, HYSTERESIS_UP_V_PER_M, HYSTERESIS_DOWN_V_PER_M, false);
    let env = QubitEnvironment::new(vec![defect], vec![fluctuator], 1.0 / 80.0, 0)
        .expect("fixture is valid");
    (env, SweepPlan::new(-60e3, 60e3, 2e3))
}
