//! Swap-spectroscopy emulation.
//!
//! For every field of `fields_v_per_m` (visited in order, so hysteresis
//! matters) the excited qubit is parked at each probe frequency for
//! `hold_time_us`; the residual population is `exp(−Γ·hold)`. Fluctuators
//! advance by `column_dwell_s` after each field column.

use serde::{Deserialize, Serialize};

use crate::environment::QubitEnvironment;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRaster {
    pub frequencies_ghz: Vec<f64>,
    pub fields_v_per_m: Vec<f64>,
    pub hold_time_us: f64,
    /// `populations[i][j]` at field `i`, frequency `j`.
    pub populations: Vec<Vec<f64>>,
}

impl SwapRaster {
    /// Index of the darkest frequency bin in field column `i`.
    pub fn column_argmin(&self, i: usize) -> usize {
        self.populations[i]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0)
    }
}

pub fn swap_spectroscopy(
    env: &mut QubitEnvironment,
    frequencies_ghz: &[f64],
    fields_v_per_m: &[f64],
    hold_time_us: f64,
    column_dwell_s: f64,
) -> Result<SwapRaster> {
    if frequencies_ghz.is_empty() || fields_v_per_m.is_empty() {
        return Err(Error::Argument("frequency and field grids must be non-empty".into()));
    }
    if frequencies_ghz.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Argument("probe frequencies must be > 0".into()));
    }
    if !(hold_time_us >= 0.0 && hold_time_us.is_finite()) {
        return Err(Error::Argument(format!("hold time must be >= 0, got {hold_time_us}")));
    }
    let mut populations = Vec::with_capacity(fields_v_per_m.len());
    for &field in fields_v_per_m {
        env.set_field(field)?;
        populations.push(
            frequencies_ghz
                .iter()
                .map(|&f| (-env.relaxation_rate(f) * hold_time_us).exp())
                .collect(),
        );
        env.advance_fluctuators(column_dwell_s)?;
    }
    Ok(SwapRaster {
        frequencies_ghz: frequencies_ghz.to_vec(),
        fields_v_per_m: fields_v_per_m.to_vec(),
        hold_time_us,
        populations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TlsDefect;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn empty_bath_is_uniform() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        let r = swap_spectroscopy(&mut env, &grid(4.5, 5.5, 11), &grid(-1e4, 1e4, 5), 10.0, 1.0)
            .unwrap();
        let expected = (-0.5f64).exp();
        assert!(r.populations.iter().flatten().all(|&p| p == expected));
    }

    #[test]
    fn junction_defect_draws_a_horizontal_line() {
        let defects = vec![TlsDefect::new(3.0, 4.0, 0.0, 1.0, 1.0)];
        let mut env = QubitEnvironment::new(defects, vec![], 0.05, 0).unwrap();
        let freqs = grid(4.9, 5.1, 201);
        let r = swap_spectroscopy(&mut env, &freqs, &grid(-5e4, 5e4, 9), 5.0, 1.0).unwrap();
        for i in 0..r.fields_v_per_m.len() {
            assert_eq!(r.column_argmin(i), 100);
        }
    }

    #[test]
    fn empty_grids_rejected() {
        let mut env = QubitEnvironment::empty(0.05, 0).unwrap();
        assert!(swap_spectroscopy(&mut env, &[], &[0.0], 1.0, 0.0).is_err());
        assert!(swap_spectroscopy(&mut env, &[5.0], &[], 1.0, 0.0).is_err());
    }
}
