//! Seeded random defect baths.
//!
//! Zero-field resonances are uniform over the qubit band widened by
//! `tuning_margin_ghz` on each side, so that defects outside the band can be
//! tuned into it. For each defect the asymmetry fraction `ε₀/f₀` is uniform in
//! `[−0.95, 0.95]` and `Δ₀` follows from `f₀`. Dipoles, couplings and switching
//! rates are log-uniform, linewidths uniform. All ranges are configurable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Fluctuator, QubitEnvironment, TlsDefect};
use crate::rng::{derive_seed, rng_from_seed, SimRng, BATH_STREAM};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathSpec {
    pub band_min_ghz: f64,
    pub band_max_ghz: f64,
    pub tuning_margin_ghz: f64,
    /// Defects per 100 MHz of zero-field resonance range.
    pub density_per_100mhz: f64,
    pub dipole_range_e_angstrom: [f64; 2],
    pub coupling_range_mhz: [f64; 2],
    pub linewidth_range_mhz: [f64; 2],
    pub background_t1_us: f64,
    /// Probability that a defect is linked to its own thermal fluctuator.
    pub thermal_fluctuator_fraction: f64,
    pub switching_rate_range_per_s: [f64; 2],
    /// Magnitude range of fluctuator-induced asymmetry shifts.
    pub fluctuator_shift_range_mhz: [f64; 2],
    pub metastable_count: usize,
    /// Range for the centre of metastable hysteresis loops.
    pub metastable_center_range_v_per_m: [f64; 2],
    /// Range for the half-width of metastable hysteresis loops.
    pub metastable_half_width_range_v_per_m: [f64; 2],
    /// Add one field-immune defect inside the band.
    pub include_junction_tls: bool,
}

impl Default for BathSpec {
    fn default() -> Self {
        Self {
            band_min_ghz: 4.5,
            band_max_ghz: 5.5,
            tuning_margin_ghz: 0.5,
            density_per_100mhz: 6.0,
            dipole_range_e_angstrom: [0.01, 1.0],
            coupling_range_mhz: [0.3, 1.0],
            linewidth_range_mhz: [10.0, 50.0],
            background_t1_us: 80.0,
            thermal_fluctuator_fraction: 1.0,
            switching_rate_range_per_s: [1e-4, 3e-3],
            fluctuator_shift_range_mhz: [10.0, 50.0],
            metastable_count: 2,
            metastable_center_range_v_per_m: [-40e3, 40e3],
            metastable_half_width_range_v_per_m: [5e3, 20e3],
            include_junction_tls: true,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] || (positive && r[0] <= 0.0) {
        return Err(Error::Config(format!("{name}: invalid range {r:?}")));
    }
    Ok(())
}

impl BathSpec {
    /// Same spec with every fluctuator disabled.
    pub fn without_fluctuators(mut self) -> Self {
        self.thermal_fluctuator_fraction = 0.0;
        self.metastable_count = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.band_min_ghz > 0.0 && self.band_max_ghz > self.band_min_ghz) {
            return Err(Error::Config("band must satisfy 0 < band_min < band_max".into()));
        }
        if !(self.tuning_margin_ghz >= 0.0 && self.tuning_margin_ghz < self.band_min_ghz) {
            return Err(Error::Config("tuning margin must be in [0, band_min)".into()));
        }
        if !(self.density_per_100mhz >= 0.0 && self.density_per_100mhz.is_finite()) {
            return Err(Error::Config("density must be finite and >= 0".into()));
        }
        if !(self.background_t1_us > 0.0 && self.background_t1_us.is_finite()) {
            return Err(Error::Config("background_t1_us must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.thermal_fluctuator_fraction) {
            return Err(Error::Config("thermal_fluctuator_fraction must be in [0, 1]".into()));
        }
        check_range("dipole_range_e_angstrom", self.dipole_range_e_angstrom, true)?;
        check_range("coupling_range_mhz", self.coupling_range_mhz, true)?;
        check_range("linewidth_range_mhz", self.linewidth_range_mhz, true)?;
        check_range("switching_rate_range_per_s", self.switching_rate_range_per_s, true)?;
        check_range("fluctuator_shift_range_mhz", self.fluctuator_shift_range_mhz, true)?;
        check_range("metastable_center_range_v_per_m", self.metastable_center_range_v_per_m, false)?;
        check_range(
            "metastable_half_width_range_v_per_m",
            self.metastable_half_width_range_v_per_m,
            true,
        )?;
        Ok(())
    }

    /// Number of regular (field-tunable) defects the generator will create.
    pub fn defect_count(&self) -> usize {
        let width = self.band_max_ghz - self.band_min_ghz + 2.0 * self.tuning_margin_ghz;
        (self.density_per_100mhz * width / 0.1).round() as usize
    }
}

fn log_uniform(rng: &mut SimRng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        return r[0];
    }
    (r[0].ln() + rng.random::<f64>() * (r[1].ln() - r[0].ln())).exp()
}

fn uniform(rng: &mut SimRng, r: [f64; 2]) -> f64 {
    r[0] + rng.random::<f64>() * (r[1] - r[0])
}

fn sign(rng: &mut SimRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn random_defect(rng: &mut SimRng, spec: &BathSpec, f0: f64, dipole: f64) -> TlsDefect {
    let fraction: f64 = uniform(rng, [-0.95, 0.95]);
    let asymmetry0 = fraction * f0;
    let tunneling = (f0 * f0 - asymmetry0 * asymmetry0).sqrt();
    TlsDefect::new(
        asymmetry0,
        tunneling,
        dipole,
        log_uniform(rng, spec.coupling_range_mhz),
        uniform(rng, spec.linewidth_range_mhz),
    )
}

/// Generate a bath. The environment's own random stream is seeded with
/// `seed`; the bath draws come from a derived stream.
pub fn generate_bath(spec: &BathSpec, seed: u64) -> Result<QubitEnvironment> {
    spec.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, BATH_STREAM));
    let lo = spec.band_min_ghz - spec.tuning_margin_ghz;
    let hi = spec.band_max_ghz + spec.tuning_margin_ghz;

    let mut defects = Vec::new();
    let mut fluctuators = Vec::new();
    for _ in 0..spec.defect_count() {
        let f0 = uniform(&mut rng, [lo, hi]);
        let dipole = sign(&mut rng) * log_uniform(&mut rng, spec.dipole_range_e_angstrom);
        let mut defect = random_defect(&mut rng, spec, f0, dipole);
        if rng.random::<f64>() < spec.thermal_fluctuator_fraction {
            let id = fluctuators.len() as u32;
            let up = log_uniform(&mut rng, spec.switching_rate_range_per_s);
            let down = log_uniform(&mut rng, spec.switching_rate_range_per_s);
            let state = rng.random::<f64>() < up / (up + down);
            let shift = sign(&mut rng) * log_uniform(&mut rng, spec.fluctuator_shift_range_mhz) * 1e-3;
            fluctuators.push(Fluctuator::thermal(id, up, down, state));
            defect = defect.with_link(id, shift);
        }
        defects.push(defect);
    }

    if !defects.is_empty() {
        for _ in 0..spec.metastable_count {
            let id = fluctuators.len() as u32;
            let center = uniform(&mut rng, spec.metastable_center_range_v_per_m);
            let half = uniform(&mut rng, spec.metastable_half_width_range_v_per_m);
            fluctuators.push(Fluctuator::metastable(id, center + half, center - half, false));
            let target = rng.random_range(0..defects.len());
            let shift = sign(&mut rng) * log_uniform(&mut rng, spec.fluctuator_shift_range_mhz) * 1e-3;
            defects[target] = defects[target].clone().with_link(id, shift);
        }
    }

    if spec.include_junction_tls {
        let f0 = uniform(&mut rng, [spec.band_min_ghz, spec.band_max_ghz]);
        defects.push(random_defect(&mut rng, spec, f0, 0.0));
    }

    QubitEnvironment::new(defects, fluctuators, 1.0 / spec.background_t1_us, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_is_empty() {
        let spec = BathSpec {
            density_per_100mhz: 0.0,
            include_junction_tls: false,
            ..BathSpec::default()
        };
        let env = generate_bath(&spec, 1).unwrap();
        assert!(env.defects().is_empty());
        assert!(env.fluctuators().is_empty());
    }

    #[test]
    fn same_seed_same_json() {
        let spec = BathSpec::default();
        let a = serde_json::to_string(&generate_bath(&spec, 42).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_bath(&spec, 42).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_bath(&spec, 43).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn junction_tls_present_and_field_immune() {
        let env = generate_bath(&BathSpec::default(), 7).unwrap();
        let junction: Vec<_> = env
            .defects()
            .iter()
            .filter(|d| d.dipole_e_angstrom == 0.0)
            .collect();
        assert_eq!(junction.len(), 1);
        let f = junction[0].resonance(junction[0].asymmetry0_ghz);
        assert!((4.5..=5.5).contains(&f));
    }

    #[test]
    fn resonances_and_parameters_in_range() {
        let spec = BathSpec::default();
        let env = generate_bath(&spec, 3).unwrap();
        assert_eq!(env.defects().len(), spec.defect_count() + 1);
        for d in env.defects() {
            let f0 = d.resonance(d.asymmetry0_ghz);
            assert!((4.0 - 1e-9..=6.0 + 1e-9).contains(&f0));
            assert!((0.3..=1.0).contains(&d.coupling_mhz));
            assert!((10.0..=50.0).contains(&d.linewidth_mhz));
            if d.dipole_e_angstrom != 0.0 {
                assert!((0.01..=1.0).contains(&d.dipole_e_angstrom.abs()));
            }
        }
    }

    #[test]
    fn disabling_fluctuators() {
        let env = generate_bath(&BathSpec::default().without_fluctuators(), 3).unwrap();
        assert!(env.fluctuators().is_empty());
    }
}
