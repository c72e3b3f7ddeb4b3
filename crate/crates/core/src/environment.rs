//! TLS defect bath, fluctuators and the qubit relaxation rate they produce.
//!
//! Model summary (frequencies in GHz unless noted):
//!
//! - A defect's asymmetry at field `E` is
//!   `ε(E) = ε₀ + p·E/h + Σ shifts of linked fluctuators in the high state`,
//!   with `p·E/h` converted to GHz by [`DIPOLE_SHIFT_GHZ_PER_EA_VPM`].
//! - Its resonance is `f_TLS = sqrt(ε² + Δ₀²)`.
//! - Each defect adds a Lorentzian to the qubit decay rate:
//!   `2 g² Γ₂ / (Γ₂² + (2π δ)²)` in 1/µs, where `g` and `Γ₂` are rates in
//!   1/µs (quoted in "MHz") and `δ = f_q − f_TLS` is an ordinary frequency in
//!   MHz. The `2π` turns `δ` into an angular detuning so that the half-width
//!   of the dip is `δ = Γ₂ / 2π`.
//!
//! Thermal fluctuators are two-state telegraph processes propagated exactly
//! over arbitrary intervals. Metastable fluctuators are Schmitt triggers on the
//! applied field: they only change state when a field ramp crosses one of
//! their thresholds in the matching direction.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::DIPOLE_SHIFT_GHZ_PER_EA_VPM;
use crate::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

/// Version of the environment JSON document.
pub const ENVIRONMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuatorLink {
    pub fluctuator_id: u32,
    /// Asymmetry shift applied while the fluctuator is in state 1.
    pub shift_ghz: f64,
}

/// A field-tunable two-level defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsDefect {
    /// Bare asymmetry ε₀ at zero field.
    pub asymmetry0_ghz: f64,
    /// Tunneling energy Δ₀, strictly positive.
    pub tunneling_ghz: f64,
    /// Dipole component along the applied field. Zero for defects inside the
    /// junction barrier, which see no DC field.
    pub dipole_e_angstrom: f64,
    /// Qubit coupling `g` as a rate in 1/µs.
    pub coupling_mhz: f64,
    /// TLS decoherence rate Γ₂ in 1/µs.
    pub linewidth_mhz: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fluctuator_links: Vec<FluctuatorLink>,
}

impl TlsDefect {
    /// A defect without fluctuator links.
    pub fn new(
        asymmetry0_ghz: f64,
        tunneling_ghz: f64,
        dipole_e_angstrom: f64,
        coupling_mhz: f64,
        linewidth_mhz: f64,
    ) -> Self {
        Self {
            asymmetry0_ghz,
            tunneling_ghz,
            dipole_e_angstrom,
            coupling_mhz,
            linewidth_mhz,
            fluctuator_links: Vec::new(),
        }
    }

    pub fn with_link(mut self, fluctuator_id: u32, shift_ghz: f64) -> Self {
        self.fluctuator_links.push(FluctuatorLink {
            fluctuator_id,
            shift_ghz,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.asymmetry0_ghz,
            self.tunneling_ghz,
            self.dipole_e_angstrom,
            self.coupling_mhz,
            self.linewidth_mhz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("defect parameters must be finite".into()));
        }
        if self.tunneling_ghz <= 0.0 {
            return Err(Error::Config(format!(
                "tunneling energy must be > 0, got {}",
                self.tunneling_ghz
            )));
        }
        if self.linewidth_mhz <= 0.0 {
            return Err(Error::Config(format!(
                "linewidth must be > 0, got {}",
                self.linewidth_mhz
            )));
        }
        if self.coupling_mhz < 0.0 {
            return Err(Error::Config(format!(
                "coupling must be >= 0, got {}",
                self.coupling_mhz
            )));
        }
        if self.fluctuator_links.iter().any(|l| !l.shift_ghz.is_finite()) {
            return Err(Error::Config("fluctuator shift must be finite".into()));
        }
        Ok(())
    }

    /// Asymmetry including the field term but no fluctuator shifts.
    pub fn field_asymmetry(&self, field: f64) -> f64 {
        self.asymmetry0_ghz + self.dipole_e_angstrom * field * DIPOLE_SHIFT_GHZ_PER_EA_VPM
    }

    /// Resonance frequency for a given total asymmetry.
    pub fn resonance(&self, asymmetry_ghz: f64) -> f64 {
        asymmetry_ghz.hypot(self.tunneling_ghz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluctuatorKind {
    /// Thermally activated telegraph switcher.
    Thermal {
        rate_up_per_s: f64,
        rate_down_per_s: f64,
    },
    /// Field-tunable bistable with hysteretic thresholds
    /// (`threshold_down < threshold_up`).
    Metastable {
        threshold_up_v_per_m: f64,
        threshold_down_v_per_m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluctuator {
    pub id: u32,
    #[serde(flatten)]
    pub kind: FluctuatorKind,
    /// `false` = state 0, `true` = state 1.
    #[serde(with = "state01")]
    pub state: bool,
}

mod state01 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(state: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*state))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("state must be 0 or 1, got {other}"))),
        }
    }
}

impl Fluctuator {
    pub fn thermal(id: u32, rate_up_per_s: f64, rate_down_per_s: f64, state: bool) -> Self {
        Self {
            id,
            kind: FluctuatorKind::Thermal {
                rate_up_per_s,
                rate_down_per_s,
            },
            state,
        }
    }

    pub fn metastable(id: u32, threshold_up: f64, threshold_down: f64, state: bool) -> Self {
        Self {
            id,
            kind: FluctuatorKind::Metastable {
                threshold_up_v_per_m: threshold_up,
                threshold_down_v_per_m: threshold_down,
            },
            state,
        }
    }

    pub fn is_metastable(&self) -> bool {
        matches!(self.kind, FluctuatorKind::Metastable { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FluctuatorKind::Thermal {
                rate_up_per_s,
                rate_down_per_s,
            } => {
                if !(rate_up_per_s.is_finite() && rate_down_per_s.is_finite())
                    || rate_up_per_s < 0.0
                    || rate_down_per_s < 0.0
                {
                    return Err(Error::Config(format!(
                        "fluctuator {}: switching rates must be finite and >= 0",
                        self.id
                    )));
                }
            }
            FluctuatorKind::Metastable {
                threshold_up_v_per_m,
                threshold_down_v_per_m,
            } => {
                if !(threshold_up_v_per_m.is_finite() && threshold_down_v_per_m.is_finite())
                    || threshold_down_v_per_m >= threshold_up_v_per_m
                {
                    return Err(Error::Config(format!(
                        "fluctuator {}: need finite thresholds with threshold_down < threshold_up",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Probability of being in state 1 after `dt` seconds, starting from the
    /// current state. Exact solution of the two-state master equation.
    pub fn occupation_after(&self, dt: f64) -> f64 {
        let s = if self.state { 1.0 } else { 0.0 };
        match self.kind {
            FluctuatorKind::Thermal {
                rate_up_per_s: up,
                rate_down_per_s: down,
            } => {
                let total = up + down;
                if total <= 0.0 {
                    return s;
                }
                let stationary = up / total;
                stationary + (s - stationary) * (-total * dt).exp()
            }
            FluctuatorKind::Metastable { .. } => s,
        }
    }

    /// Apply a monotone field ramp `from → to`. Only metastable fluctuators
    /// react; a threshold is crossed when it lies in the half-open interval
    /// swept by the ramp.
    fn ramp(&mut self, from: f64, to: f64) {
        if let FluctuatorKind::Metastable {
            threshold_up_v_per_m: up,
            threshold_down_v_per_m: down,
        } = self.kind
        {
            if to > from && !self.state && from < up && up <= to {
                self.state = true;
            } else if to < from && self.state && to <= down && down < from {
                self.state = false;
            }
        }
    }
}

/// Resonance frequency of `defect` at `field`, with fluctuator states taken
/// from `fluctuators`.
pub fn tls_frequency(defect: &TlsDefect, fluctuators: &[Fluctuator], field: f64) -> Result<f64> {
    if !field.is_finite() {
        return Err(Error::Argument(format!("field must be finite, got {field}")));
    }
    let mut eps = defect.field_asymmetry(field);
    for link in &defect.fluctuator_links {
        let f = fluctuators
            .iter()
            .find(|f| f.id == link.fluctuator_id)
            .ok_or_else(|| {
                Error::Config(format!("unknown fluctuator id {}", link.fluctuator_id))
            })?;
        if f.state {
            eps += link.shift_ghz;
        }
    }
    Ok(defect.resonance(eps))
}

/// Lorentzian excess decay rate (1/µs) of one defect at detuning
/// `detuning_mhz`.
pub fn lorentzian_rate(coupling_mhz: f64, linewidth_mhz: f64, detuning_mhz: f64) -> f64 {
    let angular = TAU * detuning_mhz;
    2.0 * coupling_mhz * coupling_mhz * linewidth_mhz
        / (linewidth_mhz * linewidth_mhz + angular * angular)
}

/// Serialized form of [`QubitEnvironment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentDocument {
    schema_version: u32,
    defects: Vec<TlsDefect>,
    #[serde(default)]
    fluctuators: Vec<Fluctuator>,
    background_gamma_per_us: f64,
    #[serde(default)]
    field_v_per_m: f64,
    #[serde(default)]
    clock_s: f64,
    rng_seed: u64,
    #[serde(default)]
    rng_word_pos: u128,
}

/// Qubit environment: defect bath, fluctuators, applied field and a simulated
/// clock, plus the random stream that drives every stochastic process acting
/// on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentDocument", into = "EnvironmentDocument")]
pub struct QubitEnvironment {
    defects: Vec<TlsDefect>,
    fluctuators: Vec<Fluctuator>,
    background_gamma: f64,
    field: f64,
    clock: f64,
    rng_seed: u64,
    rng: SimRng,
    /// Per defect: `(fluctuator index, shift)` resolved from the id links.
    links: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for QubitEnvironment {
    fn eq(&self, other: &Self) -> bool {
        self.defects == other.defects
            && self.fluctuators == other.fluctuators
            && self.background_gamma == other.background_gamma
            && self.field == other.field
            && self.clock == other.clock
            && self.rng_seed == other.rng_seed
            && self.rng.get_word_pos() == other.rng.get_word_pos()
    }
}

impl TryFrom<EnvironmentDocument> for QubitEnvironment {
    type Error = Error;

    fn try_from(doc: EnvironmentDocument) -> Result<Self> {
        if doc.schema_version != ENVIRONMENT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported environment schema_version {} (expected {})",
                doc.schema_version, ENVIRONMENT_SCHEMA_VERSION
            )));
        }
        let mut env =
            QubitEnvironment::new(doc.defects, doc.fluctuators, doc.background_gamma_per_us, doc.rng_seed)?;
        if !doc.field_v_per_m.is_finite() || !doc.clock_s.is_finite() || doc.clock_s < 0.0 {
            return Err(Error::Config("field and clock must be finite, clock >= 0".into()));
        }
        env.field = doc.field_v_per_m;
        env.clock = doc.clock_s;
        env.rng.set_word_pos(doc.rng_word_pos);
        Ok(env)
    }
}

impl From<QubitEnvironment> for EnvironmentDocument {
    fn from(env: QubitEnvironment) -> Self {
        EnvironmentDocument {
            schema_version: ENVIRONMENT_SCHEMA_VERSION,
            rng_word_pos: env.rng.get_word_pos(),
            defects: env.defects,
            fluctuators: env.fluctuators,
            background_gamma_per_us: env.background_gamma,
            field_v_per_m: env.field,
            clock_s: env.clock,
            rng_seed: env.rng_seed,
        }
    }
}

impl QubitEnvironment {
    /// Build an environment at zero field and zero clock.
    pub fn new(
        defects: Vec<TlsDefect>,
        fluctuators: Vec<Fluctuator>,
        background_gamma_per_us: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if !(background_gamma_per_us.is_finite() && background_gamma_per_us >= 0.0) {
            return Err(Error::Config(format!(
                "background_gamma must be finite and >= 0, got {background_gamma_per_us}"
            )));
        }
        let mut index = HashMap::with_capacity(fluctuators.len());
        for (i, f) in fluctuators.iter().enumerate() {
            f.validate()?;
            if index.insert(f.id, i).is_some() {
                return Err(Error::Config(format!("duplicate fluctuator id {}", f.id)));
            }
        }
        let mut links = Vec::with_capacity(defects.len());
        for (k, d) in defects.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::Config(format!("defect {k}: {e}")))?;
            let resolved = d
                .fluctuator_links
                .iter()
                .map(|l| {
                    index
                        .get(&l.fluctuator_id)
                        .map(|&i| (i, l.shift_ghz))
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "defect {k}: unknown fluctuator id {}",
                                l.fluctuator_id
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            links.push(resolved);
        }
        Ok(Self {
            defects,
            fluctuators,
            background_gamma: background_gamma_per_us,
            field: 0.0,
            clock: 0.0,
            rng_seed,
            rng: rng_from_seed(rng_seed),
            links,
        })
    }

    /// Environment with no defects at all.
    pub fn empty(background_gamma_per_us: f64, rng_seed: u64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), background_gamma_per_us, rng_seed)
    }

    pub fn defects(&self) -> &[TlsDefect] {
        &self.defects
    }

    pub fn fluctuators(&self) -> &[Fluctuator] {
        &self.fluctuators
    }

    /// Residual relaxation rate in 1/µs.
    pub fn background_gamma(&self) -> f64 {
        self.background_gamma
    }

    /// Applied DC field in V/m.
    pub fn field(&self) -> f64 {
        self.field
    }

    /// Simulated time in seconds.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn fluctuator_states(&self) -> Vec<bool> {
        self.fluctuators.iter().map(|f| f.state).collect()
    }

    pub(crate) fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Restart the random stream from `seed`. Physical state is untouched.
    pub fn reseed(&mut self, seed: u64) {
        self.rng_seed = seed;
        self.rng = rng_from_seed(seed);
    }

    /// Copy of this environment with every fluctuator and link removed.
    pub fn without_fluctuators(&self) -> Self {
        let defects = self
            .defects
            .iter()
            .cloned()
            .map(|mut d| {
                d.fluctuator_links.clear();
                d
            })
            .collect::<Vec<_>>();
        let n = defects.len();
        Self {
            defects,
            fluctuators: Vec::new(),
            links: vec![Vec::new(); n],
            rng: self.rng.clone(),
            ..*self
        }
    }

    fn asymmetry(&self, k: usize, field: f64) -> f64 {
        let mut eps = self.defects[k].field_asymmetry(field);
        for &(i, shift) in &self.links[k] {
            if self.fluctuators[i].state {
                eps += shift;
            }
        }
        eps
    }

    /// Resonance of defect `k` at the current field and fluctuator states.
    pub fn defect_frequency(&self, k: usize) -> f64 {
        self.defect_frequency_at(k, self.field)
    }

    /// Resonance of defect `k` at `field` with the current fluctuator states.
    pub fn defect_frequency_at(&self, k: usize, field: f64) -> f64 {
        self.defects[k].resonance(self.asymmetry(k, field))
    }

    pub fn tls_frequencies(&self) -> Vec<f64> {
        (0..self.defects.len()).map(|k| self.defect_frequency(k)).collect()
    }

    /// Qubit relaxation rate (1/µs) at `qubit_freq_ghz` and the current field.
    pub fn relaxation_rate(&self, qubit_freq_ghz: f64) -> f64 {
        self.relaxation_rate_at(self.field, qubit_freq_ghz)
    }

    /// Relaxation rate at a hypothetical field, holding every fluctuator in its
    /// current state (no ramp is applied).
    pub fn relaxation_rate_at(&self, field: f64, qubit_freq_ghz: f64) -> f64 {
        debug_assert!(qubit_freq_ghz > 0.0);
        let excess: f64 = self
            .defects
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let detuning_mhz = (qubit_freq_ghz - self.defect_frequency_at(k, field)) * 1e3;
                lorentzian_rate(d.coupling_mhz, d.linewidth_mhz, detuning_mhz)
            })
            .sum();
        self.background_gamma + excess
    }

    /// Ramp the applied field continuously to `field`. Metastable fluctuators
    /// whose threshold is crossed in the ramp direction switch state.
    pub fn set_field(&mut self, field: f64) -> Result<()> {
        if !field.is_finite() {
            return Err(Error::Argument(format!("field must be finite, got {field}")));
        }
        let from = self.field;
        if field != from {
            for f in &mut self.fluctuators {
                f.ramp(from, field);
            }
        }
        self.field = field;
        Ok(())
    }

    /// Redraw every thermal fluctuator from its stationary distribution. The
    /// clock does not move.
    pub fn thermalize(&mut self) {
        for f in &mut self.fluctuators {
            if f.is_metastable() {
                continue;
            }
            let p_high = f.occupation_after(f64::INFINITY);
            let u: f64 = self.rng.random();
            f.state = u < p_high;
        }
    }

    /// Let `dt` seconds pass: thermal fluctuators are resampled from the exact
    /// two-state propagator, metastable ones are left alone.
    pub fn advance_fluctuators(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("dt must be finite and >= 0, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        for f in &mut self.fluctuators {
            if f.is_metastable() {
                continue;
            }
            let p_high = f.occupation_after(dt);
            let u: f64 = self.rng.random();
            f.state = u < p_high;
        }
        self.clock += dt;
        Ok(())
    }
}
