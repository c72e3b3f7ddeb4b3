//! Qubit T1 limits imposed by a capacitively coupled DC gate.
//!
//! The gate couples to the qubit island through `C_c` and to ground through
//! the filter capacitance `C_f`; the gate wire has impedance `Z`. Radiation
//! into the wire gives
//!
//! ```text
//! Q_l = (C_tot/C_c)² · Z_q / Re Z_eff,   Z_q = sqrt(L_J/C_tot),
//! Re Z_eff = Z / (1 + (ω C_f Z)²),      T1_rad = Q_l / ω
//! ```
//!
//! and the lossy filter dielectric gives `1/T1_diel = P_f·tanδ·ω` with
//! `P_f = C_c²/(C_f(C_q + C_c))`. Everything is computed in SI internally;
//! the public API takes fF, GHz and metres and reports T1 in ms.
//!
//! Capacitances from geometry use parallel plates:
//! `C_f = ε0·εr·A/t_ins` and `C_c = ε0·min(A, A_island)/d`, where
//! `A_island = 2·(w + g)·L` counts the island trace width `w` plus half of
//! the slot gap on either side (`g` in total). Setting `slot_gap_m = 0`
//! reduces the island area to the bare metal `2·w·L`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constants::{
    ghz_to_joule, joule_to_ghz, ELEMENTARY_CHARGE, EPSILON_0, FEMTO, GIGA, HBAR, MU_0,
};
use crate::{Error, Result};

/// Wire impedance used for `WiringMode::Rf50Ohm`.
pub const RF_LINE_OHM: f64 = 50.0;
/// Wire impedance used for `WiringMode::Floating`.
pub const FLOATING_OHM: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WiringMode {
    #[serde(rename = "rf_50ohm")]
    Rf50Ohm,
    #[serde(rename = "dc_wire")]
    DcWire,
    #[serde(rename = "floating")]
    Floating,
}

impl WiringMode {
    pub const ALL: [WiringMode; 3] = [WiringMode::Rf50Ohm, WiringMode::DcWire, WiringMode::Floating];

    pub fn name(self) -> &'static str {
        match self {
            WiringMode::Rf50Ohm => "rf_50ohm",
            WiringMode::DcWire => "dc_wire",
            WiringMode::Floating => "floating",
        }
    }
}

impl std::str::FromStr for WiringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WiringMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown wiring mode {s:?}")))
    }
}

/// A T1 limit in ms, or no limit at all. Serialized as a number or `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T1Limit {
    Finite(f64),
    Unbounded,
}

impl T1Limit {
    fn from_rate_per_s(rate: f64) -> Self {
        if rate > 0.0 && rate.is_finite() {
            T1Limit::Finite(1e3 / rate)
        } else {
            T1Limit::Unbounded
        }
    }

    pub fn ms(self) -> Option<f64> {
        match self {
            T1Limit::Finite(v) => Some(v),
            T1Limit::Unbounded => None,
        }
    }

    /// Decay rate in 1/ms; zero when unbounded.
    pub fn rate_per_ms(self) -> f64 {
        self.ms().map_or(0.0, |t| 1.0 / t)
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, T1Limit::Unbounded)
    }
}

impl Serialize for T1Limit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.ms().serialize(s)
    }
}

impl<'de> Deserialize<'de> for T1Limit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<f64>::deserialize(d)? {
            Some(v) => T1Limit::Finite(v),
            None => T1Limit::Unbounded,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Island plus junction self-capacitance, fF.
    pub c_q_ff: f64,
    /// Qubit-to-gate coupling capacitance, fF.
    pub c_c_ff: f64,
    /// Gate-to-ground filter capacitance, fF.
    pub c_f_ff: f64,
    pub e_j_ghz: f64,
    pub wire_length_m: f64,
    pub wire_radius_m: f64,
    pub wire_conductivity_s_per_m: f64,
    pub loss_tangent: f64,
    pub mode: WiringMode,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl CircuitParams {
    /// `c_c = 0` is allowed and describes a decoupled gate.
    pub fn validate(&self) -> Result<()> {
        positive("c_q_ff", self.c_q_ff)?;
        positive("c_f_ff", self.c_f_ff)?;
        positive("e_j_ghz", self.e_j_ghz)?;
        positive("wire_length_m", self.wire_length_m)?;
        positive("wire_radius_m", self.wire_radius_m)?;
        positive("wire_conductivity_s_per_m", self.wire_conductivity_s_per_m)?;
        if !(self.c_c_ff >= 0.0 && self.c_c_ff.is_finite()) {
            return Err(Error::Config(format!("c_c_ff must be >= 0, got {}", self.c_c_ff)));
        }
        if !(self.loss_tangent >= 0.0 && self.loss_tangent.is_finite()) {
            return Err(Error::Config("loss_tangent must be >= 0".into()));
        }
        if self.c_c_ff >= self.c_f_ff / 10.0 {
            log::warn!(
                "C_c = {} fF is not much smaller than C_f = {} fF; the participation approximation degrades",
                self.c_c_ff,
                self.c_f_ff
            );
        }
        Ok(())
    }

    /// `C_q + C_c ∥ C_f`, fF.
    pub fn total_capacitance_ff(&self) -> f64 {
        if self.c_c_ff == 0.0 {
            return self.c_q_ff;
        }
        self.c_q_ff + self.c_c_ff * self.c_f_ff / (self.c_c_ff + self.c_f_ff)
    }

    pub fn charging_energy_ghz(&self) -> f64 {
        charging_energy_ghz(self.total_capacitance_ff())
    }

    pub fn qubit_frequency_ghz(&self) -> Result<f64> {
        qubit_frequency(self.e_j_ghz, self.charging_energy_ghz())
    }

    /// Wire impedance for the configured mode at `f01_ghz`, Ω.
    pub fn wire_impedance_ohm(&self, f01_ghz: f64) -> Result<f64> {
        match self.mode {
            WiringMode::Rf50Ohm => Ok(RF_LINE_OHM),
            WiringMode::Floating => Ok(FLOATING_OHM),
            WiringMode::DcWire => wire_impedance(
                self.wire_length_m,
                self.wire_radius_m,
                f01_ghz,
                self.wire_conductivity_s_per_m,
            ),
        }
    }
}

/// `E_C = e²/(2·C_tot)` in GHz.
pub fn charging_energy_ghz(c_tot_ff: f64) -> f64 {
    joule_to_ghz(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_tot_ff * FEMTO))
}

/// Transmon transition frequency `sqrt(8·E_J·E_C) − E_C`, GHz.
pub fn qubit_frequency(e_j_ghz: f64, e_c_ghz: f64) -> Result<f64> {
    if !(e_j_ghz > 0.0 && e_c_ghz > 0.0) {
        return Err(Error::Argument("E_J and E_C must be > 0".into()));
    }
    if e_j_ghz / e_c_ghz < 20.0 {
        log::warn!("E_J/E_C = {:.1} is outside the transmon regime", e_j_ghz / e_c_ghz);
    }
    Ok((8.0 * e_j_ghz * e_c_ghz).sqrt() - e_c_ghz)
}

/// Skin-effect impedance of a round wire, `sqrt(µ0·f/(π·σ))·l/(2r)`, Ω.
pub fn wire_impedance(length_m: f64, radius_m: f64, f01_ghz: f64, conductivity: f64) -> Result<f64> {
    for (name, v) in [
        ("wire length", length_m),
        ("wire radius", radius_m),
        ("frequency", f01_ghz),
        ("conductivity", conductivity),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Argument(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok((MU_0 * f01_ghz * GIGA / (std::f64::consts::PI * conductivity)).sqrt() * length_m / (2.0 * radius_m))
}

/// Josephson inductance `(ħ/2e)²/E_J`, H.
pub fn josephson_inductance(e_j_ghz: f64) -> f64 {
    let phi0 = HBAR / (2.0 * ELEMENTARY_CHARGE);
    phi0 * phi0 / ghz_to_joule(e_j_ghz)
}

fn omega(f01_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f01_ghz * GIGA
}

/// Real part of `Z ∥ 1/(iωC_f)`, Ω.
pub fn effective_resistance(z_ohm: f64, c_f_ff: f64, f01_ghz: f64) -> f64 {
    let x = omega(f01_ghz) * c_f_ff * FEMTO * z_ohm;
    z_ohm / (1.0 + x * x)
}

/// Loaded quality factor; `None` when the gate is decoupled.
pub fn loaded_quality_factor(params: &CircuitParams, f01_ghz: f64) -> Result<Option<f64>> {
    params.validate()?;
    if params.c_c_ff == 0.0 {
        return Ok(None);
    }
    let c_tot = params.total_capacitance_ff() * FEMTO;
    let z_q = (josephson_inductance(params.e_j_ghz) / c_tot).sqrt();
    let re_z = effective_resistance(params.wire_impedance_ohm(f01_ghz)?, params.c_f_ff, f01_ghz);
    let ratio = params.total_capacitance_ff() / params.c_c_ff;
    Ok(Some(ratio * ratio * z_q / re_z))
}

pub fn t1_radiative(params: &CircuitParams, f01_ghz: f64) -> Result<T1Limit> {
    Ok(match loaded_quality_factor(params, f01_ghz)? {
        Some(q) => T1Limit::from_rate_per_s(omega(f01_ghz) / q),
        None => T1Limit::Unbounded,
    })
}

/// `C_c²/(C_f·(C_q + C_c))`.
pub fn participation_ratio(params: &CircuitParams) -> f64 {
    params.c_c_ff * params.c_c_ff / (params.c_f_ff * (params.c_q_ff + params.c_c_ff))
}

/// Energy fraction in `C_f` without the `C_c ≪ C_f` simplification.
pub fn participation_ratio_exact(params: &CircuitParams) -> f64 {
    let (cq, cc, cf) = (params.c_q_ff, params.c_c_ff, params.c_f_ff);
    let divider = cc / (cc + cf);
    cf * divider * divider / (cq + cc * cf / (cc + cf))
}

pub fn t1_dielectric(params: &CircuitParams, f01_ghz: f64) -> Result<T1Limit> {
    params.validate()?;
    Ok(T1Limit::from_rate_per_s(
        participation_ratio(params) * params.loss_tangent * omega(f01_ghz),
    ))
}

/// Harmonic combination; an unbounded term leaves the other unchanged.
pub fn t1_total(rad: T1Limit, diel: T1Limit) -> T1Limit {
    let rate = rad.rate_per_ms() + diel.rate_per_ms();
    if rate > 0.0 {
        T1Limit::Finite(1.0 / rate)
    } else {
        T1Limit::Unbounded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub mode: WiringMode,
    pub c_tot_ff: f64,
    pub e_c_ghz: f64,
    pub f01_ghz: f64,
    pub wire_impedance_ohm: f64,
    pub participation_ratio: f64,
    pub loaded_quality_factor: Option<f64>,
    pub t1_radiative_ms: T1Limit,
    pub t1_dielectric_ms: T1Limit,
    pub t1_total_ms: T1Limit,
}

/// Full budget with `f01` derived from `E_J` and `C_tot`.
pub fn evaluate(params: &CircuitParams) -> Result<LossBudget> {
    params.validate()?;
    let f01 = params.qubit_frequency_ghz()?;
    if !(f01 > 0.0) {
        return Err(Error::Config(format!("derived qubit frequency {f01} GHz is not positive")));
    }
    let rad = t1_radiative(params, f01)?;
    let diel = t1_dielectric(params, f01)?;
    Ok(LossBudget {
        mode: params.mode,
        c_tot_ff: params.total_capacitance_ff(),
        e_c_ghz: params.charging_energy_ghz(),
        f01_ghz: f01,
        wire_impedance_ohm: params.wire_impedance_ohm(f01)?,
        participation_ratio: participation_ratio(params),
        loaded_quality_factor: loaded_quality_factor(params, f01)?,
        t1_radiative_ms: rad,
        t1_dielectric_ms: diel,
        t1_total_ms: t1_total(rad, diel),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateGeometry {
    pub gate_area_m2: f64,
    /// Qubit plane to gate electrode.
    pub gate_distance_m: f64,
    pub insulator_thickness_m: f64,
    pub insulator_permittivity: f64,
    /// Width of one island arm.
    pub island_width_m: f64,
    /// Length of one island arm.
    pub island_arm_length_m: f64,
    /// Gap between island and ground plane; half of it is added on each side
    /// of the arm.
    #[serde(default)]
    pub slot_gap_m: f64,
}

impl GateGeometry {
    pub fn validate(&self) -> Result<()> {
        positive("gate_area_m2", self.gate_area_m2)?;
        positive("gate_distance_m", self.gate_distance_m)?;
        positive("insulator_thickness_m", self.insulator_thickness_m)?;
        positive("insulator_permittivity", self.insulator_permittivity)?;
        positive("island_width_m", self.island_width_m)?;
        positive("island_arm_length_m", self.island_arm_length_m)?;
        if !(self.slot_gap_m >= 0.0 && self.slot_gap_m.is_finite()) {
            return Err(Error::Config("slot_gap_m must be >= 0".into()));
        }
        Ok(())
    }

    /// `2·(w + g)·L`, m².
    pub fn island_area_m2(&self) -> f64 {
        2.0 * (self.island_width_m + self.slot_gap_m) * self.island_arm_length_m
    }

    /// `(C_c, C_f)` in fF.
    pub fn capacitances_ff(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let overlap = self.gate_area_m2.min(self.island_area_m2());
        let c_c = EPSILON_0 * overlap / self.gate_distance_m / FEMTO;
        let c_f = EPSILON_0 * self.insulator_permittivity * self.gate_area_m2 / self.insulator_thickness_m / FEMTO;
        Ok((c_c, c_f))
    }

    pub fn with_area(&self, area_m2: f64) -> Self {
        Self {
            gate_area_m2: area_m2,
            ..self.clone()
        }
    }
}

/// Circuit parameters with `C_c`, `C_f` taken from `geometry`.
pub fn params_from_geometry(template: &CircuitParams, geometry: &GateGeometry) -> Result<CircuitParams> {
    let (c_c_ff, c_f_ff) = geometry.capacitances_ff()?;
    Ok(CircuitParams {
        c_c_ff,
        c_f_ff,
        ..template.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaPoint {
    pub area_m2: f64,
    pub c_c_ff: f64,
    pub c_f_ff: f64,
    pub f01_ghz: f64,
    pub t1_radiative_ms: T1Limit,
    pub t1_dielectric_ms: T1Limit,
    pub t1_total_ms: T1Limit,
}

/// Logarithmic area grid.
pub fn area_grid(min_m2: f64, max_m2: f64, n: usize) -> Result<Vec<f64>> {
    if !(min_m2 > 0.0 && max_m2 >= min_m2 && n >= 1) {
        return Err(Error::Argument(format!(
            "area grid needs 0 < min <= max and n >= 1, got {min_m2}:{max_m2}:{n}"
        )));
    }
    if n == 1 {
        return Ok(vec![min_m2]);
    }
    Ok((0..n)
        .map(|i| min_m2 * (max_m2 / min_m2).powf(i as f64 / (n - 1) as f64))
        .collect())
}

/// T1 limits over a set of gate areas for one wiring mode.
pub fn sweep_gate_area(
    template: &CircuitParams,
    geometry: &GateGeometry,
    areas_m2: &[f64],
    mode: WiringMode,
) -> Result<Vec<AreaPoint>> {
    areas_m2
        .iter()
        .map(|&a| {
            let mut p = params_from_geometry(template, &geometry.with_area(a))?;
            p.mode = mode;
            let b = evaluate(&p)?;
            Ok(AreaPoint {
                area_m2: a,
                c_c_ff: p.c_c_ff,
                c_f_ff: p.c_f_ff,
                f01_ghz: b.f01_ghz,
                t1_radiative_ms: b.t1_radiative_ms,
                t1_dielectric_ms: b.t1_dielectric_ms,
                t1_total_ms: b.t1_total_ms,
            })
        })
        .collect()
}

/// Copper DC wire (1 m, 50 µm radius, 1.5·10⁶ S/m at 2 K), E_J chosen for
/// f01 ≈ 6 GHz at C_tot ≈ 97 fF.
fn wired_template(c_q_ff: f64, loss_tangent: f64) -> CircuitParams {
    CircuitParams {
        c_q_ff,
        c_c_ff: 0.0,
        c_f_ff: 1.0,
        e_j_ghz: 24.0,
        wire_length_m: 1.0,
        wire_radius_m: 50e-6,
        wire_conductivity_s_per_m: 1.5e6,
        loss_tangent,
        mode: WiringMode::DcWire,
    }
}

/// Global gate above the chip: 4 mm diameter electrode 0.9 mm above the
/// qubit plane on a 60 µm Kapton foil (εr 3.5, tanδ 2·10⁻²); Xmon arms
/// 30 µm wide, 320 µm long, 20 µm gap.
pub fn global_gate_reference() -> Result<(CircuitParams, GateGeometry)> {
    let geometry = GateGeometry {
        gate_area_m2: std::f64::consts::PI * 2e-3 * 2e-3,
        gate_distance_m: 0.9e-3,
        insulator_thickness_m: 60e-6,
        insulator_permittivity: 3.5,
        island_width_m: 30e-6,
        island_arm_length_m: 320e-6,
        slot_gap_m: 20e-6,
    };
    let params = params_from_geometry(&wired_template(96.7, 2e-2), &geometry)?;
    Ok((params, geometry))
}

/// Local flip-chip gate: 15 µm chip separation, 25 nm AlOx spacer (εr 9,
/// tanδ 10⁻³), arms shortened to 300 µm; the electrode area is 0.12 mm².
pub fn local_gate_reference() -> Result<(CircuitParams, GateGeometry)> {
    let geometry = GateGeometry {
        gate_area_m2: 1.2e-7,
        gate_distance_m: 15e-6,
        insulator_thickness_m: 25e-9,
        insulator_permittivity: 9.0,
        island_width_m: 30e-6,
        island_arm_length_m: 300e-6,
        slot_gap_m: 20e-6,
    };
    let params = params_from_geometry(&wired_template(79.3, 1e-3), &geometry)?;
    Ok((params, geometry))
}
