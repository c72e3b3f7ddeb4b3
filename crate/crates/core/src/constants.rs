//! Physical constants (CODATA, 6 significant figures) and unit conversions.
//!
//! All loss-budget arithmetic happens in SI units; these helpers convert at
//! the module boundaries.
//!
//! | symbol | value | unit |
//! |--------|-------|------|
//! | e      | 1.60218e-19 | C |
//! | h      | 6.62607e-34 | J s |
//! | ħ      | 1.05457e-34 | J s |
//! | µ0     | 1.25664e-6  | H/m |
//! | ε0     | 8.85419e-12 | F/m |

pub const ELEMENTARY_CHARGE: f64 = 1.60218e-19;
pub const PLANCK: f64 = 6.62607e-34;
pub const HBAR: f64 = 1.05457e-34;
pub const MU_0: f64 = 1.25664e-6;
pub const EPSILON_0: f64 = 8.85419e-12;

/// One ångström in metres.
pub const ANGSTROM: f64 = 1e-10;
pub const FEMTO: f64 = 1e-15;
pub const GIGA: f64 = 1e9;
pub const MEGA: f64 = 1e6;

/// Asymmetry shift in GHz produced by a dipole of 1 e·Å in a field of 1 V/m,
/// i.e. `e · 1 Å / h / 1e9`.
pub const DIPOLE_SHIFT_GHZ_PER_EA_VPM: f64 = ELEMENTARY_CHARGE * ANGSTROM / PLANCK / GIGA;

/// Energy of a frequency `f_ghz` (E = h f) in joules.
pub fn ghz_to_joule(f_ghz: f64) -> f64 {
    PLANCK * f_ghz * GIGA
}

pub fn joule_to_ghz(energy: f64) -> f64 {
    energy / PLANCK / GIGA
}
