//! Physical constants (CODATA 2018) and unit conversions.
//!
//! Model formulas work in SI (or in the practical units they are quoted in:
//! eV, GV/m, W/cm²). The propagation engines work in Hartree atomic units.
//! Everything crosses between the two through this module.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Elementary charge, C (exact).
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Electron rest mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J s.
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;

/// The constant set as a value, for code that wants to pass it around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub electron_charge: f64,
    pub electron_mass: f64,
    pub vacuum_permittivity: f64,
    pub speed_of_light: f64,
    pub reduced_planck: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        electron_charge: ELECTRON_CHARGE,
        electron_mass: ELECTRON_MASS,
        vacuum_permittivity: VACUUM_PERMITTIVITY,
        speed_of_light: SPEED_OF_LIGHT,
        reduced_planck: REDUCED_PLANCK,
    };
}

/// Bohr radius a₀ = 4πε₀ħ²/(m e²), m.
pub const BOHR_RADIUS: f64 = 4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * REDUCED_PLANCK
    * REDUCED_PLANCK
    / (ELECTRON_MASS * ELECTRON_CHARGE * ELECTRON_CHARGE);
/// Hartree energy E_h = ħ²/(m a₀²), J.
pub const HARTREE: f64 = REDUCED_PLANCK * REDUCED_PLANCK / (ELECTRON_MASS * BOHR_RADIUS * BOHR_RADIUS);
/// Atomic unit of time ħ/E_h, s.
pub const AU_TIME: f64 = REDUCED_PLANCK / HARTREE;
/// Atomic unit of electric field E_h/(e a₀), V/m.
pub const AU_FIELD: f64 = HARTREE / (ELECTRON_CHARGE * BOHR_RADIUS);
/// Atomic unit of intensity E_h/(t_au a₀²), W/m².
///
/// This is the strict unit, not the 3.51e16 W/cm² "intensity of a 1 a.u. peak
/// field" that is sometimes quoted; use [`crate::laser::field_from_intensity`]
/// for the latter relation.
pub const AU_INTENSITY: f64 = HARTREE / (AU_TIME * BOHR_RADIUS * BOHR_RADIUS);

/// Coulomb constant e²/(4πε₀) in eV nm.
pub const COULOMB_EV_NM: f64 =
    ELECTRON_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY) * 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Energy,
    Field,
    Intensity,
    Time,
    Length,
    Voltage,
    Frequency,
    Power,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Energy => "energy",
            Dimension::Field => "field",
            Dimension::Intensity => "intensity",
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::Voltage => "voltage",
            Dimension::Frequency => "frequency",
            Dimension::Power => "power",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    ElectronVolt,
    MilliElectronVolt,
    Joule,
    Hartree,
    VoltPerMeter,
    VoltPerNanometer,
    GigaVoltPerMeter,
    AtomicField,
    WattPerSquareCentimeter,
    WattPerSquareMeter,
    AtomicIntensity,
    Second,
    Femtosecond,
    AtomicTime,
    Meter,
    Micrometer,
    Nanometer,
    Bohr,
    Volt,
    Kilovolt,
    Millivolt,
    Hertz,
    Megahertz,
    Watt,
    Milliwatt,
    Radian,
    One,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            ElectronVolt | MilliElectronVolt | Joule | Hartree => Dimension::Energy,
            VoltPerMeter | VoltPerNanometer | GigaVoltPerMeter | AtomicField => Dimension::Field,
            WattPerSquareCentimeter | WattPerSquareMeter | AtomicIntensity => Dimension::Intensity,
            Second | Femtosecond | AtomicTime => Dimension::Time,
            Meter | Micrometer | Nanometer | Bohr => Dimension::Length,
            Volt | Kilovolt | Millivolt => Dimension::Voltage,
            Hertz | Megahertz => Dimension::Frequency,
            Watt | Milliwatt => Dimension::Power,
            Radian | One => Dimension::Dimensionless,
        }
    }

    /// Size of one of this unit in the SI base of its dimension.
    pub fn si_factor(self) -> f64 {
        use Unit::*;
        match self {
            ElectronVolt => ELECTRON_CHARGE,
            MilliElectronVolt => ELECTRON_CHARGE * 1e-3,
            Joule => 1.0,
            Hartree => HARTREE,
            VoltPerMeter => 1.0,
            VoltPerNanometer => 1e9,
            GigaVoltPerMeter => 1e9,
            AtomicField => AU_FIELD,
            WattPerSquareCentimeter => 1e4,
            WattPerSquareMeter => 1.0,
            AtomicIntensity => AU_INTENSITY,
            Second => 1.0,
            Femtosecond => 1e-15,
            AtomicTime => AU_TIME,
            Meter => 1.0,
            Micrometer => 1e-6,
            Nanometer => 1e-9,
            Bohr => BOHR_RADIUS,
            Volt => 1.0,
            Kilovolt => 1e3,
            Millivolt => 1e-3,
            Hertz => 1.0,
            Megahertz => 1e6,
            Watt => 1.0,
            Milliwatt => 1e-3,
            Radian | One => 1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            ElectronVolt => "eV",
            MilliElectronVolt => "meV",
            Joule => "J",
            Hartree => "Ha",
            VoltPerMeter => "V/m",
            VoltPerNanometer => "V/nm",
            GigaVoltPerMeter => "GV/m",
            AtomicField => "au_field",
            WattPerSquareCentimeter => "W/cm2",
            WattPerSquareMeter => "W/m2",
            AtomicIntensity => "au_intensity",
            Second => "s",
            Femtosecond => "fs",
            AtomicTime => "au_time",
            Meter => "m",
            Micrometer => "um",
            Nanometer => "nm",
            Bohr => "bohr",
            Volt => "V",
            Kilovolt => "kV",
            Millivolt => "mV",
            Hertz => "Hz",
            Megahertz => "MHz",
            Watt => "W",
            Milliwatt => "mW",
            Radian => "rad",
            One => "",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Unit::*;
        let u = match s.trim() {
            "eV" => ElectronVolt,
            "meV" => MilliElectronVolt,
            "J" => Joule,
            "Ha" | "hartree" => Hartree,
            "V/m" => VoltPerMeter,
            "V/nm" => VoltPerNanometer,
            "GV/m" => GigaVoltPerMeter,
            "au_field" => AtomicField,
            "W/cm2" | "W/cm^2" | "W/cm²" => WattPerSquareCentimeter,
            "W/m2" | "W/m^2" | "W/m²" => WattPerSquareMeter,
            "au_intensity" => AtomicIntensity,
            "s" => Second,
            "fs" => Femtosecond,
            "au_time" => AtomicTime,
            "m" => Meter,
            "um" | "µm" | "μm" => Micrometer,
            "nm" => Nanometer,
            "bohr" | "au_length" => Bohr,
            "V" => Volt,
            "kV" => Kilovolt,
            "mV" => Millivolt,
            "Hz" => Hertz,
            "MHz" => Megahertz,
            "W" => Watt,
            "mW" => Milliwatt,
            "rad" => Radian,
            "" => One,
            other => return Err(Error::UnknownUnit(other.to_string())),
        };
        Ok(u)
    }
}

/// Converts `value` from one unit to another of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::DimensionMismatch {
            from: from.dimension(),
            to: to.dimension(),
        });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * (from.si_factor() / to.si_factor()))
}

/// Parses a quantity such as `"150 V"`, `"6.5fs"` or `"1.2e11 W/cm2"` into a
/// value expressed in `target`. A bare number is taken to already be in
/// `target`.
pub fn parse_quantity(text: &str, target: Unit) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && is_exponent_marker(text, i)))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| Error::BadQuantity(text.to_string()))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let unit: Unit = unit.parse()?;
    convert(value, unit, target)
}

fn is_exponent_marker(text: &str, i: usize) -> bool {
    // 'e' is an exponent only when followed by a digit or sign+digit ("1e11"),
    // not when it starts a unit ("4.35 eV").
    let rest = &text.as_bytes()[i + 1..];
    match rest {
        [d, ..] if d.is_ascii_digit() => true,
        [s, d, ..] if (*s == b'+' || *s == b'-') && d.is_ascii_digit() => true,
        _ => false,
    }
}

// Shorthands used by the engines.

pub fn ev_to_hartree(e: f64) -> f64 {
    e * (ELECTRON_CHARGE / HARTREE)
}

pub fn hartree_to_ev(e: f64) -> f64 {
    e * (HARTREE / ELECTRON_CHARGE)
}

pub fn gvm_to_au(f: f64) -> f64 {
    f * (1e9 / AU_FIELD)
}

pub fn au_to_gvm(f: f64) -> f64 {
    f * (AU_FIELD / 1e9)
}

pub fn fs_to_au(t: f64) -> f64 {
    t * (1e-15 / AU_TIME)
}

pub fn au_to_fs(t: f64) -> f64 {
    t * (AU_TIME / 1e-15)
}

pub fn nm_to_au(x: f64) -> f64 {
    x * (1e-9 / BOHR_RADIUS)
}

pub fn au_to_nm(x: f64) -> f64 {
    x * (BOHR_RADIUS / 1e-9)
}
