//! Run configuration: a sectioned `key = value` text format with units.
//!
//! ```text
//! [tip]
//! work_function = 4.35 eV
//! voltage = 150 V
//!
//! [engine]
//! kind = synthetic
//! seed = 7
//!
//! [synthetic]
//!
//! [scan]
//! parameter = intensity
//! values = 0.9e11, 1.5e11, 2.3e11 W/cm2
//! ```
//!
//! Unknown sections and keys, duplicates and malformed values are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::analysis::{PeakOptions, SlopeReference};
use crate::classical::EnsembleConfig;
use crate::error::{Error, Result};
use crate::laser::{keldysh, BeamPower, Envelope, LaserDrive};
use crate::spectro::{InstrumentModel, Smoothing, VoltageGrid};
use crate::synthetic::SyntheticLadderModel;
use crate::tdse::TdseSettings;
use crate::tip::{threshold_photon_order, TipSurface};
use crate::units::{parse_quantity, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Quantum,
    Classical,
    Synthetic,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Quantum => "quantum",
            EngineKind::Classical => "classical",
            EngineKind::Synthetic => "synthetic",
        }
    }

    fn section(self) -> &'static str {
        match self {
            EngineKind::Quantum => "grid",
            EngineKind::Classical => "ensemble",
            EngineKind::Synthetic => "synthetic",
        }
    }
}

/// Quantity varied across a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParameter {
    /// Incident peak intensity.
    Intensity,
    Voltage,
    Enhancement,
    CarrierEnvelopePhase,
    Duration,
    Barrier,
}

impl ScanParameter {
    const ALL: [ScanParameter; 6] = [
        ScanParameter::Intensity,
        ScanParameter::Voltage,
        ScanParameter::Enhancement,
        ScanParameter::CarrierEnvelopePhase,
        ScanParameter::Duration,
        ScanParameter::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::Intensity => "intensity",
            ScanParameter::Voltage => "voltage",
            ScanParameter::Enhancement => "enhancement",
            ScanParameter::CarrierEnvelopePhase => "cep",
            ScanParameter::Duration => "duration",
            ScanParameter::Barrier => "barrier",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            ScanParameter::Intensity => Unit::WattPerSquareCentimeter,
            ScanParameter::Voltage => Unit::Volt,
            ScanParameter::Enhancement => Unit::One,
            ScanParameter::CarrierEnvelopePhase => Unit::Radian,
            ScanParameter::Duration => Unit::Femtosecond,
            ScanParameter::Barrier => Unit::ElectronVolt,
        }
    }

    /// Copy of `config` with this parameter set to `value`.
    pub fn apply(self, config: &RunConfig, value: f64) -> RunConfig {
        let mut c = config.clone();
        match self {
            ScanParameter::Intensity => c.laser.peak_intensity = value,
            ScanParameter::Voltage => c.tip.tip_voltage = value,
            ScanParameter::Enhancement => c.laser.enhancement = value,
            ScanParameter::CarrierEnvelopePhase => c.laser.carrier_envelope_phase = value,
            ScanParameter::Duration => c.laser.fwhm_duration = value,
            ScanParameter::Barrier => c.tip.barrier_override = Some(value),
        }
        // beam-power bookkeeping only describes the base point
        if matches!(self, ScanParameter::Intensity | ScanParameter::Duration) {
            c.laser.power = None;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
}

/// Optional pass of every spectrum through the synthetic spectrometer.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentConfig {
    pub model: InstrumentModel,
    /// Pulses per voltage setting.
    pub exposure: f64,
    pub voltages: VoltageGrid,
    pub smoothing: Smoothing,
    /// Energy of zero retarding voltage on the Fermi-referenced axis, eV.
    pub fermi_reference: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        InstrumentConfig {
            model: InstrumentModel::default(),
            exposure: 1e6,
            voltages: VoltageGrid { start: 0.0, step: 0.02, count: 601 },
            smoothing: Smoothing::default(),
            fermi_reference: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub peaks: PeakOptions,
    /// Threshold order K; `None` takes the derived value.
    pub first_order: Option<u32>,
    pub exclude_lowest: bool,
    pub cuton_fraction: f64,
    /// Only features first seen in this window are tracked, eV.
    pub track_range: Option<(f64, f64)>,
    pub minima: bool,
    pub reference: SlopeReference,
    /// Expected S=0 position in the weakest spectrum, eV.
    pub s0_hint: Option<f64>,
    /// Matching window across intensities, eV. `None` uses ħω/2.
    pub match_window: Option<f64>,
    /// Log-density floor below the maximum for kink fits.
    pub kink_floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            peaks: PeakOptions { prominence: 0.3, min_separation: 0.78, log_scale: true },
            first_order: None,
            exclude_lowest: true,
            cuton_fraction: 0.05,
            track_range: None,
            minima: false,
            reference: SlopeReference::Printed,
            s0_hint: None,
            match_window: None,
            kink_floor: 1e-6,
        }
    }
}

/// Quantities derived from the tip and drive, echoed with every config.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    /// GV/m
    pub dc_field: f64,
    /// eV
    pub barrier: f64,
    /// eV
    pub ponderomotive: f64,
    pub enhanced_intensity: f64,
    pub keldysh: Option<f64>,
    pub threshold_order: u32,
}

impl Derived {
    pub fn compute(tip: &TipSurface, laser: &LaserDrive) -> Result<Derived> {
        let dc_field = tip.dc_field()?;
        let barrier = tip.effective_barrier()?;
        let ponderomotive = laser.ponderomotive_energy();
        Ok(Derived {
            dc_field,
            barrier,
            ponderomotive,
            enhanced_intensity: laser.enhanced_intensity(),
            keldysh: keldysh(barrier, ponderomotive).ok(),
            threshold_order: threshold_photon_order(barrier, laser.photon_energy, ponderomotive)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: EngineKind,
    pub seed: Option<u64>,
    pub tip: TipSurface,
    pub laser: LaserDrive,
    pub tdse: TdseSettings,
    pub ensemble: EnsembleConfig,
    pub synthetic: SyntheticLadderModel,
    pub instrument: Option<InstrumentConfig>,
    pub analysis: AnalysisConfig,
    pub scan: Option<ScanConfig>,
    pub output: PathBuf,
    pub derived: Derived,
}

impl RunConfig {
    /// K from the analysis section or the derived value.
    pub fn threshold_order(&self) -> u32 {
        self.analysis.first_order.unwrap_or(self.derived.threshold_order)
    }

    pub fn match_window(&self) -> f64 {
        self.analysis.match_window.unwrap_or(0.5 * self.laser.photon_energy)
    }

    /// Scan values, or the single base point when no scan is configured.
    pub fn points(&self) -> (ScanParameter, Vec<f64>) {
        match &self.scan {
            Some(s) => (s.parameter, s.values.clone()),
            None => (ScanParameter::Intensity, vec![self.laser.peak_intensity]),
        }
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Section {
    name: String,
    entries: Vec<Entry>,
}

const SECTIONS: [&str; 11] =
    ["tip", "laser", "engine", "grid", "window", "ensemble", "synthetic", "instrument", "analysis", "scan", "output"];

fn tokenize(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line, message: format!("malformed section header `{content}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config { line, message: format!("unknown section [{name}]") });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Config { line, message: format!("duplicate section [{name}]") });
            }
            sections.push(Section { name: name.to_string(), entries: Vec::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config { line, message: "empty key".into() });
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::Config { line, message: format!("key `{key}` outside any section") })?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(Error::Config { line, message: format!("duplicate key `{}.{key}`", section.name) });
        }
        section.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
    }
    Ok(sections)
}

/// Typed access to one section; every key must be consumed.
struct Reader<'a> {
    section: &'a str,
    entries: BTreeMap<&'a str, (&'a str, usize)>,
}

impl<'a> Reader<'a> {
    fn new(section: Option<&'a Section>, name: &'a str) -> Self {
        let entries = section
            .map(|s| s.entries.iter().map(|e| (e.key.as_str(), (e.value.as_str(), e.line))).collect())
            .unwrap_or_default();
        Reader { section: name, entries }
    }

    fn err(&self, key: &str, line: usize, message: impl std::fmt::Display) -> Error {
        Error::ConfigField { path: format!("{}.{key} (line {line})", self.section), message: message.to_string() }
    }

    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.entries.remove(key)
    }

    fn quantity(&mut self, key: &str, unit: Unit, target: &mut f64) -> Result<()> {
        if let Some((v, line)) = self.raw(key) {
            *target = parse_quantity(v, unit).map_err(|e| self.err(key, line, e))?;
        }
        Ok(())
    }

    fn optional(&mut self, key: &str, unit: Unit, target: &mut Option<f64>) -> Result<()> {
        if let Some((v, line)) = self.raw(key) {
            *target = if v == "none" { None } else { Some(parse_quantity(v, unit).map_err(|e| self.err(key, line, e))?) };
        }
        Ok(())
    }

    fn integer<T: std::str::FromStr>(&mut self, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((v, line)) = self.raw(key) {
            *target = v.parse().map_err(|e| self.err(key, line, e))?;
        }
        Ok(())
    }

    fn flag(&mut self, key: &str, target: &mut bool) -> Result<()> {
        if let Some((v, line)) = self.raw(key) {
            *target = match v {
                "true" | "yes" | "on" => true,
                "false" | "no" | "off" => false,
                other => return Err(self.err(key, line, format!("expected true or false, got `{other}`"))),
            };
        }
        Ok(())
    }

    fn list(&mut self, key: &str, unit: Unit) -> Result<Option<(Vec<f64>, usize)>> {
        let Some((v, line)) = self.raw(key) else { return Ok(None) };
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        // a unit on the last item applies to bare numbers before it
        let shared = items.last().and_then(|last| {
            let number_end = last.find(|c: char| c.is_whitespace())?;
            Some(last[number_end..].trim())
        });
        let mut out = Vec::with_capacity(items.len());
        for item in &items {
            let text = match shared {
                Some(u) if item.parse::<f64>().is_ok() => format!("{item} {u}"),
                _ => item.to_string(),
            };
            out.push(parse_quantity(&text, unit).map_err(|e| self.err(key, line, e))?);
        }
        Ok(Some((out, line)))
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(Error::ConfigField {
                path: format!("{}.{key} (line {line})", self.section),
                message: "unknown key".into(),
            });
        }
        Ok(())
    }
}

fn field_error(path: &str, e: impl std::fmt::Display) -> Error {
    Error::ConfigField { path: path.to_string(), message: e.to_string() }
}

/// Parses and validates a configuration, computing the derived echo.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    let mut r = Reader::new(find("engine"), "engine");
    let engine = match r.raw("kind") {
        None => return Err(field_error("engine.kind", "missing")),
        Some(("quantum", _)) => EngineKind::Quantum,
        Some(("classical", _)) => EngineKind::Classical,
        Some(("synthetic", _)) => EngineKind::Synthetic,
        Some((other, line)) => return Err(r.err("kind", line, format!("unknown engine `{other}`"))),
    };
    let mut seed = None;
    if let Some((v, line)) = r.raw("seed") {
        seed = Some(v.parse::<u64>().map_err(|e| r.err("seed", line, e))?);
    }
    r.finish()?;

    let mut tip = TipSurface::default();
    let mut r = Reader::new(find("tip"), "tip");
    r.quantity("work_function", Unit::ElectronVolt, &mut tip.work_function)?;
    r.quantity("voltage", Unit::Volt, &mut tip.tip_voltage)?;
    r.quantity("radius", Unit::Nanometer, &mut tip.tip_radius)?;
    r.quantity("shielding", Unit::One, &mut tip.shielding_factor)?;
    r.quantity("initial_state_offset", Unit::ElectronVolt, &mut tip.initial_state_offset)?;
    r.quantity("fermi_depth", Unit::ElectronVolt, &mut tip.fermi_depth)?;
    r.optional("field_override", Unit::GigaVoltPerMeter, &mut tip.field_override)?;
    r.optional("barrier_override", Unit::ElectronVolt, &mut tip.barrier_override)?;
    r.finish()?;
    tip.validate().map_err(|e| field_error("tip", e))?;

    let mut laser = LaserDrive::default();
    let mut r = Reader::new(find("laser"), "laser");
    r.quantity("photon_energy", Unit::ElectronVolt, &mut laser.photon_energy)?;
    r.quantity("duration", Unit::Femtosecond, &mut laser.fwhm_duration)?;
    r.quantity("cep", Unit::Radian, &mut laser.carrier_envelope_phase)?;
    r.quantity("intensity", Unit::WattPerSquareCentimeter, &mut laser.peak_intensity)?;
    r.quantity("enhancement", Unit::One, &mut laser.enhancement)?;
    let (mut ramp, mut flat) = (2.0, 20.0);
    r.quantity("ramp_cycles", Unit::One, &mut ramp)?;
    r.quantity("flat_cycles", Unit::One, &mut flat)?;
    match r.raw("envelope") {
        None | Some(("gaussian", _)) => {}
        Some(("flat_top", _)) => laser.envelope = Envelope::FlatTop { ramp_cycles: ramp, flat_cycles: flat },
        Some((other, line)) => return Err(r.err("envelope", line, format!("unknown envelope `{other}`"))),
    }
    let mut power = [None, None, None];
    r.optional("avg_power", Unit::Watt, &mut power[0])?;
    r.optional("rep_rate", Unit::Hertz, &mut power[1])?;
    r.optional("spot_radius", Unit::Micrometer, &mut power[2])?;
    r.finish()?;
    laser.power = match power {
        [Some(avg_power), Some(rep_rate), Some(spot_radius)] => Some(BeamPower { avg_power, rep_rate, spot_radius }),
        [None, None, None] => None,
        _ => return Err(field_error("laser.avg_power", "avg_power, rep_rate and spot_radius go together")),
    };
    laser.validate().map_err(|e| field_error("laser", e))?;

    let mut tdse = TdseSettings::default();
    let mut r = Reader::new(find("grid"), "grid");
    let g = &mut tdse.grid;
    r.quantity("dx", Unit::Bohr, &mut g.dx)?;
    r.integer("points", &mut g.points)?;
    r.quantity("slab_width", Unit::Bohr, &mut g.slab_width)?;
    r.quantity("back_vacuum", Unit::Bohr, &mut g.back_vacuum)?;
    r.quantity("dt", Unit::AtomicTime, &mut g.dt)?;
    r.quantity("absorber_fraction", Unit::One, &mut g.absorber_fraction)?;
    r.quantity("absorber_exponent", Unit::One, &mut tdse.absorber_exponent)?;
    let p = &mut tdse.potential;
    r.flag("image_charge", &mut p.image_charge)?;
    r.optional("image_regularization", Unit::Bohr, &mut p.image_regularization)?;
    r.quantity("junction_width", Unit::Bohr, &mut p.junction_width)?;
    r.quantity("screening_width", Unit::Bohr, &mut p.screening_width)?;
    r.quantity("initial_energy", Unit::ElectronVolt, &mut tdse.initial_energy)?;
    r.optional("post_pulse", Unit::Femtosecond, &mut tdse.post_pulse)?;
    r.finish()?;
    tdse.grid.validate().map_err(|e| field_error("grid", e))?;

    let mut r = Reader::new(find("window"), "window");
    let w = &mut tdse.window;
    r.quantity("resolution", Unit::ElectronVolt, &mut w.resolution)?;
    r.quantity("detector", Unit::Bohr, &mut w.detector)?;
    r.quantity("cut_width", Unit::Bohr, &mut w.cut_width)?;
    r.quantity("energy_min", Unit::ElectronVolt, &mut w.energy_min)?;
    r.quantity("energy_max", Unit::ElectronVolt, &mut w.energy_max)?;
    r.quantity("energy_step", Unit::ElectronVolt, &mut w.energy_step)?;
    r.quantity("cap_strength", Unit::Hartree, &mut w.cap_strength)?;
    r.quantity("extension", Unit::Bohr, &mut w.extension)?;
    r.integer("decimation", &mut w.decimation)?;
    r.finish()?;

    let mut ensemble = EnsembleConfig::default();
    let mut r = Reader::new(find("ensemble"), "ensemble");
    r.integer("births", &mut ensemble.births)?;
    r.quantity("rescatter_probability", Unit::One, &mut ensemble.rescatter_probability)?;
    r.quantity("step", Unit::Femtosecond, &mut ensemble.trajectory.step)?;
    r.quantity("detector", Unit::Nanometer, &mut ensemble.trajectory.detector)?;
    r.integer("max_steps", &mut ensemble.trajectory.max_steps)?;
    r.flag("surface", &mut ensemble.trajectory.surface)?;
    r.quantity("weight_floor", Unit::One, &mut ensemble.weight_floor)?;
    r.quantity("energy_step", Unit::ElectronVolt, &mut ensemble.energy_step)?;
    let (mut b0, mut b1) = (None, None);
    r.optional("birth_start", Unit::Femtosecond, &mut b0)?;
    r.optional("birth_end", Unit::Femtosecond, &mut b1)?;
    r.finish()?;
    ensemble.birth_window = match (b0, b1) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(field_error("ensemble.birth_start", "birth_start and birth_end go together")),
    };
    ensemble.validate(&laser).map_err(|e| field_error("ensemble", e))?;

    let mut synthetic = SyntheticLadderModel::default();
    let mut r = Reader::new(find("synthetic"), "synthetic");
    let s = &mut synthetic;
    r.quantity("spacing", Unit::ElectronVolt, &mut s.spacing)?;
    r.quantity("intercept", Unit::ElectronVolt, &mut s.intercept)?;
    r.quantity("decay", Unit::One, &mut s.decay)?;
    r.quantity("width", Unit::ElectronVolt, &mut s.width)?;
    r.quantity("cut_on", Unit::ElectronVolt, &mut s.cut_on)?;
    r.quantity("slope", Unit::One, &mut s.slope)?;
    if let Some((v, _)) = r.list("order_slopes", Unit::One)? {
        s.order_slopes = v;
    }
    r.quantity("reference_intensity", Unit::WattPerSquareCentimeter, &mut s.reference_intensity)?;
    r.integer("first_order", &mut s.first_order)?;
    r.integer("orders", &mut s.orders)?;
    r.quantity("critical_intensity", Unit::WattPerSquareCentimeter, &mut s.critical_intensity)?;
    r.quantity("suppression_exponent", Unit::One, &mut s.suppression_exponent)?;
    r.quantity("background", Unit::One, &mut s.background)?;
    r.quantity("background_scale", Unit::ElectronVolt, &mut s.background_scale)?;
    r.quantity("amplitude", Unit::One, &mut s.amplitude)?;
    r.quantity("energy_min", Unit::ElectronVolt, &mut s.energy_min)?;
    r.quantity("energy_max", Unit::ElectronVolt, &mut s.energy_max)?;
    r.quantity("energy_step", Unit::ElectronVolt, &mut s.energy_step)?;
    r.finish()?;
    synthetic.validate().map_err(|e| field_error("synthetic", e))?;

    let instrument = match find("instrument") {
        None => None,
        Some(sec) => {
            let mut ic = InstrumentConfig::default();
            let mut r = Reader::new(Some(sec), "instrument");
            r.quantity("resolution", Unit::ElectronVolt, &mut ic.model.resolution)?;
            r.quantity("background", Unit::One, &mut ic.model.background)?;
            r.quantity("efficiency", Unit::One, &mut ic.model.efficiency)?;
            r.quantity("exposure", Unit::One, &mut ic.exposure)?;
            let (mut v0, mut v1, mut dv) = (0.0, 12.0, 0.02);
            r.quantity("voltage_start", Unit::Volt, &mut v0)?;
            r.quantity("voltage_stop", Unit::Volt, &mut v1)?;
            r.quantity("voltage_step", Unit::Volt, &mut dv)?;
            r.integer("window", &mut ic.smoothing.window)?;
            r.integer("order", &mut ic.smoothing.order)?;
            r.quantity("fermi_reference", Unit::ElectronVolt, &mut ic.fermi_reference)?;
            r.finish()?;
            ic.voltages = VoltageGrid::spanning(v0, v1, dv).map_err(|e| field_error("instrument.voltage_step", e))?;
            ic.model.validate().map_err(|e| field_error("instrument", e))?;
            ic.smoothing.validate().map_err(|e| field_error("instrument.window", e))?;
            if !(ic.exposure > 0.0) {
                return Err(field_error("instrument.exposure", "must be > 0"));
            }
            if seed.is_none() {
                return Err(field_error("engine.seed", "required when [instrument] draws counts"));
            }
            Some(ic)
        }
    };

    let mut analysis = AnalysisConfig::default();
    let mut r = Reader::new(find("analysis"), "analysis");
    let a = &mut analysis;
    r.quantity("prominence", Unit::One, &mut a.peaks.prominence)?;
    r.flag("log_scale", &mut a.peaks.log_scale)?;
    r.quantity("min_separation", Unit::ElectronVolt, &mut a.peaks.min_separation)?;
    if let Some((v, line)) = r.raw("first_order") {
        a.first_order = if v == "none" { None } else { Some(v.parse().map_err(|e| r.err("first_order", line, e))?) };
    }
    r.flag("exclude_lowest", &mut a.exclude_lowest)?;
    r.quantity("cuton_fraction", Unit::One, &mut a.cuton_fraction)?;
    let (mut t0, mut t1) = (None, None);
    r.optional("track_min", Unit::ElectronVolt, &mut t0)?;
    r.optional("track_max", Unit::ElectronVolt, &mut t1)?;
    a.track_range = match (t0, t1) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    r.flag("minima", &mut a.minima)?;
    match r.raw("reference") {
        None | Some(("printed", _)) => {}
        Some(("formula", _)) => a.reference = SlopeReference::Formula,
        Some((other, line)) => return Err(r.err("reference", line, format!("expected printed or formula, got `{other}`"))),
    }
    r.optional("s0_hint", Unit::ElectronVolt, &mut a.s0_hint)?;
    r.optional("match_window", Unit::ElectronVolt, &mut a.match_window)?;
    r.quantity("kink_floor", Unit::One, &mut a.kink_floor)?;
    r.finish()?;
    if !(analysis.cuton_fraction > 0.0 && analysis.cuton_fraction < 1.0) {
        return Err(field_error("analysis.cuton_fraction", "must lie in (0, 1)"));
    }

    let scan = match find("scan") {
        None => None,
        Some(sec) => {
            let mut r = Reader::new(Some(sec), "scan");
            let parameter = match r.raw("parameter") {
                None => return Err(field_error("scan.parameter", "missing")),
                Some((name, line)) => ScanParameter::ALL
                    .into_iter()
                    .find(|p| p.name() == name)
                    .ok_or_else(|| r.err("parameter", line, format!("unknown scan parameter `{name}`")))?,
            };
            let (values, line) = r.list("values", parameter.unit())?.ok_or_else(|| field_error("scan.values", "missing"))?;
            r.finish()?;
            if values.is_empty() {
                return Err(field_error(&format!("scan.values (line {line})"), "empty scan list"));
            }
            let up = values.windows(2).all(|w| w[1] > w[0]);
            let down = values.windows(2).all(|w| w[1] < w[0]);
            if !(up || down) {
                return Err(field_error(&format!("scan.values (line {line})"), "values must be strictly monotone"));
            }
            Some(ScanConfig { parameter, values })
        }
    };

    let mut output = PathBuf::from("atp-output");
    let mut r = Reader::new(find("output"), "output");
    if let Some((v, _)) = r.raw("directory") {
        output = PathBuf::from(v);
    }
    r.finish()?;

    for needed in ["tip", "laser"].into_iter().filter(|_| engine != EngineKind::Synthetic).chain([engine.section()]) {
        if find(needed).is_none() {
            return Err(field_error(needed, format!("section required by the {} engine", engine.name())));
        }
    }

    let derived = Derived::compute(&tip, &laser).map_err(|e| field_error("tip", e))?;
    Ok(RunConfig { engine, seed, tip, laser, tdse, ensemble, synthetic, instrument, analysis, scan, output, derived })
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e7).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn q(out: &mut String, key: &str, v: f64, unit: Unit) {
    let sym = unit.symbol();
    let _ = if sym.is_empty() { writeln!(out, "{key} = {}", num(v)) } else { writeln!(out, "{key} = {} {sym}", num(v)) };
}

fn opt(out: &mut String, key: &str, v: Option<f64>, unit: Unit) {
    match v {
        Some(v) => q(out, key, v, unit),
        None => {
            let _ = writeln!(out, "{key} = none");
        }
    }
}

/// The derived quantities as `#` comment lines.
pub fn echo(config: &RunConfig) -> String {
    let d = &config.derived;
    let mut out = String::new();
    let _ = writeln!(out, "# F_dc = {:.4} GV/m", d.dc_field);
    let _ = writeln!(out, "# phi_eff = {:.4} eV", d.barrier);
    let _ = writeln!(out, "# enhanced intensity = {:.4e} W/cm2", d.enhanced_intensity);
    let _ = writeln!(out, "# U_p = {:.4e} eV", d.ponderomotive);
    match d.keldysh {
        Some(g) => writeln!(out, "# gamma = {g:.4}"),
        None => writeln!(out, "# gamma = undefined (zero intensity)"),
    }
    .ok();
    let _ = writeln!(out, "# K = {}", d.threshold_order);
    out
}

/// Writes a config that parses back to an identical [`RunConfig`].
pub fn emit_config(config: &RunConfig) -> String {
    let mut o = echo(config);
    let _ = writeln!(o, "\n[engine]\nkind = {}", config.engine.name());
    if let Some(seed) = config.seed {
        let _ = writeln!(o, "seed = {seed}");
    }

    let t = &config.tip;
    o.push_str("\n[tip]\n");
    q(&mut o, "work_function", t.work_function, Unit::ElectronVolt);
    q(&mut o, "voltage", t.tip_voltage, Unit::Volt);
    q(&mut o, "radius", t.tip_radius, Unit::Nanometer);
    q(&mut o, "shielding", t.shielding_factor, Unit::One);
    q(&mut o, "initial_state_offset", t.initial_state_offset, Unit::ElectronVolt);
    q(&mut o, "fermi_depth", t.fermi_depth, Unit::ElectronVolt);
    opt(&mut o, "field_override", t.field_override, Unit::GigaVoltPerMeter);
    opt(&mut o, "barrier_override", t.barrier_override, Unit::ElectronVolt);

    let l = &config.laser;
    o.push_str("\n[laser]\n");
    q(&mut o, "photon_energy", l.photon_energy, Unit::ElectronVolt);
    q(&mut o, "duration", l.fwhm_duration, Unit::Femtosecond);
    q(&mut o, "cep", l.carrier_envelope_phase, Unit::Radian);
    q(&mut o, "intensity", l.peak_intensity, Unit::WattPerSquareCentimeter);
    q(&mut o, "enhancement", l.enhancement, Unit::One);
    match l.envelope {
        Envelope::Gaussian => o.push_str("envelope = gaussian\n"),
        Envelope::FlatTop { ramp_cycles, flat_cycles } => {
            o.push_str("envelope = flat_top\n");
            q(&mut o, "ramp_cycles", ramp_cycles, Unit::One);
            q(&mut o, "flat_cycles", flat_cycles, Unit::One);
        }
    }
    if let Some(p) = l.power {
        q(&mut o, "avg_power", p.avg_power, Unit::Watt);
        q(&mut o, "rep_rate", p.rep_rate, Unit::Hertz);
        q(&mut o, "spot_radius", p.spot_radius, Unit::Micrometer);
    }

    let s = &config.tdse;
    o.push_str("\n[grid]\n");
    q(&mut o, "dx", s.grid.dx, Unit::Bohr);
    let _ = writeln!(o, "points = {}", s.grid.points);
    q(&mut o, "slab_width", s.grid.slab_width, Unit::Bohr);
    q(&mut o, "back_vacuum", s.grid.back_vacuum, Unit::Bohr);
    q(&mut o, "dt", s.grid.dt, Unit::AtomicTime);
    q(&mut o, "absorber_fraction", s.grid.absorber_fraction, Unit::One);
    q(&mut o, "absorber_exponent", s.absorber_exponent, Unit::One);
    let _ = writeln!(o, "image_charge = {}", s.potential.image_charge);
    opt(&mut o, "image_regularization", s.potential.image_regularization, Unit::Bohr);
    q(&mut o, "junction_width", s.potential.junction_width, Unit::Bohr);
    q(&mut o, "screening_width", s.potential.screening_width, Unit::Bohr);
    q(&mut o, "initial_energy", s.initial_energy, Unit::ElectronVolt);
    opt(&mut o, "post_pulse", s.post_pulse, Unit::Femtosecond);

    let w = &s.window;
    o.push_str("\n[window]\n");
    q(&mut o, "resolution", w.resolution, Unit::ElectronVolt);
    q(&mut o, "detector", w.detector, Unit::Bohr);
    q(&mut o, "cut_width", w.cut_width, Unit::Bohr);
    q(&mut o, "energy_min", w.energy_min, Unit::ElectronVolt);
    q(&mut o, "energy_max", w.energy_max, Unit::ElectronVolt);
    q(&mut o, "energy_step", w.energy_step, Unit::ElectronVolt);
    q(&mut o, "cap_strength", w.cap_strength, Unit::Hartree);
    q(&mut o, "extension", w.extension, Unit::Bohr);
    let _ = writeln!(o, "decimation = {}", w.decimation);

    let e = &config.ensemble;
    o.push_str("\n[ensemble]\n");
    let _ = writeln!(o, "births = {}", e.births);
    q(&mut o, "rescatter_probability", e.rescatter_probability, Unit::One);
    q(&mut o, "step", e.trajectory.step, Unit::Femtosecond);
    q(&mut o, "detector", e.trajectory.detector, Unit::Nanometer);
    let _ = writeln!(o, "max_steps = {}", e.trajectory.max_steps);
    let _ = writeln!(o, "surface = {}", e.trajectory.surface);
    q(&mut o, "weight_floor", e.weight_floor, Unit::One);
    q(&mut o, "energy_step", e.energy_step, Unit::ElectronVolt);
    if let Some((a, b)) = e.birth_window {
        q(&mut o, "birth_start", a, Unit::Femtosecond);
        q(&mut o, "birth_end", b, Unit::Femtosecond);
    }

    let m = &config.synthetic;
    o.push_str("\n[synthetic]\n");
    q(&mut o, "spacing", m.spacing, Unit::ElectronVolt);
    q(&mut o, "intercept", m.intercept, Unit::ElectronVolt);
    q(&mut o, "decay", m.decay, Unit::One);
    q(&mut o, "width", m.width, Unit::ElectronVolt);
    q(&mut o, "cut_on", m.cut_on, Unit::ElectronVolt);
    q(&mut o, "slope", m.slope, Unit::One);
    if !m.order_slopes.is_empty() {
        let list: Vec<String> = m.order_slopes.iter().map(|v| num(*v)).collect();
        let _ = writeln!(o, "order_slopes = {}", list.join(", "));
    }
    q(&mut o, "reference_intensity", m.reference_intensity, Unit::WattPerSquareCentimeter);
    let _ = writeln!(o, "first_order = {}", m.first_order);
    let _ = writeln!(o, "orders = {}", m.orders);
    q(&mut o, "critical_intensity", m.critical_intensity, Unit::WattPerSquareCentimeter);
    q(&mut o, "suppression_exponent", m.suppression_exponent, Unit::One);
    q(&mut o, "background", m.background, Unit::One);
    q(&mut o, "background_scale", m.background_scale, Unit::ElectronVolt);
    q(&mut o, "amplitude", m.amplitude, Unit::One);
    q(&mut o, "energy_min", m.energy_min, Unit::ElectronVolt);
    q(&mut o, "energy_max", m.energy_max, Unit::ElectronVolt);
    q(&mut o, "energy_step", m.energy_step, Unit::ElectronVolt);

    if let Some(ic) = &config.instrument {
        o.push_str("\n[instrument]\n");
        q(&mut o, "resolution", ic.model.resolution, Unit::ElectronVolt);
        q(&mut o, "background", ic.model.background, Unit::One);
        q(&mut o, "efficiency", ic.model.efficiency, Unit::One);
        q(&mut o, "exposure", ic.exposure, Unit::One);
        let v = ic.voltages;
        q(&mut o, "voltage_start", v.start, Unit::Volt);
        q(&mut o, "voltage_stop", v.voltage(v.count - 1), Unit::Volt);
        q(&mut o, "voltage_step", v.step, Unit::Volt);
        let _ = writeln!(o, "window = {}", ic.smoothing.window);
        let _ = writeln!(o, "order = {}", ic.smoothing.order);
        q(&mut o, "fermi_reference", ic.fermi_reference, Unit::ElectronVolt);
    }

    let a = &config.analysis;
    o.push_str("\n[analysis]\n");
    q(&mut o, "prominence", a.peaks.prominence, Unit::One);
    let _ = writeln!(o, "log_scale = {}", a.peaks.log_scale);
    q(&mut o, "min_separation", a.peaks.min_separation, Unit::ElectronVolt);
    match a.first_order {
        Some(k) => writeln!(o, "first_order = {k}"),
        None => writeln!(o, "first_order = none"),
    }
    .ok();
    let _ = writeln!(o, "exclude_lowest = {}", a.exclude_lowest);
    q(&mut o, "cuton_fraction", a.cuton_fraction, Unit::One);
    if let Some((lo, hi)) = a.track_range {
        opt(&mut o, "track_min", lo.is_finite().then_some(lo), Unit::ElectronVolt);
        opt(&mut o, "track_max", hi.is_finite().then_some(hi), Unit::ElectronVolt);
    }
    let _ = writeln!(o, "minima = {}", a.minima);
    let _ = writeln!(o, "reference = {}", a.reference.name());
    opt(&mut o, "s0_hint", a.s0_hint, Unit::ElectronVolt);
    opt(&mut o, "match_window", a.match_window, Unit::ElectronVolt);
    q(&mut o, "kink_floor", a.kink_floor, Unit::One);

    if let Some(sc) = &config.scan {
        o.push_str("\n[scan]\n");
        let _ = writeln!(o, "parameter = {}", sc.parameter.name());
        let list: Vec<String> = sc.values.iter().map(|v| num(*v)).collect();
        let sym = sc.parameter.unit().symbol();
        let _ = writeln!(o, "values = {}{}{sym}", list.join(", "), if sym.is_empty() { "" } else { " " });
    }

    let _ = writeln!(o, "\n[output]\ndirectory = {}", config.output.display());
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BASELINE: &str = "
        # fresh tip
        [engine]
        kind = classical

        [tip]
        work_function = 4.35 eV
        voltage = 150 V
        shielding = 5
        radius = 38 nm

        [laser]
        photon_energy = 1.56 eV
        duration = 6.5 fs
        intensity = 0 W/cm2

        [ensemble]
    ";

    #[test]
    fn baseline_echo() {
        let c = parse_config(BASELINE).unwrap();
        assert!((c.derived.dc_field - 0.79).abs() < 0.005);
        assert!((c.derived.barrier - 3.28).abs() < 0.01);
        assert_eq!(c.derived.threshold_order, 3);
        let e = echo(&c);
        assert!(e.contains("F_dc = 0.78") && e.contains("K = 3"), "{e}");
    }

    #[test]
    fn rejections() {
        let cases = [
            ("[engine]\nkind = synthetic\n[synthetic]\nspacing = 1 eV\nspacing = 2 eV\n", "duplicate"),
            ("[engine]\nkind = synthetic\n[synthetic]\nspacnig = 1 eV\n", "unknown key"),
            ("[engine]\nkind = synthetic\n[synthetic]\n[scan]\nparameter = intensity\nvalues =\n", "empty"),
            ("[engine]\nkind = synthetic\n[synthetic]\n[scan]\nparameter = intensity\nvalues = 1, 3, 2\n", "monotone"),
            ("[engine]\nkind = synthetic\n[synthetic]\n[instrument]\n", "seed"),
            ("[engine]\nkind = quantum\n[tip]\n[laser]\n", "grid"),
            ("[engine]\nkind = synthetic\n[synthetic]\n[tpi]\n", "unknown section"),
            ("[engine]\nkind = synthetic\n[synthetic]\ndecay = 1.5\n", "decay"),
            ("[engine]\nkind = synthetic\n[synthetic]\nwidth = 3 V\n", "convert"),
        ];
        for (text, needle) in cases {
            let err = parse_config(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{needle}: {err}");
        }
    }

    #[test]
    fn errors_carry_field_path() {
        let err = parse_config("[engine]\nkind = synthetic\n[synthetic]\n\n\nwidth = -1 eV\n").unwrap_err().to_string();
        assert!(err.contains("synthetic"), "{err}");
        let err = parse_config("[engine]\nkind = synthetic\n[synthetic]\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("synthetic.bogus (line 4)"), "{err}");
    }

    #[test]
    fn shared_unit_in_lists() {
        let c = parse_config(
            "[engine]\nkind = synthetic\n[synthetic]\n[scan]\nparameter = intensity\nvalues = 0.9e11, 1.5e11, 2.3e11 W/cm2\n",
        )
        .unwrap();
        assert_eq!(c.scan.unwrap().values, vec![0.9e11, 1.5e11, 2.3e11]);
        let c = parse_config(
            "[engine]\nkind = synthetic\n[synthetic]\n[scan]\nparameter = intensity\nvalues = 9e14 W/m2, 1.5e11\n",
        )
        .unwrap();
        assert!((c.scan.unwrap().values[0] - 9e10).abs() < 1.0);
    }

    #[test]
    fn full_round_trip() {
        let text = "
            [engine]
            kind = quantum
            seed = 99
            [tip]
            field_override = 0.8 GV/m
            barrier_override = 4 eV
            [laser]
            envelope = flat_top
            ramp_cycles = 3
            flat_cycles = 12
            avg_power = 0.05 W
            rep_rate = 80 MHz
            spot_radius = 5.36 um
            intensity = 2.0e11 W/cm2
            [grid]
            post_pulse = 30 fs
            [ensemble]
            birth_start = -2 fs
            birth_end = 2 fs
            [synthetic]
            order_slopes = -2.5e-12, -1.8e-12, -0.8e-12
            [instrument]
            voltage_stop = 10 V
            [analysis]
            track_min = 5 eV
            reference = formula
            [scan]
            parameter = cep
            values = 0, 1.5, 3 rad
            [output]
            directory = out/run a
        ";
        let c = parse_config(text).unwrap();
        let again = parse_config(&emit_config(&c)).unwrap();
        assert_eq!(c, again);
    }

    proptest! {
        #[test]
        fn emit_parse_is_identity(
            wf in 3.5f64..5.5,
            volts in 10.0f64..400.0,
            intensity in 1e9f64..1e12,
            xi in 1.0f64..8.0,
            spacing in 0.5f64..3.0,
            values in proptest::collection::btree_set(1u32..1000, 1..8),
            seed in proptest::option::of(0u64..u64::MAX),
        ) {
            let c = parse_config("[engine]\nkind = synthetic\n[synthetic]\n").unwrap();
            let mut c = RunConfig {
                seed,
                tip: TipSurface { work_function: wf, tip_voltage: volts, ..c.tip.clone() },
                laser: LaserDrive { peak_intensity: intensity, enhancement: xi, ..c.laser.clone() },
                synthetic: SyntheticLadderModel { spacing, ..c.synthetic.clone() },
                scan: Some(ScanConfig { parameter: ScanParameter::Intensity, values: values.iter().map(|v| *v as f64 * 1.37e9).collect() }),
                ..c
            };
            c.derived = Derived::compute(&c.tip, &c.laser).unwrap();
            let once = parse_config(&emit_config(&c)).unwrap();
            prop_assert_eq!(&once, &c);
            let twice = parse_config(&emit_config(&once)).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
