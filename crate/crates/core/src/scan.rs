//! Batch execution of a configuration over its scan values, downstream
//! analysis, and persistence with a digest manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{
    critical_intensity, cuton_barrier, detect_peaks, enhancement_from_slopes, fit_ladder, track_and_fit_shifts,
    CriticalIntensity, CriticalOptions, CriticalReport, LadderFit, ShiftFit, ShiftOptions, SlopeReference,
};
use crate::classical::{classical_spectrum, find_kink, Kink};
use crate::config::{emit_config, EngineKind, RunConfig, ScanParameter};
use crate::error::{Error, Result};
use crate::io::{format_curve, format_ladder, format_spectrum, write_shift_series, Manifest};
use crate::laser::ponderomotive_per_intensity;
use crate::spectro::{forward_counts, invert_curve, RetardingCurve};
use crate::spectrum::Spectrum;
use crate::tdse::run_tdse;

/// Independent 64-bit seed for substream `name` of run `index`.
pub fn substream_seed(seed: u64, name: &str, index: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{name}:{index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Spectrum the analyses see: the engine output, or its reconstruction
    /// through the instrument when one is configured.
    pub spectrum: Spectrum,
    /// Engine output when an instrument sits in between.
    pub truth: Option<Spectrum>,
    pub curve: Option<RetardingCurve>,
    pub kink: Option<Kink>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub value: f64,
    pub outcome: std::result::Result<RunArtifacts, String>,
}

/// One engine run at the configuration's base point.
pub fn run_single(config: &RunConfig, index: usize) -> Result<RunArtifacts> {
    let mut spectrum = match config.engine {
        EngineKind::Quantum => run_tdse(&config.tip, &config.laser, &config.tdse)?.spectrum,
        EngineKind::Classical => classical_spectrum(&config.ensemble, &config.laser, &config.tip)?.spectrum,
        EngineKind::Synthetic => config.synthetic.spectrum(config.laser.peak_intensity)?,
    };
    spectrum.set_meta("incident_intensity_Wcm2", config.laser.peak_intensity);
    let kink = match config.engine {
        EngineKind::Classical => find_kink(&spectrum, config.analysis.kink_floor).ok(),
        _ => None,
    };
    let Some(ic) = &config.instrument else {
        return Ok(RunArtifacts { spectrum, truth: None, curve: None, kink });
    };
    let seed = config.seed.ok_or_else(|| Error::ConfigField { path: "engine.seed".into(), message: "missing".into() })?;
    let shifted = Spectrum { energy_start: spectrum.energy_start - ic.fermi_reference, ..spectrum.clone() };
    let curve = forward_counts(&shifted, &ic.model, &ic.voltages, ic.exposure, substream_seed(seed, "counts", index))?;
    let mut measured = invert_curve(&curve, ic.smoothing, ic.fermi_reference)?;
    measured.set_meta("incident_intensity_Wcm2", config.laser.peak_intensity);
    Ok(RunArtifacts { spectrum: measured, truth: Some(spectrum), curve: Some(curve), kink })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enhancement {
    pub reference: SlopeReference,
    pub printed_ratio: f64,
    pub formula_ratio: f64,
    /// ξ with the chosen denominator.
    pub xi: f64,
    pub xi_printed: f64,
    pub xi_formula: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub ladders: Vec<(usize, std::result::Result<LadderFit, String>)>,
    pub cutons: Vec<(usize, std::result::Result<f64, String>)>,
    pub kinks: Vec<(usize, Kink)>,
    pub shift: Option<std::result::Result<ShiftFit, String>>,
    pub critical: Option<std::result::Result<CriticalReport, String>>,
    pub enhancement: Option<std::result::Result<Enhancement, String>>,
    pub notices: Vec<String>,
}

/// Runs every analysis on `(index, scan value, spectrum)` triples.
pub fn analyze(config: &RunConfig, parameter: ScanParameter, runs: &[(usize, f64, Spectrum)], kinks: &[(usize, Kink)]) -> AnalysisReport {
    let a = &config.analysis;
    let k = config.threshold_order();
    let mut report = AnalysisReport { kinks: kinks.to_vec(), ..Default::default() };
    for (i, _, s) in runs {
        let peaks = detect_peaks(s, &a.peaks);
        report.ladders.push((*i, fit_ladder(&peaks, k, a.exclude_lowest).map_err(|e| e.to_string())));
        report.cutons.push((*i, cuton_barrier(s, a.cuton_fraction).map_err(|e| e.to_string())));
    }
    if parameter != ScanParameter::Intensity {
        report.notices.push(format!("shift and critical-intensity analyses need an intensity scan, got `{}`", parameter.name()));
        return report;
    }
    let scan: Vec<(f64, Spectrum)> = runs.iter().map(|(_, v, s)| (*v, s.clone())).collect();
    if scan.len() < 3 {
        report.notices.push(format!("shift, critical-intensity and enhancement analyses skipped: need >= 3 scan points, got {}", scan.len()));
        return report;
    }
    let window = config.match_window();
    let shift = track_and_fit_shifts(
        &scan,
        &ShiftOptions { peaks: a.peaks, match_window: window, energy_range: a.track_range, minima: a.minima },
    );
    report.critical = Some(
        critical_intensity(&scan, k, &CriticalOptions { peaks: a.peaks, match_window: window, s0_hint: a.s0_hint })
            .map_err(|e| e.to_string()),
    );
    report.enhancement = Some(match &shift {
        Ok(f) => enhancement(f.mean_slope, config.laser.photon_energy, a.reference).map_err(|e| e.to_string()),
        Err(e) => Err(format!("no shift fit: {e}")),
    });
    report.shift = Some(shift.map_err(|e| e.to_string()));
    report
}

pub fn enhancement(slope: f64, photon_energy: f64, reference: SlopeReference) -> Result<Enhancement> {
    let printed_ratio = SlopeReference::Printed.ratio(photon_energy);
    let formula_ratio = ponderomotive_per_intensity(photon_energy);
    let xi_printed = enhancement_from_slopes(slope, printed_ratio)?;
    let xi_formula = enhancement_from_slopes(slope, formula_ratio)?;
    let xi = match reference {
        SlopeReference::Printed => xi_printed,
        SlopeReference::Formula => xi_formula,
    };
    Ok(Enhancement { reference, printed_ratio, formula_ratio, xi, xi_printed, xi_formula })
}

pub fn format_report(report: &AnalysisReport) -> String {
    let mut o = String::new();
    for (i, l) in &report.ladders {
        match l {
            Ok(f) => {
                let _ = writeln!(o, "run.{i:03}.ladder.spacing_eV = {}", f.spacing);
                let _ = writeln!(o, "run.{i:03}.ladder.spacing_error_eV = {}", f.spacing_error);
                let _ = writeln!(o, "run.{i:03}.ladder.intercept_eV = {}", f.intercept);
                let _ = writeln!(o, "run.{i:03}.ladder.rms_eV = {}", f.rms);
            }
            Err(e) => {
                let _ = writeln!(o, "run.{i:03}.ladder = unavailable: {e}");
            }
        }
    }
    for (i, c) in &report.cutons {
        match c {
            Ok(e) => writeln!(o, "run.{i:03}.cuton_eV = {e}"),
            Err(e) => writeln!(o, "run.{i:03}.cuton = unavailable: {e}"),
        }
        .ok();
    }
    for (i, k) in &report.kinks {
        let _ = writeln!(o, "run.{i:03}.kink_eV = {}", k.energy);
    }
    match &report.shift {
        Some(Ok(f)) => {
            let _ = writeln!(o, "shift.mean_slope = {:e}", f.mean_slope);
            let _ = writeln!(o, "shift.mean_slope_error = {:e}", f.mean_slope_error);
            for t in &f.features {
                let _ = writeln!(o, "shift.feature.{}.slope = {:e}", t.label(), t.slope);
                let _ = writeln!(o, "shift.feature.{}.slope_error = {:e}", t.label(), t.slope_error);
            }
            for (label, at) in &f.dropped {
                let _ = writeln!(o, "shift.dropped.{label} = track lost at {at:e}");
            }
        }
        Some(Err(e)) => {
            let _ = writeln!(o, "shift = unavailable: {e}");
        }
        None => {}
    }
    match &report.critical {
        Some(Ok(c)) => {
            let text = match c.result {
                CriticalIntensity::Crossing(v) => format!("{v:e}"),
                CriticalIntensity::Above(v) => format!("> {v:e}"),
                CriticalIntensity::Below(v) => format!("< {v:e}"),
            };
            let _ = writeln!(o, "critical.intensity_Wcm2 = {text}");
            let _ = writeln!(o, "critical.threshold_order = {}", c.threshold_order);
        }
        Some(Err(e)) => {
            let _ = writeln!(o, "critical = unavailable: {e}");
        }
        None => {}
    }
    match &report.enhancement {
        Some(Ok(e)) => {
            let _ = writeln!(o, "enhancement.reference = {}", e.reference.name());
            let _ = writeln!(o, "enhancement.xi = {}", e.xi);
            let _ = writeln!(o, "enhancement.xi_printed = {}", e.xi_printed);
            let _ = writeln!(o, "enhancement.xi_formula = {}", e.xi_formula);
            let _ = writeln!(o, "enhancement.ratio_printed = {:e}", e.printed_ratio);
            let _ = writeln!(o, "enhancement.ratio_formula = {:e}", e.formula_ratio);
            let _ = writeln!(
                o,
                "enhancement.ratio_discrepancy_percent = {:.2}",
                100.0 * (e.printed_ratio / e.formula_ratio - 1.0)
            );
        }
        Some(Err(e)) => {
            let _ = writeln!(o, "enhancement = unavailable: {e}");
        }
        None => {}
    }
    for (n, text) in report.notices.iter().enumerate() {
        let _ = writeln!(o, "notice.{n} = {text}");
    }
    o
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub parameter: ScanParameter,
    pub runs: Vec<RunRecord>,
    pub report: AnalysisReport,
}

impl ScanOutcome {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Runs every scan point on the worker pool, keeping scan order, then
/// analyses the successful runs. Failed runs are recorded, not fatal.
pub fn run_scan(config: &RunConfig) -> ScanOutcome {
    let (parameter, values) = config.points();
    let runs: Vec<RunRecord> = values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let c = parameter.apply(config, value);
            let outcome = run_single(&c, index).map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("run {index} ({} = {value:e}) failed: {e}", parameter.name());
            }
            RunRecord { index, value, outcome }
        })
        .collect();
    let ok: Vec<(usize, f64, Spectrum)> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|a| (r.index, r.value, a.spectrum.clone())))
        .collect();
    let kinks: Vec<(usize, Kink)> =
        runs.iter().filter_map(|r| r.outcome.as_ref().ok().and_then(|a| a.kink.clone().map(|k| (r.index, k)))).collect();
    let report = analyze(config, parameter, &ok, &kinks);
    ScanOutcome { parameter, runs, report }
}

pub fn run_file(index: usize) -> String {
    format!("run_{index:03}.tsv")
}

/// Writes config echo, spectra, curves, report and plot tables under `dir`
/// and returns the manifest (also written as `manifest.txt`).
pub fn write_outputs(config: &RunConfig, outcome: &ScanOutcome, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    let put = |name: String, text: String, m: &mut Manifest| -> Result<()> {
        fs::write(dir.join(&name), text)?;
        m.add_file(dir, &name)
    };
    let echo = RunConfig { output: PathBuf::from("."), ..config.clone() };
    put("config.txt".into(), emit_config(&echo), &mut manifest)?;
    if let Some(seed) = config.seed {
        manifest.insert("seed", seed.to_string());
    }
    manifest.insert("engine", config.engine.name());
    manifest.insert("scan.parameter", outcome.parameter.name());
    for r in &outcome.runs {
        let key = format!("run.{:03}", r.index);
        match &r.outcome {
            Ok(a) => {
                manifest.insert(key, format!("ok {:e}", r.value));
                put(run_file(r.index), format_spectrum(&a.spectrum), &mut manifest)?;
                if let Some(t) = &a.truth {
                    put(format!("run_{:03}_true.tsv", r.index), format_spectrum(t), &mut manifest)?;
                }
                if let Some(c) = &a.curve {
                    put(format!("run_{:03}_counts.tsv", r.index), format_curve(c), &mut manifest)?;
                }
            }
            Err(e) => manifest.insert(key, format!("failed {:e}: {}", r.value, e.replace('\n', " "))),
        }
    }
    write_report(&outcome.report, dir, &mut manifest)?;
    manifest.write(&dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// Report and plot tables for an analysis, registered in `manifest`.
pub fn write_report(report: &AnalysisReport, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    fs::write(dir.join("report.txt"), format_report(report))?;
    manifest.add_file(dir, "report.txt")?;
    for (i, l) in &report.ladders {
        if let Ok(f) = l {
            let name = format!("ladder_{i:03}.tsv");
            fs::write(dir.join(&name), format_ladder(f))?;
            manifest.add_file(dir, &name)?;
        }
    }
    if let Some(Ok(f)) = &report.shift {
        for path in write_shift_series(dir, f)? {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            manifest.add_file(dir, &name)?;
        }
    }
    Ok(())
}

/// Successful runs of a scan directory written by [`write_outputs`].
pub struct LoadedScan {
    pub config: RunConfig,
    pub parameter: ScanParameter,
    pub runs: Vec<(usize, f64, Spectrum)>,
    pub kinks: Vec<(usize, Kink)>,
    pub manifest: Manifest,
}

pub fn load_scan(dir: &Path) -> Result<LoadedScan> {
    let mut config = crate::config::parse_config(&fs::read_to_string(dir.join("config.txt"))?)?;
    config.output = dir.to_path_buf();
    let manifest = Manifest::read(&dir.join("manifest.txt"))?;
    let parameter = config.points().0;
    let mut runs = Vec::new();
    let mut kinks = Vec::new();
    for (key, value) in &manifest.entries {
        let Some(index) = key.strip_prefix("run.").and_then(|i| i.parse::<usize>().ok()) else { continue };
        let Some(v) = value.strip_prefix("ok ") else { continue };
        let v: f64 = v.trim().parse().map_err(|_| Error::DataFormat {
            path: dir.join("manifest.txt"),
            message: format!("malformed scan value in `{key}`"),
        })?;
        let spectrum = crate::io::read_spectrum(&dir.join(run_file(index)))?;
        if config.engine == EngineKind::Classical {
            let truth = dir.join(format!("run_{index:03}_true.tsv"));
            let source = if truth.exists() { crate::io::read_spectrum(&truth)? } else { spectrum.clone() };
            if let Ok(k) = find_kink(&source, config.analysis.kink_floor) {
                kinks.push((index, k));
            }
        }
        runs.push((index, v, spectrum));
    }
    Ok(LoadedScan { config, parameter, runs, kinks, manifest })
}
