//! Observables extracted from spectra: peaks, the photon-order ladder,
//! intensity-dependent shifts, the peak-suppression intensity, the cut-on
//! barrier and the field enhancement.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::laser::ponderomotive_per_intensity;
use crate::spectrum::Spectrum;

/// Literature value of U_p/I at 1.56 eV, eV per W/cm².
pub const REFERENCE_PONDEROMOTIVE_RATIO: f64 = 5.5e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Refined position, eV.
    pub energy: f64,
    /// Refined height, spectrum units.
    pub amplitude: f64,
    /// Topographic prominence in the scale used for detection.
    pub prominence: f64,
    /// Full width at half prominence, eV.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakTable {
    pub peaks: Vec<Peak>,
    pub source: String,
}

impl PeakTable {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.energy).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Minimum prominence. On a linear scale it is a fraction of the
    /// spectrum maximum, on a log scale a ratio in natural-log units.
    pub prominence: f64,
    /// Minimum distance between reported peaks, eV.
    pub min_separation: f64,
    pub log_scale: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions { prominence: 0.02, min_separation: 0.78, log_scale: false }
    }
}

fn log_floor(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min_pos = values.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    if min_pos.is_finite() {
        min_pos.max(max * 1e-12)
    } else {
        f64::MIN_POSITIVE
    }
}

fn prominence_at(y: &[f64], i: usize) -> f64 {
    let v = y[i];
    let mut left = v;
    for j in (0..i).rev() {
        if y[j] > v {
            break;
        }
        left = left.min(y[j]);
    }
    let mut right = v;
    for &yj in &y[i + 1..] {
        if yj > v {
            break;
        }
        right = right.min(yj);
    }
    v - left.max(right)
}

/// Linear interpolation of the crossing of `level` walking from `i` in
/// direction `dir`; falls back to the array end.
fn crossing(y: &[f64], i: usize, level: f64, dir: isize) -> f64 {
    let mut j = i as isize;
    loop {
        let k = j + dir;
        if k < 0 || k >= y.len() as isize {
            return j as f64;
        }
        let (a, b) = (y[j as usize], y[k as usize]);
        if b <= level {
            let frac = if a == b { 0.0 } else { (a - level) / (a - b) };
            return j as f64 + dir as f64 * frac;
        }
        j = k;
    }
}

/// Finds local maxima whose topographic prominence passes the threshold,
/// keeps the tallest of any group closer than `min_separation`, and refines
/// positions with a three-point parabola.
pub fn detect_peaks(spectrum: &Spectrum, opts: &PeakOptions) -> PeakTable {
    detect_in(&spectrum.density, spectrum.energy_start, spectrum.energy_step, opts, source_name(spectrum))
}

fn source_name(spectrum: &Spectrum) -> String {
    spectrum.metadata.get("name").cloned().unwrap_or_default()
}

fn detect_in(values: &[f64], start: f64, step: f64, opts: &PeakOptions, source: String) -> PeakTable {
    let n = values.len();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if n < 3 || !(max > 0.0) && !opts.log_scale {
        return PeakTable { peaks: Vec::new(), source };
    }
    let y: Vec<f64> = if opts.log_scale {
        let floor = log_floor(values);
        values.iter().map(|v| v.max(floor).ln()).collect()
    } else {
        values.to_vec()
    };
    let threshold = if opts.log_scale { opts.prominence } else { opts.prominence * max };

    let mut candidates: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| (i, prominence_at(&y, i)))
        .filter(|&(_, p)| p >= threshold && p > 0.0)
        .collect();
    candidates.sort_by(|a, b| values[b.0].partial_cmp(&values[a.0]).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));

    let min_bins = opts.min_separation / step;
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| (k.0 as f64 - c.0 as f64).abs() >= min_bins - 1e-9) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|k| k.0);

    let peaks = kept
        .into_iter()
        .map(|(i, prom)| {
            let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
            let curv = a - 2.0 * b + c;
            let delta = if curv < 0.0 { (0.5 * (a - c) / curv).clamp(-0.5, 0.5) } else { 0.0 };
            let amplitude = b - 0.25 * (a - c) * delta;
            let level = y[i] - 0.5 * prom;
            let width = (crossing(&y, i, level, 1) - crossing(&y, i, level, -1)) * step;
            Peak { energy: start + (i as f64 + delta) * step, amplitude, prominence: prom, width }
        })
        .collect();
    PeakTable { peaks, source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderFit {
    /// eV per photon order.
    pub spacing: f64,
    /// Extrapolated position of order zero, eV.
    pub intercept: f64,
    pub spacing_error: f64,
    pub orders: Vec<u32>,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rms: f64,
    /// Peak excluded from the fit as barrier-cut, if any.
    pub excluded: Option<(u32, f64)>,
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_error: f64,
}

fn fit_line(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_error = if x.len() > 2 && sxx > 0.0 { (ss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Line { slope, intercept, slope_error }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Straight-line fit of peak energy against photon order. The lowest peak
/// carries order `first_order` and the others are numbered by the median
/// spacing, so gaps in the ladder keep their orders.
pub fn fit_ladder(peaks: &PeakTable, first_order: u32, exclude_lowest: bool) -> Result<LadderFit> {
    let needed = 3 + exclude_lowest as usize;
    if peaks.len() < needed {
        return Err(Error::TooFew { what: "ladder peaks", needed, got: peaks.len() });
    }
    let e: Vec<f64> = peaks.energies();
    let guess = median(e.windows(2).map(|w| w[1] - w[0]).collect());
    let mut orders: Vec<u32> = e.iter().map(|x| first_order + ((x - e[0]) / guess).round() as u32).collect();
    let mut energies = e;
    let excluded = if exclude_lowest {
        Some((orders.remove(0), energies.remove(0)))
    } else {
        None
    };
    let xs: Vec<f64> = orders.iter().map(|&o| o as f64).collect();
    let line = fit_line(&xs, &energies);
    let residuals: Vec<f64> =
        xs.iter().zip(&energies).map(|(x, y)| y - (line.intercept + line.slope * x)).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(LadderFit {
        spacing: line.slope,
        intercept: line.intercept,
        spacing_error: line.slope_error,
        orders,
        energies,
        residuals,
        rms,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Maximum,
    Minimum,
}

impl FeatureKind {
    pub fn label(self) -> &'static str {
        match self {
            FeatureKind::Maximum => "max",
            FeatureKind::Minimum => "min",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    pub kind: FeatureKind,
    /// Position in the first spectrum of the scan, eV.
    pub seed_energy: f64,
    /// (intensity, energy) pairs in scan order.
    pub points: Vec<(f64, f64)>,
    /// eV per W/cm².
    pub slope: f64,
    pub slope_error: f64,
}

impl FeatureTrack {
    pub fn label(&self) -> String {
        format!("{}_{:.3}", self.kind.label(), self.seed_energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFit {
    pub features: Vec<FeatureTrack>,
    pub mean_slope: f64,
    /// Standard error of the mean slope; zero for a single feature.
    pub mean_slope_error: f64,
    /// Features whose track broke, with the intensity where it happened.
    pub dropped: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOptions {
    pub peaks: PeakOptions,
    /// Half-width of the matching window between neighbouring spectra, eV.
    pub match_window: f64,
    /// Only features first seen in this energy range are tracked.
    pub energy_range: Option<(f64, f64)>,
    pub minima: bool,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions { peaks: PeakOptions::default(), match_window: 0.78, energy_range: None, minima: false }
    }
}

/// Median-of-pairwise-slopes line, insensitive to a single suppressed or
/// enhanced peak.
fn theil_sen(x: &[f64], y: &[f64]) -> Line {
    let mut slopes = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    let slope = if slopes.is_empty() { 0.0 } else { median(slopes) };
    let intercept = median(x.iter().zip(y).map(|(a, b)| b - slope * a).collect());
    Line { slope, intercept, slope_error: 0.0 }
}

/// Local minima of the spectrum after dividing out an exponential baseline
/// through the maxima.
pub fn detect_minima(spectrum: &Spectrum, maxima: &PeakTable, opts: &PeakOptions) -> PeakTable {
    if maxima.len() < 2 {
        return PeakTable { peaks: Vec::new(), source: maxima.source.clone() };
    }
    let xs = maxima.energies();
    let ys: Vec<f64> = maxima.peaks.iter().map(|p| p.amplitude.max(f64::MIN_POSITIVE).ln()).collect();
    let base = theil_sen(&xs, &ys);
    let floor = log_floor(&spectrum.density);
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let residual: Vec<f64> = spectrum
        .density
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let e = spectrum.energy(i);
            if e < lo || e > hi {
                f64::NEG_INFINITY
            } else {
                -(d.max(floor).ln() - (base.intercept + base.slope * e))
            }
        })
        .collect();
    // shift to a positive scale so the linear detector sees ln-ratio depths
    let offset = residual.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = residual.iter().map(|v| if v.is_finite() { v - offset } else { 0.0 }).collect();
    let depth_opts = PeakOptions { log_scale: false, ..*opts };
    let mut table = detect_in(&shifted, spectrum.energy_start, spectrum.energy_step, &depth_opts, maxima.source.clone());
    for p in &mut table.peaks {
        p.amplitude = spectrum.density_at(p.energy);
    }
    table
}

fn features(spectrum: &Spectrum, kind: FeatureKind, opts: &ShiftOptions) -> Vec<f64> {
    let maxima = detect_peaks(spectrum, &opts.peaks);
    match kind {
        FeatureKind::Maximum => maxima.energies(),
        FeatureKind::Minimum => detect_minima(spectrum, &maxima, &opts.peaks).energies(),
    }
}

/// Nearest candidate within `window`; equal distances go to the lower energy.
fn nearest(candidates: &[f64], target: f64, window: f64) -> Option<f64> {
    candidates
        .iter()
        .copied()
        .filter(|c| (c - target).abs() <= window)
        .min_by(|a, b| {
            let (da, db) = ((a - target).abs(), (b - target).abs());
            if (da - db).abs() <= 1e-12 * (1.0 + da) {
                a.partial_cmp(b).unwrap_or(Ordering::Equal)
            } else {
                da.partial_cmp(&db).unwrap_or(Ordering::Equal)
            }
        })
}

/// Follows maxima (and optionally minima) through an intensity scan and
/// fits each position linearly against intensity.
pub fn track_and_fit_shifts(spectra: &[(f64, Spectrum)], opts: &ShiftOptions) -> Result<ShiftFit> {
    if spectra.len() < 3 {
        return Err(Error::TooFew { what: "intensities for a shift fit", needed: 3, got: spectra.len() });
    }
    let mut kinds = vec![FeatureKind::Maximum];
    if opts.minima {
        kinds.push(FeatureKind::Minimum);
    }
    let mut tracks = Vec::new();
    let mut dropped = Vec::new();
    for kind in kinds {
        let found: Vec<Vec<f64>> = spectra.iter().map(|(_, s)| features(s, kind, opts)).collect();
        let seeds = found[0]
            .iter()
            .copied()
            .filter(|e| opts.energy_range.is_none_or(|(lo, hi)| *e >= lo && *e <= hi));
        'seed: for seed in seeds {
            let mut points = vec![(spectra[0].0, seed)];
            let mut last = seed;
            for (k, cands) in found.iter().enumerate().skip(1) {
                match nearest(cands, last, opts.match_window) {
                    Some(e) => {
                        points.push((spectra[k].0, e));
                        last = e;
                    }
                    None => {
                        dropped.push((format!("{}_{:.3}", kind.label(), seed), spectra[k].0));
                        continue 'seed;
                    }
                }
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            let line = fit_line(&xs, &ys);
            tracks.push(FeatureTrack { kind, seed_energy: seed, points, slope: line.slope, slope_error: line.slope_error });
        }
    }
    if tracks.is_empty() {
        return Err(Error::TooFew { what: "tracked features", needed: 1, got: 0 });
    }
    let n = tracks.len() as f64;
    let mean_slope = tracks.iter().map(|t| t.slope).sum::<f64>() / n;
    let mean_slope_error = if tracks.len() > 1 {
        (tracks.iter().map(|t| (t.slope - mean_slope).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(ShiftFit { features: tracks, mean_slope, mean_slope_error, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalIntensity {
    /// Interpolated crossing, W/cm².
    Crossing(f64),
    /// S=1 never reaches S=0: I_c exceeds the largest scanned intensity.
    Above(f64),
    /// S=1 already dominates at the smallest scanned intensity.
    Below(f64),
}

impl CriticalIntensity {
    pub fn value(self) -> Option<f64> {
        match self {
            CriticalIntensity::Crossing(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalReport {
    pub result: CriticalIntensity,
    pub threshold_order: u32,
    /// (intensity, S=0 position, S=0 amplitude, S=1 position, S=1 amplitude).
    pub samples: Vec<(f64, f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalOptions {
    pub peaks: PeakOptions,
    pub match_window: f64,
    /// Expected S=0 position in the weakest spectrum. `None` takes the
    /// lowest detected peak.
    pub s0_hint: Option<f64>,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { peaks: PeakOptions::default(), match_window: 0.78, s0_hint: None }
    }
}

/// Intensity at which the S=1 peak (order K+1) reaches the height of the
/// threshold peak S=0 (order K), interpolated linearly between scan points.
///
/// S=0 and S=1 are identified in the weakest spectrum and followed upward
/// by nearest match. An unmatched S=0 moves with S=1; an unmatched S=1
/// stays put.
pub fn critical_intensity(spectra: &[(f64, Spectrum)], threshold_order: u32, opts: &CriticalOptions) -> Result<CriticalReport> {
    if spectra.len() < 2 {
        return Err(Error::TooFew { what: "intensities for a crossing", needed: 2, got: spectra.len() });
    }
    let mut order: Vec<usize> = (0..spectra.len()).collect();
    order.sort_by(|&a, &b| spectra[a].0.partial_cmp(&spectra[b].0).unwrap_or(Ordering::Equal));

    let first = &spectra[order[0]].1;
    let peaks = detect_peaks(first, &opts.peaks).energies();
    let s0_index = match opts.s0_hint {
        Some(h) => peaks
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - h).abs().partial_cmp(&(b.1 - h).abs()).unwrap_or(Ordering::Equal))
            .map(|(i, _)| i),
        None => (!peaks.is_empty()).then_some(0),
    };
    let s0_index = s0_index.filter(|i| i + 1 < peaks.len()).ok_or(Error::TooFew {
        what: "peaks for S=0 and S=1 in the weakest spectrum",
        needed: 2,
        got: peaks.len(),
    })?;
    let (mut s0, mut s1) = (peaks[s0_index], peaks[s0_index + 1]);

    let mut samples = Vec::with_capacity(spectra.len());
    for (k, &idx) in order.iter().enumerate() {
        let (intensity, spectrum) = (&spectra[idx].0, &spectra[idx].1);
        if k > 0 {
            let found = detect_peaks(spectrum, &opts.peaks).energies();
            let new_s1 = nearest(&found, s1, opts.match_window).unwrap_or(s1);
            let new_s0 = nearest(&found, s0, opts.match_window)
                .filter(|e| *e < new_s1)
                .unwrap_or(s0 + (new_s1 - s1));
            (s0, s1) = (new_s0, new_s1);
        }
        samples.push((*intensity, s0, spectrum.density_at(s0), s1, spectrum.density_at(s1)));
    }

    let diff: Vec<f64> = samples.iter().map(|s| s.4 - s.2).collect();
    let result = if diff[0] >= 0.0 {
        CriticalIntensity::Below(samples[0].0)
    } else if let Some(k) = (1..diff.len()).find(|&k| diff[k] >= 0.0) {
        let (i0, i1) = (samples[k - 1].0, samples[k].0);
        let t = -diff[k - 1] / (diff[k] - diff[k - 1]);
        CriticalIntensity::Crossing(i0 + t * (i1 - i0))
    } else {
        CriticalIntensity::Above(samples[samples.len() - 1].0)
    };
    Ok(CriticalReport { result, threshold_order, samples })
}

/// Energy where the density first rises above `fraction` of its maximum,
/// interpolated inside the crossing bin.
pub fn cuton_barrier(spectrum: &Spectrum, fraction: f64) -> Result<f64> {
    let max = spectrum.max_density();
    if !(max > 0.0) {
        return Err(Error::NoCutOn);
    }
    let level = fraction * max;
    let d = &spectrum.density;
    let i = d.iter().position(|v| *v > level).ok_or(Error::NoCutOn)?;
    if i == 0 {
        return Ok(spectrum.energy_start);
    }
    let t = (level - d[i - 1]) / (d[i] - d[i - 1]);
    Ok(spectrum.energy(i - 1) + t * spectrum.energy_step)
}

/// Denominator for converting a measured shift slope into an enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeReference {
    /// [`REFERENCE_PONDEROMOTIVE_RATIO`].
    Printed,
    /// U_p/I evaluated from the photon energy.
    Formula,
}

impl SlopeReference {
    pub fn ratio(self, photon_energy: f64) -> f64 {
        match self {
            SlopeReference::Printed => REFERENCE_PONDEROMOTIVE_RATIO,
            SlopeReference::Formula => ponderomotive_per_intensity(photon_energy),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SlopeReference::Printed => "printed",
            SlopeReference::Formula => "formula",
        }
    }
}

/// ξ = sqrt(|slope| / (U_p/I)).
pub fn enhancement_from_slopes(slope: f64, ratio: f64) -> Result<f64> {
    if !(slope < 0.0) {
        return Err(Error::NonNegativeSlope(slope));
    }
    if !(ratio > 0.0) {
        return Err(Error::invalid("ponderomotive_ratio", ratio, "must be > 0"));
    }
    Ok((-slope / ratio).sqrt())
}
