//! Simple-man trajectories: quasi-static tunnelling at the surface, Newtonian
//! motion in the laser plus dc field, optional single elastic backscatter.
//!
//! Trajectories carry no phase, so the resulting spectra show the direct and
//! rescattered plateaus but no above-threshold peaks.

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::laser::{Field, LaserDrive};
use crate::spectrum::Spectrum;
use crate::tip::TipSurface;
use crate::units::{au_to_fs, ev_to_hartree, fs_to_au, gvm_to_au, hartree_to_ev, nm_to_au};

/// Quasi-static tunnelling rate exp(−(2/3)(2φ)^{3/2}/|E|) in atomic units.
///
/// Zero unless the total surface field pulls electrons out.
pub fn tunneling_weight(field_gvm: f64, barrier_ev: f64) -> f64 {
    if !(field_gvm > 0.0) || !(barrier_ev > 0.0) {
        return 0.0;
    }
    (tunneling_exponent(field_gvm, barrier_ev)).exp()
}

/// The exponent of [`tunneling_weight`].
pub fn tunneling_exponent(field_gvm: f64, barrier_ev: f64) -> f64 {
    let phi = ev_to_hartree(barrier_ev);
    -(2.0 / 3.0) * (2.0 * phi).powf(1.5) / gvm_to_au(field_gvm.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOptions {
    /// RK4 step, fs.
    pub step: f64,
    /// Detector plane, nm.
    pub detector: f64,
    /// Step budget per trajectory.
    pub max_steps: usize,
    /// Treat x = 0 as the metal surface. Without it the electron drifts
    /// freely, which exposes the bare birth-time to drift-energy map.
    pub surface: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions { step: 0.01, detector: 5.0, max_steps: 2_000_000, surface: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Kinetic energy on reaching the detector plane, eV.
    Escaped { energy: f64, rescattered: bool },
    /// Returned to the surface with no backscatter left.
    Recaptured,
    /// Step budget exhausted.
    TimedOut,
}

/// Follows one electron born at rest at the surface at `t_birth` (fs).
///
/// `dc` is the static apex field (GV/m), uniform out to the detector. Once
/// the optical field has ended the remaining motion is solved analytically.
pub fn simulate_trajectory(
    t_birth: f64,
    field: &dyn Field,
    dc: f64,
    rescatter: bool,
    opts: &TrajectoryOptions,
) -> Outcome {
    let (_, t_end) = field.support();
    let h = fs_to_au(opts.step);
    let f_dc = gvm_to_au(dc);
    let accel = |t: f64| gvm_to_au(field.at(au_to_fs(t))) + f_dc;
    let t_stop = fs_to_au(t_end);
    let x_det = nm_to_au(opts.detector);

    let (mut t, mut x, mut v) = (fs_to_au(t_birth), 0.0f64, 0.0f64);
    let mut bounce_left = rescatter;
    let mut bounced = false;
    let mut steps = 0usize;
    while t < t_stop {
        if steps >= opts.max_steps {
            return Outcome::TimedOut;
        }
        let dt = h.min(t_stop - t);
        // RK4 for x'' = a(t)
        let a1 = accel(t);
        let a2 = accel(t + 0.5 * dt);
        let a4 = accel(t + dt);
        let x_new = x + dt * v + dt * dt / 6.0 * (a1 + 2.0 * a2);
        let v_new = v + dt / 6.0 * (a1 + 4.0 * a2 + a4);
        t += dt;
        steps += 1;
        if opts.surface && x_new <= 0.0 {
            if !bounce_left {
                return Outcome::Recaptured;
            }
            bounce_left = false;
            bounced = true;
            x = -x_new;
            v = -v_new;
        } else {
            x = x_new;
            v = v_new;
        }
    }
    // Field-free except for the dc field from here on.
    if opts.surface && v < 0.0 {
        let turn = if f_dc > 0.0 { v * v / (2.0 * f_dc) } else { f64::INFINITY };
        if turn >= x {
            if !bounce_left {
                return Outcome::Recaptured;
            }
            bounced = true;
        }
    }
    let kinetic = 0.5 * v * v + f_dc * (x_det - x);
    Outcome::Escaped { energy: hartree_to_ev(kinetic), rescattered: bounced }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// Birth-time window, fs; `None` uses the field support.
    pub birth_window: Option<(f64, f64)>,
    pub births: usize,
    /// Probability p_r of elastic backscatter on return.
    pub rescatter_probability: f64,
    pub trajectory: TrajectoryOptions,
    /// Births with a smaller tunnelling weight are skipped.
    pub weight_floor: f64,
    /// Histogram bin width, eV.
    pub energy_step: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            birth_window: None,
            births: 4000,
            rescatter_probability: 0.01,
            trajectory: TrajectoryOptions::default(),
            weight_floor: 1e-30,
            energy_step: 0.05,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, field: &dyn Field) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rescatter_probability) {
            return Err(Error::invalid("rescatter_probability", self.rescatter_probability, "must lie in [0, 1]"));
        }
        if self.births < 2 {
            return Err(Error::TooFew { what: "birth times", needed: 2, got: self.births });
        }
        if !(self.trajectory.step > 0.0) || !(self.energy_step > 0.0) || !(self.trajectory.detector >= 0.0) {
            return Err(Error::invalid("step", self.trajectory.step, "steps must be > 0 and detector >= 0"));
        }
        if let Some((a, b)) = self.birth_window {
            let (lo, hi) = field.support();
            if !(a < b) || a < lo || b > hi {
                return Err(Error::invalid("birth_window", a, "must be an increasing interval inside the field support"));
            }
        }
        Ok(())
    }

    fn birth_times(&self, field: &dyn Field) -> Vec<f64> {
        let (a, b) = self.birth_window.unwrap_or_else(|| field.support());
        let n = self.births;
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Ensemble statistics alongside the histogram.
#[derive(Debug, Clone)]
pub struct ClassicalResult {
    pub spectrum: Spectrum,
    pub retained_weight: f64,
    pub timed_out: usize,
    pub recaptured: usize,
}

/// Weighted histogram of detector energies over the birth-time grid.
///
/// Energies are placed on the Fermi-referenced axis by taking the birth
/// energy at the barrier top: E = φ_eff − e F_dc x_det + kinetic energy at
/// the detector.
pub fn classical_spectrum(config: &EnsembleConfig, laser: &LaserDrive, tip: &TipSurface) -> Result<ClassicalResult> {
    laser.validate()?;
    config.validate(laser)?;
    let dc = tip.dc_field()?;
    let barrier = tip.effective_barrier()?;
    let births = config.birth_times(laser);
    let p_r = config.rescatter_probability;

    let contributions: Vec<(Vec<(f64, f64)>, usize, usize)> = births
        .par_iter()
        .map(|&t| {
            let w = tunneling_weight(laser.field_at(t) + dc, barrier);
            let mut out = Vec::with_capacity(2);
            let (mut timed, mut lost) = (0, 0);
            if w < config.weight_floor || w == 0.0 {
                return (out, timed, lost);
            }
            let direct = simulate_trajectory(t, laser, dc, false, &config.trajectory);
            match direct {
                Outcome::Escaped { energy, .. } => out.push((energy, w)),
                Outcome::TimedOut => timed += 1,
                Outcome::Recaptured => {
                    lost += 1;
                    if p_r > 0.0 {
                        match simulate_trajectory(t, laser, dc, true, &config.trajectory) {
                            Outcome::Escaped { energy, .. } => out.push((energy, w * p_r)),
                            Outcome::TimedOut => timed += 1,
                            Outcome::Recaptured => {}
                        }
                    }
                }
            }
            (out, timed, lost)
        })
        .collect();

    let offset = barrier - dc * config.trajectory.detector;
    let samples: Vec<(f64, f64)> = contributions.iter().flat_map(|c| c.0.iter().copied()).collect();
    let timed_out = contributions.iter().map(|c| c.1).sum();
    let recaptured = contributions.iter().map(|c| c.2).sum();
    let retained: f64 = samples.iter().map(|s| s.1).sum();

    let step = config.energy_step;
    let start = (offset / step).floor() * step;
    let top = samples.iter().map(|s| s.0 + offset).fold(start + step, f64::max);
    let bins = ((top - start) / step).floor() as usize + 2;
    let mut density = vec![0.0; bins];
    if samples.is_empty() {
        warn!("all tunnelling weights below the floor; classical spectrum is empty");
    }
    for (energy, w) in &samples {
        let i = (((energy + offset) - start) / step).floor().max(0.0) as usize;
        density[i.min(bins - 1)] += w / step;
    }
    let mut spectrum = Spectrum::new(start, step, density)?;
    // bins are labelled by their lower edge
    spectrum.energy_start = start;
    spectrum.set_meta("engine", "classical");
    spectrum.set_meta("phi_eff_eV", barrier);
    spectrum.set_meta("dc_field_GVm", dc);
    spectrum.set_meta("ponderomotive_eV", laser.ponderomotive_energy());
    spectrum.set_meta("enhanced_intensity_Wcm2", laser.enhanced_intensity());
    spectrum.set_meta("rescatter_probability", p_r);
    spectrum.set_meta("retained_weight", format!("{retained:.9e}"));
    spectrum.set_meta("timed_out", timed_out);
    Ok(ClassicalResult { spectrum, retained_weight: retained, timed_out, recaptured })
}

/// Slope break of a log-yield curve from a two-segment continuous fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub energy: f64,
    pub slope_below: f64,
    pub slope_above: f64,
    pub residual: f64,
}

/// Fits ln(density) with a continuous broken line over the bins above
/// `floor·max`, scanning the break over interior bins.
pub fn find_kink(spectrum: &Spectrum, floor: f64) -> Result<Kink> {
    let max = spectrum.max_density();
    let imax = spectrum.density.iter().position(|d| *d == max).unwrap_or(0);
    let pts: Vec<(f64, f64)> = (imax..spectrum.len())
        .filter(|&i| spectrum.density[i] > floor * max && spectrum.density[i] > 0.0)
        .map(|i| (spectrum.energy(i), spectrum.density[i].ln()))
        .collect();
    if pts.len() < 6 {
        return Err(Error::TooFew { what: "populated bins above the floor", needed: 6, got: pts.len() });
    }
    let mut best: Option<Kink> = None;
    for k in 2..pts.len() - 2 {
        let e_k = pts[k].0;
        // y = a + b1·min(E−e_k, 0) + b2·max(E−e_k, 0)
        let rows: Vec<[f64; 3]> = pts.iter().map(|(e, _)| [1.0, (e - e_k).min(0.0), (e - e_k).max(0.0)]).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let Some(coef) = least_squares3(&rows, &ys) else { continue };
        let residual: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(r, y)| (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2] - y).powi(2))
            .sum();
        if best.is_none_or(|b| residual < b.residual) {
            best = Some(Kink { energy: e_k, slope_below: coef[1], slope_above: coef[2], residual });
        }
    }
    best.ok_or(Error::TooFew { what: "fit candidates", needed: 1, got: 0 })
}

fn least_squares3(rows: &[[f64; 3]], ys: &[f64]) -> Option<[f64; 3]> {
    let mut ata = nalgebra::Matrix3::zeros();
    let mut aty = nalgebra::Vector3::zeros();
    for (r, y) in rows.iter().zip(ys) {
        let v = nalgebra::Vector3::new(r[0], r[1], r[2]);
        ata += v * v.transpose();
        aty += v * *y;
    }
    let sol = ata.lu().solve(&aty)?;
    Some([sol[0], sol[1], sol[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laser::Envelope;
    use proptest::prelude::*;

    #[test]
    fn weight_vanishes_for_inward_or_zero_field() {
        assert_eq!(tunneling_weight(0.0, 3.3), 0.0);
        assert_eq!(tunneling_weight(-2.0, 3.3), 0.0);
    }

    #[test]
    fn exponent_at_ten_gigavolts() {
        // φ = 3.3 eV = 0.12127 Ha, E = 10 GV/m = 0.019447 a.u.
        let phi: f64 = 3.3 / 27.211386;
        let e: f64 = 10.0 / 514.220675;
        let expected = -(2.0 / 3.0) * (2.0 * phi).powf(1.5) / e;
        let x = tunneling_exponent(10.0, 3.3);
        assert!((x - expected).abs() < 1e-4, "{x} vs {expected}");
        assert!((x + 4.10).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn doubling_field_halves_exponent(f in 0.5f64..50.0, phi in 1.0f64..6.0) {
            let x = tunneling_exponent(f, phi);
            let ratio = tunneling_weight(2.0 * f, phi) / tunneling_weight(f, phi);
            prop_assert!((ratio.ln() - (x / 2.0 - x)).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn dc_only_gains_work_over_detector_distance() {
        let quiet = LaserDrive { peak_intensity: 0.0, ..LaserDrive::default() };
        let opts = TrajectoryOptions { step: 0.05, detector: 5.0, ..TrajectoryOptions::default() };
        match simulate_trajectory(-10.0, &quiet, 0.8, false, &opts) {
            Outcome::Escaped { energy, rescattered } => {
                assert!((energy - 0.8 * 5.0).abs() < 1e-9, "{energy}");
                assert!(!rescattered);
            }
            other => panic!("{other:?}"),
        }
    }

    fn symmetric_pulse() -> LaserDrive {
        LaserDrive { peak_intensity: 5e12, ..LaserDrive::default() }
    }

    #[test]
    fn mirrored_births_give_equal_drift_energies() {
        let laser = symmetric_pulse();
        let opts = TrajectoryOptions { surface: false, detector: 0.0, ..TrajectoryOptions::default() };
        let energy = |t: f64| match simulate_trajectory(t, &laser, 0.0, false, &opts) {
            Outcome::Escaped { energy, .. } => energy,
            other => panic!("{other:?}"),
        };
        let up = laser.ponderomotive_energy();
        // the field is cut where its envelope drops to 1e-4, which leaves a
        // net area of that order
        for t in [0.3, 0.9, 1.7, 2.2, 4.1, 6.3] {
            assert!((energy(t) - energy(-t)).abs() < 2e-3 * up, "t = {t}: {} vs {}", energy(t), energy(-t));
        }
    }

    #[test]
    fn histogram_mass_equals_retained_weight() {
        let laser = LaserDrive { peak_intensity: 5e12, ..LaserDrive::default() };
        let tip = TipSurface { field_override: Some(0.8), barrier_override: Some(4.0), ..TipSurface::default() };
        let cfg = EnsembleConfig { births: 600, rescatter_probability: 0.05, ..EnsembleConfig::default() };
        let res = classical_spectrum(&cfg, &laser, &tip).unwrap();
        assert!((res.spectrum.total() - res.retained_weight).abs() <= 1e-12 * res.retained_weight);
        assert!(res.spectrum.density.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn flat_top_envelope_drives_monochromatic_cutoff() {
        let laser = LaserDrive {
            peak_intensity: 1e13,
            envelope: Envelope::FlatTop { ramp_cycles: 4.0, flat_cycles: 4.0 },
            ..LaserDrive::default()
        };
        let up = laser.ponderomotive_energy();
        let period = laser.period();
        let opts = TrajectoryOptions { step: 0.005, detector: 0.0, ..TrajectoryOptions::default() };
        let best = (0..400)
            .map(|i| i as f64 / 400.0 * period)
            .filter_map(|t| match simulate_trajectory(t, &laser, 0.0, false, &opts) {
                Outcome::Escaped { energy, .. } => Some(energy),
                _ => None,
            })
            .fold(0.0, f64::max);
        assert!((best / up - 2.0).abs() < 0.02, "{}", best / up);
    }
}
