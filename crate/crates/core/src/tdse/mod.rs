//! One-dimensional time-dependent Schrödinger engine for a model metal
//! surface in a dc plus optical field.

mod banded;
mod eigen;
mod model;
mod propagate;
mod window;

use num_complex::Complex64;

pub use eigen::initial_state;
pub use model::{analytic_barrier_position, default_grid, ModelPotential, PotentialOptions, SimulationGrid};
pub use propagate::{propagate, PropagationOptions, PropagationResult, Propagator};
pub use window::{extract_spectrum, local_level, vacuum_part, WindowOptions, EMISSION_FLOOR};

use crate::error::Result;
use crate::laser::LaserDrive;
use crate::spectrum::Spectrum;
use crate::tip::{threshold_photon_order, TipSurface};
use crate::units::{au_to_fs, fs_to_au, hartree_to_ev};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub values: Vec<Complex64>,
    /// Grid spacing, bohr.
    pub dx: f64,
    /// Energy of the stationary state it was built from, Ha.
    pub energy: f64,
}

impl WaveFunction {
    /// ∫|ψ|² dx.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn normalize(&mut self) {
        let n = self.norm().sqrt();
        if n > 0.0 {
            self.values.iter_mut().for_each(|c| *c /= n);
        }
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &WaveFunction) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.dx
    }

    /// Standard deviation of the position distribution, bohr.
    pub fn position_spread(&self, grid: &SimulationGrid) -> f64 {
        let norm = self.norm();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, c) in self.values.iter().enumerate() {
            let x = grid.x(i);
            let p = c.norm_sqr() * self.dx / norm;
            m1 += p * x;
            m2 += p * x * x;
        }
        (m2 - m1 * m1).max(0.0).sqrt()
    }
}

/// Everything a quantum run needs beyond the tip and the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct TdseSettings {
    pub grid: SimulationGrid,
    pub potential: PotentialOptions,
    /// Initial-state energy relative to the Fermi level, eV.
    pub initial_energy: f64,
    /// Propagation after the pulse peak, fs. `None` uses 2.5 pulse durations.
    pub post_pulse: Option<f64>,
    pub absorber_exponent: f64,
    pub window: WindowOptions,
}

impl Default for TdseSettings {
    fn default() -> Self {
        TdseSettings {
            grid: default_grid(),
            potential: PotentialOptions::default(),
            initial_energy: 0.0,
            post_pulse: None,
            absorber_exponent: 0.125,
            window: WindowOptions::default(),
        }
    }
}

/// Intermediate products of a quantum run.
#[derive(Debug, Clone)]
pub struct TdseRun {
    pub spectrum: Spectrum,
    pub potential: ModelPotential,
    pub initial: WaveFunction,
    pub propagation: PropagationResult,
    pub grid: SimulationGrid,
}

/// Builds the potential, finds the initial state, propagates through the
/// pulse and analyses the emitted part.
pub fn run_tdse(tip: &TipSurface, laser: &LaserDrive, settings: &TdseSettings) -> Result<TdseRun> {
    laser.validate()?;
    let potential = ModelPotential::build_checked(tip, &settings.grid, &settings.potential)?;
    let initial = initial_state(&settings.grid, &potential, settings.initial_energy, 0.5 * laser.photon_energy)?;

    let (start, support_end) = laser.support();
    let post = settings.post_pulse.unwrap_or(2.5 * laser.fwhm_duration).max(support_end);
    let mut grid = settings.grid.clone();
    grid.duration = fs_to_au(post - start);
    let up = laser.ponderomotive_energy();
    grid.check_resolution(
        crate::units::ev_to_hartree(up),
        crate::units::ev_to_hartree(settings.window.energy_max - potential.analytic_barrier),
    )?;

    let opts = PropagationOptions {
        absorber: true,
        absorber_exponent: settings.absorber_exponent,
        checkpoints: Vec::new(),
        flux_plane: Some(settings.window.detector),
        photon_energy: Some(laser.photon_energy),
        start_time: start,
    };
    let propagation = propagate(&initial, &potential, laser, &grid, &opts)?;
    let window = WindowOptions { absorbed: propagation.absorbed_right, ..settings.window.clone() };
    let mut spectrum = extract_spectrum(&propagation.state, &potential, &grid, &window)?;

    let barrier = potential.analytic_barrier;
    spectrum.set_meta("engine", "tdse");
    spectrum.set_meta("phi_eff_eV", barrier);
    spectrum.set_meta("emergent_barrier_eV", potential.emergent_barrier);
    spectrum.set_meta("ponderomotive_eV", up);
    spectrum.set_meta("enhanced_intensity_Wcm2", laser.enhanced_intensity());
    spectrum.set_meta("photon_energy_eV", laser.photon_energy);
    spectrum.set_meta("fwhm_fs", laser.fwhm_duration);
    if let Ok(g) = crate::laser::keldysh(barrier, up) {
        spectrum.set_meta("keldysh", g);
    }
    if let Ok(k) = threshold_photon_order(barrier, laser.photon_energy, up) {
        spectrum.set_meta("threshold_order", k);
    }
    spectrum.set_meta("initial_energy_eV", hartree_to_ev(initial.energy - potential.fermi_level));
    spectrum.set_meta("image_regularization_bohr", potential.image_regularization);
    spectrum.set_meta("absorbed_left", format!("{:.6e}", propagation.absorbed_left));
    spectrum.set_meta("absorbed_right", format!("{:.6e}", propagation.absorbed_right));
    if let Some(t) = propagation.transmitted {
        spectrum.set_meta("detector_flux", format!("{t:.6e}"));
    }
    spectrum.set_meta("propagation_fs", au_to_fs(grid.duration));
    Ok(TdseRun { spectrum, potential, initial, propagation, grid })
}
