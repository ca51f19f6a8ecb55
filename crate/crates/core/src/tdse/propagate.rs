//! Split-step spectral propagation in the screened length gauge.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::model::{ModelPotential, SimulationGrid};
use super::WaveFunction;
use crate::error::{Error, Result};
use crate::laser::Field;
use crate::units::{au_to_fs, ev_to_hartree, gvm_to_au};

/// Largest tolerated norm growth in a single step.
const MAX_NORM_GROWTH: f64 = 1e-8;
/// Minimum number of time steps per optical cycle.
const MIN_STEPS_PER_CYCLE: f64 = 200.0;

/// FFT-ordered wavenumbers of the grid.
pub(crate) fn wavenumbers(grid: &SimulationGrid) -> Vec<f64> {
    let n = grid.points;
    let dk = 2.0 * PI / grid.length();
    (0..n)
        .map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOptions {
    /// Apply the edge masks.
    pub absorber: bool,
    /// Exponent p of the cos^p per-step mask.
    pub absorber_exponent: f64,
    /// Step indices at which to store a copy of the state.
    pub checkpoints: Vec<usize>,
    /// Record the time-integrated probability current through this plane, bohr.
    pub flux_plane: Option<f64>,
    /// Photon energy of the drive, eV; enables the time-step check.
    pub photon_energy: Option<f64>,
    /// Laboratory time (fs) of step 0.
    pub start_time: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            absorber: true,
            absorber_exponent: 0.125,
            checkpoints: Vec::new(),
            flux_plane: None,
            photon_energy: None,
            start_time: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub state: WaveFunction,
    pub checkpoints: Vec<(usize, WaveFunction)>,
    /// Probability removed by the left and right masks.
    pub absorbed_left: f64,
    pub absorbed_right: f64,
    /// ∫ j(x_plane, t) dt when a flux plane was requested.
    pub transmitted: Option<f64>,
    pub steps: usize,
}

/// Per-point mask of the outer `fraction` of each grid edge.
pub(crate) fn edge_mask(grid: &SimulationGrid, exponent: f64) -> Vec<f64> {
    let n = grid.points;
    let width = ((n as f64) * grid.absorber_fraction).round() as usize;
    let mut mask = vec![1.0; n];
    if width == 0 {
        return mask;
    }
    for i in 0..width {
        // u = 0 at the inner edge of the absorber, 1 at the grid edge
        let u = (width - i) as f64 / width as f64;
        let m = (0.5 * PI * u).cos().max(0.0).powf(exponent);
        mask[i] = m;
        mask[n - 1 - i] = m;
    }
    mask
}

/// Reusable split-step stepper for one grid and potential.
pub struct Propagator<'a> {
    grid: &'a SimulationGrid,
    potential: &'a ModelPotential,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kinetic_phase: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    pub fn new(grid: &'a SimulationGrid, potential: &'a ModelPotential) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let inv_n = 1.0 / grid.points as f64;
        let kinetic_phase = wavenumbers(grid)
            .into_iter()
            .map(|k| Complex64::from_polar(inv_n, -0.5 * k * k * grid.dt))
            .collect();
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Propagator {
            grid,
            potential,
            forward,
            inverse,
            kinetic_phase,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn potential_half_step(&self, psi: &mut [Complex64], field_au: f64) {
        let half = 0.5 * self.grid.dt;
        for ((p, v), g) in psi.iter_mut().zip(&self.potential.values).zip(&self.potential.coupling) {
            let phase = -(v - field_au * g) * half;
            *p *= Complex64::new(phase.cos(), phase.sin());
        }
    }

    /// One Strang step from field value `field_now` to `field_next` (a.u.).
    pub fn step(&mut self, psi: &mut [Complex64], field_now: f64, field_next: f64) {
        self.potential_half_step(psi, field_now);
        self.forward.process_with_scratch(psi, &mut self.scratch);
        for (p, k) in psi.iter_mut().zip(&self.kinetic_phase) {
            *p *= k;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        self.potential_half_step(psi, field_next);
    }
}

fn norm_sq(psi: &[Complex64], dx: f64) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx
}

/// Probability current Im(ψ* ∂ψ/∂x) at grid index `i` (4th-order difference).
fn current(psi: &[Complex64], i: usize, dx: f64) -> f64 {
    let d = (psi[i - 2] - 8.0 * psi[i - 1] + 8.0 * psi[i + 1] - psi[i + 2]) / (12.0 * dx);
    (psi[i].conj() * d).im
}

/// Propagates `initial` through the whole grid duration in `field` (fs, GV/m).
pub fn propagate(
    initial: &WaveFunction,
    potential: &ModelPotential,
    field: &dyn Field,
    grid: &SimulationGrid,
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    grid.validate()?;
    if let Some(w) = opts.photon_energy {
        let period = 2.0 * PI / ev_to_hartree(w);
        let per_cycle = period / grid.dt;
        if per_cycle < MIN_STEPS_PER_CYCLE {
            return Err(Error::TimeStepTooLarge { dt: grid.dt, steps_per_cycle: per_cycle });
        }
    }
    if initial.values.len() != grid.points {
        return Err(Error::InvalidGrid("wavefunction length differs from grid".into()));
    }
    let steps = grid.steps();
    let mask = if opts.absorber { Some(edge_mask(grid, opts.absorber_exponent)) } else { None };
    let plane = opts.flux_plane.map(|x| grid.index_of(x).clamp(2, grid.points - 3));
    let mut propagator = Propagator::new(grid, potential);
    let mut psi = initial.values.clone();
    let field_at = |step: usize| gvm_to_au(field.at(opts.start_time + au_to_fs(step as f64 * grid.dt)));

    let mut norm = norm_sq(&psi, grid.dx);
    let mut absorbed = (0.0, 0.0);
    let mut transmitted = plane.map(|i| 0.5 * current(&psi, i, grid.dx) * grid.dt);
    let mut checkpoints = Vec::new();
    let mut next_field = field_at(0);
    for step in 0..steps {
        let now = next_field;
        next_field = field_at(step + 1);
        propagator.step(&mut psi, now, next_field);
        let unitary = norm_sq(&psi, grid.dx);
        if unitary > norm * (1.0 + MAX_NORM_GROWTH) || !unitary.is_finite() {
            return Err(Error::Unstable { step, growth: unitary / norm - 1.0 });
        }
        if let Some(mask) = &mask {
            let half = grid.points / 2;
            let (mut left, mut right) = (0.0, 0.0);
            for (i, (p, m)) in psi.iter_mut().zip(mask).enumerate() {
                if *m < 1.0 {
                    let before = p.norm_sqr();
                    *p *= *m;
                    let lost = (before - p.norm_sqr()) * grid.dx;
                    if i < half {
                        left += lost;
                    } else {
                        right += lost;
                    }
                }
            }
            absorbed.0 += left;
            absorbed.1 += right;
            norm = unitary - left - right;
        } else {
            norm = unitary;
        }
        if let (Some(i), Some(t)) = (plane, transmitted.as_mut()) {
            let w = if step + 1 == steps { 0.5 } else { 1.0 };
            *t += w * current(&psi, i, grid.dx) * grid.dt;
        }
        if opts.checkpoints.contains(&(step + 1)) {
            checkpoints.push((step + 1, WaveFunction { values: psi.clone(), dx: grid.dx, energy: initial.energy }));
        }
    }
    Ok(PropagationResult {
        state: WaveFunction { values: psi, dx: grid.dx, energy: initial.energy },
        checkpoints,
        absorbed_left: absorbed.0,
        absorbed_right: absorbed.1,
        transmitted,
        steps,
    })
}
