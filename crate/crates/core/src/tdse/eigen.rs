//! Stationary states of the static Hamiltonian.
//!
//! The kinetic operator is the periodic spectral one used by the propagator,
//! restricted to the classically allowed well plus evanescent margins, so the
//! resulting state is stationary under split-step propagation up to the
//! splitting error.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::model::{ModelPotential, SimulationGrid};
use super::propagate::Propagator;
use super::WaveFunction;
use crate::error::{Error, Result};
use crate::units::{ev_to_hartree, hartree_to_ev};

/// Evanescent margin kept around the well, bohr.
const MARGIN: f64 = 40.0;
/// Filter length in units of the inverse level spacing.
const FILTER_RESOLUTION: f64 = 4.0;
const MAX_FILTER_STEPS: usize = 20_000;

/// First row of the periodic kinetic matrix, t[m] = T_{i, i+m}.
pub(crate) fn kinetic_row(grid: &SimulationGrid) -> Vec<f64> {
    let n = grid.points;
    let mut buf: Vec<Complex64> = super::propagate::wavenumbers(grid)
        .into_iter()
        .map(|k| Complex64::new(0.5 * k * k, 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Index range of the first classically allowed region below `energy`, with
/// evanescent margins.
fn well_domain(grid: &SimulationGrid, potential: &ModelPotential, energy: f64) -> Option<(usize, usize)> {
    let v = &potential.values;
    let a = v.iter().position(|&x| x < energy)?;
    let b = (a..v.len()).find(|&i| v[i] >= energy).unwrap_or(v.len() - 1);
    let c = (b..v.len()).find(|&i| v[i] < energy);
    let margin = (MARGIN / grid.dx).ceil() as usize;
    let right = match c {
        Some(c) => b + ((c - b) / 2).min(margin),
        None => b + margin,
    };
    Some((a.saturating_sub(margin), right.min(v.len() - 1)))
}

/// The stationary state whose energy is closest to `target` (eV relative to
/// the Fermi level), searched within `window` eV.
pub fn initial_state(
    grid: &SimulationGrid,
    potential: &ModelPotential,
    target: f64,
    window: f64,
) -> Result<WaveFunction> {
    let target_ha = potential.fermi_level + ev_to_hartree(target);
    let (lo, hi) = well_domain(grid, potential, target_ha).ok_or(Error::NoBoundState {
        target,
        window,
        closest: f64::NAN,
    })?;
    let m = hi - lo + 1;
    let row = kinetic_row(grid);
    let n = grid.points;
    let h = DMatrix::from_fn(m, m, |i, j| {
        let d = (j + n - i) % n;
        let t = row[d];
        if i == j {
            t + potential.values[lo + i]
        } else {
            t
        }
    });
    let eig = SymmetricEigen::new(h);
    let (best, energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target_ha).abs().total_cmp(&(b.1 - target_ha).abs()))
        .map(|(i, e)| (i, *e))
        .expect("non-empty domain");
    let offset = hartree_to_ev(energy - potential.fermi_level);
    if (offset - target).abs() > window {
        return Err(Error::NoBoundState { target, window, closest: offset });
    }
    let column = eig.eigenvectors.column(best);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let norm = (column.iter().map(|c| c * c).sum::<f64>() * grid.dx).sqrt();
    // fix the sign so the state is reproducible
    let sign = if column.iter().cloned().fold(0.0, |s, c| s + c) < 0.0 { -1.0 } else { 1.0 };
    for (i, c) in column.iter().enumerate() {
        values[lo + i] = Complex64::new(sign * c / norm, 0.0);
    }
    let spacing = level_spacing(&eig.eigenvalues, best);
    let state = WaveFunction { values, dx: grid.dx, energy };
    Ok(stationary_filter(state, grid, potential, spacing, (lo, hi)))
}

/// Distance from eigenvalue `i` to its nearest neighbour, Ha.
fn level_spacing(values: &nalgebra::DVector<f64>, i: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, e)| (e - values[i]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Projects `state` onto the eigenstate of the split-step propagator at its
/// quasi-energy with a Hann-windowed time average, restricted to `domain`.
///
/// The Hamiltonian eigenstate differs from the propagator eigenstate by
/// O(dt²) near steep potential steps; without this the difference is emitted
/// as spurious current during field-free propagation.
fn stationary_filter(
    state: WaveFunction,
    grid: &SimulationGrid,
    potential: &ModelPotential,
    spacing: f64,
    domain: (usize, usize),
) -> WaveFunction {
    let mut propagator = Propagator::new(grid, potential);
    let window_time = FILTER_RESOLUTION * 2.0 * std::f64::consts::PI / spacing.max(1e-6);
    let steps = ((window_time / grid.dt).ceil() as usize).clamp(16, MAX_FILTER_STEPS);
    let mut psi = state.values.clone();
    propagator.step(&mut psi, 0.0, 0.0);
    let phase = state.values.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum::<Complex64>();
    let quasi = -phase.arg() / grid.dt;

    let mut psi = state.values.clone();
    let mut acc = vec![Complex64::new(0.0, 0.0); psi.len()];
    for k in 0..=steps {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / steps as f64).cos();
        let rot = Complex64::from_polar(w, quasi * grid.dt * k as f64);
        acc.iter_mut().zip(&psi).for_each(|(a, p)| *a += rot * p);
        propagator.step(&mut psi, 0.0, 0.0);
    }
    // continuum states of the far field ramp share the quasi-energy
    for (i, a) in acc.iter_mut().enumerate() {
        if i < domain.0 || i > domain.1 {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    let mut out = WaveFunction { values: acc, dx: grid.dx, energy: state.energy };
    out.normalize();
    // restore the phase convention of the input
    let align = state.overlap(&out);
    let fix = align.conj() / align.norm();
    out.values.iter_mut().for_each(|c| *c *= fix);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::nm_to_au;

    /// Even ground state of a finite square well of depth `v0` and width `2a`
    /// from k tan(k a) = κ, by bisection.
    fn finite_well_ground_state(v0: f64, a: f64) -> f64 {
        let f = |e: f64| {
            let k = (2.0 * (e + v0)).sqrt();
            let kappa = (-2.0 * e).sqrt();
            k * (k * a).tan() - kappa
        };
        // ground state has k a in (0, π/2)
        let k_hi = (std::f64::consts::FRAC_PI_2 / a).min((2.0 * v0).sqrt());
        let (mut lo, mut hi) = (-v0 + 1e-14, 0.5 * k_hi * k_hi - v0 - 1e-14);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn finite_well_ground_state_matches_transcendental_solution() {
        let grid = SimulationGrid {
            dx: 0.1,
            points: 2048,
            slab_width: 0.0,
            back_vacuum: 102.4,
            dt: 0.05,
            duration: 0.0,
            absorber_fraction: 0.0,
        };
        let v0 = ev_to_hartree(10.0);
        let a = nm_to_au(2.0) / 2.0;
        // well edges on half-grid points
        let values: Vec<f64> = grid
            .positions()
            .into_iter()
            .map(|x| if (x + 0.05).abs() < a { -v0 } else { 0.0 })
            .collect();
        let width = values.iter().filter(|v| **v < 0.0).count() as f64 * grid.dx;
        let pot = ModelPotential::from_samples(values, 0.0);
        let exact = finite_well_ground_state(v0, width / 2.0);
        let psi = initial_state(&grid, &pot, hartree_to_ev(exact), 0.5).unwrap();
        let err = hartree_to_ev(psi.energy - exact).abs();
        assert!(err < 1e-3, "error {err} eV");
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn target_outside_spectrum_is_rejected() {
        let grid = SimulationGrid {
            dx: 0.2,
            points: 1024,
            slab_width: 0.0,
            back_vacuum: 102.4,
            dt: 0.05,
            duration: 0.0,
            absorber_fraction: 0.0,
        };
        // shallow narrow well: single bound level far below −0.01 eV? no, near 0
        let values: Vec<f64> = grid
            .positions()
            .into_iter()
            .map(|x| if x.abs() < 2.0 { -ev_to_hartree(30.0) } else { 0.0 })
            .collect();
        let pot = ModelPotential::from_samples(values, 0.0);
        assert!(matches!(
            initial_state(&grid, &pot, -29.9, 0.01),
            Err(Error::NoBoundState { .. })
        ));
    }
}
