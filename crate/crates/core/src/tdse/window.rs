//! Window-operator energy analysis of the emitted part of a wavefunction.
//!
//! For each analysis energy E the vacuum part ψ_v of the state is filtered
//! by γ²[(H − E)² + γ²]⁻¹, factorised as (H − E + iγ)⁻¹(H − E − iγ)⁻¹ and
//! solved with a banded LU of a sixth-order finite-difference Hamiltonian.
//! Inside the right absorber the shift iγ is augmented by a quadratic
//! complex absorbing potential so that the box continuum has no standing-wave
//! comb finer than the window.

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use super::banded::BandedLu;
use super::model::{ModelPotential, SimulationGrid};
use super::WaveFunction;
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use crate::units::{ev_to_hartree, hartree_to_ev, nm_to_au};

/// Second-derivative stencil, sixth order.
const D2: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
/// Emitted probability below which no spectrum is resolved.
pub const EMISSION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowOptions {
    /// Energy resolution 2γ, eV.
    pub resolution: f64,
    /// Start of the analysed vacuum region, bohr.
    pub detector: f64,
    /// Width of the smooth cut at the detector, bohr.
    pub cut_width: f64,
    /// Analysis energies relative to the Fermi level, eV.
    pub energy_min: f64,
    pub energy_max: f64,
    pub energy_step: f64,
    /// Peak height of the quadratic absorbing potential, Ha.
    pub cap_strength: f64,
    /// Length of field-free continuation appended beyond the grid, bohr.
    pub extension: f64,
    /// Sub-sampling factor of the analysis grid.
    pub decimation: usize,
    /// Probability already removed by the right absorber; it counts as
    /// emitted when normalising.
    pub absorbed: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            resolution: 0.04,
            detector: nm_to_au(5.0),
            cut_width: 10.0,
            energy_min: 0.0,
            energy_max: 12.0,
            energy_step: 0.02,
            cap_strength: 0.2,
            extension: 16_000.0,
            decimation: 2,
            absorbed: 0.0,
        }
    }
}

impl WindowOptions {
    fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::invalid("resolution", self.resolution, "must be > 0"));
        }
        if !(self.energy_step > 0.0) || !(self.energy_max > self.energy_min) {
            return Err(Error::invalid("energy_step", self.energy_step, "needs energy_max > energy_min and step > 0"));
        }
        if self.decimation == 0 || !(self.extension >= 0.0) {
            return Err(Error::invalid("decimation", self.decimation as f64, "decimation must be >= 1 and extension >= 0"));
        }
        if !(self.cap_strength >= 0.0) || !(self.absorbed >= 0.0) || !(self.cut_width >= 0.0) {
            return Err(Error::invalid("cap_strength", self.cap_strength, "cap, absorbed and cut width must be >= 0"));
        }
        Ok(())
    }

    fn energies(&self) -> Vec<f64> {
        let n = ((self.energy_max - self.energy_min) / self.energy_step).floor() as usize + 1;
        (0..n).map(|i| self.energy_min + i as f64 * self.energy_step).collect()
    }
}

/// Smooth cut selecting x ≥ detector.
fn vacuum_weight(x: f64, detector: f64, width: f64) -> f64 {
    if width == 0.0 {
        return if x >= detector { 1.0 } else { 0.0 };
    }
    let u = ((x - detector) / width).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Vacuum part of `state` beyond the detector.
pub fn vacuum_part(state: &WaveFunction, grid: &SimulationGrid, detector: f64, width: f64) -> Vec<Complex64> {
    state
        .values
        .iter()
        .enumerate()
        .map(|(i, c)| c * vacuum_weight(grid.x(i), detector, width))
        .collect()
}

/// Energy spectrum of the part of `state` beyond `opts.detector`.
///
/// Returns density per eV on the Fermi-referenced scale, normalised to the
/// emitted probability (vacuum norm plus `opts.absorbed`).
pub fn extract_spectrum(
    state: &WaveFunction,
    potential: &ModelPotential,
    grid: &SimulationGrid,
    opts: &WindowOptions,
) -> Result<Spectrum> {
    opts.validate()?;
    let energies = opts.energies();
    let psi = vacuum_part(state, grid, opts.detector, opts.cut_width);
    let vacuum_norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.dx;
    let emitted = vacuum_norm + opts.absorbed;
    let base = Spectrum::new(opts.energy_min, opts.energy_step, vec![0.0; energies.len()])?
        .with_meta("emitted_probability", format!("{emitted:.6e}"))
        .with_meta("window_resolution_eV", opts.resolution)
        .with_meta("detector_bohr", opts.detector);
    if emitted < EMISSION_FLOOR {
        warn!("emitted probability {emitted:.3e} below {EMISSION_FLOOR:e}; spectrum left empty");
        return Ok(base);
    }
    if vacuum_norm == 0.0 {
        return Ok(base);
    }

    let domain = AnalysisDomain::new(&psi, potential, grid, opts);
    let n = domain.potential.len();
    let dx = domain.dx;
    let gamma = ev_to_hartree(0.5 * opts.resolution);
    let inv_dx2 = 1.0 / (dx * dx);
    let fermi = potential.fermi_level;

    let density: Vec<f64> = energies
        .par_iter()
        .map(|&e_rel| {
            let e = fermi + ev_to_hartree(e_rel);
            let entry = |i: usize, j: usize| -> Complex64 {
                let d = i.abs_diff(j);
                let kinetic = -0.5 * D2[d] * inv_dx2;
                if d == 0 {
                    Complex64::new(kinetic + domain.potential[i] - e, -(gamma + domain.cap[i]))
                } else {
                    Complex64::new(kinetic, 0.0)
                }
            };
            let lu = match BandedLu::factor(n, 3, 3, entry) {
                Some(lu) => lu,
                None => return f64::NAN,
            };
            let mut chi = domain.psi.clone();
            lu.solve(&mut chi);
            lu.solve_conj(&mut chi);
            let norm: f64 = chi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx * gamma.powi(4);
            // ∫ γ⁴/((E'−E)²+γ²)² dE = πγ/2
            2.0 / (std::f64::consts::PI * gamma) * norm / hartree_to_ev(1.0)
        })
        .collect();
    if density.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidGrid("singular window operator".into()));
    }
    let raw = density.iter().sum::<f64>() * opts.energy_step;
    let scale = if raw > 0.0 { emitted / raw } else { 0.0 };
    let mut spectrum = Spectrum::new(opts.energy_min, opts.energy_step, density.iter().map(|d| d * scale).collect())?;
    spectrum.metadata = base.metadata;
    spectrum.set_meta("window_raw_integral", format!("{raw:.6e}"));
    spectrum.set_meta("vacuum_norm", format!("{vacuum_norm:.6e}"));
    Ok(spectrum)
}

/// Where the window operator is evaluated: from just inside the detector to
/// the end of the grid, continued by a field-free extension that ends in a
/// quadratic absorbing potential.
struct AnalysisDomain {
    dx: f64,
    potential: Vec<f64>,
    cap: Vec<f64>,
    psi: Vec<Complex64>,
}

impl AnalysisDomain {
    fn new(psi: &[Complex64], potential: &ModelPotential, grid: &SimulationGrid, opts: &WindowOptions) -> Self {
        let m = opts.decimation;
        let dx = grid.dx * m as f64;
        let lo = grid.index_of(opts.detector - 2.0 * opts.cut_width.max(8.0 * dx)).min(grid.points - 8 * m);
        let mut v: Vec<f64> = (lo..grid.points).step_by(m).map(|i| potential.values[i]).collect();
        let mut amp: Vec<Complex64> = (lo..grid.points).step_by(m).map(|i| psi[i]).collect();
        let end = v.len();
        // Amplitude inside the right absorber is already partly removed and
        // is dropped; the continuation starts at the inner absorber edge.
        let absorber = ((grid.points as f64 * grid.absorber_fraction) / m as f64).round() as usize;
        let inner = end.saturating_sub(absorber + 1).max(1);
        let slope = (v[inner] - v[inner - 1]) / dx;
        let blend = (absorber.max(1) as f64) * dx;
        let v0 = v[inner];
        let extra = (opts.extension / dx).round() as usize;
        v.truncate(inner + 1);
        amp.truncate(inner + 1);
        let total = inner + 1 + absorber + extra;
        for j in inner + 1..total {
            let s = (j - inner) as f64 * dx;
            let value = if s < blend { v0 + slope * s - 0.5 * slope * s * s / blend } else { v0 + 0.5 * slope * blend };
            v.push(value);
        }
        amp.resize(total, Complex64::new(0.0, 0.0));
        let cap_len = (total - inner) / 5;
        let cap = (0..total)
            .map(|j| {
                if j + cap_len >= total {
                    let u = (j + cap_len + 1 - total) as f64 / cap_len.max(1) as f64;
                    opts.cap_strength * u * u
                } else {
                    0.0
                }
            })
            .collect();
        AnalysisDomain { dx, potential: v, cap, psi: amp }
    }
}

/// Energy of the local potential at `x` relative to the Fermi level, eV.
pub fn local_level(potential: &ModelPotential, grid: &SimulationGrid, x: f64) -> f64 {
    hartree_to_ev(potential.values[grid.index_of(x)] - potential.fermi_level)
}
