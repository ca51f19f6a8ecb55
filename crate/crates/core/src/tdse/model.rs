//! Spatial grid and the static metal/vacuum potential.
//!
//! Atomic units throughout. The metal slab occupies `[-slab_width, 0]`; the
//! region left of the slab is field-free vacuum (a thin-film back side) and
//! holds the left absorber.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::tip::{effective_barrier, schottky_lowering, TipSurface};
use crate::units::{ev_to_hartree, gvm_to_au, hartree_to_ev, nm_to_au};

/// Uniform periodic grid for the split-step propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid {
    /// Spatial step, bohr.
    pub dx: f64,
    /// Number of points, a power of two.
    pub points: usize,
    /// Metal slab thickness, bohr.
    pub slab_width: f64,
    /// Field-free vacuum left of the slab, bohr.
    pub back_vacuum: f64,
    /// Time step, a.u.
    pub dt: f64,
    /// Total propagation time, a.u.
    pub duration: f64,
    /// Fraction of the grid covered by each edge absorber.
    pub absorber_fraction: f64,
}

impl SimulationGrid {
    pub fn validate(&self) -> Result<()> {
        if !self.points.is_power_of_two() || self.points < 16 {
            return Err(Error::InvalidGrid(format!("{} points is not a power of two >= 16", self.points)));
        }
        if !(self.dx > 0.0) || !(self.dt > 0.0) || !(self.duration >= 0.0) {
            return Err(Error::InvalidGrid("dx, dt must be > 0 and duration >= 0".into()));
        }
        if !(0.0..0.5).contains(&self.absorber_fraction) {
            return Err(Error::InvalidGrid("absorber fraction must be in [0, 0.5)".into()));
        }
        if self.x_min() + self.length() * self.absorber_fraction > -self.slab_width {
            return Err(Error::InvalidGrid("left absorber overlaps the metal slab".into()));
        }
        if self.x_max() * (1.0 - 1e-9) <= self.length() * self.absorber_fraction {
            return Err(Error::InvalidGrid("no vacuum region outside the right absorber".into()));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.dx * self.points as f64
    }

    pub fn x_min(&self) -> f64 {
        -(self.slab_width + self.back_vacuum)
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.points - 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min() + i as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Index of the first grid point at or beyond `x`.
    pub fn index_of(&self, x: f64) -> usize {
        (((x - self.x_min()) / self.dx).ceil().max(0.0) as usize).min(self.points - 1)
    }

    /// Largest kinetic energy representable on the grid, π²/(2 dx²).
    pub fn max_kinetic(&self) -> f64 {
        std::f64::consts::PI.powi(2) / (2.0 * self.dx * self.dx)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Grid resolution requirements for a run whose fastest electrons carry
    /// `ponderomotive` (Ha) and whose spectrum of interest reaches
    /// `max_energy` (Ha above the local potential).
    pub fn check_resolution(&self, ponderomotive: f64, max_energy: f64) -> Result<()> {
        let v_max = (2.0 * (10.0 * ponderomotive + ev_to_hartree(2.0))).sqrt();
        let vacuum = self.x_max() * (1.0 - self.absorber_fraction) - self.length() * self.absorber_fraction;
        if self.length() < v_max * self.duration.min(vacuum / v_max.max(1e-12)) || vacuum <= 0.0 {
            return Err(Error::InvalidGrid("grid too short for the fastest electrons".into()));
        }
        if self.max_kinetic() < 8.0 * max_energy {
            return Err(Error::InvalidGrid(format!(
                "dx = {} bohr represents only {:.2} Ha, need {:.2}",
                self.dx,
                self.max_kinetic(),
                8.0 * max_energy
            )));
        }
        Ok(())
    }
}

/// Options shaping the sampled potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOptions {
    /// Image-potential regularisation x₀, bohr. `None` picks the value that
    /// makes the image potential meet the band bottom at the surface.
    pub image_regularization: Option<f64>,
    /// Include the −1/(4(x+x₀)) image term.
    pub image_charge: bool,
    /// Width σ of the Gaussian that smooths the potential, bohr.
    pub junction_width: f64,
    /// Width over which the optical field switches on at the surface, bohr.
    pub screening_width: f64,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions {
            image_regularization: None,
            image_charge: true,
            junction_width: 1.0,
            screening_width: 1.0,
        }
    }
}

/// Sampled static potential plus the spatial profile of the optical coupling.
#[derive(Debug, Clone)]
pub struct ModelPotential {
    /// V(x), Ha, vacuum level at the surface = 0.
    pub values: Vec<f64>,
    /// ∫ s(x') dx', the screened length-gauge coupling coordinate, bohr.
    pub coupling: Vec<f64>,
    /// Fermi level, Ha (= −φ).
    pub fermi_level: f64,
    /// Analytic φ_eff, eV.
    pub analytic_barrier: f64,
    /// max V over x > 0, relative to the Fermi level, eV.
    pub emergent_barrier: f64,
    /// Position of that maximum, bohr.
    pub barrier_position: f64,
    /// dc field, a.u.
    pub dc_field: f64,
    /// Image regularisation actually used, bohr.
    pub image_regularization: f64,
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

impl ModelPotential {
    /// Samples the metal/vacuum potential for `tip` on `grid`.
    ///
    /// When the tip carries an effective-barrier override, the work function
    /// entering the potential is raised to `φ_eff + ΔW(F)` so that the
    /// barrier top sits at the requested height.
    pub fn build(tip: &TipSurface, grid: &SimulationGrid, opts: &PotentialOptions) -> Result<Self> {
        tip.validate()?;
        grid.validate()?;
        let field_gvm = tip.dc_field()?;
        let analytic = tip.effective_barrier()?;
        let phi_ev = if tip.barrier_override.is_some() {
            analytic + schottky_lowering(field_gvm)?
        } else {
            tip.work_function
        };
        if opts.image_charge {
            effective_barrier(phi_ev, field_gvm)?;
        }
        let phi = ev_to_hartree(phi_ev);
        let depth = ev_to_hartree(tip.fermi_depth) + phi;
        let f = gvm_to_au(field_gvm);
        let x0 = opts.image_regularization.unwrap_or(1.0 / (4.0 * depth));
        if !(x0 > 0.0) {
            return Err(Error::invalid("image_regularization", x0, "must be > 0"));
        }
        let vacuum = |x: f64| -> f64 {
            let image = if opts.image_charge { (-1.0 / (4.0 * (x + x0))).max(-depth) } else { 0.0 };
            -f * x + image
        };
        let values = smoothed_profile(grid, depth, &vacuum, opts.junction_width);
        let coupling = screened_coordinate(grid, opts.screening_width);
        let analysis = barrier_maximum(grid, &values);
        let (barrier_position, vmax) = analysis.unwrap_or((0.0, 0.0));
        let emergent = hartree_to_ev(vmax + phi);
        Ok(ModelPotential {
            values,
            coupling,
            fermi_level: -phi,
            analytic_barrier: if opts.image_charge { analytic } else { phi_ev },
            emergent_barrier: emergent,
            barrier_position,
            dc_field: f,
            image_regularization: x0,
        })
    }

    /// Like [`ModelPotential::build`] but rejects regularisations whose
    /// emergent barrier is off by more than 5%.
    pub fn build_checked(tip: &TipSurface, grid: &SimulationGrid, opts: &PotentialOptions) -> Result<Self> {
        let pot = Self::build(tip, grid, opts)?;
        if (pot.emergent_barrier - pot.analytic_barrier).abs() > 0.05 * pot.analytic_barrier {
            return Err(Error::BarrierMismatch {
                emergent: pot.emergent_barrier,
                analytic: pot.analytic_barrier,
            });
        }
        Ok(pot)
    }

    /// Wraps arbitrary samples (test wells); no optical coupling.
    pub fn from_samples(values: Vec<f64>, fermi_level: f64) -> Self {
        let n = values.len();
        ModelPotential {
            values,
            coupling: vec![0.0; n],
            fermi_level,
            analytic_barrier: 0.0,
            emergent_barrier: 0.0,
            barrier_position: 0.0,
            dc_field: 0.0,
            image_regularization: 0.0,
        }
    }
}

/// The sharp profile (0 behind the slab, −depth inside, `vacuum(x)` for
/// x > 0) convolved with a unit-area Gaussian of width `sigma` bohr.
///
/// The convolution is evaluated off-grid so the slab edges do not snap to
/// sample points.
fn smoothed_profile(grid: &SimulationGrid, depth: f64, vacuum: &dyn Fn(f64) -> f64, sigma: f64) -> Vec<f64> {
    let left = -grid.slab_width;
    if sigma <= 0.0 {
        return grid
            .positions()
            .into_iter()
            .map(|x| if x < left { 0.0 } else if x <= 0.0 { -depth } else { vacuum(x) })
            .collect();
    }
    let cdf = |u: f64| 0.5 * erfc(-u / std::f64::consts::SQRT_2);
    let reach = 6.0 * sigma;
    let h = sigma / 40.0;
    grid.positions()
        .into_iter()
        .map(|x| {
            let slab = -depth * (cdf((x - left) / sigma) - cdf(x / sigma));
            // midpoint rule over x' > 0 within the kernel reach
            let a = (x - reach).max(0.0);
            let b = x + reach;
            if b <= 0.0 {
                return slab;
            }
            let n = ((b - a) / h).ceil() as usize;
            let step = (b - a) / n as f64;
            let outside: f64 = (0..n)
                .map(|k| {
                    let xp = a + (k as f64 + 0.5) * step;
                    let u = (x - xp) / sigma;
                    vacuum(xp) * (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * step
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            slab + outside
        })
        .collect()
}

/// Maximum of the sampled potential over x > 0 (position, value).
fn barrier_maximum(grid: &SimulationGrid, values: &[f64]) -> Option<(f64, f64)> {
    let start = grid.index_of(1e-12);
    let end = ((grid.points as f64) * (1.0 - grid.absorber_fraction)) as usize;
    (start..end.max(start + 1).min(grid.points))
        .map(|i| (grid.x(i), values[i]))
        .fold(None, |best: Option<(f64, f64)>, (x, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((x, v)),
        })
}

/// ∫_{-∞}^{x} s(x') dx' with s a smooth 0→1 switch starting at the surface.
fn screened_coordinate(grid: &SimulationGrid, width: f64) -> Vec<f64> {
    let s = |x: f64| -> f64 {
        if width > 0.0 {
            smoothstep(x / width)
        } else if x > 0.0 {
            1.0
        } else {
            0.0
        }
    };
    // Closed form of ∫ smoothstep: for 0<x<w, w(u³ - u⁴/2) with u = x/w;
    // beyond, x - w/2.
    grid.positions()
        .into_iter()
        .map(|x| {
            if x <= 0.0 {
                0.0
            } else if width > 0.0 && x < width {
                let u = x / width;
                width * (u * u * u - 0.5 * u * u * u * u)
            } else if width > 0.0 {
                x - 0.5 * width
            } else {
                x * s(x)
            }
        })
        .collect()
}

/// Analytic position of the image+field barrier maximum, bohr.
pub fn analytic_barrier_position(field_au: f64, x0: f64) -> f64 {
    1.0 / (2.0 * field_au.sqrt()) - x0
}

pub fn default_grid() -> SimulationGrid {
    SimulationGrid {
        dx: 0.2,
        points: 8192,
        slab_width: nm_to_au(2.0),
        back_vacuum: 0.15 * 0.2 * 8192.0,
        dt: 0.25,
        duration: 1000.0,
        absorber_fraction: 0.1,
    }
}
