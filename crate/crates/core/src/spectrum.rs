use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Energy-resolved yield on a uniform grid.
///
/// Energies are in eV relative to the Fermi level; `density` is per eV.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub energy_start: f64,
    pub energy_step: f64,
    pub density: Vec<f64>,
    /// Free-form provenance (engine, drive, derived quantities). Ordered so
    /// that serialisation is deterministic.
    pub metadata: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(energy_start: f64, energy_step: f64, density: Vec<f64>) -> Result<Self> {
        if !(energy_step > 0.0) {
            return Err(Error::invalid("energy_step", energy_step, "must be > 0"));
        }
        if let Some(bad) = density.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::invalid("density", *bad, "must be finite and >= 0"));
        }
        Ok(Spectrum {
            energy_start,
            energy_step,
            density,
            metadata: BTreeMap::new(),
        })
    }

    /// Builds a spectrum from sampled energies, which must be uniform.
    pub fn from_samples(energies: &[f64], density: Vec<f64>) -> Result<Self> {
        if energies.len() != density.len() {
            return Err(Error::TooFew {
                what: "matching density samples",
                needed: energies.len(),
                got: density.len(),
            });
        }
        if energies.len() < 2 {
            return Err(Error::TooFew { what: "energy samples", needed: 2, got: energies.len() });
        }
        let step = (energies[energies.len() - 1] - energies[0]) / (energies.len() - 1) as f64;
        if !check_uniform(energies, step) {
            return Err(Error::NonUniformGrid);
        }
        Spectrum::new(energies[0], step, density)
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.energy_start + i as f64 * self.energy_step
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.energy(i)).collect()
    }

    pub fn energy_end(&self) -> f64 {
        self.energy(self.len().saturating_sub(1))
    }

    /// ∑ density · ΔE.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.energy_step
    }

    pub fn max_density(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    /// Linear interpolation, zero outside the grid.
    pub fn density_at(&self, e: f64) -> f64 {
        let u = (e - self.energy_start) / self.energy_step;
        if self.is_empty() || u < 0.0 || u > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.len().saturating_sub(2));
        if self.len() == 1 {
            return self.density[0];
        }
        let s = u - i as f64;
        self.density[i] * (1.0 - s) + self.density[i + 1] * s
    }

    pub fn scaled(&self, factor: f64) -> Spectrum {
        Spectrum {
            density: self.density.iter().map(|d| d * factor).collect(),
            ..self.clone()
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }
}

pub(crate) fn check_uniform(xs: &[f64], step: f64) -> bool {
    if !(step > 0.0) {
        return false;
    }
    let scale = xs.iter().fold(step.abs(), |m, x| m.max(x.abs()));
    xs.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step + 1e-12 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_density() {
        assert!(Spectrum::new(0.0, 0.1, vec![1.0, -1e-3]).is_err());
        assert!(Spectrum::new(0.0, 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn non_uniform_samples_rejected() {
        let e = [0.0, 0.1, 0.25, 0.3];
        assert!(matches!(Spectrum::from_samples(&e, vec![0.0; 4]), Err(Error::NonUniformGrid)));
        let s = Spectrum::from_samples(&[1.0, 1.5, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.energy_step, 0.5);
        assert!((s.density_at(1.75) - 2.5).abs() < 1e-12);
        assert_eq!(s.density_at(3.0), 0.0);
    }
}
