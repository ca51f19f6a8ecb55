//! Phenomenological ATP ladder generator: Gaussian peaks on an exponential
//! background above a hard cut-on, shifting linearly with intensity, with
//! the threshold peak suppressed at high intensity.

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLadderModel {
    /// Peak spacing, eV.
    pub spacing: f64,
    /// Extrapolated position of photon order zero, eV.
    pub intercept: f64,
    /// Amplitude ratio between neighbouring orders, in (0, 1).
    pub decay: f64,
    /// Peak FWHM, eV.
    pub width: f64,
    /// Nothing is emitted below this energy, eV.
    pub cut_on: f64,
    /// Peak shift per incident intensity, eV per W/cm².
    pub slope: f64,
    /// Per-order slopes starting at `first_order`; missing entries use `slope`.
    pub order_slopes: Vec<f64>,
    /// Intensity at which peak positions equal `spacing·n + intercept`, W/cm².
    pub reference_intensity: f64,
    /// Threshold order K.
    pub first_order: u32,
    pub orders: u32,
    /// Intensity where the order-K peak falls to the height of order K+1, W/cm².
    pub critical_intensity: f64,
    /// Steepness p of the suppression factor decay^((I/I_c)^p).
    pub suppression_exponent: f64,
    /// Background height at the cut-on relative to the order-K peak.
    pub background: f64,
    /// Background decay length, eV.
    pub background_scale: f64,
    /// Height of the unsuppressed order-K peak.
    pub amplitude: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub energy_step: f64,
}

impl Default for SyntheticLadderModel {
    fn default() -> Self {
        SyntheticLadderModel {
            spacing: 1.46,
            intercept: -0.3,
            decay: 0.3,
            width: 0.3,
            cut_on: 4.0,
            slope: -1.8e-12,
            order_slopes: Vec::new(),
            reference_intensity: 1.2e11,
            first_order: 3,
            orders: 6,
            critical_intensity: 1.5e11,
            suppression_exponent: 4.0,
            background: 0.02,
            background_scale: 1.5,
            amplitude: 1.0,
            energy_min: 0.0,
            energy_max: 14.0,
            energy_step: 0.02,
        }
    }
}

impl SyntheticLadderModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("width", self.width),
            ("critical_intensity", self.critical_intensity),
            ("suppression_exponent", self.suppression_exponent),
            ("background_scale", self.background_scale),
            ("amplitude", self.amplitude),
            ("energy_step", self.energy_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(name, v, "must be > 0"));
            }
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("decay", self.decay, "must lie in (0, 1)"));
        }
        if !(self.background >= 0.0) {
            return Err(Error::invalid("background", self.background, "must be >= 0"));
        }
        if !(self.energy_max > self.energy_min) {
            return Err(Error::invalid("energy_max", self.energy_max, "must exceed energy_min"));
        }
        if self.orders == 0 {
            return Err(Error::invalid("orders", 0.0, "must be >= 1"));
        }
        Ok(())
    }

    pub fn order_slope(&self, order: u32) -> f64 {
        order
            .checked_sub(self.first_order)
            .and_then(|k| self.order_slopes.get(k as usize))
            .copied()
            .unwrap_or(self.slope)
    }

    /// Centre of order `order` at incident intensity `intensity`, eV.
    pub fn peak_position(&self, order: u32, intensity: f64) -> f64 {
        self.spacing * order as f64 + self.intercept + self.order_slope(order) * (intensity - self.reference_intensity)
    }

    /// Height of order `order` before background and overlap.
    pub fn peak_amplitude(&self, order: u32, intensity: f64) -> f64 {
        let k = order.saturating_sub(self.first_order);
        let base = self.amplitude * self.decay.powi(k as i32);
        if order == self.first_order {
            base * self.decay.powf((intensity / self.critical_intensity).powf(self.suppression_exponent))
        } else {
            base
        }
    }

    pub fn spectrum(&self, intensity: f64) -> Result<Spectrum> {
        self.validate()?;
        let n = ((self.energy_max - self.energy_min) / self.energy_step + 1e-9).floor() as usize + 1;
        let sigma = self.width / (8.0 * std::f64::consts::LN_2).sqrt();
        let peaks: Vec<(f64, f64)> = (self.first_order..self.first_order + self.orders)
            .map(|o| (self.peak_position(o, intensity), self.peak_amplitude(o, intensity)))
            .collect();
        let density = (0..n)
            .map(|i| {
                let e = self.energy_min + i as f64 * self.energy_step;
                if e < self.cut_on {
                    return 0.0;
                }
                let bg = self.amplitude * self.background * (-(e - self.cut_on) / self.background_scale).exp();
                bg + peaks.iter().map(|(c, a)| a * (-(e - c).powi(2) / (2.0 * sigma * sigma)).exp()).sum::<f64>()
            })
            .collect();
        let mut s = Spectrum::new(self.energy_min, self.energy_step, density)?;
        s.set_meta("engine", "synthetic");
        s.set_meta("incident_intensity_Wcm2", intensity);
        s.set_meta("cut_on_eV", self.cut_on);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_below_cut_on() {
        let m = SyntheticLadderModel::default();
        let s = m.spectrum(1e11).unwrap();
        for (i, d) in s.density.iter().enumerate() {
            if s.energy(i) < m.cut_on - 1e-9 {
                assert_eq!(*d, 0.0);
            }
        }
    }

    #[test]
    fn suppression_crosses_at_critical_intensity() {
        let m = SyntheticLadderModel::default();
        let k = m.first_order;
        let a0 = m.peak_amplitude(k, m.critical_intensity);
        let a1 = m.peak_amplitude(k + 1, m.critical_intensity);
        assert!((a0 - a1).abs() < 1e-15);
        assert!(m.peak_amplitude(k, 0.5 * m.critical_intensity) > a1);
    }

    #[test]
    fn positions_follow_the_slope() {
        let m = SyntheticLadderModel { order_slopes: vec![-2.5e-12, -0.8e-12], ..Default::default() };
        let d = m.peak_position(3, 2.2e11) - m.peak_position(3, 1.2e11);
        assert!((d + 2.5e-12 * 1e11).abs() < 1e-12);
        let d = m.peak_position(5, 2.2e11) - m.peak_position(5, 1.2e11);
        assert!((d + 1.8e-12 * 1e11).abs() < 1e-12);
    }

    #[test]
    fn bad_decay_rejected() {
        assert!(SyntheticLadderModel { decay: 1.0, ..Default::default() }.validate().is_err());
        assert!(SyntheticLadderModel { width: 0.0, ..Default::default() }.validate().is_err());
    }
}
