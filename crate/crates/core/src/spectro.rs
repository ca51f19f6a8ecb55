//! Retarding-field spectrometer: forward counting model and inversion by
//! Savitzky–Golay differentiation.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::spectrum::{check_uniform, Spectrum};

/// z at which the standard normal CDF reaches 0.9.
const Z90: f64 = 1.281_551_565_544_600_4;

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentModel {
    /// 10–90 % width of the transmission step, eV.
    pub resolution: f64,
    /// Expected background counts per setting.
    pub background: f64,
    /// Detection efficiency.
    pub efficiency: f64,
}

impl Default for InstrumentModel {
    fn default() -> Self {
        InstrumentModel { resolution: 0.080, background: 0.0, efficiency: 0.005 }
    }
}

impl InstrumentModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::invalid("resolution", self.resolution, "must be > 0"));
        }
        if !(0.001..=0.01).contains(&self.efficiency) {
            return Err(Error::invalid("efficiency", self.efficiency, "must lie in [0.001, 0.01]"));
        }
        if !(self.background >= 0.0) {
            return Err(Error::invalid("background", self.background, "must be >= 0"));
        }
        Ok(())
    }

    /// Standard deviation of the Gaussian kernel, eV.
    pub fn sigma(&self) -> f64 {
        self.resolution / (2.0 * Z90)
    }
}

/// Probability that an electron of energy `energy` (eV) passes a retarding
/// potential `voltage` (V): an integrated Gaussian centred at E = eV.
pub fn transmission(energy: f64, voltage: f64, instrument: &InstrumentModel) -> f64 {
    0.5 * erfc(-(energy - voltage) / (instrument.sigma() * std::f64::consts::SQRT_2))
}

/// Uniform retarding-voltage settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl VoltageGrid {
    pub fn spanning(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop > start) {
            return Err(Error::invalid("voltage_step", step, "needs stop > start and step > 0"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(VoltageGrid { start, step, count })
    }

    pub fn voltage(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn voltages(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.voltage(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetardingCurve {
    pub voltages: VoltageGrid,
    pub counts: Vec<u64>,
    /// Laser pulses per setting.
    pub exposure: f64,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

/// Noise-free mean counts μ(V) = exposure·η·∫S(E)T(E,V)dE + background.
pub fn expected_counts(
    spectrum: &Spectrum,
    instrument: &InstrumentModel,
    voltages: &VoltageGrid,
    exposure: f64,
) -> Result<Vec<f64>> {
    instrument.validate()?;
    if !(exposure >= 0.0) {
        return Err(Error::invalid("exposure", exposure, "must be >= 0"));
    }
    let reach = 6.0 * instrument.sigma();
    let (v_lo, v_hi) = (voltages.start, voltages.voltage(voltages.count.saturating_sub(1)));
    if spectrum.is_empty() || v_hi < spectrum.energy_start - reach || v_lo > spectrum.energy_end() + reach {
        return Err(Error::NoOverlap);
    }
    let scale = exposure * instrument.efficiency * spectrum.energy_step;
    Ok(voltages
        .voltages()
        .into_iter()
        .map(|v| {
            let signal: f64 = spectrum
                .density
                .iter()
                .enumerate()
                .filter(|(_, d)| **d != 0.0)
                .map(|(i, d)| d * transmission(spectrum.energy(i), v, instrument))
                .sum();
            scale * signal + instrument.background
        })
        .collect())
}

/// Draws Poisson counts around [`expected_counts`] with a ChaCha stream
/// seeded by `seed`.
pub fn forward_counts(
    spectrum: &Spectrum,
    instrument: &InstrumentModel,
    voltages: &VoltageGrid,
    exposure: f64,
    seed: u64,
) -> Result<RetardingCurve> {
    let mean = expected_counts(spectrum, instrument, voltages, exposure)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = mean
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Poisson::new(mu).map(|p| p.sample(&mut rng) as u64).unwrap_or(0)
            } else {
                0
            }
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("resolution_eV".into(), instrument.resolution.to_string());
    metadata.insert("efficiency".into(), instrument.efficiency.to_string());
    metadata.insert("background".into(), instrument.background.to_string());
    Ok(RetardingCurve { voltages: *voltages, counts, exposure, seed, metadata })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub window: usize,
    pub order: usize,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing { window: 11, order: 3 }
    }
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        if self.window < 5 || self.window % 2 == 0 || self.order >= self.window || self.order < 1 {
            return Err(Error::BadSmoothing { window: self.window, order: self.order });
        }
        Ok(())
    }
}

/// Least-squares polynomial derivative weights for a window of `window`
/// samples evaluated at sample `at` (0-based within the window), unit step.
fn derivative_weights(window: usize, order: usize, at: usize) -> Vec<f64> {
    let x = |j: usize| j as f64 - at as f64;
    let a = DMatrix::from_fn(window, order + 1, |j, p| x(j).powi(p as i32));
    let ata = a.transpose() * &a;
    let inv = ata.try_inverse().expect("Vandermonde normal matrix is regular for order < window");
    // derivative at x = 0 is the linear coefficient c₁ = row 1 of (AᵀA)⁻¹Aᵀ
    let row = inv.row(1) * a.transpose();
    row.iter().copied().collect()
}

/// Savitzky–Golay first derivative of uniformly spaced samples.
pub fn savitzky_golay_derivative(values: &[f64], step: f64, smoothing: Smoothing) -> Result<Vec<f64>> {
    smoothing.validate()?;
    let m = smoothing.window;
    let n = values.len();
    if n < m {
        return Err(Error::TooFew { what: "samples for the smoothing window", needed: m, got: n });
    }
    let h = m / 2;
    let centre = derivative_weights(m, smoothing.order, h);
    let y = DVector::from_column_slice(values);
    Ok((0..n)
        .map(|i| {
            let (start, weights) = if i < h {
                (0, derivative_weights(m, smoothing.order, i))
            } else if i + h >= n {
                (n - m, derivative_weights(m, smoothing.order, i + m - n))
            } else {
                (i - h, centre.clone())
            };
            weights.iter().enumerate().map(|(j, w)| w * y[start + j]).sum::<f64>() / step
        })
        .collect())
}

/// Inversion of a retarding curve: density = −dN/dV with negative values
/// clamped to zero; the clamped fraction is recorded as `clamped_fraction`.
///
/// Energies are e·V plus `fermi_reference` (eV).
pub fn invert_curve(curve: &RetardingCurve, smoothing: Smoothing, fermi_reference: f64) -> Result<Spectrum> {
    let vs = curve.voltages.voltages();
    if !check_uniform(&vs, curve.voltages.step) {
        return Err(Error::NonUniformGrid);
    }
    let counts: Vec<f64> = curve.counts.iter().map(|&c| c as f64).collect();
    let slope = savitzky_golay_derivative(&counts, curve.voltages.step, smoothing)?;
    let clamped = slope.iter().filter(|d| **d > 0.0).count();
    let density: Vec<f64> = slope.iter().map(|d| (-d).max(0.0)).collect();
    let mut s = Spectrum::new(curve.voltages.start + fermi_reference, curve.voltages.step, density)?;
    s.metadata = curve.metadata.clone();
    s.set_meta("engine", "retarding-inversion");
    s.set_meta("clamped_fraction", clamped as f64 / vs.len() as f64);
    s.set_meta("smoothing_window", smoothing.window);
    s.set_meta("smoothing_order", smoothing.order);
    s.set_meta("fermi_reference_eV", fermi_reference);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn instrument() -> InstrumentModel {
        InstrumentModel::default()
    }

    #[test]
    fn transmission_limits_and_midpoint() {
        let ins = instrument();
        assert_eq!(transmission(3.0, 3.0, &ins), 0.5);
        assert!(transmission(5.0, 3.0, &ins) > 1.0 - 1e-12);
        assert!(transmission(1.0, 3.0, &ins) < 1e-12);
    }

    #[test]
    fn ten_to_ninety_width_matches_resolution() {
        let ins = instrument();
        let solve = |target: f64| {
            // transmission falls with V; bisection on V
            let (mut lo, mut hi) = (-1.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if transmission(0.0, mid, &ins) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let width = solve(0.1) - solve(0.9);
        assert!((width / ins.resolution - 1.0).abs() < 0.01, "{width}");
    }

    #[test]
    fn zero_spectrum_gives_zero_counts() {
        let s = Spectrum::new(0.0, 0.01, vec![0.0; 500]).unwrap();
        let grid = VoltageGrid::spanning(0.0, 5.0, 0.02).unwrap();
        let curve = forward_counts(&s, &instrument(), &grid, 1e6, 7).unwrap();
        assert!(curve.counts.iter().all(|c| *c == 0));
    }

    #[test]
    fn disjoint_ranges_rejected() {
        let s = Spectrum::new(0.0, 0.01, vec![1.0; 100]).unwrap();
        let grid = VoltageGrid::spanning(10.0, 12.0, 0.02).unwrap();
        assert!(matches!(expected_counts(&s, &instrument(), &grid, 1.0), Err(Error::NoOverlap)));
    }

    #[test]
    fn narrow_line_reproduces_transmission_curve() {
        let mut density = vec![0.0; 1001];
        density[500] = 1.0 / 0.001;
        let s = Spectrum::new(4.5, 0.001, density).unwrap();
        let e0 = s.energy(500);
        let ins = instrument();
        let grid = VoltageGrid::spanning(4.0, 5.0, 0.01).unwrap();
        let mu = expected_counts(&s, &ins, &grid, 1.0 / ins.efficiency).unwrap();
        for (v, m) in grid.voltages().iter().zip(&mu) {
            assert!((m - transmission(e0, *v, &ins)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_exposure_converges_to_mean() {
        let density: Vec<f64> = (0..600).map(|i| (-(i as f64 * 0.01 - 3.0).powi(2)).exp()).collect();
        let s = Spectrum::new(0.0, 0.01, density).unwrap();
        let ins = instrument();
        let grid = VoltageGrid::spanning(2.0, 2.6, 0.1).unwrap();
        let unit = expected_counts(&s, &ins, &grid, 1.0).unwrap();
        let exposure = 1e7 / unit[0];
        let curve = forward_counts(&s, &ins, &grid, exposure, 11).unwrap();
        for (c, u) in curve.counts.iter().zip(&unit) {
            let rel = (*c as f64 / exposure - u).abs() / u;
            assert!(rel < 0.01, "{rel}");
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let s = Spectrum::new(0.0, 0.01, vec![3.0; 600]).unwrap();
        let grid = VoltageGrid::spanning(0.0, 6.0, 0.02).unwrap();
        let a = forward_counts(&s, &instrument(), &grid, 1e4, 99).unwrap();
        let b = forward_counts(&s, &instrument(), &grid, 1e4, 99).unwrap();
        let c = forward_counts(&s, &instrument(), &grid, 1e4, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn savitzky_golay_is_exact_on_cubics() {
        let f = |x: f64| 0.3 * x * x * x - 2.0 * x * x + x - 5.0;
        let df = |x: f64| 0.9 * x * x - 4.0 * x + 1.0;
        let step = 0.1;
        let ys: Vec<f64> = (0..40).map(|i| f(i as f64 * step)).collect();
        let d = savitzky_golay_derivative(&ys, step, Smoothing::default()).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((v - df(i as f64 * step)).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn bad_smoothing_rejected() {
        for (window, order) in [(4, 2), (10, 3), (7, 7), (3, 1)] {
            assert!(Smoothing { window, order }.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn forward_model_is_linear(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let s1: Vec<f64> = (0..300).map(|i| (-(i as f64 * 0.02 - 2.0).powi(2)).exp()).collect();
            let s2: Vec<f64> = (0..300).map(|i| 1.0 / (1.0 + i as f64 * 0.02)).collect();
            let mix: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
            let ins = InstrumentModel::default();
            let grid = VoltageGrid::spanning(0.5, 5.0, 0.05).unwrap();
            let mu = |d: Vec<f64>| expected_counts(&Spectrum::new(0.0, 0.02, d).unwrap(), &ins, &grid, 1e3).unwrap();
            let (m1, m2, mm) = (mu(s1), mu(s2), mu(mix));
            for i in 0..mm.len() {
                prop_assert!((mm[i] - (a * m1[i] + b * m2[i])).abs() <= 1e-9 * (1.0 + mm[i].abs()));
            }
        }
    }
}
