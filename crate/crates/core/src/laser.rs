//! Few-cycle drive model and intensity-derived quantities.
//!
//! Intensities are cycle-averaged peak intensities in W/cm², fields are in
//! GV/m. `peak_intensity` on [`LaserDrive`] is the incident value; the
//! enhanced value at the apex is `ξ²·I` and is what the engines see.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::units::{ELECTRON_CHARGE, ELECTRON_MASS, REDUCED_PLANCK, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Temporal envelope shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// Gaussian with intensity FWHM equal to the drive's `fwhm_duration`.
    Gaussian,
    /// sin² ramps of `ramp_cycles` around a constant top of `flat_cycles`,
    /// centred on t = 0. Used for quasi-monochromatic reference runs.
    FlatTop { ramp_cycles: f64, flat_cycles: f64 },
}

/// Average-power bookkeeping of the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPower {
    /// W
    pub avg_power: f64,
    /// Hz
    pub rep_rate: f64,
    /// 1/e² intensity radius, µm
    pub spot_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserDrive {
    /// Centre photon energy ħω, eV.
    pub photon_energy: f64,
    /// Intensity FWHM, fs.
    pub fwhm_duration: f64,
    /// Carrier-envelope phase, rad.
    pub carrier_envelope_phase: f64,
    /// Incident cycle-averaged peak intensity, W/cm².
    pub peak_intensity: f64,
    /// Field enhancement ξ at the apex.
    pub enhancement: f64,
    pub power: Option<BeamPower>,
    pub envelope: Envelope,
}

impl Default for LaserDrive {
    /// 6.5 fs Ti:sapphire oscillator pulse at 1.2e11 W/cm², no enhancement.
    fn default() -> Self {
        LaserDrive {
            photon_energy: 1.56,
            fwhm_duration: 6.5,
            carrier_envelope_phase: 0.0,
            peak_intensity: 1.2e11,
            enhancement: 1.0,
            power: None,
            envelope: Envelope::Gaussian,
        }
    }
}

impl LaserDrive {
    pub fn validate(&self) -> Result<()> {
        if !(self.photon_energy > 0.0) {
            return Err(Error::invalid("photon_energy", self.photon_energy, "must be > 0"));
        }
        if !(self.fwhm_duration > 0.0) {
            return Err(Error::invalid("fwhm_duration", self.fwhm_duration, "must be > 0"));
        }
        if !(self.enhancement >= 1.0) {
            return Err(Error::invalid("enhancement", self.enhancement, "must be >= 1"));
        }
        if !(self.peak_intensity >= 0.0) {
            return Err(Error::invalid("peak_intensity", self.peak_intensity, "must be >= 0"));
        }
        if let Envelope::FlatTop { ramp_cycles, flat_cycles } = self.envelope {
            if !(ramp_cycles > 0.0) || !(flat_cycles >= 0.0) {
                return Err(Error::invalid("ramp_cycles", ramp_cycles, "flat-top needs ramp > 0 and flat >= 0"));
            }
        }
        if let Some(p) = self.power {
            let from_power = self.intensity_from_power(&p)?;
            if (self.peak_intensity - from_power).abs() > 0.05 * from_power {
                return Err(Error::IntensityMismatch {
                    given: self.peak_intensity,
                    from_power,
                });
            }
        }
        Ok(())
    }

    fn intensity_from_power(&self, p: &BeamPower) -> Result<f64> {
        peak_intensity_from_power(p.avg_power, p.rep_rate, self.fwhm_duration, p.spot_radius)
    }

    /// ξ²·I_L, W/cm².
    pub fn enhanced_intensity(&self) -> f64 {
        enhanced_intensity(self.peak_intensity, self.enhancement)
    }

    /// Ponderomotive energy at the apex (enhanced intensity), eV.
    pub fn ponderomotive_energy(&self) -> f64 {
        ponderomotive_energy(self.enhanced_intensity(), self.photon_energy)
    }

    /// Enhanced peak field amplitude ξ·E₀, GV/m.
    pub fn peak_field(&self) -> f64 {
        self.enhancement * field_from_intensity(self.peak_intensity)
    }

    /// Angular frequency in rad/fs.
    pub fn angular_frequency(&self) -> f64 {
        self.photon_energy * ELECTRON_CHARGE / REDUCED_PLANCK * 1e-15
    }

    /// Optical period, fs.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.angular_frequency()
    }

    /// Field envelope (amplitude, not intensity) at time `t` in fs.
    pub fn envelope_at(&self, t: f64) -> f64 {
        match self.envelope {
            Envelope::Gaussian => (-2.0 * LN_2 * t * t / (self.fwhm_duration * self.fwhm_duration)).exp(),
            Envelope::FlatTop { ramp_cycles, flat_cycles } => {
                let period = self.period();
                let half_flat = 0.5 * flat_cycles * period;
                let ramp = ramp_cycles * period;
                let a = t.abs();
                if a <= half_flat {
                    1.0
                } else if a >= half_flat + ramp {
                    0.0
                } else {
                    let s = (half_flat + ramp - a) / ramp;
                    (0.5 * PI * s).sin().powi(2)
                }
            }
        }
    }

    /// Time interval outside of which the field is negligible (< 1e-4 of peak
    /// for the Gaussian), fs.
    pub fn support(&self) -> (f64, f64) {
        match self.envelope {
            // g(t) = 1e-4 at t = τ·sqrt(ln(1e4)/(2 ln 2))
            Envelope::Gaussian => {
                let half = self.fwhm_duration * (1e4f64.ln() / (2.0 * LN_2)).sqrt();
                (-half, half)
            }
            Envelope::FlatTop { ramp_cycles, flat_cycles } => {
                let half = (0.5 * flat_cycles + ramp_cycles) * self.period();
                (-half, half)
            }
        }
    }

    /// Enhanced surface field E(t) = ξ E₀ g(t) cos(ωt + φ_CE), GV/m.
    pub fn field_at(&self, t: f64) -> f64 {
        self.peak_field() * self.envelope_at(t) * (self.angular_frequency() * t + self.carrier_envelope_phase).cos()
    }

    /// Samples the enhanced field on `[t0, t0 + (n-1)·dt]`.
    pub fn sample(&self, t0: f64, dt: f64, n: usize) -> FieldTrace {
        let values = (0..n).map(|i| self.field_at(t0 + i as f64 * dt)).collect();
        FieldTrace { t0, dt, values }
    }

    /// Samples the field over its support with `steps_per_cycle` samples per
    /// optical period.
    pub fn trace(&self, steps_per_cycle: usize) -> FieldTrace {
        let (a, b) = self.support();
        let dt = self.period() / steps_per_cycle as f64;
        let n = ((b - a) / dt).ceil() as usize + 1;
        self.sample(a, dt, n)
    }
}

/// A time-dependent surface field, GV/m, with `t` in fs.
///
/// Sign convention: positive values pull electrons out of the metal, the
/// same sense as a positive dc field.
pub trait Field: Sync {
    fn at(&self, t: f64) -> f64;
    fn support(&self) -> (f64, f64);
}

impl Field for LaserDrive {
    fn at(&self, t: f64) -> f64 {
        self.field_at(t)
    }

    fn support(&self) -> (f64, f64) {
        LaserDrive::support(self)
    }
}

/// Uniformly sampled field, GV/m on a fs grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FieldTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∫ c ε₀ E(t)² dt, J/cm², of the instantaneous intensity.
    pub fn fluence(&self) -> f64 {
        let c = SPEED_OF_LIGHT * VACUUM_PERMITTIVITY * 1e18 * 1e-4 * self.dt * 1e-15;
        let n = self.values.len();
        self.values
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                w * e * e
            })
            .sum::<f64>()
            * c
    }
}

impl Field for FieldTrace {
    /// Cubic (Catmull-Rom) interpolation; zero outside the sampled window.
    fn at(&self, t: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        let u = (t - self.t0) / self.dt;
        if u < 0.0 || u > (n - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(n.saturating_sub(2));
        let s = u - i as f64;
        let get = |k: isize| -> f64 {
            let k = k.clamp(0, n as isize - 1) as usize;
            self.values[k]
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        0.5 * (2.0 * p1
            + (-p0 + p2) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s)
    }

    fn support(&self) -> (f64, f64) {
        (self.t0, self.end())
    }
}

/// Peak field of a wave with cycle-averaged intensity `I` (W/cm²):
/// `E₀ = sqrt(2I/(c ε₀))`, GV/m.
pub fn field_from_intensity(intensity: f64) -> f64 {
    let i_si = intensity.max(0.0) * 1e4;
    (2.0 * i_si / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY)).sqrt() * 1e-9
}

/// U_p / I in eV per W/cm² at photon energy ħω (eV).
pub fn ponderomotive_per_intensity(photon_energy: f64) -> f64 {
    let omega = photon_energy * ELECTRON_CHARGE / REDUCED_PLANCK;
    let joule = ELECTRON_CHARGE * ELECTRON_CHARGE * 1e4
        / (2.0 * SPEED_OF_LIGHT * VACUUM_PERMITTIVITY * ELECTRON_MASS * omega * omega);
    joule / ELECTRON_CHARGE
}

/// `U_p = e² I/(2 c ε₀ m ω²)` in eV.
pub fn ponderomotive_energy(intensity: f64, photon_energy: f64) -> f64 {
    intensity * ponderomotive_per_intensity(photon_energy)
}

/// `γ = sqrt(φ_eff / (2 U_p))`.
pub fn keldysh(barrier: f64, ponderomotive: f64) -> Result<f64> {
    if !(barrier > 0.0) {
        return Err(Error::invalid("effective_barrier", barrier, "must be > 0"));
    }
    if ponderomotive == 0.0 {
        return Err(Error::ZeroPonderomotive);
    }
    if !(ponderomotive > 0.0) {
        return Err(Error::invalid("ponderomotive_energy", ponderomotive, "must be > 0"));
    }
    Ok((barrier / (2.0 * ponderomotive)).sqrt())
}

pub fn enhanced_intensity(intensity: f64, enhancement: f64) -> f64 {
    enhancement * enhancement * intensity
}

/// On-axis peak intensity (W/cm²) of a Gaussian beam with Gaussian pulses:
/// `E_p = P/f`, `P_pk = 2 sqrt(ln2/π) E_p/τ`, `I = 2 P_pk/(π w²)`.
pub fn peak_intensity_from_power(avg_power: f64, rep_rate: f64, fwhm_fs: f64, spot_radius_um: f64) -> Result<f64> {
    for (name, v) in [
        ("avg_power", avg_power),
        ("rep_rate", rep_rate),
        ("fwhm_duration", fwhm_fs),
        ("spot_radius", spot_radius_um),
    ] {
        if !(v > 0.0) {
            return Err(Error::invalid(name, v, "must be > 0"));
        }
    }
    let pulse_energy = avg_power / rep_rate;
    let peak_power = 2.0 * (LN_2 / PI).sqrt() * pulse_energy / (fwhm_fs * 1e-15);
    let w_cm = spot_radius_um * 1e-4;
    Ok(2.0 * peak_power / (PI * w_cm * w_cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_amplitudes() {
        assert!((field_from_intensity(1e12) / 2.744 - 1.0).abs() < 5e-3);
        assert_eq!(field_from_intensity(0.0), 0.0);
        assert!((field_from_intensity(4e12) - 2.0 * field_from_intensity(1e12)).abs() < 1e-12);
        assert!((field_from_intensity(4e12) - 5.489).abs() < 0.03);
    }

    #[test]
    fn ponderomotive_values() {
        let up = ponderomotive_energy(1e12, 1.56);
        assert!((up - 5.9e-2).abs() < 0.001, "{up}");
        assert_eq!(ponderomotive_energy(0.0, 1.56), 0.0);
        assert_eq!(ponderomotive_energy(2e12, 1.56), 2.0 * up);
    }

    #[test]
    fn keldysh_range() {
        let r = ponderomotive_per_intensity(1.56);
        let g_lo = keldysh(3.5, 5.7f64.powi(2) * 0.9e11 * r).unwrap();
        let g_hi = keldysh(3.5, 5.7f64.powi(2) * 2.3e11 * r).unwrap();
        assert!((g_lo - 3.2).abs() < 0.05, "{g_lo}");
        assert!((g_hi - 2.0).abs() < 0.05, "{g_hi}");
        assert!(matches!(keldysh(3.5, 0.0), Err(Error::ZeroPonderomotive)));
        let g = keldysh(3.5, 0.2).unwrap();
        assert!((keldysh(3.5, 0.8).unwrap() - g / 2.0).abs() < 1e-12);
        assert!((keldysh(7.0, 0.4).unwrap() - g).abs() < 1e-12);
    }

    #[test]
    fn enhancement_scaling() {
        assert!((enhanced_intensity(1e11, 5.7) - 3.249e12).abs() < 1e6);
        assert_eq!(enhanced_intensity(3e11, 1.0), 3e11);
        assert_eq!(enhanced_intensity(0.0, 5.7), 0.0);
    }

    #[test]
    fn power_bookkeeping() {
        let i = peak_intensity_from_power(0.010, 80e6, 6.5, 2.4).unwrap();
        // Independent evaluation: 1.25e-10 J, 0.939437 E_p/τ, 2/(π w²).
        let expected = 2.0 * (0.9394372786996513 * 1.25e-10 / 6.5e-15) / (PI * (2.4e-4f64).powi(2));
        assert!((i / expected - 1.0).abs() < 1e-9);
        assert!((i / 2.0e11 - 1.0).abs() < 0.01, "{i:e}");
        let i2 = peak_intensity_from_power(0.020, 80e6, 6.5, 2.4).unwrap();
        assert!((i2 / i - 2.0).abs() < 1e-12);
        let i4 = peak_intensity_from_power(0.010, 80e6, 6.5, 4.8).unwrap();
        assert!((i4 / i - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mismatched_power_and_intensity_rejected() {
        let power = BeamPower { avg_power: 0.010, rep_rate: 80e6, spot_radius: 2.4 };
        let i = peak_intensity_from_power(0.010, 80e6, 6.5, 2.4).unwrap();
        let ok = LaserDrive { peak_intensity: i * 1.04, power: Some(power), ..LaserDrive::default() };
        ok.validate().unwrap();
        let bad = LaserDrive { peak_intensity: i * 1.2, power: Some(power), ..LaserDrive::default() };
        assert!(matches!(bad.validate(), Err(Error::IntensityMismatch { .. })));
    }

    #[test]
    fn pulse_peak_values() {
        let drive = LaserDrive { peak_intensity: 1e11, enhancement: 5.7, ..LaserDrive::default() };
        let e0 = 5.7 * field_from_intensity(1e11);
        assert!((drive.field_at(0.0) - e0).abs() < 1e-12);
        let quarter = LaserDrive { carrier_envelope_phase: PI / 2.0, ..drive.clone() };
        assert!(quarter.field_at(0.0).abs() < 1e-12);
        let trace = drive.trace(200);
        assert!(trace.max_abs() <= e0 * (1.0 + 1e-12));
    }

    #[test]
    fn envelope_fwhm_is_intensity_fwhm() {
        let drive = LaserDrive::default();
        let g = drive.envelope_at(drive.fwhm_duration / 2.0);
        assert!((g * g - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trace_fluence_matches_beam_bookkeeping() {
        // 12-cycle pulse, ξ = 1: fluence at beam centre is 2 E_p/(π w²).
        let (p, f, w) = (0.010, 80e6, 2.4);
        for tau in [6.5, 32.0] {
            let i = peak_intensity_from_power(p, f, tau, w).unwrap();
            let drive = LaserDrive { fwhm_duration: tau, peak_intensity: i, ..LaserDrive::default() };
            let fluence = drive.trace(400).fluence();
            let expected = (p / f) / (PI * (w * 1e-4f64).powi(2) / 2.0);
            assert!((fluence / expected - 1.0).abs() < 0.01, "tau {tau}: {fluence} vs {expected}");
        }
    }

    #[test]
    fn symmetric_trace_is_even() {
        let drive = LaserDrive { peak_intensity: 2e11, ..LaserDrive::default() };
        let n = 2001;
        let dt = 0.01;
        let t0 = -(n as f64 - 1.0) / 2.0 * dt;
        let trace = drive.sample(t0, dt, n);
        for i in 0..n {
            let j = n - 1 - i;
            assert!((trace.values[i] - trace.values[j]).abs() < 1e-12 * drive.peak_field());
        }
    }

    #[test]
    fn trace_interpolation_follows_analytic_field() {
        let drive = LaserDrive { peak_intensity: 1e12, ..LaserDrive::default() };
        let trace = drive.trace(200);
        for k in 0..200 {
            let t = -5.0 + 0.0537 * k as f64;
            assert!((Field::at(&trace, t) - drive.field_at(t)).abs() < 1e-4 * drive.peak_field());
        }
    }

    proptest! {
        #[test]
        fn ponderomotive_linear_and_inverse_square(i in 0.0f64..1e14, w in 0.5f64..4.0) {
            let up = ponderomotive_energy(i, w);
            prop_assert!((ponderomotive_energy(3.0 * i, w) - 3.0 * up).abs() <= 1e-12 * up.max(1e-300));
            prop_assert!((ponderomotive_energy(i, 2.0 * w) - up / 4.0).abs() <= 1e-12 * up.max(1e-300));
        }

        #[test]
        fn keldysh_divides_by_enhancement(phi in 1.0f64..6.0, i in 1e9f64..1e13, xi in 1.0f64..20.0) {
            let g1 = keldysh(phi, ponderomotive_energy(i, 1.56)).unwrap();
            let gx = keldysh(phi, ponderomotive_energy(enhanced_intensity(i, xi), 1.56)).unwrap();
            prop_assert!((gx - g1 / xi).abs() <= 1e-12 * g1);
        }

        #[test]
        fn field_scales_with_enhancement(i in 0.0f64..1e14, xi in 1.0f64..20.0) {
            let a = field_from_intensity(enhanced_intensity(i, xi));
            let b = xi * field_from_intensity(i);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }
}
