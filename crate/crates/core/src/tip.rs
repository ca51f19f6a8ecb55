//! Static tip model: apex dc field, Schottky-lowered barrier and the
//! threshold photon order.

use crate::error::{Error, Result};
use crate::units::COULOMB_EV_NM;

/// Slack for the integer-part bracket so that `(φ_eff + U_p)/ħω + 1` landing
/// on an integer up to rounding counts as that integer.
const ORDER_TIE_TOLERANCE: f64 = 1e-9;

/// Everything defining the static surface barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TipSurface {
    /// Work function φ, eV.
    pub work_function: f64,
    /// Tip-anode voltage U, V.
    pub tip_voltage: f64,
    /// Apex radius r, nm.
    pub tip_radius: f64,
    /// Shank shielding factor k.
    pub shielding_factor: f64,
    /// Energy of the dominant initial states below the Fermi level, eV.
    pub initial_state_offset: f64,
    /// Depth of the model conduction band below the Fermi level, eV.
    pub fermi_depth: f64,
    /// Apex field override, GV/m. When set it replaces `U/(k r)`.
    pub field_override: Option<f64>,
    /// Effective barrier override, eV (aged tips drift away from the Schottky value).
    pub barrier_override: Option<f64>,
}

impl Default for TipSurface {
    /// Fresh W(310) tip at 150 V.
    fn default() -> Self {
        TipSurface {
            work_function: 4.35,
            tip_voltage: 150.0,
            tip_radius: 38.0,
            shielding_factor: 5.0,
            initial_state_offset: 0.3,
            fermi_depth: 8.0,
            field_override: None,
            barrier_override: None,
        }
    }
}

impl TipSurface {
    pub fn validate(&self) -> Result<()> {
        if !(self.work_function > 0.0) {
            return Err(Error::invalid("work_function", self.work_function, "must be > 0"));
        }
        if !(self.tip_radius > 0.0) {
            return Err(Error::invalid("tip_radius", self.tip_radius, "must be > 0"));
        }
        if !(self.shielding_factor >= 1.0) {
            return Err(Error::invalid("shielding_factor", self.shielding_factor, "must be >= 1"));
        }
        if !(self.initial_state_offset >= 0.0) {
            return Err(Error::invalid("initial_state_offset", self.initial_state_offset, "must be >= 0"));
        }
        if !(self.fermi_depth > 0.0) {
            return Err(Error::invalid("fermi_depth", self.fermi_depth, "must be > 0"));
        }
        if let Some(f) = self.field_override {
            if !(f >= 0.0) {
                return Err(Error::invalid("dc_field", f, "must be >= 0"));
            }
        }
        if let Some(b) = self.barrier_override {
            if !(b > 0.0) {
                return Err(Error::invalid("barrier_override", b, "must be > 0"));
            }
        }
        self.effective_barrier().map(|_| ())
    }

    /// Apex dc field, GV/m.
    pub fn dc_field(&self) -> Result<f64> {
        match self.field_override {
            Some(f) => Ok(f),
            None => tip_field(self.tip_voltage, self.shielding_factor, self.tip_radius),
        }
    }

    /// Effective barrier above the Fermi level, eV.
    pub fn effective_barrier(&self) -> Result<f64> {
        match self.barrier_override {
            Some(b) => Ok(b),
            None => effective_barrier(self.work_function, self.dc_field()?),
        }
    }
}

/// `F_dc = U/(k r)`. With U in volts and r in nm the result is in V/nm, which
/// is numerically GV/m.
pub fn tip_field(voltage: f64, shielding: f64, radius_nm: f64) -> Result<f64> {
    if !(radius_nm > 0.0) {
        return Err(Error::invalid("tip_radius", radius_nm, "must be > 0"));
    }
    if !(shielding >= 1.0) {
        return Err(Error::invalid("shielding_factor", shielding, "must be >= 1"));
    }
    if !(voltage >= 0.0) {
        return Err(Error::invalid("tip_voltage", voltage, "must be >= 0"));
    }
    Ok(voltage / (shielding * radius_nm))
}

/// Schottky lowering `sqrt(e³ F/(4πε₀))` in eV for a field in GV/m.
pub fn schottky_lowering(field_gvm: f64) -> Result<f64> {
    if !(field_gvm >= 0.0) {
        return Err(Error::invalid("dc_field", field_gvm, "must be >= 0"));
    }
    Ok((COULOMB_EV_NM * field_gvm).sqrt())
}

/// `φ − ΔW(F)`; rejects fields that pull the barrier top down to the Fermi level.
pub fn effective_barrier(work_function: f64, field_gvm: f64) -> Result<f64> {
    if !(work_function > 0.0) {
        return Err(Error::invalid("work_function", work_function, "must be > 0"));
    }
    let lowering = schottky_lowering(field_gvm)?;
    let phi_eff = work_function - lowering;
    if phi_eff <= 0.0 {
        return Err(Error::OverBarrier { work_function, lowering });
    }
    Ok(phi_eff)
}

/// Integer part of `(φ_eff + U_p)/ħω + 1`. An exact multiple counts the
/// channel as closed, i.e. rounds up to the next order.
pub fn threshold_photon_order(barrier: f64, photon_energy: f64, ponderomotive: f64) -> Result<u32> {
    if !(photon_energy > 0.0) {
        return Err(Error::invalid("photon_energy", photon_energy, "must be > 0"));
    }
    if !(barrier > 0.0) {
        return Err(Error::invalid("effective_barrier", barrier, "must be > 0"));
    }
    if !(ponderomotive >= 0.0) {
        return Err(Error::invalid("ponderomotive_energy", ponderomotive, "must be >= 0"));
    }
    let x = (barrier + ponderomotive) / photon_energy + 1.0;
    Ok((x + ORDER_TIE_TOLERANCE).floor() as u32)
}

/// Intensity at which the light-shifted barrier `φ_eff + c·I` reaches
/// `order·ħω`, where `c = up_per_intensity` is U_p per unit intensity
/// (include ξ² here to get an incident intensity).
pub fn channel_closing_intensity(
    barrier: f64,
    photon_energy: f64,
    order: u32,
    up_per_intensity: f64,
) -> Result<f64> {
    if !(up_per_intensity > 0.0) {
        return Err(Error::invalid("up_per_intensity", up_per_intensity, "must be > 0"));
    }
    if !(photon_energy > 0.0) {
        return Err(Error::invalid("photon_energy", photon_energy, "must be > 0"));
    }
    let energy = order as f64 * photon_energy;
    if energy <= barrier {
        return Err(Error::ChannelClosed { order, energy, barrier });
    }
    Ok((energy - barrier) / up_per_intensity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apex_field_at_150_volts() {
        let f = tip_field(150.0, 5.0, 38.0).unwrap();
        assert!((f - 0.789).abs() < 1e-3);
        assert_eq!(tip_field(0.0, 5.0, 38.0).unwrap(), 0.0);
        assert!((tip_field(300.0, 5.0, 38.0).unwrap() - 1.579).abs() < 1e-3);
    }

    #[test]
    fn apex_field_rejects_bad_geometry() {
        assert!(tip_field(150.0, 5.0, 0.0).is_err());
        assert!(tip_field(150.0, 0.5, 38.0).is_err());
        assert!(tip_field(-1.0, 5.0, 38.0).is_err());
    }

    #[test]
    fn schottky_lowering_values() {
        assert!((schottky_lowering(0.8).unwrap() - 1.073).abs() < 0.002);
        assert_eq!(schottky_lowering(0.0).unwrap(), 0.0);
        assert!((schottky_lowering(3.2).unwrap() - 2.146).abs() < 0.002);
        assert!(schottky_lowering(-0.1).is_err());
    }

    #[test]
    fn effective_barrier_values() {
        let b = effective_barrier(4.35, 0.8).unwrap();
        assert!((b - 3.28).abs() < 0.01);
        assert_eq!(effective_barrier(4.35, 0.0).unwrap(), 4.35);
        assert!((effective_barrier(4.0, 0.8).unwrap() - 2.93).abs() < 0.01);
    }

    #[test]
    fn over_barrier_field_is_rejected() {
        // ΔW = 4.35 eV at F = 4.35²/1.44 ≈ 13.1 GV/m.
        let err = effective_barrier(4.35, 14.0).unwrap_err();
        assert!(matches!(err, Error::OverBarrier { .. }));
    }

    #[test]
    fn threshold_orders() {
        assert_eq!(threshold_photon_order(3.3, 1.56, 0.0).unwrap(), 3);
        // (3.3 + 1.38)/1.56 + 1 = 4 exactly: counted as closed.
        assert_eq!(threshold_photon_order(3.3, 1.56, 1.38).unwrap(), 4);
        assert_eq!(threshold_photon_order(1.0, 2.0, 0.0).unwrap(), 1);
        assert!(threshold_photon_order(3.3, 0.0, 0.0).is_err());
    }

    #[test]
    fn channel_closing_values() {
        let c = 5.9e-14 * 5.7 * 5.7;
        let i3 = channel_closing_intensity(3.3, 1.56, 3, c).unwrap();
        assert!((i3 - (3.0 * 1.56 - 3.3) / c).abs() < 1.0);
        assert!((i3 / 7.2e11 - 1.0).abs() < 0.01);
        let i4 = channel_closing_intensity(3.3, 1.56, 4, c).unwrap();
        assert!(i4 > i3);
        let aged = channel_closing_intensity(4.0, 1.56, 3, c).unwrap();
        assert!((aged / i3 - 0.68 / 1.38).abs() < 1e-12);
        assert!(matches!(
            channel_closing_intensity(5.0, 1.56, 3, c).unwrap_err(),
            Error::ChannelClosed { order: 3, .. }
        ));
    }

    #[test]
    fn tip_surface_defaults_validate() {
        let tip = TipSurface::default();
        tip.validate().unwrap();
        assert!((tip.effective_barrier().unwrap() - 3.28).abs() < 0.01);
        let aged = TipSurface { barrier_override: Some(4.0), ..TipSurface::default() };
        assert_eq!(aged.effective_barrier().unwrap(), 4.0);
        let bad = TipSurface { shielding_factor: 0.9, ..TipSurface::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn lowering_quadruple_field_doubles(f in 0.0f64..10.0) {
            let a = schottky_lowering(f).unwrap();
            let b = schottky_lowering(4.0 * f).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn lowering_increasing_and_concave(f in 0.01f64..10.0, h in 0.001f64..1.0) {
            let l0 = schottky_lowering(f - 0.005).unwrap();
            let l1 = schottky_lowering(f).unwrap();
            let l2 = schottky_lowering(f + h).unwrap();
            prop_assert!(l2 > l1);
            // midpoint concavity
            let mid = schottky_lowering(0.5 * (f + f + h)).unwrap();
            prop_assert!(mid >= 0.5 * (l1 + l2) - 1e-15);
            prop_assert!(l1 > l0);
        }

        #[test]
        fn barrier_plus_lowering_is_work_function(phi in 3.0f64..6.0, f in 0.0f64..2.0) {
            let b = effective_barrier(phi, f).unwrap();
            prop_assert!((b + schottky_lowering(f).unwrap() - phi).abs() < 1e-14);
        }

        #[test]
        fn order_bracket(b in 0.1f64..8.0, w in 0.5f64..3.0, up in 0.0f64..3.0) {
            let k = threshold_photon_order(b, w, up).unwrap() as f64;
            prop_assert!(k * w >= b + up - 1e-8);
            prop_assert!((k - 1.0) * w <= b + up + 1e-8);
            prop_assert!(threshold_photon_order(b + 0.1, w, up).unwrap() as f64 >= k);
            prop_assert!(threshold_photon_order(b, w, up + 0.1).unwrap() as f64 >= k);
            prop_assert!(threshold_photon_order(b, w + 0.1, up).unwrap() as f64 <= k);
        }

        #[test]
        fn closing_intensity_inverts_order(b in 1.0f64..5.0, w in 1.0f64..2.0, extra in 1u32..3, c in 1e-14f64..1e-12) {
            let order = (b / w).floor() as u32 + extra;
            let ic = channel_closing_intensity(b, w, order, c).unwrap();
            let below = threshold_photon_order(b, w, c * ic * (1.0 - 1e-6)).unwrap();
            let above = threshold_photon_order(b, w, c * ic * (1.0 + 1e-6)).unwrap();
            prop_assert_eq!(below, order);
            prop_assert_eq!(above, order + 1);
        }
    }
}
