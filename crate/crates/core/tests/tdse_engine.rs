use atp_core::analysis::{detect_peaks, PeakOptions};
use atp_core::tdse::{run_tdse, TdseSettings};
use atp_core::units::nm_to_au;
use atp_core::{LaserDrive, TipSurface};

fn tip() -> TipSurface {
    TipSurface { field_override: Some(0.8), barrier_override: Some(4.0), ..TipSurface::default() }
}

fn settings() -> TdseSettings {
    let mut s = TdseSettings { initial_energy: -0.3, ..TdseSettings::default() };
    s.grid.slab_width = nm_to_au(2.065);
    s
}

fn meta(s: &atp_core::Spectrum, key: &str) -> f64 {
    s.metadata[key].parse().unwrap()
}

#[test]
fn no_drive_no_emission() {
    let laser = LaserDrive { peak_intensity: 0.0, ..LaserDrive::default() };
    let run = run_tdse(&tip(), &laser, &settings()).unwrap();
    let emitted = meta(&run.spectrum, "emitted_probability");
    assert!(emitted < 1e-12, "{emitted:e} {:?}", run.spectrum.metadata);
    assert!(run.spectrum.density.iter().all(|d| *d == 0.0));
}

#[test]
fn spectrum_integral_matches_detector_flux() {
    let laser = LaserDrive { peak_intensity: 3e12, ..LaserDrive::default() };
    let run = run_tdse(&tip(), &laser, &settings()).unwrap();
    let s = &run.spectrum;
    let integral = s.total();
    let flux = meta(s, "detector_flux");
    assert!(integral > 1e-6, "{integral}");
    assert!((integral / flux - 1.0).abs() < 0.02, "{integral:e} vs {flux:e}");
    // the unnormalised window operator already accounts for the vacuum part
    let raw = meta(s, "window_raw_integral");
    let vacuum = meta(s, "vacuum_norm");
    assert!((raw / vacuum - 1.0).abs() < 0.05, "{raw:e} vs {vacuum:e}");
    assert!(s.density.iter().all(|d| *d >= 0.0));
    // nothing reaches the detector below the Fermi level
    let below: f64 = (0..s.len()).filter(|&i| s.energy(i) < 0.0).map(|i| s.density[i]).sum::<f64>() * s.energy_step;
    assert!(below < 1e-3 * integral, "{below:e}");
}

#[test]
fn halving_dx_and_dt_keeps_peaks() {
    let laser = LaserDrive { peak_intensity: 3e12, ..LaserDrive::default() };
    let coarse = settings();
    let mut fine = settings();
    fine.grid.dx *= 0.5;
    fine.grid.dt *= 0.5;
    fine.grid.points *= 2;
    let opts = PeakOptions { prominence: 0.3, min_separation: 0.78, log_scale: true };
    let peaks = |s: &TdseSettings| detect_peaks(&run_tdse(&tip(), &laser, s).unwrap().spectrum, &opts).energies();
    let (a, b) = (peaks(&coarse), peaks(&fine));
    assert!(a.len() >= 4, "{a:?}");
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 0.010, "{a:?} vs {b:?}");
    }
}
