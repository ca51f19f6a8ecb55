use atp_core::classical::{classical_spectrum, find_kink, simulate_trajectory, EnsembleConfig, Outcome, TrajectoryOptions};
use atp_core::{Envelope, LaserDrive, TipSurface};

fn monochromatic() -> LaserDrive {
    LaserDrive {
        peak_intensity: 1e13,
        envelope: Envelope::FlatTop { ramp_cycles: 4.0, flat_cycles: 4.0 },
        ..LaserDrive::default()
    }
}

/// Highest drift energy over a dense scan of birth phases in one flat-top cycle, in U_p.
fn cutoff(rescatter: bool) -> f64 {
    let laser = monochromatic();
    let period = laser.period();
    let opts = TrajectoryOptions { step: 0.002, detector: 0.0, ..TrajectoryOptions::default() };
    let best = (0..2000)
        .map(|i| i as f64 / 2000.0 * period)
        .filter_map(|t| match simulate_trajectory(t, &laser, 0.0, rescatter, &opts) {
            Outcome::Escaped { energy, rescattered } if rescattered == rescatter => Some(energy),
            _ => None,
        })
        .fold(0.0, f64::max);
    best / laser.ponderomotive_energy()
}

#[test]
fn direct_cutoff_is_two_up() {
    let c = cutoff(false);
    assert!((c / 2.0 - 1.0).abs() < 0.01, "{c}");
}

#[test]
fn backscatter_cutoff_is_ten_up() {
    let c = cutoff(true);
    assert!((c / 10.007 - 1.0).abs() < 0.01, "{c}");
}

fn kink_energies(intensities: &[f64]) -> Vec<f64> {
    let tip = TipSurface { field_override: Some(0.8), barrier_override: Some(4.0), ..TipSurface::default() };
    let cfg = EnsembleConfig { births: 3000, rescatter_probability: 0.01, ..EnsembleConfig::default() };
    intensities
        .iter()
        .map(|&i| {
            let laser = LaserDrive { peak_intensity: i, ..LaserDrive::default() };
            let res = classical_spectrum(&cfg, &laser, &tip).unwrap();
            find_kink(&res.spectrum, 1e-6).unwrap().energy
        })
        .collect()
}

#[test]
fn kink_moves_up_with_intensity() {
    let e = kink_energies(&[5e12, 1e13, 2e13]);
    assert!(e.windows(2).all(|w| w[1] > w[0]), "{e:?}");
}
