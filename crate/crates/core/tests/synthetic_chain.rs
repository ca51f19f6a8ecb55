use atp_core::analysis::{
    critical_intensity, cuton_barrier, detect_peaks, fit_ladder, track_and_fit_shifts, CriticalIntensity, CriticalOptions,
    PeakOptions, ShiftOptions,
};
use atp_core::synthetic::SyntheticLadderModel;
use atp_core::Spectrum;

const SCAN: [f64; 7] = [0.9e11, 1.1e11, 1.3e11, 1.5e11, 1.7e11, 2.0e11, 2.3e11];

fn peaks() -> PeakOptions {
    PeakOptions { prominence: 0.3, min_separation: 0.78, log_scale: true }
}

fn family(model: &SyntheticLadderModel) -> Vec<(f64, Spectrum)> {
    SCAN.iter().map(|&i| (i, model.spectrum(i).unwrap())).collect()
}

#[test]
fn ladder_and_cuton_at_reference_intensity() {
    let m = SyntheticLadderModel::default();
    let s = m.spectrum(m.reference_intensity).unwrap();
    let fit = fit_ladder(&detect_peaks(&s, &peaks()), m.first_order, false).unwrap();
    assert!((fit.spacing / 1.46 - 1.0).abs() < 0.01, "{}", fit.spacing);
    assert!((fit.intercept + 0.3).abs() < 0.05, "{}", fit.intercept);
    assert!((cuton_barrier(&s, 0.05).unwrap() - 4.0).abs() <= s.energy_step);
}

#[test]
fn cuton_at_fresh_tip_barrier() {
    let m = SyntheticLadderModel { cut_on: 3.3, intercept: -0.9, ..Default::default() };
    let s = m.spectrum(1e11).unwrap();
    assert!((cuton_barrier(&s, 0.05).unwrap() - 3.3).abs() <= s.energy_step);
}

#[test]
fn mean_slope_and_critical_intensity() {
    let m = SyntheticLadderModel::default();
    let scan = family(&m);
    let window = 0.78;
    let fit = track_and_fit_shifts(
        &scan,
        &ShiftOptions { peaks: peaks(), match_window: window, energy_range: Some((4.6, 14.0)), minima: false },
    )
    .unwrap();
    assert!((fit.mean_slope / -1.8e-12 - 1.0).abs() < 0.05, "{:e}", fit.mean_slope);

    let c = critical_intensity(&scan, m.first_order, &CriticalOptions { peaks: peaks(), match_window: window, s0_hint: None })
        .unwrap();
    match c.result {
        CriticalIntensity::Crossing(i) => assert!((i / 1.5e11 - 1.0).abs() < 0.05, "{i:e}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn per_feature_slopes_recovered() {
    let slopes = [-1.8e-12, -2.5e-12, -2.0e-12, -1.5e-12, -1.2e-12, -0.8e-12];
    let m = SyntheticLadderModel { order_slopes: slopes.to_vec(), ..Default::default() };
    let fit = track_and_fit_shifts(
        &family(&m),
        &ShiftOptions { peaks: peaks(), match_window: 0.78, energy_range: Some((5.0, 14.0)), minima: false },
    )
    .unwrap();
    assert!(fit.dropped.is_empty(), "{:?}", fit.dropped);
    assert_eq!(fit.features.len(), 5);
    for t in &fit.features {
        let order = (1..=8).min_by(|a, b| {
            let d = |o: u32| (m.peak_position(o, SCAN[0]) - t.seed_energy).abs();
            d(*a).total_cmp(&d(*b))
        });
        let injected = m.order_slope(order.unwrap());
        assert!((t.slope / injected - 1.0).abs() < 0.10, "{}: {:e} vs {injected:e}", t.label(), t.slope);
    }
}

#[test]
fn static_family_has_no_shift() {
    let m = SyntheticLadderModel { slope: 0.0, ..Default::default() };
    let fit = track_and_fit_shifts(
        &family(&m),
        &ShiftOptions { peaks: peaks(), match_window: 0.78, energy_range: Some((5.0, 14.0)), minima: true },
    )
    .unwrap();
    for t in &fit.features {
        assert!(t.slope.abs() <= 3.0 * t.slope_error + 1e-16, "{}: {:e} ± {:e}", t.label(), t.slope, t.slope_error);
    }
}
