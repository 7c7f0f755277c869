use freqcorr::lindblad::{build_liouvillian, steady_state};
use freqcorr::montecarlo::{g2_estimate_with, run_trajectories, CoincidenceWindow, TrajectoryOptions};
use freqcorr::scan::{landscape, OmegaAxis, Quantity, ScanOptions};
use freqcorr::sensors::{default_epsilon, emitter_model, mollow_splitting, spectrum_point, DriveConfig};

#[test]
fn resonance_fluorescence_population() {
    // Optical Bloch equations: ρee = 4Ω² / (1 + 8Ω²) for H = Ω(σ + σ†), γ = 1.
    for omega in [0.1, 0.5, 1.0, 10.0] {
        let model = emitter_model(&DriveConfig::resonant(omega)).unwrap();
        let rho = steady_state(&build_liouvillian(&model)).unwrap();
        let expected = 4.0 * omega * omega / (1.0 + 8.0 * omega * omega);
        assert!((rho.data()[[1, 1]].re - expected).abs() < 1e-12, "Ω = {omega}");
    }
}

#[test]
fn filtered_mollow_peak_ratio() {
    // Peaks of weight 1/2 (FWHM 1) and 1/4 (FWHM 3/2), each broadened by the
    // filter (FWHM Γ = 1): heights 0.5/2 and 0.25/2.5, ratio 2.5.
    let drive = DriveConfig::resonant(10.0);
    let ws = mollow_splitting(10.0);
    let eps = default_epsilon(1.0);
    let center = spectrum_point(&drive, 0.0, 1.0, eps).unwrap();
    let side = spectrum_point(&drive, ws, 1.0, eps).unwrap();
    let ratio = center / side;
    assert!((ratio - 2.5).abs() < 0.05 * 2.5, "ratio {ratio}");
    let between = spectrum_point(&drive, 0.5 * ws, 1.0, eps).unwrap();
    assert!(between < 0.1 * side);
}

#[test]
fn emitter_clicks_are_antibunched() {
    let model = emitter_model(&DriveConfig::resonant(1.0)).unwrap();
    let opts = TrajectoryOptions { burn_in: 5.0, ..Default::default() };
    let seeds: Vec<u64> = (0..4).collect();
    let streams: Vec<_> =
        run_trajectories(&model, 5000.0, 0.05, &seeds, &opts).unwrap().into_iter().map(|t| t.stream).collect();
    let rate = streams.iter().map(|s| s.count("emitter").unwrap()).sum::<usize>() as f64 / 20000.0;
    let expected = 4.0 / 9.0;
    assert!((rate - expected).abs() < 0.03, "rate {rate}");
    let g0 = g2_estimate_with(&streams, "emitter", "emitter", 0.05, CoincidenceWindow::Forward).unwrap();
    assert!(g0.value < 0.05, "g2(0) = {}", g0.value);
    // At τ ≈ π/Ω' the Rabi oscillation overshoots; a wide window sees Poisson-like counting.
    let wide = g2_estimate_with(&streams, "emitter", "emitter", 20.0, CoincidenceWindow::Forward).unwrap();
    assert!((wide.value - 1.0).abs() < 0.1, "g2 over 20 = {}", wide.value);
}

#[test]
fn landscape_respects_swap_symmetry_and_units() {
    let drive = DriveConfig::resonant(10.0);
    let axis = OmegaAxis::new(-30.0, 30.0, 9).unwrap();
    let opts = ScanOptions { use_symmetry: false, ..Default::default() };
    let grid = landscape(&drive, Quantity::G2, &axis, 1.0, &opts).unwrap();
    assert!(grid.swap_error() < 1e-6);
    assert_eq!(grid.missing(), 0);
    assert_eq!(grid.epsilon, default_epsilon(1.0));
}
