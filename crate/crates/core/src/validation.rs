//! End-to-end checks of the physics pipeline against reference values.
//!
//! Each check runs at the parameters of the reference configuration
//! (`Ω = 10`, `Γ = 1`, resonant drive unless stated otherwise) and reports
//! the numbers it compared.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dressed::dressed_correlators;
use crate::error::Result;
use crate::inequalities::{chsh_b_general, chsh_b_standard, csi_ratio, AngleSet, TSIRELSON_BOUND};
use crate::montecarlo::{
    filter_detection_model, g2_estimate_with, run_trajectories, CoincidenceWindow, TrajectoryOptions, DEFAULT_BIN_WIDTH,
};
use crate::scan::{cut, landscape, Line, OmegaAxis, Quantity, ScanOptions};
use crate::sensors::{
    default_epsilon, filtered_moments, filtered_moments_with, g2_auto, g2_cross, mollow_splitting, DriveConfig,
    MomentOptions, SensorConfig, EPSILON_TOLERANCE,
};

/// Drive amplitude of the reference configuration.
pub const REFERENCE_OMEGA: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2}. {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: u32, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult { id, name: name.into(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn reference() -> DriveConfig {
    DriveConfig::resonant(REFERENCE_OMEGA)
}

fn sideband() -> f64 {
    mollow_splitting(REFERENCE_OMEGA)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

pub fn sideband_cross_correlation() -> CheckResult {
    timed(1, "sideband cross-correlation", || {
        let ws = sideband();
        let g = g2_cross(&reference(), &SensorConfig::new(-ws, ws, 1.0))?;
        Ok((within(g, 1.5, 0.15), format!("g2(-ωS, ωS) = {g:.4}, expected 1.5 ± 0.15")))
    })
}

pub fn center_sideband_anticorrelation() -> CheckResult {
    timed(2, "center-sideband anticorrelation", || {
        let g = g2_cross(&reference(), &SensorConfig::new(0.0, sideband(), 1.0))?;
        Ok((within(g, 0.23, 0.03), format!("g2(0, ωS) = {g:.4}, expected 0.23 ± 0.03")))
    })
}

pub fn tail_correlation() -> CheckResult {
    timed(3, "tail correlation", || {
        let wt = 2.5 * REFERENCE_OMEGA;
        let g = g2_cross(&reference(), &SensorConfig::new(-wt, wt, 1.0))?;
        Ok((within(g, 14.0, 2.0), format!("g2(-ωT, ωT) = {g:.3} at ωT = 2.5Ω, expected 14 ± 2")))
    })
}

pub fn monotonic_tail_growth() -> CheckResult {
    timed(4, "monotonic tail growth", || {
        let values: Vec<f64> = (0..5)
            .map(|k| {
                let w = REFERENCE_OMEGA * (2.2 + 0.2 * k as f64);
                g2_cross(&reference(), &SensorConfig::new(-w, w, 1.0))
            })
            .collect::<Result<_>>()?;
        let increasing = values.windows(2).all(|p| p[1] > p[0]);
        Ok((increasing, format!("g2(-ω, ω) for ω/Ω = 2.2..3.0: {}", fmt_list(&values))))
    })
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Relative excess below which `R` counts as equal to one; the diagonal
/// `ω₁ = ω₂` gives `R = 1` identically up to rounding.
pub const CSI_EQUALITY_TOLERANCE: f64 = 1e-9;

pub fn antidiagonal_structure(points: usize) -> CheckResult {
    timed(5, "antidiagonal structure", || {
        let ws = sideband();
        let axis = OmegaAxis::new(-3.0 * ws, 3.0 * ws, points)?;
        let grid = landscape(&reference(), Quantity::Csi, &axis, 1.0, &ScanOptions::default())?;
        let (mut violating, mut on_lines) = (0usize, 0usize);
        for i in 0..points {
            for j in 0..points {
                if let Some(r) = grid.get(i, j) {
                    if r > 1.0 + CSI_EQUALITY_TOLERANCE {
                        violating += 1;
                        let s = axis.value(i) + axis.value(j);
                        let d = [0.0, ws, -ws].iter().map(|k| (s - k).abs()).fold(f64::INFINITY, f64::min);
                        if d < 3.0 * grid.gamma {
                            on_lines += 1;
                        }
                    }
                }
            }
        }
        let fraction = on_lines as f64 / violating.max(1) as f64;
        // Nearest grid points to (ωS, −ωS) and (1.5ωS, −1.5ωS).
        let index = |w: f64| ((w - axis.min) / (axis.max - axis.min) * (points - 1) as f64).round() as usize;
        let r_at = |w: f64| grid.get(index(w), index(-w));
        let (r_s, r_out) = (r_at(ws), r_at(1.5 * ws));
        let pierced = matches!((r_s, r_out), (Some(a), Some(b)) if a < b);
        Ok((
            violating > 0 && fraction >= 0.9 && pierced,
            format!(
                "{points}x{points} grid: {on_lines}/{violating} violating cells on antidiagonals ({:.1}%), \
                 R(ωS,-ωS) = {} < R(1.5ωS,-1.5ωS) = {}, {} missing",
                100.0 * fraction,
                r_s.map_or("n/a".into(), |v| format!("{v:.3}")),
                r_out.map_or("n/a".into(), |v| format!("{v:.3}")),
                grid.missing()
            ),
        ))
    })
}

pub fn bell_along_line_one() -> CheckResult {
    timed(6, "Bell violation approaching Tsirelson", || {
        let ws = sideband();
        let c = cut(&reference(), Quantity::Bell, Line::I, (0.0, 3.0 * ws), 61, 1.0, &ScanOptions::default())?;
        let defined: Vec<(f64, f64)> = c.samples.iter().filter_map(|&(w, b)| b.map(|b| (w, b))).collect();
        let tail_violation = defined.iter().any(|&(w, b)| w.abs() > 2.0 * ws && b > 2.0);
        let (w_max, b_max) = defined.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, p| if p.1 > a.1 { p } else { a });
        let bounded = defined.iter().all(|&(_, b)| b <= TSIRELSON_BOUND + 1e-6);
        Ok((
            tail_violation && b_max > 2.5 && bounded,
            format!("max B = {b_max:.4} at ω = {:.2}ωS (2√2 = {TSIRELSON_BOUND:.4}), tail violation: {tail_violation}", w_max / ws),
        ))
    })
}

pub fn narrow_filter_violation() -> CheckResult {
    timed(7, "narrow-filter violation", || {
        let ws = sideband();
        let m = filtered_moments(&reference(), &SensorConfig::new(ws, -ws, 0.1))?;
        let r = csi_ratio(&m)?.value;
        let b = chsh_b_standard(&m)?.value;
        Ok((r > 1.0 && b > 2.0, format!("Γ = 0.1 at (ωS, -ωS): R = {r:.4} (need > 1), B = {b:.4} (need > 2)")))
    })
}

pub fn undressed_null_result(points: usize) -> CheckResult {
    timed(8, "undressed-emitter null result", || {
        let axis = OmegaAxis::new(-10.0, 10.0, points)?;
        let (mut r_max, mut b_max, mut cells, mut undefined) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0, 0);
        for pump in [0.1, 1.0] {
            let drive = DriveConfig::incoherent(pump);
            for gamma in [0.1, 1.0, 10.0] {
                for i in 0..points {
                    for j in i..points {
                        let cfg = SensorConfig::new(axis.value(i), axis.value(j), gamma);
                        let m = filtered_moments_with(&drive, &cfg, MomentOptions { certify: false, richardson: true })?;
                        cells += 1;
                        match (csi_ratio(&m), chsh_b_standard(&m)) {
                            (Ok(r), Ok(b)) => {
                                r_max = r_max.max(r.value);
                                b_max = b_max.max(b.value);
                            }
                            _ => undefined += 1,
                        }
                    }
                }
            }
        }
        Ok((
            r_max <= 1.0 + 1e-6 && b_max <= 2.0 + 1e-6 && undefined == 0,
            format!("{cells} cells (with swap symmetry): max R = {r_max:.9}, max B = {b_max:.6}, {undefined} undefined"),
        ))
    })
}

/// Monte Carlo effort for the coincidence-counting check.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloBudget {
    pub trajectories: usize,
    /// Total recorded time for the sideband-sideband pair.
    pub sideband_time: f64,
    /// Total recorded time for the center-sideband pair.
    pub center_time: f64,
}

impl MonteCarloBudget {
    pub fn full() -> Self {
        Self { trajectories: 64, sideband_time: 6e6, center_time: 1.2e7 }
    }
}

pub fn monte_carlo_oracle(budget: MonteCarloBudget) -> CheckResult {
    timed(9, "Monte Carlo oracle equivalence", || {
        let ws = sideband();
        let mut ok = true;
        let mut parts = Vec::new();
        for (k, (w1, w2, total)) in [(-ws, ws, budget.sideband_time), (0.0, ws, budget.center_time)].into_iter().enumerate() {
            let exact = g2_cross(&reference(), &SensorConfig::new(w1, w2, 1.0))?;
            let det = filter_detection_model(&reference(), w1, w2, 1.0, 2)?;
            let opts = TrajectoryOptions {
                burn_in: 5.0,
                record: Some(vec!["filter_1".into(), "filter_2".into()]),
                refinements: 11,
                ..Default::default()
            };
            let seeds: Vec<u64> = (0..budget.trajectories as u64).map(|s| 1000 * (k as u64 + 1) + s).collect();
            let runs = run_trajectories(&det.model, total / budget.trajectories as f64, 0.2, &seeds, &opts)?;
            let streams: Vec<_> = runs.into_iter().map(|r| r.stream).collect();
            let est = g2_estimate_with(&streams, "filter_1", "filter_2", DEFAULT_BIN_WIDTH, CoincidenceWindow::Centered)?;
            let agree = (est.value - exact).abs() < 3.0 * est.std_error;
            let enough = est.clicks_a >= 10_000 && est.clicks_b >= 10_000;
            ok &= agree && enough;
            parts.push(format!(
                "({:.2}ωS, {:.2}ωS): MC {:.3} ± {:.3} vs {:.4} ({} pairs, {}/{} clicks)",
                w1 / ws,
                w2 / ws,
                est.value,
                est.std_error,
                exact,
                est.n_pairs,
                est.clicks_a,
                est.clicks_b
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn internal_consistency(points: usize) -> CheckResult {
    timed(10, "internal consistency", || {
        let mut notes = Vec::new();
        let mut ok = true;

        // Closed-form against general CHSH on physical tables at random settings.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let gamma = 10f64.powf(rng.random_range(-1.0..1.0));
            let cfg = SensorConfig::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), gamma);
            let m = filtered_moments_with(&reference(), &cfg, MomentOptions::fast())?;
            let a = chsh_b_standard(&m)?.value;
            let b = chsh_b_general(&m, &AngleSet::standard())?.value;
            worst = worst.max((a - b).abs());
        }
        ok &= worst <= 1e-10;
        notes.push(format!("closed vs general B: max diff {worst:.1e}"));

        // ε against ε/2 on the three reference correlations.
        let ws = sideband();
        let wt = 2.5 * REFERENCE_OMEGA;
        let mut drift = 0.0_f64;
        for (w1, w2) in [(-ws, ws), (0.0, ws), (-wt, wt)] {
            let m = filtered_moments(&reference(), &SensorConfig::new(w1, w2, 1.0))?;
            drift = drift.max(m.epsilon_drift.unwrap_or(f64::INFINITY));
        }
        ok &= drift <= EPSILON_TOLERANCE;
        notes.push(format!("ε/2 drift {drift:.1e}"));

        // One sensor against two degenerate sensors.
        let mut mismatch = 0.0_f64;
        for w in [0.0, 0.5 * ws, ws, 1.5 * ws] {
            let single = g2_auto(&reference(), w, 1.0, default_epsilon(1.0))?;
            let m = filtered_moments_with(&reference(), &SensorConfig::new(w, w, 1.0), MomentOptions::fast())?;
            let double = m.g2_cross()?;
            mismatch = mismatch.max((single - double).abs() / single);
        }
        ok &= mismatch <= 5e-3;
        notes.push(format!("single vs degenerate auto-g2 {:.2}%", 100.0 * mismatch));

        // Swap and mirror symmetry, every cell solved.
        let axis = OmegaAxis::new(-3.0 * ws, 3.0 * ws, points)?;
        let opts = ScanOptions { use_symmetry: false, ..Default::default() };
        for q in [Quantity::G2, Quantity::Csi, Quantity::Bell] {
            let grid = landscape(&reference(), q, &axis, 1.0, &opts)?;
            let (s, m) = (grid.swap_error(), grid.mirror_error());
            ok &= s <= 1e-4 && m <= 1e-4;
            notes.push(format!("{q} {points}x{points} swap {s:.1e} mirror {m:.1e}"));
        }
        Ok((ok, notes.join(", ")))
    })
}

pub fn dressed_contrast() -> CheckResult {
    timed(11, "dressed-approximation contrast", || {
        let d = dressed_correlators(&reference())?;
        let exact = g2_auto(&reference(), sideband(), 1.0, default_epsilon(1.0))?;
        let zero = d.ordered[0][0] == 0.0 && d.ordered[2][2] == 0.0;
        Ok((
            zero && exact > 0.0,
            format!("dressed ⟨σ1†σ1†σ1σ1⟩ = {:e}, exact g2_auto(ωS) = {exact:.4}", d.ordered[0][0]),
        ))
    })
}

/// How much of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Everything at full size.
    Full,
    /// Smaller grids and a short Monte Carlo run.
    Quick,
}

/// Number of numbered checks.
pub const CHECK_COUNT: u32 = 11;

/// Runs check `id` (1 based); `None` for an unknown id.
pub fn run_check(id: u32, level: Level) -> Option<CheckResult> {
    let quick = level == Level::Quick;
    let budget = if quick {
        MonteCarloBudget { trajectories: 8, sideband_time: 6e5, center_time: 6e5 }
    } else {
        MonteCarloBudget::full()
    };
    Some(match id {
        1 => sideband_cross_correlation(),
        2 => center_sideband_anticorrelation(),
        3 => tail_correlation(),
        4 => monotonic_tail_growth(),
        5 => antidiagonal_structure(if quick { 61 } else { 121 }),
        6 => bell_along_line_one(),
        7 => narrow_filter_violation(),
        8 => undressed_null_result(if quick { 11 } else { 21 }),
        9 => monte_carlo_oracle(budget),
        10 => internal_consistency(if quick { 21 } else { 41 }),
        11 => dressed_contrast(),
        _ => return None,
    })
}

/// Runs every check and returns the results in order.
pub fn run_all(level: Level) -> Vec<CheckResult> {
    (1..=CHECK_COUNT).filter_map(|id| run_check(id, level)).collect()
}
