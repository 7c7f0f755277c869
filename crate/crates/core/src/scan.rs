//! Frequency landscapes, line cuts and filter-width scans.
//!
//! Every point is one steady-state solve of the two-sensor model. Points are
//! evaluated in parallel and written back by index, so results do not depend
//! on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{chsh_b_standard, csi_ratio};
use crate::sensors::{default_epsilon, filtered_moments_with, mollow_splitting, spectrum_point, DriveConfig, MomentOptions, SensorConfig};

/// Largest number of points per landscape axis.
pub const MAX_GRID_POINTS: usize = 512;

/// Quantity evaluated at each frequency pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// `g⁽²⁾_Γ(ω₁, ω₂)`.
    G2,
    /// Cauchy–Schwarz ratio `R`.
    Csi,
    /// CHSH parameter `B` at the standard angles.
    Bell,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::G2 => "g2",
            Quantity::Csi => "csi",
            Quantity::Bell => "bell",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g2" => Ok(Quantity::G2),
            "csi" | "csi_r" | "r" => Ok(Quantity::Csi),
            "bell" | "bell_b" | "b" => Ok(Quantity::Bell),
            other => Err(Error::InvalidConfig(format!("unknown quantity {other:?} (expected g2, csi or bell)"))),
        }
    }
}

/// Uniform grid `min, min + h, …, max` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl OmegaAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let axis = Self { min, max, count };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count > MAX_GRID_POINTS {
            return Err(Error::GridTooLarge(self.count));
        }
        if self.count == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidConfig(format!(
                "axis needs finite min ≤ max and at least one point, got [{}, {}] with {}",
                self.min, self.max, self.count
            )));
        }
        if self.count == 1 && self.min != self.max {
            return Err(Error::InvalidConfig("a single-point axis needs min = max".into()));
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            return self.min;
        }
        let t = i as f64 / (self.count - 1) as f64;
        self.min + t * (self.max - self.min)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

/// How points are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub moments: MomentOptions,
    /// Sensor coupling; `10⁻²·min(Γ, γ_σ)` when `None`.
    pub epsilon: Option<f64>,
    pub n_max: usize,
    /// Evaluate only `ω₁ ≤ ω₂` and mirror across the diagonal.
    pub use_symmetry: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { moments: MomentOptions::fast(), epsilon: None, n_max: 2, use_symmetry: true }
    }
}

impl ScanOptions {
    pub fn epsilon_for(&self, gamma: f64) -> f64 {
        self.epsilon.unwrap_or_else(|| default_epsilon(gamma))
    }
}

/// Value of one point; `value` is `None` when the quantity is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub value: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Evaluates `quantity` at `(ω₁, ω₂)`.
pub fn evaluate(drive: &DriveConfig, quantity: Quantity, omega1: f64, omega2: f64, gamma: f64, opts: &ScanOptions) -> Point {
    let cfg = SensorConfig::new(omega1, omega2, gamma).with_epsilon(opts.epsilon_for(gamma)).with_n_max(opts.n_max);
    let outcome = filtered_moments_with(drive, &cfg, opts.moments).and_then(|m| {
        let v = match quantity {
            Quantity::G2 => m.g2_cross()?,
            Quantity::Csi => csi_ratio(&m)?.value,
            Quantity::Bell => chsh_b_standard(&m)?.value,
        };
        Ok((v, m.converged))
    });
    match outcome {
        Ok((v, converged)) if v.is_finite() => Point { value: Some(v), converged, error: None },
        Ok((v, _)) => Point { value: None, converged: false, error: Some(format!("non-finite value {v}")) },
        Err(e) => Point { value: None, converged: false, error: Some(e.to_string()) },
    }
}

/// Quantity on a square frequency grid; `values[i][j]` is at `(ω_i, ω_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub quantity: Quantity,
    pub axis: OmegaAxis,
    pub gamma: f64,
    pub epsilon: f64,
    pub drive: DriveConfig,
    pub values: Vec<Vec<Option<f64>>>,
    pub converged: Vec<Vec<bool>>,
    /// `(i, j, message)` for every missing cell.
    pub failures: Vec<(usize, usize, String)>,
}

impl LandscapeGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn missing(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn unconverged(&self) -> usize {
        self.converged.iter().flatten().filter(|c| !**c).count()
    }

    /// Largest relative mismatch between `values[i][j]` and `values[j][i]`.
    pub fn swap_error(&self) -> f64 {
        let n = self.axis.count;
        max_rel((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (self.values[i][j], self.values[j][i])))
    }

    /// Largest relative mismatch under `ω → −ω` on both axes. Only
    /// meaningful on an axis symmetric about zero.
    pub fn mirror_error(&self) -> f64 {
        let n = self.axis.count;
        max_rel(
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (self.values[i][j], self.values[n - 1 - i][n - 1 - j])),
        )
    }
}

fn max_rel(pairs: impl Iterator<Item = (Option<f64>, Option<f64>)>) -> f64 {
    pairs
        .map(|p| match p {
            (Some(a), Some(b)) if a == b => 0.0,
            (Some(a), Some(b)) => (a - b).abs() / a.abs().max(b.abs()),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Landscape of `quantity` over `axis × axis`.
pub fn landscape(drive: &DriveConfig, quantity: Quantity, axis: &OmegaAxis, gamma: f64, opts: &ScanOptions) -> Result<LandscapeGrid> {
    axis.validate()?;
    drive.validate()?;
    SensorConfig::new(0.0, 0.0, gamma).with_epsilon(opts.epsilon_for(gamma)).with_n_max(opts.n_max).validate()?;
    let n = axis.count;
    let cells: Vec<(usize, usize)> = if opts.use_symmetry {
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    } else {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    };
    let points: Vec<Point> =
        cells.par_iter().map(|&(i, j)| evaluate(drive, quantity, axis.value(i), axis.value(j), gamma, opts)).collect();

    let mut values = vec![vec![None; n]; n];
    let mut converged = vec![vec![false; n]; n];
    let mut failures = Vec::new();
    for (&(i, j), p) in cells.iter().zip(points) {
        values[i][j] = p.value;
        converged[i][j] = p.converged;
        if opts.use_symmetry {
            values[j][i] = p.value;
            converged[j][i] = p.converged;
        }
        if let Some(msg) = p.error {
            failures.push((i, j, msg.clone()));
            if opts.use_symmetry && i != j {
                failures.push((j, i, msg));
            }
        }
    }
    failures.sort_by_key(|f| (f.0, f.1));
    Ok(LandscapeGrid {
        quantity,
        axis: *axis,
        gamma,
        epsilon: opts.epsilon_for(gamma),
        drive: *drive,
        values,
        converged,
        failures,
    })
}

/// Straight line `ω₂ = α·ω₁ + β` in the frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Line {
    /// `(ω, −ω)`.
    I,
    /// `(ω, ω_S − ω)`.
    II,
    Custom { alpha: f64, beta: f64 },
}

impl Line {
    /// `(α, β)` for a given drive.
    pub fn coefficients(&self, drive: &DriveConfig) -> (f64, f64) {
        match *self {
            Line::I => (-1.0, 0.0),
            Line::II => (-1.0, mollow_splitting(drive.omega)),
            Line::Custom { alpha, beta } => (alpha, beta),
        }
    }

    pub fn omega2(&self, drive: &DriveConfig, omega1: f64) -> f64 {
        let (a, b) = self.coefficients(drive);
        a * omega1 + b
    }
}

impl FromStr for Line {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(Line::I),
            "II" | "ii" | "2" => Ok(Line::II),
            other => {
                let parts: Vec<&str> = other.split(',').collect();
                if let [a, b] = parts[..] {
                    let parse = |x: &str| {
                        x.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad line coefficient {x:?}")))
                    };
                    return Ok(Line::Custom { alpha: parse(a)?, beta: parse(b)? });
                }
                Err(Error::InvalidConfig(format!("unknown line {other:?} (expected I, II or alpha,beta)")))
            }
        }
    }
}

/// Samples along a [`Line`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCut {
    pub line: Line,
    pub quantity: Quantity,
    pub gamma: f64,
    pub epsilon: f64,
    /// `(ω₁, value)`.
    pub samples: Vec<(f64, Option<f64>)>,
    pub converged: Vec<bool>,
}

impl LineCut {
    pub fn unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

/// `quantity` at `count` points `ω₁ ∈ [min, max]` along `line`.
pub fn cut(
    drive: &DriveConfig,
    quantity: Quantity,
    line: Line,
    omega_range: (f64, f64),
    count: usize,
    gamma: f64,
    opts: &ScanOptions,
) -> Result<LineCut> {
    let axis = OmegaAxis::new(omega_range.0, omega_range.1, count)?;
    drive.validate()?;
    let points: Vec<(f64, Point)> = axis
        .values()
        .into_par_iter()
        .map(|w| (w, evaluate(drive, quantity, w, line.omega2(drive, w), gamma, opts)))
        .collect();
    Ok(LineCut {
        line,
        quantity,
        gamma,
        epsilon: opts.epsilon_for(gamma),
        converged: points.iter().map(|(_, p)| p.converged).collect(),
        samples: points.into_iter().map(|(w, p)| (w, p.value)).collect(),
    })
}

/// One row of a [`gamma_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScanRow {
    /// The pair is `(ω, −ω)`.
    pub omega: f64,
    pub gamma: f64,
    pub csi: Option<f64>,
    pub bell: Option<f64>,
    /// Collected signal `Γ·S_Γ(ω)`.
    pub signal: Option<f64>,
    pub converged: bool,
}

/// `R`, `B` and `Γ·S_Γ(ω)` at every `(ω, −ω)` and every `Γ`.
pub fn gamma_scan(drive: &DriveConfig, omegas: &[f64], gammas: &[f64], opts: &ScanOptions) -> Result<Vec<GammaScanRow>> {
    drive.validate()?;
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidConfig(format!("filter linewidths must be positive, got {g}")));
    }
    if let Some(w) = omegas.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidConfig(format!("frequencies must be finite, got {w}")));
    }
    let jobs: Vec<(f64, f64)> = omegas.iter().flat_map(|&w| gammas.iter().map(move |&g| (w, g))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(w, g)| {
            let csi = evaluate(drive, Quantity::Csi, w, -w, g, opts);
            let bell = evaluate(drive, Quantity::Bell, w, -w, g, opts);
            let eps = opts.epsilon_for(g);
            let signal = spectrum_point(drive, w, g, eps).ok().map(|s| g * s);
            GammaScanRow { omega: w, gamma: g, csi: csi.value, bell: bell.value, signal, converged: csi.converged && bell.converged }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::TSIRELSON_BOUND;
    use crate::sensors::{g2_auto, g2_cross};

    fn fig1() -> DriveConfig {
        DriveConfig::resonant(10.0)
    }

    #[test]
    fn axis_and_guard() {
        let a = OmegaAxis::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(a.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(OmegaAxis::new(-1.0, 1.0, 513), Err(Error::GridTooLarge(513)));
        assert!(OmegaAxis::new(1.0, -1.0, 3).is_err());
        assert_eq!(OmegaAxis::new(2.0, 2.0, 1).unwrap().values(), vec![2.0]);
    }

    #[test]
    fn parsing() {
        assert_eq!("csi".parse::<Quantity>().unwrap(), Quantity::Csi);
        assert_eq!("Bell".parse::<Quantity>().unwrap(), Quantity::Bell);
        assert!("x".parse::<Quantity>().is_err());
        assert_eq!("II".parse::<Line>().unwrap(), Line::II);
        assert_eq!("2,-1.5".parse::<Line>().unwrap(), Line::Custom { alpha: 2.0, beta: -1.5 });
        let ws = mollow_splitting(10.0);
        assert_eq!(Line::II.omega2(&fig1(), 3.0), ws - 3.0);
        assert_eq!(Line::I.omega2(&fig1(), 3.0), -3.0);
    }

    #[test]
    fn small_landscape_symmetries_and_diagonal() {
        let axis = OmegaAxis::new(-30.0, 30.0, 7).unwrap();
        let fast = landscape(&fig1(), Quantity::G2, &axis, 1.0, &ScanOptions::default()).unwrap();
        let full = landscape(&fig1(), Quantity::G2, &axis, 1.0, &ScanOptions { use_symmetry: false, ..Default::default() })
            .unwrap();
        assert_eq!(fast.missing(), 0);
        assert_eq!(fast.swap_error(), 0.0);
        assert!(full.swap_error() < 1e-6);
        assert!(full.mirror_error() < 1e-4);
        for i in 0..7 {
            for j in 0..7 {
                let (a, b) = (fast.get(i, j).unwrap(), full.get(i, j).unwrap());
                assert!((a - b).abs() < 1e-6 * a);
            }
            let w = axis.value(i);
            let auto = g2_auto(&fig1(), w, 1.0, fast.epsilon).unwrap();
            let diag = fast.get(i, i).unwrap();
            assert!((diag - auto).abs() < 5e-3 * auto, "ω={w}: {diag} vs {auto}");
        }
        let ws = g2_cross(&fig1(), &SensorConfig::new(-30.0, 30.0, 1.0)).unwrap();
        assert_eq!(fast.get(0, 6), Some(ws));
    }

    #[test]
    fn failures_become_missing_cells() {
        // Undriven, unpumped emitter stays dark: every ratio is undefined.
        let axis = OmegaAxis::new(-1.0, 1.0, 3).unwrap();
        let grid = landscape(&DriveConfig::resonant(0.0), Quantity::Csi, &axis, 1.0, &ScanOptions::default()).unwrap();
        assert_eq!(grid.missing(), 9);
        assert_eq!(grid.failures.len(), 9);
        assert_eq!(grid.swap_error(), 0.0);
    }

    #[test]
    fn line_i_tail_violates_bell() {
        let c = cut(&fig1(), Quantity::Bell, Line::I, (45.0, 60.0), 4, 1.0, &ScanOptions::default()).unwrap();
        for (w, b) in &c.samples {
            let b = b.unwrap();
            assert!(b > 2.0 && b <= TSIRELSON_BOUND + 1e-6, "ω={w}: B={b}");
        }
    }

    #[test]
    fn gamma_scan_rows() {
        let ws = mollow_splitting(10.0);
        let rows = gamma_scan(&fig1(), &[ws, 1.25 * ws], &[0.1, 2.0], &ScanOptions::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].omega, rows[0].gamma), (ws, 0.1));
        assert_eq!((rows[3].omega, rows[3].gamma), (1.25 * ws, 2.0));
        // Narrow filters on the sidebands still violate the CSI; the BI needs
        // either wider filters or frequencies further out.
        assert!(rows[0].csi.unwrap() > 1.0);
        assert!(rows[0].bell.unwrap() < 2.0 && rows[1].bell.unwrap() > 2.0);
        assert!(rows[2].csi.unwrap() > 1.0 && rows[2].bell.unwrap() > 2.0);
        assert!(rows.iter().all(|r| r.signal.unwrap() > 0.0 && r.converged));
        assert!(gamma_scan(&fig1(), &[ws], &[0.0], &ScanOptions::default()).is_err());
    }
}
