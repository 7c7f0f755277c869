//! Driven two-level emitter with weakly coupled sensor modes.
//!
//! Everything is written in the frame rotating at the laser frequency, so the
//! Hamiltonian is time independent and every frequency below is an offset
//! from ω_L. The emitter decay rate γ_σ is the unit of all rates and
//! frequencies.
//!
//! Sensors are bosonic modes of linewidth Γ coupled with strength ε. Their
//! normally ordered moments, in the limit ε → 0, are the moments of the
//! emitted light after a Lorentzian filter of width Γ.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, residual, steady_state, CollapseTerm, DensityMatrix, LindbladModel};
use crate::opalg::{annihilation, embed, sigma_minus, trace_of_product, HilbertSpace, OperatorMatrix};

/// Relative ε-stability required before a moment table counts as converged.
pub const EPSILON_TOLERANCE: f64 = 1e-3;

/// Largest acceptable steady-state residual ‖L(ρ)‖∞.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Populations below this are treated as "no light".
pub const MIN_POPULATION: f64 = 1e-30;

/// Relative tolerance on conjugate symmetry of a moment table.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Coherent drive of the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Drive amplitude Ω.
    pub omega: f64,
    /// Emitter–laser detuning ω_σ − ω_L.
    pub delta_sigma: f64,
    /// Optional incoherent pump rate P.
    pub pump: f64,
}

impl DriveConfig {
    /// Resonant coherent drive.
    pub fn resonant(omega: f64) -> Self {
        Self { omega, delta_sigma: 0.0, pump: 0.0 }
    }

    /// Undriven emitter under incoherent pumping only.
    pub fn incoherent(pump: f64) -> Self {
        Self { omega: 0.0, delta_sigma: 0.0, pump }
    }

    /// Emitter decay rate; fixed to one because it is the unit.
    pub fn gamma_sigma(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidConfig(format!("drive amplitude must be finite and ≥ 0, got {}", self.omega)));
        }
        if !self.delta_sigma.is_finite() {
            return Err(Error::InvalidConfig("detuning must be finite".into()));
        }
        if !(self.pump >= 0.0 && self.pump.is_finite()) {
            return Err(Error::InvalidConfig(format!("pump rate must be finite and ≥ 0, got {}", self.pump)));
        }
        Ok(())
    }
}

/// Filter frequencies, linewidth, coupling and Fock truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub omega1: f64,
    pub omega2: f64,
    /// Filter linewidth Γ.
    pub gamma: f64,
    /// Sensor coupling ε.
    pub epsilon: f64,
    /// Highest Fock level kept per sensor.
    pub n_max: usize,
}

impl SensorConfig {
    /// Sensors at `omega1`, `omega2` with the default coupling.
    pub fn new(omega1: f64, omega2: f64, gamma: f64) -> Self {
        Self { omega1, omega2, gamma, epsilon: default_epsilon(gamma), n_max: 2 }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Same configuration with the two sensors exchanged.
    pub fn swapped(&self) -> Self {
        Self { omega1: self.omega2, omega2: self.omega1, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("filter linewidth must be positive, got {}", self.gamma)));
        }
        if !(self.omega1.is_finite() && self.omega2.is_finite()) {
            return Err(Error::InvalidConfig("sensor frequencies must be finite".into()));
        }
        let cap = 0.1 * self.gamma.min(1.0);
        if !(self.epsilon > 0.0 && self.epsilon <= cap * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "sensor coupling must lie in (0, {cap}] for Γ = {}, got {}",
                self.gamma, self.epsilon
            )));
        }
        if self.n_max < 2 {
            return Err(Error::InvalidConfig(format!("sensor truncation n_max must be ≥ 2, got {}", self.n_max)));
        }
        Ok(())
    }
}

/// Default sensor coupling `10⁻²·min(Γ, γ_σ)`.
pub fn default_epsilon(gamma: f64) -> f64 {
    1e-2 * gamma.min(1.0)
}

/// Position of the Mollow sidebands, `Re √((2Ω)² − (γ_σ/4)²)`.
pub fn mollow_splitting(omega: f64) -> f64 {
    let radicand = (2.0 * omega).powi(2) - 0.25f64.powi(2);
    if radicand > 0.0 {
        radicand.sqrt()
    } else {
        0.0
    }
}

/// Emitter plus `num_sensors` sensors, all operators embedded in the
/// composite space `[2, n_max+1, …]`.
#[derive(Debug, Clone)]
pub struct SensorSystem {
    pub model: LindbladModel,
    pub sigma: OperatorMatrix,
    pub sensors: Vec<OperatorMatrix>,
}

/// Rotating-frame model `δ_σσ†σ + Ω(σ†+σ) + Σ δ_i a_i†a_i + ε(a_i†σ + a_iσ†)`
/// with decay channels `emitter`, `sensor_i` and, when `P > 0`, `pump`.
pub fn build_sensor_model(drive: &DriveConfig, sensors: &SensorConfig, num_sensors: usize) -> Result<LindbladModel> {
    Ok(build_sensor_system(drive, sensors, num_sensors)?.model)
}

pub fn build_sensor_system(drive: &DriveConfig, sensors: &SensorConfig, num_sensors: usize) -> Result<SensorSystem> {
    drive.validate()?;
    sensors.validate()?;
    if !(1..=2).contains(&num_sensors) {
        return Err(Error::InvalidConfig(format!("1 or 2 sensors supported, got {num_sensors}")));
    }
    let levels = sensors.n_max + 1;
    let mut dims = vec![2];
    dims.extend(std::iter::repeat_n(levels, num_sensors));
    let space = HilbertSpace::new(dims)?;

    let sigma = embed(&sigma_minus(), 0, &space)?;
    let sigma_dag = sigma.dagger();
    let a = annihilation(levels)?;
    let ops: Vec<OperatorMatrix> = (0..num_sensors).map(|k| embed(&a, k + 1, &space)).collect::<Result<_>>()?;
    let detunings = [sensors.omega1, sensors.omega2];

    let c = |x: f64| Complex64::new(x, 0.0);
    let mut h = sigma_dag.matmul(&sigma)?.scale(c(drive.delta_sigma));
    h = h.add(&sigma_dag.add(&sigma)?.scale(c(drive.omega)))?;
    let mut collapse = vec![CollapseTerm::new(sigma.clone(), drive.gamma_sigma(), "emitter")];
    for (k, op) in ops.iter().enumerate() {
        let op_dag = op.dagger();
        h = h.add(&op_dag.matmul(op)?.scale(c(detunings[k])))?;
        let coupling = op_dag.matmul(&sigma)?.add(&op.matmul(&sigma_dag)?)?;
        h = h.add(&coupling.scale(c(sensors.epsilon)))?;
        collapse.push(CollapseTerm::new(op.clone(), sensors.gamma, format!("sensor_{}", k + 1)));
    }
    if drive.pump > 0.0 {
        collapse.push(CollapseTerm::new(sigma_dag, drive.pump, "pump"));
    }
    Ok(SensorSystem { model: LindbladModel::new(h, collapse)?, sigma, sensors: ops })
}

/// The bare emitter, without sensors: `δ_σσ†σ + Ω(σ†+σ)` with the same
/// `emitter` and `pump` channels as [`build_sensor_model`].
pub fn emitter_model(drive: &DriveConfig) -> Result<LindbladModel> {
    drive.validate()?;
    let sigma = sigma_minus();
    let sigma_dag = sigma.dagger();
    let c = |x: f64| Complex64::new(x, 0.0);
    let h = sigma_dag.matmul(&sigma)?.scale(c(drive.delta_sigma)).add(&sigma_dag.add(&sigma)?.scale(c(drive.omega)))?;
    let mut collapse = vec![CollapseTerm::new(sigma, drive.gamma_sigma(), "emitter")];
    if drive.pump > 0.0 {
        collapse.push(CollapseTerm::new(sigma_dag, drive.pump, "pump"));
    }
    LindbladModel::new(h, collapse)
}

/// Index of a creation (or annihilation) pattern `(p, q)` with `p + q = 2`.
fn pattern_index(p: u32, q: u32) -> Option<usize> {
    match (p, q) {
        (2, 0) => Some(0),
        (1, 1) => Some(1),
        (0, 2) => Some(2),
        _ => None,
    }
}

const PATTERNS: [(u32, u32); 3] = [(2, 0), (1, 1), (0, 2)];

/// Normally ordered sensor moments up to fourth order.
///
/// `g4[i][j]` holds `⟨a₁†ᵖa₂†ᑫa₁ʳa₂ˢ⟩` with `(p,q)` the `i`-th and `(r,s)` the
/// `j`-th entry of `[(2,0), (1,1), (0,2)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub n1: f64,
    pub n2: f64,
    pub g4: [[Complex64; 3]; 3],
    pub epsilon_used: f64,
    pub converged: bool,
    /// Largest relative change of g⁽²⁾₁₁, g⁽²⁾₁₂, g⁽²⁾₂₂ between ε and ε/2,
    /// when certification ran.
    pub epsilon_drift: Option<f64>,
}

impl MomentTable {
    /// Table from explicit values; marks itself converged.
    pub fn new(n1: f64, n2: f64, g4: [[Complex64; 3]; 3]) -> Self {
        Self { n1, n2, g4, epsilon_used: 0.0, converged: true, epsilon_drift: None }
    }

    /// `⟨a₁†ᵖa₂†ᑫa₁ʳa₂ˢ⟩` for `p+q = r+s = 2`.
    pub fn moment(&self, p: u32, q: u32, r: u32, s: u32) -> Option<Complex64> {
        Some(self.g4[pattern_index(p, q)?][pattern_index(r, s)?])
    }

    /// `⟨a₁†²a₁²⟩`.
    pub fn auto1(&self) -> f64 {
        self.g4[0][0].re
    }

    /// `⟨a₂†²a₂²⟩`.
    pub fn auto2(&self) -> f64 {
        self.g4[2][2].re
    }

    /// `⟨a₁†a₂†a₁a₂⟩`.
    pub fn cross(&self) -> f64 {
        self.g4[1][1].re
    }

    /// Table with sensors 1 and 2 relabeled.
    pub fn swapped(&self) -> Self {
        let flip = |i: usize| 2 - i;
        let mut g4 = self.g4;
        for (i, row) in g4.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.g4[flip(i)][flip(j)];
            }
        }
        Self { n1: self.n2, n2: self.n1, g4, ..self.clone() }
    }

    /// Checks nonnegative populations and diagonal moments and conjugate
    /// symmetry `m(p,q,r,s) = conj(m(r,s,p,q))`.
    pub fn validate(&self) -> Result<()> {
        if !(self.n1.is_finite() && self.n2.is_finite()) || self.n1 < 0.0 || self.n2 < 0.0 {
            return Err(Error::UnphysicalMoments(format!("populations ({}, {}) must be ≥ 0", self.n1, self.n2)));
        }
        let scale = (0..3).map(|i| self.g4[i][i].re.abs()).fold(0.0, f64::max);
        for i in 0..3 {
            let d = self.g4[i][i];
            if d.re < -1e-14 * scale.max(1e-300) || !d.re.is_finite() {
                return Err(Error::UnphysicalMoments(format!("negative diagonal moment {d} at pattern {:?}", PATTERNS[i])));
            }
            for j in 0..3 {
                let a = self.g4[i][j];
                let b = self.g4[j][i].conj();
                // Solver roundoff reaches ~1e-10 of the diagonal scale for narrow, far-detuned filters.
                if (a - b).norm() > SYMMETRY_TOLERANCE * scale.max(1e-300) {
                    return Err(Error::UnphysicalMoments(format!(
                        "conjugate symmetry broken between {:?} and {:?}",
                        PATTERNS[i], PATTERNS[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `g⁽²⁾₁₂ = ⟨a₁†a₂†a₁a₂⟩ / (n₁n₂)`.
    pub fn g2_cross(&self) -> Result<f64> {
        check_population(self.n1)?;
        check_population(self.n2)?;
        Ok(self.cross() / (self.n1 * self.n2))
    }

    pub fn g2_auto1(&self) -> Result<f64> {
        check_population(self.n1)?;
        Ok(self.auto1() / (self.n1 * self.n1))
    }

    pub fn g2_auto2(&self) -> Result<f64> {
        check_population(self.n2)?;
        Ok(self.auto2() / (self.n2 * self.n2))
    }
}

fn check_population(n: f64) -> Result<()> {
    if n < MIN_POPULATION {
        return Err(Error::UndefinedCorrelation(format!("sensor population {n:e} vanishes")));
    }
    Ok(())
}

/// How the ε → 0 limit is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Recompute at ε/2 and flag the table if normalized correlations drift
    /// by more than [`EPSILON_TOLERANCE`].
    pub certify: bool,
    /// Linearly extrapolate ε-scaled moments in ε² from ε and ε/2.
    pub richardson: bool,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { certify: true, richardson: false }
    }
}

impl MomentOptions {
    /// Single solve, no certification.
    pub fn fast() -> Self {
        Self { certify: false, richardson: false }
    }
}

fn steady_state_of(model: &LindbladModel) -> Result<(DensityMatrix, f64)> {
    let l = build_liouvillian(model);
    let rho = steady_state(&l)?;
    let res = residual(&l, &rho);
    Ok((rho, res))
}

fn expect(op: &Array2<Complex64>, rho: &DensityMatrix) -> Complex64 {
    trace_of_product(op, rho.data())
}

/// One two-sensor solve at the configured ε.
fn raw_moments(drive: &DriveConfig, sensors: &SensorConfig) -> Result<MomentTable> {
    let sys = build_sensor_system(drive, sensors, 2)?;
    let (rho, res) = steady_state_of(&sys.model)?;
    let a1 = sys.sensors[0].data();
    let a2 = sys.sensors[1].data();
    let a1d = a1.t().mapv(|z| z.conj());
    let a2d = a2.t().mapv(|z| z.conj());

    let annihilators = [a1.dot(a1), a1.dot(a2), a2.dot(a2)];
    let creators = [a1d.dot(&a1d), a1d.dot(&a2d), a2d.dot(&a2d)];
    let mut g4 = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (i, cr) in creators.iter().enumerate() {
        for (j, an) in annihilators.iter().enumerate() {
            g4[i][j] = expect(&cr.dot(an), &rho);
        }
    }
    let n1 = expect(&a1d.dot(a1), &rho).re;
    let n2 = expect(&a2d.dot(a2), &rho).re;
    Ok(MomentTable {
        n1,
        n2,
        g4,
        epsilon_used: sensors.epsilon,
        converged: res < RESIDUAL_TOLERANCE,
        epsilon_drift: None,
    })
}

fn normalized_triplet(m: &MomentTable) -> Option<[f64; 3]> {
    Some([m.g2_auto1().ok()?, m.g2_cross().ok()?, m.g2_auto2().ok()?])
}

fn relative_drift(a: &MomentTable, b: &MomentTable) -> f64 {
    match (normalized_triplet(a), normalized_triplet(b)) {
        (Some(x), Some(y)) => x
            .iter()
            .zip(y.iter())
            .map(|(u, v)| if u == v { 0.0 } else { (u - v).abs() / u.abs().max(v.abs()) })
            .fold(0.0, f64::max),
        // No light to normalize against; nothing can drift.
        _ => 0.0,
    }
}

/// Richardson step on moments rescaled by ε^order, returned at ε's scale.
fn extrapolate(coarse: &MomentTable, fine: &MomentTable) -> MomentTable {
    let ratio2 = 4.0; // (ε / (ε/2))²
    let lin = |c: f64, f: f64, order: i32| {
        let fs = f * 2f64.powi(order);
        (ratio2 * fs - c) / (ratio2 - 1.0)
    };
    let mut g4 = coarse.g4;
    for i in 0..3 {
        for j in 0..3 {
            let f = fine.g4[i][j] * 16.0;
            g4[i][j] = (f * ratio2 - coarse.g4[i][j]) / (ratio2 - 1.0);
        }
    }
    MomentTable {
        n1: lin(coarse.n1, fine.n1, 2),
        n2: lin(coarse.n2, fine.n2, 2),
        g4,
        epsilon_used: coarse.epsilon_used,
        converged: coarse.converged && fine.converged,
        epsilon_drift: None,
    }
}

/// Steady-state two-sensor moments with the ε → 0 limit handled per `opts`.
pub fn filtered_moments_with(drive: &DriveConfig, sensors: &SensorConfig, opts: MomentOptions) -> Result<MomentTable> {
    let coarse = raw_moments(drive, sensors)?;
    if !opts.certify && !opts.richardson {
        return Ok(coarse);
    }
    let fine = raw_moments(drive, &sensors.with_epsilon(sensors.epsilon / 2.0))?;
    let drift = relative_drift(&coarse, &fine);
    let mut out = if opts.richardson { extrapolate(&coarse, &fine) } else { coarse };
    out.converged = out.converged && fine.converged && drift <= EPSILON_TOLERANCE;
    out.epsilon_drift = Some(drift);
    Ok(out)
}

/// Certified two-sensor moment table.
pub fn filtered_moments(drive: &DriveConfig, sensors: &SensorConfig) -> Result<MomentTable> {
    filtered_moments_with(drive, sensors, MomentOptions::default())
}

/// Frequency-resolved cross-correlation `g⁽²⁾_Γ(ω₁, ω₂)` from one solve.
///
/// The sensors are put in ascending frequency order first, so the result is
/// exactly symmetric under `ω₁ ↔ ω₂`.
pub fn g2_cross(drive: &DriveConfig, sensors: &SensorConfig) -> Result<f64> {
    let ordered = if sensors.omega1 > sensors.omega2 { sensors.swapped() } else { *sensors };
    raw_moments(drive, &ordered)?.g2_cross()
}

/// Single-sensor populations `⟨a†a⟩` and `⟨a†²a²⟩`.
fn single_sensor(drive: &DriveConfig, omega: f64, gamma: f64, epsilon: f64) -> Result<(f64, f64)> {
    let cfg = SensorConfig::new(omega, omega, gamma).with_epsilon(epsilon);
    let sys = build_sensor_system(drive, &cfg, 1)?;
    let (rho, _) = steady_state_of(&sys.model)?;
    let a = sys.sensors[0].data();
    let ad = a.t().mapv(|z| z.conj());
    let n = expect(&ad.dot(a), &rho).re;
    let n2 = expect(&ad.dot(&ad).dot(a).dot(a), &rho).re;
    Ok((n, n2))
}

/// Frequency-resolved autocorrelation `⟨a†²a²⟩ / ⟨a†a⟩²` of a single sensor.
pub fn g2_auto(drive: &DriveConfig, omega: f64, gamma: f64, epsilon: f64) -> Result<f64> {
    let (n, n2) = single_sensor(drive, omega, gamma, epsilon)?;
    check_population(n)?;
    Ok(n2 / (n * n))
}

/// Filtered spectrum `S_Γ(ω) = ⟨a†a⟩ / ε²`. The collected signal is
/// `Γ·S_Γ(ω)`.
pub fn spectrum_point(drive: &DriveConfig, omega: f64, gamma: f64, epsilon: f64) -> Result<f64> {
    let (n, _) = single_sensor(drive, omega, gamma, epsilon)?;
    Ok(n / (epsilon * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA: f64 = 10.0;

    fn fig1() -> DriveConfig {
        DriveConfig::resonant(OMEGA)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn splitting_formula() {
        assert!((mollow_splitting(10.0) - (400.0f64 - 1.0 / 16.0).sqrt()).abs() < 1e-15);
        assert!((mollow_splitting(10.0) - 19.998).abs() < 1e-3);
        assert_eq!(mollow_splitting(0.125), 0.0);
        assert_eq!(mollow_splitting(0.0), 0.0);
        assert_eq!(mollow_splitting(0.05), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::new(0.0, 1.0, 0.0).validate().is_err());
        assert!(SensorConfig::new(0.0, 1.0, 1.0).with_epsilon(0.2).validate().is_err());
        assert!(SensorConfig::new(0.0, 1.0, 1.0).with_epsilon(0.1).validate().is_ok());
        assert!(SensorConfig::new(0.0, 1.0, 1.0).with_n_max(1).validate().is_err());
        assert!(DriveConfig::resonant(-1.0).validate().is_err());
        assert!(DriveConfig::incoherent(-0.5).validate().is_err());
        assert_eq!(SensorConfig::new(0.0, 0.0, 0.5).epsilon, 5e-3);
    }

    #[test]
    fn model_shape_and_hermiticity() {
        let model = build_sensor_model(&fig1(), &SensorConfig::new(-20.0, 20.0, 1.0), 2).unwrap();
        assert_eq!(model.dim(), 18);
        assert_eq!(model.space().dims(), &[2, 3, 3]);
        assert!(model.hamiltonian().is_hermitian(0.0));
        let labels: Vec<&str> = model.collapse_terms().iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, ["emitter", "sensor_1", "sensor_2"]);

        let pumped = build_sensor_model(&DriveConfig::incoherent(0.5), &SensorConfig::new(0.0, 0.0, 1.0), 1).unwrap();
        assert_eq!(pumped.dim(), 6);
        assert_eq!(pumped.collapse_terms().last().unwrap().label, "pump");
    }

    #[test]
    fn undriven_sensors_stay_empty() {
        let m = filtered_moments_with(&DriveConfig::resonant(0.0), &SensorConfig::new(-3.0, 3.0, 1.0), MomentOptions::fast())
            .unwrap();
        assert!(m.n1.abs() < 1e-20 && m.n2.abs() < 1e-20);
        assert!(matches!(m.g2_cross(), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn moment_table_is_physical() {
        let m = filtered_moments_with(&fig1(), &SensorConfig::new(-25.0, 25.0, 1.0), MomentOptions::fast()).unwrap();
        m.validate().unwrap();
        assert!(m.converged);
    }

    #[test]
    fn swapping_sensors_permutes_table() {
        let cfg = SensorConfig::new(-7.0, 13.0, 1.0);
        let m = filtered_moments_with(&fig1(), &cfg, MomentOptions::fast()).unwrap();
        let w = filtered_moments_with(&fig1(), &cfg.swapped(), MomentOptions::fast()).unwrap().swapped();
        assert!(rel(w.n1, m.n1) < 1e-9 && rel(w.n2, m.n2) < 1e-9);
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.g4[i][j] - m.g4[i][j]).norm() <= 1e-8 * m.g4[i][j].norm().max(m.cross()));
            }
        }
        let a = g2_cross(&fig1(), &cfg).unwrap();
        let b = g2_cross(&fig1(), &cfg.swapped()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn reported_frequency_correlations() {
        let ws = mollow_splitting(OMEGA);
        let g_ss = g2_cross(&fig1(), &SensorConfig::new(-ws, ws, 1.0)).unwrap();
        assert!((g_ss - 1.5).abs() < 0.15, "g2(-ωS, ωS) = {g_ss}");
        let g_cs = g2_cross(&fig1(), &SensorConfig::new(0.0, ws, 1.0)).unwrap();
        assert!((g_cs - 0.23).abs() < 0.03, "g2(0, ωS) = {g_cs}");
        let wt = 2.5 * OMEGA;
        let g_tt = g2_cross(&fig1(), &SensorConfig::new(-wt, wt, 1.0)).unwrap();
        assert!((g_tt - 14.0).abs() < 2.0, "g2(-ωT, ωT) = {g_tt}");
    }

    #[test]
    fn autocorrelation_regimes() {
        let ws = mollow_splitting(OMEGA);
        let eps = default_epsilon(1.0);
        let tail = g2_auto(&fig1(), 2.5 * OMEGA, 1.0, eps).unwrap();
        let side = g2_auto(&fig1(), ws, 1.0, eps).unwrap();
        let centre = g2_auto(&fig1(), 0.0, 1.0, eps).unwrap();
        assert!((tail - 1.0).abs() < 0.1, "tail {tail}");
        assert!(side < 1.0, "sideband {side}");
        assert!(centre > 1.0, "centre {centre}");
    }

    #[test]
    fn certification_and_richardson() {
        let ws = mollow_splitting(OMEGA);
        let cfg = SensorConfig::new(-ws, ws, 1.0);
        let certified = filtered_moments(&fig1(), &cfg).unwrap();
        assert!(certified.converged);
        assert!(certified.epsilon_drift.unwrap() < EPSILON_TOLERANCE);
        let rich = filtered_moments_with(&fig1(), &cfg, MomentOptions { certify: true, richardson: true }).unwrap();
        let (a, b) = (certified.g2_cross().unwrap(), rich.g2_cross().unwrap());
        assert!(rel(a, b) < EPSILON_TOLERANCE);
    }

    #[test]
    fn degenerate_sensors_match_single_sensor() {
        let ws = mollow_splitting(OMEGA);
        for w in [0.0, ws, 2.5 * OMEGA] {
            let auto = g2_auto(&fig1(), w, 1.0, default_epsilon(1.0)).unwrap();
            let pair = g2_cross(&fig1(), &SensorConfig::new(w, w, 1.0)).unwrap();
            assert!(rel(pair, auto) < 5e-3, "ω={w}: pair {pair} vs auto {auto}");
        }
    }

    #[test]
    fn spectrum_shape() {
        let eps = default_epsilon(1.0);
        let ws = mollow_splitting(OMEGA);
        let s = |w: f64| spectrum_point(&fig1(), w, 1.0, eps).unwrap();
        for w in [3.0, ws, 31.0] {
            assert!(rel(s(w), s(-w)) < 1e-6);
        }
        // Local maxima at the centre and the sidebands.
        for peak in [0.0, ws] {
            assert!(s(peak) > s(peak - 1.0) && s(peak) > s(peak + 1.0));
        }
        assert!(s(0.0) > s(ws));
        assert!(s(ws) > s(2.5 * OMEGA));
    }
}
