//! Dressed-state picture of the resonantly driven emitter.
//!
//! The drive splits the emitter into dressed states `|±⟩` and the lowering
//! operator into three transition modes,
//!
//! ```text
//! σ = σ₁ + σ₂ + σ₃,   σ₁ = c²|−⟩⟨+|,   σ₂ = cs(|+⟩⟨+| − |−⟩⟨−|),   σ₃ = −s²|+⟩⟨−|
//! ```
//!
//! oscillating at `+2Ω`, `0` and `−2Ω` respectively. Treating each mode as a
//! separate light source gives quick estimates of peak-to-peak correlations.
//! Only the resonant case is supported.

use ndarray::{array, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, steady_state};
use crate::opalg::trace_of_product;
use crate::sensors::{emitter_model, DriveConfig, MIN_POPULATION};

/// Dressed amplitudes and the change of basis from bare `(|g⟩, |e⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedBasis {
    pub c: f64,
    pub s: f64,
    /// Rows are `|+⟩ = s|g⟩ + c|e⟩` and `|−⟩ = c|g⟩ − s|e⟩` in bare components.
    pub transform: [[f64; 2]; 2],
}

impl DressedBasis {
    fn new(c: f64, s: f64) -> Self {
        Self { c, s, transform: [[s, c], [c, -s]] }
    }

    /// `σ₁, σ₂, σ₃` in the dressed basis `(|+⟩, |−⟩)`.
    pub fn modes(&self) -> [Array2<Complex64>; 3] {
        let (c, s) = (self.c, self.s);
        let z = Complex64::new(0.0, 0.0);
        let r = |x: f64| Complex64::new(x, 0.0);
        [
            array![[z, z], [r(c * c), z]],
            array![[r(c * s), z], [z, r(-c * s)]],
            array![[z, r(-s * s)], [z, z]],
        ]
    }

    /// Rotates a bare-basis operator into the dressed basis.
    pub fn to_dressed(&self, bare: &Array2<Complex64>) -> Array2<Complex64> {
        let t = Array2::from_shape_fn((2, 2), |(i, j)| Complex64::new(self.transform[i][j], 0.0));
        t.dot(bare).dot(&t.t())
    }

    /// Rotates a dressed-basis operator back to the bare basis.
    pub fn to_bare(&self, dressed: &Array2<Complex64>) -> Array2<Complex64> {
        let t = Array2::from_shape_fn((2, 2), |(i, j)| Complex64::new(self.transform[i][j], 0.0));
        t.t().dot(dressed).dot(&t)
    }
}

/// Dressed amplitudes of a resonant drive, `c = s = 1/√2`.
pub fn dressed_amplitudes(drive: &DriveConfig) -> Result<DressedBasis> {
    drive.validate()?;
    if drive.omega == 0.0 {
        return Err(Error::NoDressing);
    }
    if drive.delta_sigma != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "dressed amplitudes are only available at resonance, got δ_σ = {}",
            drive.delta_sigma
        )));
    }
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    Ok(DressedBasis::new(amp, amp))
}

/// Zero-delay correlations between the three dressed modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedCorrelators {
    pub basis: DressedBasis,
    /// Mode frequencies relative to the laser, `[2Ω, 0, −2Ω]`.
    pub frequencies: [f64; 3],
    /// `⟨σᵢ†σᵢ⟩`.
    pub populations: [f64; 3],
    /// `⟨σᵢ†σⱼ†σⱼσᵢ⟩`.
    pub ordered: [[f64; 3]; 3],
    /// `⟨σⱼ†σᵢ†σᵢσⱼ⟩`; differs from `ordered` because the modes do not commute.
    pub reversed: [[f64; 3]; 3],
    /// `ordered` normalized by the populations; `None` when a mode is dark.
    pub g2: [[Option<f64>; 3]; 3],
    /// `reversed` normalized by the populations.
    pub g2_reversed: [[Option<f64>; 3]; 3],
    pub ordering: String,
}

impl DressedCorrelators {
    /// Cauchy–Schwarz ratio between modes `i` and `j` (zero based).
    pub fn csi_ratio(&self, i: usize, j: usize) -> Result<f64> {
        let get = |a: usize, b: usize| {
            self.g2.get(a).and_then(|row| row.get(b)).copied().flatten().ok_or_else(|| {
                Error::UndefinedCorrelation(format!("dressed mode pair ({}, {}) is dark or out of range", a + 1, b + 1))
            })
        };
        let (gij, gii, gjj) = (get(i, j)?, get(i, i)?, get(j, j)?);
        if gii <= 0.0 || gjj <= 0.0 {
            return Err(Error::UndefinedCorrelation(format!(
                "dressed autocorrelation vanishes (g₍{0}{0}₎ = {gii}, g₍{1}{1}₎ = {gjj})",
                i + 1,
                j + 1
            )));
        }
        Ok(gij * gij / (gii * gjj))
    }
}

/// Dressed-mode correlators in the steady state of the bare emitter.
pub fn dressed_correlators(drive: &DriveConfig) -> Result<DressedCorrelators> {
    let basis = dressed_amplitudes(drive)?;
    let model = emitter_model(drive)?;
    let rho = steady_state(&build_liouvillian(&model))?;
    let rho_d = basis.to_dressed(rho.data());
    let modes = basis.modes();
    let dag = |x: &Array2<Complex64>| x.t().mapv(|z| z.conj());

    let populations = modes.clone().map(|m| trace_of_product(&dag(&m).dot(&m), &rho_d).re);
    let mut ordered = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let inner = modes[j].dot(&modes[i]);
            ordered[i][j] = trace_of_product(&dag(&inner).dot(&inner), &rho_d).re;
        }
    }
    let mut reversed = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            reversed[i][j] = ordered[j][i];
        }
    }
    let normalize = |table: &[[f64; 3]; 3]| {
        let mut out = [[None; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let den = populations[i] * populations[j];
                if den > MIN_POPULATION {
                    out[i][j] = Some(table[i][j] / den);
                }
            }
        }
        out
    };
    let w = 2.0 * drive.omega;
    Ok(DressedCorrelators {
        basis,
        frequencies: [w, 0.0, -w],
        populations,
        g2: normalize(&ordered),
        g2_reversed: normalize(&reversed),
        ordered,
        reversed,
        ordering: "⟨σᵢ†σⱼ†σⱼσᵢ⟩".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opalg::sigma_minus;
    use crate::sensors::{g2_cross, mollow_splitting, SensorConfig};

    fn fig1() -> DriveConfig {
        DriveConfig::resonant(10.0)
    }

    #[test]
    fn resonant_amplitudes() {
        let b = dressed_amplitudes(&fig1()).unwrap();
        assert_eq!(b.c, b.s);
        assert!((b.c - 0.5f64.sqrt()).abs() < 1e-16);
        assert!((b.c * b.c + b.s * b.s - 1.0).abs() < 1e-15);
        let s2 = &b.modes()[1];
        assert!((s2[[0, 0]].re - 0.5).abs() < 1e-15 && (s2[[1, 1]].re + 0.5).abs() < 1e-15);
    }

    #[test]
    fn modes_sum_to_sigma_and_dressed_states_diagonalize_h() {
        let b = dressed_amplitudes(&fig1()).unwrap();
        let [s1, s2, s3] = b.modes();
        let sum = b.to_bare(&(s1 + s2 + s3));
        let sigma = sigma_minus();
        for (x, y) in sum.iter().zip(sigma.data().iter()) {
            assert!((x - y).norm() < 1e-15);
        }
        let h = emitter_model(&fig1()).unwrap().hamiltonian().data().clone();
        let hd = b.to_dressed(&h);
        assert!((hd[[0, 0]].re - 10.0).abs() < 1e-13 && (hd[[1, 1]].re + 10.0).abs() < 1e-13);
        assert!(hd[[0, 1]].norm() < 1e-13);
    }

    #[test]
    fn sidebands_are_nilpotent() {
        let [s1, _, s3] = dressed_amplitudes(&fig1()).unwrap().modes();
        assert!(s1.dot(&s1).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(s3.dot(&s3).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let d = dressed_correlators(&fig1()).unwrap();
        assert_eq!(d.ordered[0][0], 0.0);
        assert_eq!(d.ordered[2][2], 0.0);
        assert_eq!(d.g2[0][0], Some(0.0));
        assert!(matches!(d.csi_ratio(0, 2), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn symmetric_sidebands_and_bunching() {
        let d = dressed_correlators(&fig1()).unwrap();
        assert!((d.populations[0] - d.populations[2]).abs() < 1e-12);
        // ρ₊₊ = ρ₋₋ = 1/2 at resonance, so g₁₃ = 1/ρ₋₋ = 2 in either order.
        let g13 = d.g2[0][2].unwrap();
        assert!((g13 - 2.0).abs() < 1e-9);
        assert!((d.g2_reversed[0][2].unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(d.reversed[0][2], d.ordered[2][0]);
    }

    #[test]
    fn peak_cross_correlation_near_exact() {
        let d = dressed_correlators(&fig1()).unwrap();
        let ws = mollow_splitting(10.0);
        let exact = g2_cross(&fig1(), &SensorConfig::new(-ws, ws, 1.0)).unwrap();
        let dressed = d.g2[0][2].unwrap();
        assert!(dressed > 1.0 && exact > 1.0);
        assert!((dressed - exact).abs() / dressed.max(exact) < 0.3, "dressed {dressed} exact {exact}");
    }

    #[test]
    fn requires_resonant_drive() {
        assert_eq!(dressed_amplitudes(&DriveConfig::resonant(0.0)), Err(Error::NoDressing));
        let detuned = DriveConfig { delta_sigma: 1.0, ..fig1() };
        assert!(matches!(dressed_correlators(&detuned), Err(Error::InvalidConfig(_))));
    }
}
