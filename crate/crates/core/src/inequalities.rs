//! Cauchy–Schwarz and CHSH tests on two-mode moment tables.
//!
//! The CHSH correlator mixes the two filtered modes on beam splitters,
//!
//! ```text
//! c₁ =  cosθ a₁ + sinθ a₂      b₁ = cosφ a₁ − sinφ a₂
//! c₂ = −sinθ a₁ + cosθ a₂      b₂ = sinφ a₁ + cosφ a₂
//! ```
//!
//! and correlates the intensity differences of each pair of output ports:
//!
//! ```text
//! E(θ,φ) = ⟨:(c₁†c₁ − c₂†c₂)(b₁†b₁ − b₂†b₂):⟩ / ⟨:(c₁†c₁ + c₂†c₂)(b₁†b₁ + b₂†b₂):⟩
//! ```

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::MomentTable;

/// Classical bound of the Cauchy–Schwarz ratio.
pub const CSI_BOUND: f64 = 1.0;
/// Local-realistic bound of the CHSH parameter.
pub const BELL_BOUND: f64 = 2.0;
/// Tsirelson bound, 2√2.
pub const TSIRELSON_BOUND: f64 = 2.0 * SQRT_2;

const UNDEFINED_BELOW: f64 = 1e-30;

/// Beam-splitter angles of the two CHSH settings per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub theta: f64,
    pub theta_prime: f64,
    pub phi: f64,
    pub phi_prime: f64,
}

impl AngleSet {
    /// `θ = 0, θ′ = π/4, φ = π/8, φ′ = 3π/8`.
    pub fn standard() -> Self {
        Self { theta: 0.0, theta_prime: FRAC_PI_4, phi: FRAC_PI_8, phi_prime: 3.0 * FRAC_PI_8 }
    }
}

impl Default for AngleSet {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub value: f64,
    pub violated: bool,
    pub bound: f64,
    /// Largest value quantum mechanics allows, when finite.
    pub quantum_max: Option<f64>,
}

impl InequalityResult {
    fn csi(value: f64) -> Self {
        Self { value, violated: value > CSI_BOUND, bound: CSI_BOUND, quantum_max: None }
    }

    fn bell(value: f64) -> Self {
        Self { value, violated: value > BELL_BOUND, bound: BELL_BOUND, quantum_max: Some(TSIRELSON_BOUND) }
    }
}

/// `R = [g⁽²⁾₁₂]² / (g⁽²⁾₁₁ g⁽²⁾₂₂)`.
pub fn csi_ratio(m: &MomentTable) -> Result<InequalityResult> {
    m.validate()?;
    if m.n1 <= 0.0 || m.n2 <= 0.0 {
        return Err(Error::UndefinedCorrelation("a sensor population vanishes".into()));
    }
    if m.auto1() <= UNDEFINED_BELOW || m.auto2() <= UNDEFINED_BELOW {
        return Err(Error::UndefinedCorrelation(format!(
            "vanishing autocorrelation (⟨a₁†²a₁²⟩ = {:e}, ⟨a₂†²a₂²⟩ = {:e})",
            m.auto1(),
            m.auto2()
        )));
    }
    let g11 = m.auto1() / (m.n1 * m.n1);
    let g22 = m.auto2() / (m.n2 * m.n2);
    let g12 = m.cross() / (m.n1 * m.n2);
    Ok(InequalityResult::csi(g12 * g12 / (g11 * g22)))
}

/// Coefficients of the nine moments `g4[i][j]` in the numerator of
/// `E(θ,φ)`, obtained by expanding the beam-splitter modes once by hand.
///
/// With `D = a₁†a₁ − a₂†a₂` and `X = a₁†a₂ + a₂†a₁` the numerator is
/// `cos2θ cos2φ :DD: + sin2(θ−φ) :DX: − sin2θ sin2φ :XX:`, where
/// `:DD: = m₀₀ + m₂₂ − 2m₁₁`, `:XX: = m₀₂ + m₂₀ + 2m₁₁` and
/// `:DX: = m₀₁ + m₁₀ − m₁₂ − m₂₁`.
fn numerator_coefficients(theta: f64, phi: f64) -> [[f64; 3]; 3] {
    let dd = (2.0 * theta).cos() * (2.0 * phi).cos();
    let dx = (2.0 * (theta - phi)).sin();
    let xx = -(2.0 * theta).sin() * (2.0 * phi).sin();
    [
        [dd, dx, xx],
        [dx, -2.0 * dd + 2.0 * xx, -dx],
        [xx, -dx, dd],
    ]
}

/// `⟨:N_c N_b:⟩ = m₀₀ + m₂₂ + 2m₁₁`, independent of the angles.
fn denominator(m: &MomentTable) -> f64 {
    m.auto1() + m.auto2() + 2.0 * m.cross()
}

/// CHSH correlator `E(θ, φ)`.
pub fn chsh_e(m: &MomentTable, theta: f64, phi: f64) -> Result<f64> {
    m.validate()?;
    correlator(m, theta, phi)
}

fn correlator(m: &MomentTable, theta: f64, phi: f64) -> Result<f64> {
    let den = denominator(m);
    if den <= UNDEFINED_BELOW {
        return Err(Error::UndefinedCorrelation(format!("CHSH denominator {den:e} vanishes")));
    }
    let coeffs = numerator_coefficients(theta, phi);
    let mut num = Complex64::new(0.0, 0.0);
    for (crow, mrow) in coeffs.iter().zip(m.g4.iter()) {
        for (c, v) in crow.iter().zip(mrow.iter()) {
            num += v * *c;
        }
    }
    Ok(num.re / den)
}

/// `B = |E(θ,φ) − E(θ,φ′) + E(θ′,φ′) + E(θ′,φ)|`.
pub fn chsh_b_general(m: &MomentTable, angles: &AngleSet) -> Result<InequalityResult> {
    m.validate()?;
    let AngleSet { theta, theta_prime, phi, phi_prime } = *angles;
    let b = correlator(m, theta, phi)? - correlator(m, theta, phi_prime)?
        + correlator(m, theta_prime, phi_prime)?
        + correlator(m, theta_prime, phi)?;
    Ok(InequalityResult::bell(b.abs()))
}

fn closed_form(m: &MomentTable, keep_coherences: bool) -> Result<InequalityResult> {
    m.validate()?;
    let den = denominator(m);
    if den <= UNDEFINED_BELOW {
        return Err(Error::UndefinedCorrelation(format!("CHSH denominator {den:e} vanishes")));
    }
    let mut num = m.auto1() + m.auto2() - 4.0 * m.cross();
    if keep_coherences {
        // ⟨a₁†²a₂²⟩ + ⟨a₂†²a₁²⟩ is real; the imaginary parts cancel.
        num -= m.g4[0][2].re + m.g4[2][0].re;
    }
    Ok(InequalityResult::bell(SQRT_2 * (num / den).abs()))
}

/// Closed form of `B` at the standard angles:
/// `√2·|⟨a₁†²a₁²⟩ + ⟨a₂†²a₂²⟩ − 4⟨a₁†a₂†a₁a₂⟩ − ⟨a₁†²a₂²⟩ − ⟨a₂†²a₁²⟩| / (⟨a₁†²a₁²⟩ + ⟨a₂†²a₂²⟩ + 2⟨a₁†a₂†a₁a₂⟩)`.
pub fn chsh_b_standard(m: &MomentTable) -> Result<InequalityResult> {
    closed_form(m, true)
}

/// [`chsh_b_standard`] without the two-photon coherence terms
/// `⟨a₁†²a₂²⟩ + ⟨a₂†²a₁²⟩`. Only valid when no pairs of photons are
/// exchanged between the modes.
pub fn chsh_b_approx(m: &MomentTable) -> Result<InequalityResult> {
    closed_form(m, false)
}

#[cfg(test)]
pub(crate) mod testing {
    //! Physical moment tables computed from explicit two-mode states.

    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::opalg::{annihilation, embed, trace_of_product, HilbertSpace};
    use crate::sensors::MomentTable;

    pub const LEVELS: usize = 4;

    /// Moments of a density matrix on `[LEVELS, LEVELS]`.
    pub fn moments_of(rho: &Array2<Complex64>) -> MomentTable {
        let space = HilbertSpace::new(vec![LEVELS, LEVELS]).unwrap();
        let a = annihilation(LEVELS).unwrap();
        let a1 = embed(&a, 0, &space).unwrap().into_data();
        let a2 = embed(&a, 1, &space).unwrap().into_data();
        let d = |x: &Array2<Complex64>| x.t().mapv(|z| z.conj());
        let ann = [a1.dot(&a1), a1.dot(&a2), a2.dot(&a2)];
        let mut g4 = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g4[i][j] = trace_of_product(&d(&ann[i]).dot(&ann[j]), rho);
            }
        }
        let n1 = trace_of_product(&d(&a1).dot(&a1), rho).re;
        let n2 = trace_of_product(&d(&a2).dot(&a2), rho).re;
        MomentTable::new(n1, n2, g4)
    }

    /// `|ψ⟩⟨ψ|` for amplitudes indexed by `(n₁, n₂)`.
    pub fn pure(amplitudes: &[((usize, usize), Complex64)]) -> Array2<Complex64> {
        let d = LEVELS * LEVELS;
        let mut psi = ndarray::Array1::<Complex64>::zeros(d);
        for &((n1, n2), amp) in amplitudes {
            psi[n1 * LEVELS + n2] = amp;
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.mapv_inplace(|z| z / norm);
        Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj())
    }

    /// Random mixture of a few random pure states.
    pub fn random_state(seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = LEVELS * LEVELS;
        let mut rho = Array2::<Complex64>::zeros((d, d));
        let count = rng.random_range(1..4);
        for _ in 0..count {
            let amps: Vec<((usize, usize), Complex64)> = (0..d)
                .map(|k| ((k / LEVELS, k % LEVELS), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .collect();
            let w: f64 = rng.random_range(0.1..1.0);
            rho = rho + pure(&amps).mapv(|z| z * w);
        }
        let tr: Complex64 = rho.diag().sum();
        rho.mapv(|z| z / tr)
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn two_photon_state() -> MomentTable {
        moments_of(&pure(&[((1, 1), ONE)]))
    }

    /// Product of coherent states, truncated; amplitudes kept small so the
    /// truncation at three photons is negligible compared with tolerances.
    fn coherent_moments(alpha1: Complex64, alpha2: Complex64) -> MomentTable {
        let mut g4 = [[Complex64::new(0.0, 0.0); 3]; 3];
        let ann = [alpha1 * alpha1, alpha1 * alpha2, alpha2 * alpha2];
        for i in 0..3 {
            for j in 0..3 {
                g4[i][j] = ann[i].conj() * ann[j];
            }
        }
        MomentTable::new(alpha1.norm_sqr(), alpha2.norm_sqr(), g4)
    }

    /// Brute-force E(θ,φ): expand each beam-splitter output as a linear form
    /// in (a₁, a₂) and sum the normally ordered products monomial by monomial.
    fn brute_force_e(m: &MomentTable, theta: f64, phi: f64) -> f64 {
        let c1 = [theta.cos(), theta.sin()];
        let c2 = [-theta.sin(), theta.cos()];
        let b1 = [phi.cos(), -phi.sin()];
        let b2 = [phi.sin(), phi.cos()];
        // ⟨a_i† a_k† a_j a_l⟩ looked up by photon counts per mode.
        let moment = |i: usize, k: usize, j: usize, l: usize| {
            let p = [i, k].iter().filter(|&&x| x == 0).count() as u32;
            let r = [j, l].iter().filter(|&&x| x == 0).count() as u32;
            m.moment(p, 2 - p, r, 2 - r).unwrap()
        };
        let pair = |u: [f64; 2], v: [f64; 2]| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            acc += moment(i, k, j, l) * (u[i] * u[j] * v[k] * v[l]);
                        }
                    }
                }
            }
            acc
        };
        let num = pair(c1, b1) - pair(c1, b2) - pair(c2, b1) + pair(c2, b2);
        let den = pair(c1, b1) + pair(c1, b2) + pair(c2, b1) + pair(c2, b2);
        num.re / den.re
    }

    #[test]
    fn csi_equality_and_coherent_cases() {
        let coh = coherent_moments(Complex64::new(0.7, 0.1), Complex64::new(-0.3, 0.5));
        let r = csi_ratio(&coh).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.violated, r.value > 1.0);
        assert_eq!(r.bound, 1.0);

        // g₁₂² = g₁₁ g₂₂ with g's ≠ 1.
        let mut m = coh.clone();
        m.g4[0][0] *= 4.0;
        m.g4[2][2] *= 9.0;
        m.g4[1][1] *= 6.0;
        let r = csi_ratio(&m).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csi_undefined_without_autocorrelation() {
        let m = two_photon_state();
        assert!(matches!(csi_ratio(&m), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn csi_scale_invariance() {
        let m = moments_of(&random_state(4));
        let r = csi_ratio(&m).unwrap().value;
        let lambda: f64 = 3.7e-9;
        let mut scaled = m.clone();
        scaled.n1 *= lambda.sqrt();
        scaled.n2 *= lambda.sqrt();
        for row in scaled.g4.iter_mut() {
            for v in row.iter_mut() {
                *v *= lambda;
            }
        }
        let rs = csi_ratio(&scaled).unwrap().value;
        assert!((r - rs).abs() < 1e-12 * r);
    }

    #[test]
    fn two_photon_state_saturates_tsirelson() {
        let m = two_photon_state();
        assert!((chsh_e(&m, 0.0, 0.0).unwrap() + 1.0).abs() < 1e-14);
        for b in [
            chsh_b_general(&m, &AngleSet::standard()).unwrap(),
            chsh_b_standard(&m).unwrap(),
            chsh_b_approx(&m).unwrap(),
        ] {
            assert!((b.value - TSIRELSON_BOUND).abs() < 1e-12);
            assert!(b.violated);
            assert_eq!(b.bound, 2.0);
            assert_eq!(b.quantum_max, Some(TSIRELSON_BOUND));
        }
    }

    #[test]
    fn coherent_fields_give_root_two() {
        let m = coherent_moments(ONE, ONE);
        let b = chsh_b_general(&m, &AngleSet::standard()).unwrap();
        assert!((b.value - SQRT_2).abs() < 1e-12);
        assert!(!b.violated);
    }

    #[test]
    fn coherences_matter_when_pairs_are_exchanged() {
        // (|2,0⟩ + |0,2⟩)/√2: m₀₀ = m₂₂ = m₀₂ = m₂₀ = 1, m₁₁ = 0.
        let m = moments_of(&pure(&[((2, 0), ONE), ((0, 2), ONE)]));
        let exact = chsh_b_standard(&m).unwrap().value;
        let approx = chsh_b_approx(&m).unwrap().value;
        assert!(exact.abs() < 1e-12);
        assert!((approx - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn unphysical_tables_are_rejected() {
        let mut m = two_photon_state();
        m.g4[0][1] = Complex64::new(0.0, 0.3);
        assert!(matches!(chsh_b_standard(&m), Err(Error::UnphysicalMoments(_))));
        let mut m = two_photon_state();
        m.g4[0][0] = Complex64::new(-0.5, 0.0);
        assert!(matches!(csi_ratio(&m), Err(Error::UnphysicalMoments(_))));
        let empty = MomentTable::new(0.0, 0.0, [[Complex64::new(0.0, 0.0); 3]; 3]);
        assert!(matches!(chsh_e(&empty, 0.0, 0.0), Err(Error::UndefinedCorrelation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn correlator_matches_brute_force(seed in 0u64..10_000, theta in -PI..PI, phi in -PI..PI) {
            let m = moments_of(&random_state(seed));
            let fast = chsh_e(&m, theta, phi).unwrap();
            let slow = brute_force_e(&m, theta, phi);
            prop_assert!((fast - slow).abs() < 1e-12);
            prop_assert!(fast.abs() <= 1.0 + 1e-12);
            let shifted = chsh_e(&m, theta + PI, phi + PI).unwrap();
            prop_assert!((fast - shifted).abs() < 1e-12);
        }

        #[test]
        fn closed_form_matches_general(seed in 0u64..10_000) {
            let m = moments_of(&random_state(seed));
            let general = chsh_b_general(&m, &AngleSet::standard()).unwrap().value;
            let closed = chsh_b_standard(&m).unwrap().value;
            prop_assert!((general - closed).abs() < 1e-10);
            prop_assert!(general <= TSIRELSON_BOUND + 1e-6);
        }

        #[test]
        // E(θ,φ) = E(−φ,−θ), so swapping the roles of the two sides keeps B.
        fn relabeling_settings_keeps_b(seed in 0u64..10_000, angles in prop::array::uniform4(-PI..PI)) {
            let m = moments_of(&random_state(seed));
            let set = AngleSet { theta: angles[0], theta_prime: angles[1], phi: angles[2], phi_prime: angles[3] };
            let swapped = AngleSet { theta: -set.phi_prime, theta_prime: -set.phi, phi: -set.theta_prime, phi_prime: -set.theta };
            let a = chsh_b_general(&m, &set).unwrap().value;
            let b = chsh_b_general(&m, &swapped).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= TSIRELSON_BOUND + 1e-6);
        }
    }
}
