//! Rotational level structure of a Σ-state diatomic molecular ion and
//! thermal population statistics.
//!
//! Energies are returned as frequencies (E/h, Hz) throughout.

use serde::{Deserialize, Serialize};

use crate::constants::{H, KB};
use crate::error::{Error, Result};
use crate::population::{PopulationState, StateKey};

/// Default tolerance on the fraction of the partition sum a truncated
/// Boltzmann distribution is allowed to discard.
pub const TRUNCATION_TOL: f64 = 1e-9;

/// Spectroscopic constants of the molecular ion.
///
/// The centrifugal term enters as `d_sign * D * J^2 (J+1)^2`; `d_sign`
/// defaults to +1. The excited-state rotational constant `b_excited` is
/// used only for P/R branch line positions and defaults to `b` when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularConstants {
    /// Rotational constant B (Hz).
    pub b: f64,
    /// Centrifugal distortion constant D (Hz).
    pub d: f64,
    /// Sign convention of the distortion term, +1 or -1.
    pub d_sign: f64,
    /// Electronic transition wavelength (m).
    pub lambda_e: f64,
    /// Excited-state decay rate gamma (1/s).
    pub gamma: f64,
    /// Saturation intensity of the electronic transition (W/m^2).
    pub i_sat: f64,
    /// Excited-electronic-state rotational constant (Hz); `None` means
    /// equal to `b`.
    pub b_excited: Option<f64>,
}

impl MolecularConstants {
    /// The SiO+ / Yb+ default parameter set: B = 21.51 GHz, D = 33.1 kHz,
    /// X->B transition near 383 nm, 70 ns excited-state lifetime,
    /// I_sat = 45 W/m^2.
    pub fn sio_plus() -> Self {
        MolecularConstants {
            b: 21.51e9,
            d: 33.1e3,
            d_sign: 1.0,
            lambda_e: 383e-9,
            gamma: 1.0 / 70e-9,
            i_sat: 45.0,
            b_excited: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) {
            return Err(Error::invariant("molecule.B must be > 0"));
        }
        if !(self.d >= 0.0) {
            return Err(Error::invariant("molecule.D must be >= 0"));
        }
        if self.d_sign.abs() != 1.0 {
            return Err(Error::invariant("molecule.d_sign must be +1 or -1"));
        }
        if self.d / self.b >= 1e-2 {
            return Err(Error::invariant(
                "molecule.D/B must be < 1e-2 (perturbative splitting expansion)",
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invariant("molecule.gamma must be > 0"));
        }
        if !(self.i_sat > 0.0) {
            return Err(Error::invariant("molecule.I_sat must be > 0"));
        }
        if !(self.lambda_e > 0.0) {
            return Err(Error::invariant("molecule.lambda_e must be > 0"));
        }
        if let Some(bb) = self.b_excited {
            if !(bb > 0.0) {
                return Err(Error::invariant("molecule.B_excited must be > 0"));
            }
        }
        Ok(())
    }

    pub fn b_excited_or_ground(&self) -> f64 {
        self.b_excited.unwrap_or(self.b)
    }
}

/// Rotational term value `B J(J+1) + d_sign D J^2 (J+1)^2` in Hz.
pub fn rot_energy(j: u32, c: &MolecularConstants) -> f64 {
    let x = j as f64 * (j as f64 + 1.0);
    c.b * x + c.d_sign * c.d * x * x
}

/// Signed-integer front end for callers that cannot prove `J >= 0`
/// statically (CLI, bindings).
pub fn rot_energy_checked(j: i64, c: &MolecularConstants) -> Result<f64> {
    let j = u32::try_from(j).map_err(|_| Error::invariant(format!("J = {j} must be >= 0")))?;
    Ok(rot_energy(j, c))
}

/// Same term-value formula evaluated with the excited-state rotational
/// constant; used for P/R branch positions.
pub fn rot_energy_excited(j: u32, c: &MolecularConstants) -> f64 {
    let x = j as f64 * (j as f64 + 1.0);
    c.b_excited_or_ground() * x + c.d_sign * c.d * x * x
}

/// Two-photon Raman splitting E(J+2) - E(J) in Hz, computed as an energy
/// difference.
pub fn raman_splitting(j_lower: u32, c: &MolecularConstants) -> f64 {
    rot_energy(j_lower + 2, c) - rot_energy(j_lower, c)
}

/// The closed-form splitting expansion
/// `2 B (3 + 2J) (1 + (2D/B)(3 + 3J + J^2))`.
///
/// For `d_sign = +1` this is an exact algebraic identity with
/// [`raman_splitting`], not an approximation.
pub fn raman_splitting_expansion(j_lower: u32, c: &MolecularConstants) -> f64 {
    let j = j_lower as f64;
    2.0 * c.b * (3.0 + 2.0 * j) * (1.0 + (2.0 * c.d / c.b) * (3.0 + 3.0 * j + j * j))
}

/// Thermal rotational distribution over J = 0..=j_max with weights
/// `(2J+1) exp(-h E(J) / kB T)`, m-sublevels equally weighted, all motion
/// in n = 0. `T = 0` puts all mass in J = 0.
///
/// The truncation error is estimated by recomputing the partition sum with
/// `2 j_max`; if the discarded fraction exceeds `truncation_tol` the call
/// is rejected.
pub fn boltzmann_distribution(
    temperature: f64,
    j_max: u32,
    c: &MolecularConstants,
    truncation_tol: f64,
) -> Result<PopulationState> {
    if temperature < 0.0 {
        return Err(Error::invariant("temperature must be >= 0"));
    }
    if temperature == 0.0 {
        return Ok(PopulationState::point(0, 0, 0));
    }
    let weight = |j: u32| -> f64 {
        (2.0 * j as f64 + 1.0) * (-H * rot_energy(j, c) / (KB * temperature)).exp()
    };
    let z: f64 = (0..=j_max).map(weight).sum();
    let z_double: f64 = (0..=j_max * 2).map(weight).sum();
    let discarded = (z_double - z) / z_double;
    if discarded > truncation_tol {
        return Err(Error::Truncation {
            j_max,
            discarded,
            tol: truncation_tol,
        });
    }
    let mut p = PopulationState::empty();
    for j in 0..=j_max {
        let per_m = weight(j) / z / (2.0 * j as f64 + 1.0);
        for m in -(j as i32)..=(j as i32) {
            p.add_mass(StateKey::new(j, m, 0), per_m);
        }
    }
    Ok(p)
}

/// Probability with J <= j_cut, excluding the lost bucket.
pub fn cumulative_fraction(p: &PopulationState, j_cut: u32) -> f64 {
    p.fraction_where(|k| k.j <= j_cut)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sio() -> MolecularConstants {
        MolecularConstants::sio_plus()
    }

    #[test]
    fn ground_level_energy_is_zero() {
        assert_eq!(rot_energy(0, &sio()), 0.0);
    }

    #[test]
    fn j1_energy_matches_direct_evaluation() {
        // 2B + 4D with B = 21.51 GHz, D = 33.1 kHz
        let e = rot_energy(1, &sio());
        assert_eq!(e, 43_020_132_400.0);
    }

    #[test]
    fn j35_energy_matches_direct_evaluation() {
        // 1260 B + 1260^2 D = 27.1026 THz + 52.54956 GHz
        let e = rot_energy(35, &sio());
        let expected = 1260.0 * 21.51e9 + 1260.0 * 1260.0 * 33.1e3;
        assert_eq!(e, expected);
        assert!((e - 27.1026e12 - 52.54956e9).abs() < 1.0);
    }

    #[test]
    fn rigid_rotor_limit_is_exact() {
        let mut c = sio();
        c.d = 0.0;
        for j in 0..50u32 {
            let x = j as f64 * (j as f64 + 1.0);
            assert_eq!(rot_energy(j, &c), c.b * x);
        }
    }

    #[test]
    fn negative_j_rejected() {
        assert!(rot_energy_checked(-1, &sio()).is_err());
        assert!(rot_energy_checked(3, &sio()).is_ok());
    }

    #[test]
    fn splitting_examples() {
        // 6B + 36D and 14B + 364D with the SiO+ constants
        assert_eq!(raman_splitting(0, &sio()), 129_061_191_600.0);
        assert_eq!(raman_splitting(2, &sio()), 301_152_048_400.0);
        let mut c = sio();
        c.d = 0.0;
        assert_eq!(raman_splitting(0, &c), 6.0 * c.b);
    }

    #[test]
    fn splitting_difference_equals_expansion() {
        let c = sio();
        for j in 0..=100u32 {
            let a = raman_splitting(j, &c);
            let b = raman_splitting_expansion(j, &c);
            let ulp = (a.to_bits() as i64 - b.to_bits() as i64).abs();
            assert!(ulp <= 10, "J = {j}: {a} vs {b} ({ulp} ulps)");
        }
    }

    #[test]
    fn splitting_strictly_increasing() {
        let c = sio();
        for j in 0..100u32 {
            assert!(raman_splitting(j + 1, &c) > raman_splitting(j, &c));
        }
    }

    #[test]
    fn boltzmann_zero_temperature() {
        let p = boltzmann_distribution(0.0, 50, &sio(), TRUNCATION_TOL).unwrap();
        assert_eq!(cumulative_fraction(&p, 0), 1.0);
    }

    #[test]
    fn boltzmann_room_temperature_cumulative() {
        // Frozen from a direct high-precision summation of
        // (2J+1) exp(-h E(J)/kB T) over J = 0..200.
        let p = boltzmann_distribution(300.0, 200, &sio(), TRUNCATION_TOL).unwrap();
        let frac = cumulative_fraction(&p, 35);
        assert!((frac - 0.98861).abs() < 5e-4, "got {frac}");
        let total: f64 = p.total();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_modal_j() {
        // Exhaustive argmax of the summed weights at 300 K. The continuous
        // formula sqrt(kB T / (2 h B)) - 1/2 = 11.55 rounds to 12, and the
        // exhaustive argmax agrees.
        let p = boltzmann_distribution(300.0, 200, &sio(), TRUNCATION_TOL).unwrap();
        let marg = p.j_marginal();
        let (argmax, _) = marg
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(*argmax, 12);
        let formula = (KB * 300.0 / (2.0 * H * sio().b)).sqrt() - 0.5;
        assert_eq!(formula.round() as u32, 12);
    }

    #[test]
    fn boltzmann_monotone_after_mode() {
        let p = boltzmann_distribution(300.0, 200, &sio(), TRUNCATION_TOL).unwrap();
        let marg = p.j_marginal();
        let vals: Vec<f64> = (12..=200).map(|j| marg[&j]).collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn boltzmann_truncation_flagged() {
        // J_max = 5 at room temperature discards most of the partition sum.
        let err = boltzmann_distribution(300.0, 5, &sio(), 1e-6).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn cumulative_fraction_uniform() {
        let p = PopulationState::uniform_j(9);
        assert!((cumulative_fraction(&p, 4) - 0.5).abs() < 1e-12);
        let q = PopulationState::point(0, 0, 0);
        assert_eq!(cumulative_fraction(&q, 0), 1.0);
    }

    #[test]
    fn validation_catches_bad_constants() {
        let mut c = sio();
        c.b = -1.0;
        assert!(c.validate().is_err());
        let mut c = sio();
        c.d_sign = 0.5;
        assert!(c.validate().is_err());
        let mut c = sio();
        c.d = c.b; // D/B not perturbative
        assert!(c.validate().is_err());
    }
}
