//! Frequency-comb Raman drive model: resonance arithmetic, Rabi-frequency
//! formulas, and the multi-transition matching search.
//!
//! A pair of comb beams offset by `nu_AO` drives a stimulated Raman
//! transition between levels `delta_omega` apart whenever
//! `delta_omega = M f_rep +/- nu_AO` for some integer comb index `M >= 1`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::error::{Error, Result};
use crate::molecule::MolecularConstants;

/// The one place where an ordinary frequency (Hz) becomes an angular
/// frequency (rad/s). Every `omega`-named quantity in the crate has been
/// through this conversion exactly once.
#[inline]
pub fn angular(freq_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * freq_hz
}

/// Branch of the resonance condition `delta_omega = M f_rep +/- nu_AO`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// A comb line assignment for one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombAssignment {
    /// Comb index, >= 1.
    pub m: u64,
    /// Branch of the resonance condition.
    pub sign: Sign,
    /// |delta_omega - (M f_rep +/- nu_AO)| in Hz.
    pub residual: f64,
}

/// The zero-residual offset implied by one branch for a given repetition
/// rate: `nu_AO` such that `delta_omega = M f_rep +/- nu_AO` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedOffset {
    pub m: u64,
    pub sign: Sign,
    pub nu_ao: f64,
}

/// Net two-photon angular-momentum transfer channels available to a Raman
/// beam pair in one polarization configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarizationConfig {
    allowed_q: BTreeSet<i32>,
}

impl PolarizationConfig {
    pub fn new(qs: impl IntoIterator<Item = i32>) -> Result<Self> {
        let allowed_q: BTreeSet<i32> = qs.into_iter().collect();
        if allowed_q.is_empty() {
            return Err(Error::invariant("PolarizationConfig: empty q set"));
        }
        if let Some(q) = allowed_q.iter().find(|q| q.abs() > 2) {
            return Err(Error::invariant(format!(
                "PolarizationConfig: |q| = {} > 2",
                q.abs()
            )));
        }
        Ok(PolarizationConfig { allowed_q })
    }

    pub fn single(q: i32) -> Result<Self> {
        Self::new([q])
    }

    /// All transfers q in {-2..2} allowed.
    pub fn full() -> Self {
        PolarizationConfig {
            allowed_q: (-2..=2).collect(),
        }
    }

    pub fn allowed_q(&self) -> impl Iterator<Item = i32> + '_ {
        self.allowed_q.iter().copied()
    }

    pub fn contains(&self, q: i32) -> bool {
        self.allowed_q.contains(&q)
    }
}

/// Settings of the pulsed-laser Raman drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombSettings {
    /// Repetition rate (Hz).
    pub f_rep: f64,
    /// Relative offset between the two beams (Hz), in [0, f_rep).
    pub nu_ao: f64,
    /// Pulse duration (s).
    pub tau: f64,
    /// Average intensity at the ion (W/m^2).
    pub i_avg: f64,
    /// Detuning from the excited state (rad/s).
    pub delta: f64,
    /// Polarization-configuration schedule, cycled over cooling rounds.
    pub pol_schedule: Vec<PolarizationConfig>,
    /// Direct override of the carrier Rabi frequency (rad/s). When unset
    /// the formula value `s gamma^2 / 2 Delta` is used.
    pub rabi_override: Option<f64>,
}

impl CombSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_rep > 0.0) {
            return Err(Error::invariant("comb.f_rep must be > 0"));
        }
        if !(0.0 <= self.nu_ao && self.nu_ao < self.f_rep) {
            return Err(Error::invariant("comb.nu_AO must lie in [0, f_rep)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invariant("comb.tau must be > 0"));
        }
        if !(self.i_avg >= 0.0) {
            return Err(Error::invariant("comb.I_avg must be >= 0"));
        }
        if self.delta == 0.0 {
            return Err(Error::invariant("comb.Delta must be nonzero"));
        }
        if self.pol_schedule.is_empty() {
            return Err(Error::invariant("comb.pol_schedule must be non-empty"));
        }
        if let Some(o) = self.rabi_override {
            if !(o > 0.0) {
                return Err(Error::invariant("comb.rabi_override must be > 0"));
            }
        }
        Ok(())
    }

    /// Carrier Rabi frequency actually used by the engines: the override
    /// when present, otherwise the formula value.
    pub fn carrier_rabi_effective(&self, c: &MolecularConstants) -> Result<f64> {
        match self.rabi_override {
            Some(o) => Ok(o),
            None => carrier_rabi(c, self),
        }
    }
}

/// Carrier (two-photon) Rabi frequency `Omega_0 = s gamma^2 / (2 |Delta|)`
/// with `s = I_avg / I_sat`, in rad/s.
pub fn carrier_rabi(c: &MolecularConstants, s: &CombSettings) -> Result<f64> {
    if !(c.i_sat > 0.0) {
        return Err(Error::invariant("I_sat must be > 0"));
    }
    if s.delta == 0.0 {
        return Err(Error::invariant("Delta must be nonzero"));
    }
    Ok((s.i_avg / c.i_sat) * c.gamma * c.gamma / (2.0 * s.delta.abs()))
}

/// Pulsed-drive suppression factor `x / (2 sinh(x/2))` with
/// `x = 2 pi delta_omega tau`, continued through the removable singularity
/// at x = 0 by its series.
pub fn suppression_factor(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        // 2 sinh(x/2) = x (1 + x^2/24 + x^4/1920 + ...)
        1.0 / (1.0 + x * x / 24.0 + x * x * x * x / 1920.0)
    } else {
        x / (2.0 * (x / 2.0).sinh())
    }
}

/// Time-averaged resonance Rabi frequency of the comb drive between two
/// states `delta_omega` (Hz) apart: `Omega_0 * x / (2 sinh(x/2))`.
pub fn comb_rabi(omega0: f64, delta_omega: f64, tau: f64) -> f64 {
    omega0 * suppression_factor(angular(delta_omega) * tau)
}

/// Zero-residual comb assignments of a splitting for both branches:
/// sign = +1 gives `M = floor(delta_omega / f_rep)`,
/// sign = -1 gives `M = ceil(delta_omega / f_rep)`.
pub fn resonance_offset(delta_omega: f64, f_rep: f64) -> Result<(ImpliedOffset, ImpliedOffset)> {
    if !(f_rep > 0.0) {
        return Err(Error::invariant("f_rep must be > 0"));
    }
    if !(delta_omega > f_rep) {
        return Err(Error::physics(format!(
            "delta_omega = {delta_omega} Hz must exceed f_rep = {f_rep} Hz (comb index >= 1)"
        )));
    }
    let ratio = delta_omega / f_rep;
    let m_plus = ratio.floor();
    let m_minus = ratio.ceil();
    let plus = ImpliedOffset {
        m: m_plus as u64,
        sign: Sign::Plus,
        nu_ao: delta_omega - m_plus * f_rep,
    };
    let minus = ImpliedOffset {
        m: m_minus as u64,
        sign: Sign::Minus,
        nu_ao: m_minus * f_rep - delta_omega,
    };
    Ok((plus, minus))
}

/// Best assignment of `delta_omega` on the comb defined by
/// `(f_rep, nu_ao)`: the branch and index with minimal residual, ties
/// broken toward sign = +1. `nu_ao` is reduced mod `f_rep` first, so the
/// implied spectrum is periodic in the offset frequency.
pub fn best_assignment(delta_omega: f64, f_rep: f64, nu_ao: f64) -> Result<CombAssignment> {
    if !(f_rep > 0.0) {
        return Err(Error::invariant("f_rep must be > 0"));
    }
    if !(delta_omega > f_rep) {
        return Err(Error::physics(format!(
            "delta_omega = {delta_omega} Hz must exceed f_rep = {f_rep} Hz (comb index >= 1)"
        )));
    }
    let nu = nu_ao.rem_euclid(f_rep);
    let branch = |sign: Sign| -> CombAssignment {
        let target = match sign {
            Sign::Plus => delta_omega - nu,
            Sign::Minus => delta_omega + nu,
        };
        let m = (target / f_rep).round().max(1.0);
        let line = m * f_rep + sign.as_f64() * nu;
        CombAssignment {
            m: m as u64,
            sign,
            residual: (delta_omega - line).abs(),
        }
    };
    let plus = branch(Sign::Plus);
    let minus = branch(Sign::Minus);
    Ok(if minus.residual < plus.residual { minus } else { plus })
}

/// Best assignment if it is within `tol` of resonance, else `None`.
pub fn is_resonant(
    delta_omega: f64,
    settings: &CombSettings,
    tol: f64,
) -> Result<Option<CombAssignment>> {
    if tol < 0.0 {
        return Err(Error::invariant("tolerance must be >= 0"));
    }
    let a = best_assignment(delta_omega, settings.f_rep, settings.nu_ao)?;
    Ok((a.residual <= tol).then_some(a))
}

/// One simultaneous solution of the multi-transition matching problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSolution {
    pub f_rep: f64,
    pub nu_ao: f64,
    /// One assignment per input splitting, in input order.
    pub assignments: Vec<CombAssignment>,
    /// Largest residual among the assignments (sort key).
    pub worst_residual: f64,
}

/// Grid search for `(f_rep, nu_AO)` pairs that drive every splitting at
/// once.
///
/// For each repetition rate on the grid, the candidate offsets are the
/// per-splitting zero-residual offsets from [`resonance_offset`] (both
/// branches, restricted to `nu_range`); a solution is emitted when one
/// candidate makes every splitting resonant within `tol`. The residual
/// landscape is piecewise linear with kinks at every comb-line crossing,
/// so exact candidates plus a grid are exhaustive at the chosen
/// resolution. Results are sorted by worst residual ascending (ties by
/// f_rep, then nu_AO).
pub fn match_multi(
    splittings: &[f64],
    f_rep_range: (f64, f64),
    nu_range: (f64, f64),
    tol: f64,
    step: f64,
) -> Result<Vec<MatchSolution>> {
    if splittings.is_empty() {
        return Err(Error::invariant("match_multi: empty splittings"));
    }
    if !(step > 0.0) {
        return Err(Error::invariant("match_multi: step must be > 0"));
    }
    let (f_lo, f_hi) = f_rep_range;
    if !(f_hi > f_lo) {
        return Err(Error::invariant("match_multi: degenerate f_rep range"));
    }
    let (nu_lo, nu_hi) = nu_range;
    if !(nu_hi > nu_lo) {
        return Err(Error::invariant("match_multi: degenerate nu_AO range"));
    }

    let mut out = Vec::new();
    let n_steps = ((f_hi - f_lo) / step).round() as u64;
    for i in 0..=n_steps {
        let f_rep = f_lo + i as f64 * step;
        if f_rep > f_hi * (1.0 + 1e-12) {
            break;
        }
        // Candidate offsets implied by each splitting and branch.
        let mut candidates: Vec<f64> = Vec::with_capacity(2 * splittings.len());
        for &dw in splittings {
            let (plus, minus) = resonance_offset(dw, f_rep)?;
            for off in [plus, minus] {
                if off.nu_ao >= nu_lo && off.nu_ao <= nu_hi {
                    candidates.push(off.nu_ao);
                }
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        'cand: for nu in candidates {
            let mut assignments = Vec::with_capacity(splittings.len());
            let mut worst = 0.0f64;
            for &dw in splittings {
                let a = best_assignment(dw, f_rep, nu)?;
                if a.residual > tol {
                    continue 'cand;
                }
                worst = worst.max(a.residual);
                assignments.push(a);
            }
            out.push(MatchSolution {
                f_rep,
                nu_ao: nu,
                assignments,
                worst_residual: worst,
            });
        }
    }
    out.sort_by(|a, b| {
        a.worst_residual
            .total_cmp(&b.worst_residual)
            .then(a.f_rep.total_cmp(&b.f_rep))
            .then(a.nu_ao.total_cmp(&b.nu_ao))
    });
    Ok(out)
}

/// Maximum path-length difference between the two comb arms for the pulses
/// to still overlap at the ions: `c tau`.
pub fn pulse_overlap_budget(tau: f64) -> f64 {
    C * tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule;

    fn settings(f_rep: f64, nu_ao: f64) -> CombSettings {
        CombSettings {
            f_rep,
            nu_ao,
            tau: 100e-15,
            i_avg: 1e7,
            delta: angular(20e12),
            pol_schedule: vec![PolarizationConfig::full()],
            rabi_override: None,
        }
    }

    #[test]
    fn resonance_offset_j0_line() {
        // 129.0611916 GHz on an 80 MHz comb: integer-division oracle.
        let (plus, minus) = resonance_offset(129_061_191_600.0, 80e6).unwrap();
        assert_eq!(plus.m, 1613);
        assert!((plus.nu_ao - 21_191_600.0).abs() < 1e-3);
        assert_eq!(minus.m, 1614);
        assert!((minus.nu_ao - 58_808_400.0).abs() < 1e-3);
    }

    #[test]
    fn resonance_offset_exact_harmonic() {
        let (plus, _) = resonance_offset(160e6, 80e6).unwrap();
        assert_eq!(plus.m, 2);
        assert_eq!(plus.nu_ao, 0.0);
    }

    #[test]
    fn resonance_offset_j2_line() {
        let (plus, _) = resonance_offset(301_152_048_400.0, 80e6).unwrap();
        assert_eq!(plus.m, 3764);
        assert!((plus.nu_ao - 32_048_400.0).abs() < 1e-3);
    }

    #[test]
    fn resonance_offset_rejects_small_splitting() {
        assert!(resonance_offset(50e6, 80e6).is_err());
    }

    #[test]
    fn is_resonant_finds_the_tuned_line() {
        let s = settings(80e6, 21_191_600.0);
        let a = is_resonant(129_061_191_600.0, &s, 1e3).unwrap().unwrap();
        assert_eq!(a.m, 1613);
        assert_eq!(a.sign, Sign::Plus);
        assert!(a.residual < 1e-3);
    }

    #[test]
    fn is_resonant_rejects_detuned_offset() {
        let s = settings(80e6, 22e6);
        assert!(is_resonant(129_061_191_600.0, &s, 1e3).unwrap().is_none());
        // residual is about 0.8084 MHz
        let a = best_assignment(129_061_191_600.0, 80e6, 22e6).unwrap();
        assert!((a.residual - 808_400.0).abs() < 1.0);
    }

    #[test]
    fn constructed_line_has_zero_residual() {
        let f_rep = 80e6;
        let nu = 12.345e6;
        let dw = 1000.0 * f_rep + nu;
        let a = best_assignment(dw, f_rep, nu).unwrap();
        assert_eq!(a.m, 1000);
        assert_eq!(a.sign, Sign::Plus);
        assert_eq!(a.residual, 0.0);
    }

    #[test]
    fn carrier_rabi_paper_parameters() {
        // I = 1000 W/cm^2, I_sat = 45 W/m^2, gamma = 1/70 ns,
        // Delta = 2 pi 20 THz -> 1.804e5 rad/s (28.7 kHz / 2 pi).
        let c = molecule::MolecularConstants::sio_plus();
        let s = settings(80e6, 0.0);
        let o = carrier_rabi(&c, &s).unwrap();
        assert!((o - 1.8045e5).abs() < 1e2, "got {o}");
        assert!((o / (2.0 * std::f64::consts::PI) - 28_719.0).abs() < 1.0);
    }

    #[test]
    fn carrier_rabi_scalings() {
        let c = molecule::MolecularConstants::sio_plus();
        let mut s = settings(80e6, 0.0);
        s.i_avg = 0.0;
        assert_eq!(carrier_rabi(&c, &s).unwrap(), 0.0);
        s.i_avg = 1e7;
        let o1 = carrier_rabi(&c, &s).unwrap();
        s.delta *= 2.0;
        let o2 = carrier_rabi(&c, &s).unwrap();
        assert!((o1 / o2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn suppression_factor_values() {
        // x = 10 -> 10 / (2 sinh 5)
        let expected = 10.0 / (2.0 * 5.0f64.sinh());
        assert!((suppression_factor(10.0) - expected).abs() < 1e-15);
        // 129.06 GHz at 100 fs -> x ~ 0.0811, factor ~ 0.9997
        let x = angular(129.06e9) * 100e-15;
        assert!((x - 0.0811).abs() < 1e-4);
        assert!((suppression_factor(x) - 0.99973).abs() < 1e-5);
        // continuity at the removable singularity
        assert!((suppression_factor(1e-8) - 1.0).abs() < 1e-14);
        assert_eq!(comb_rabi(123.0, 0.0, 1e-13), 123.0);
    }

    #[test]
    fn match_multi_single_splitting_contains_known_solution() {
        let sols = match_multi(
            &[129_061_191_600.0],
            (79e6, 81e6),
            (0.0, 80e6),
            1e3,
            1e6,
        )
        .unwrap();
        assert!(!sols.is_empty());
        assert!(sols.iter().any(|s| {
            (s.f_rep - 80e6).abs() < 1.0 && (s.nu_ao - 21_191_600.0).abs() < 1.0
        }));
    }

    #[test]
    fn match_multi_finds_constructed_shared_offset() {
        // Two splittings built to share nu_AO at f_rep = 80 MHz.
        let f = 80e6;
        let nu = 7.5e6;
        let dw1 = 1500.0 * f + nu;
        let dw2 = 2750.0 * f + nu;
        let sols = match_multi(&[dw1, dw2], (79.9e6, 80.1e6), (0.0, f), 1.0, 0.1e6).unwrap();
        assert!(sols
            .iter()
            .any(|s| (s.f_rep - f).abs() < 1e-6 && (s.nu_ao - nu).abs() < 1e-6));
        let best = &sols[0];
        assert_eq!(best.assignments[0].m, 1500);
        assert_eq!(best.assignments[1].m, 2750);
    }

    #[test]
    fn pulse_overlap_budget_examples() {
        assert!((pulse_overlap_budget(100e-15) - 29.9792458e-6).abs() < 1e-12);
        assert!((pulse_overlap_budget(1e-12) - 299.792458e-6).abs() < 1e-12);
    }

    #[test]
    fn settings_validation() {
        let mut s = settings(80e6, 0.0);
        s.nu_ao = 90e6;
        assert!(s.validate().is_err());
        let mut s = settings(80e6, 0.0);
        s.delta = 0.0;
        assert!(s.validate().is_err());
        assert!(settings(80e6, 21e6).validate().is_ok());
    }

    #[test]
    fn polarization_config_invariants() {
        assert!(PolarizationConfig::new([]).is_err());
        assert!(PolarizationConfig::new([3]).is_err());
        let p = PolarizationConfig::new([-2, 0, 2]).unwrap();
        assert!(p.contains(0) && !p.contains(1));
    }
}
