//! Quantum-logic rotational cooling: alternating blue-sideband Raman pi
//! pulses (J, n=0 -> J-2, n=1) and sideband cooling of the shared motion,
//! with Zeeman sublevel bookkeeping, polarization alternation and
//! spontaneous-emission loss.
//!
//! Two engines share one stochastic map: `run_rate_equations` iterates its
//! expected values in closed form (no ODE solver, no step-size tuning),
//! `run_monte_carlo` samples trajectories from the identical kernel, so the
//! rate-equation result is the exact ensemble mean of the Monte Carlo
//! engine.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::comb::{best_assignment, comb_rabi, CombSettings, PolarizationConfig};
use crate::error::{Error, Result};
use crate::molecule::{raman_splitting, MolecularConstants};
use crate::population::{PopulationState, StateKey};
use crate::report::{CoolingReport, Event, EventKind, RunMetrics, Trajectory};
use crate::rng::stream_rng;
use crate::trapdyn::{lamb_dicke, sideband_flop_probability, TrapSettings};

/// One scheduled Raman pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Upper rotational level; the pulse drives J_upper -> J_upper - 2.
    pub j_upper: u32,
    pub pol: PolarizationConfig,
    /// Pulse duration (s).
    pub duration: f64,
}

/// Ordered pulse list, repeated for up to `max_rounds` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub pulses: Vec<PulseSpec>,
    /// Insert a sideband-cooling step after every pulse.
    pub cool_after_each: bool,
    pub max_rounds: u32,
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.pulses.is_empty() {
            return Err(Error::invariant("schedule: empty pulse list"));
        }
        for p in &self.pulses {
            if p.j_upper < 2 {
                return Err(Error::invariant("schedule: J_upper must be >= 2"));
            }
            if !(p.duration > 0.0) {
                return Err(Error::invariant("schedule: pulse duration must be > 0"));
            }
        }
        if self.max_rounds < 1 {
            return Err(Error::invariant("schedule: max_rounds must be >= 1"));
        }
        Ok(())
    }

    /// Ascending sweep J_upper = 2..=j_hi once per polarization
    /// configuration in `cycle`, with per-J durations.
    pub fn sweep(
        j_hi: u32,
        cycle: &[PolarizationConfig],
        durations: &BTreeMap<u32, f64>,
        max_rounds: u32,
    ) -> Result<Self> {
        if j_hi < 2 {
            return Err(Error::invariant("schedule sweep: j_hi must be >= 2"));
        }
        if cycle.is_empty() {
            return Err(Error::invariant("schedule sweep: empty polarization cycle"));
        }
        let mut pulses = Vec::new();
        for pol in cycle {
            for j_upper in 2..=j_hi {
                let duration = *durations.get(&j_upper).ok_or_else(|| {
                    Error::invariant(format!("schedule sweep: no duration for J_upper = {j_upper}"))
                })?;
                pulses.push(PulseSpec {
                    j_upper,
                    pol: pol.clone(),
                    duration,
                });
            }
        }
        let s = CoolingSchedule {
            pulses,
            cool_after_each: true,
            max_rounds,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn distinct_j_uppers(&self) -> BTreeSet<u32> {
        self.pulses.iter().map(|p| p.j_upper).collect()
    }
}

/// Spontaneous-scattering redistribution model. A fraction `f_vib` of every
/// scattering event leaves the v = 0 cooling manifold (the `lost` bucket);
/// the remainder redistributes to J +/- 1 with equal weight (J = 0 only
/// upward), uniform over m, phonon number unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    pub f_vib: f64,
}

impl ScatterModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f_vib) {
            return Err(Error::invariant("scatter.f_vib must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Sideband drive actually applied to one J_upper: Rabi rate and residual
/// detuning from the comb assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseDrive {
    /// Sideband Rabi frequency eta * Omega (rad/s).
    pub omega_s: f64,
    /// Resonance residual (Hz); 0 when the offset is retuned per pulse.
    pub residual_hz: f64,
}

/// Derived rates and models consumed by both engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingPhysics {
    /// Drive per scheduled J_upper.
    pub drives: BTreeMap<u32, PulseDrive>,
    /// Spontaneous-emission rate during pulses (1/s).
    pub spont_rate: f64,
    pub scatter: ScatterModel,
    /// Phonon-removal probability per cooling step.
    pub cool_efficiency: f64,
    /// Duration of one sideband-cooling step (s); `None` means equal to the
    /// preceding pulse.
    pub cool_duration: Option<f64>,
    /// Raman branching weights per q; `None` means uniform over allowed q.
    pub q_weights: Option<BTreeMap<i32, f64>>,
    /// Ground-fraction target at which the engines stop early.
    pub ground_target: f64,
    /// Maximum tolerated resonance residual (Hz).
    pub resonance_tol: f64,
}

impl CoolingPhysics {
    /// Derive drives for every J_upper in `j_uppers` from the molecular,
    /// comb and trap settings.
    ///
    /// With `retune` the offset frequency is assumed re-set to exact
    /// resonance before each pulse (residual 0); otherwise residuals follow
    /// from the fixed `(f_rep, nu_AO)` and any J_upper whose best
    /// assignment misses by more than `resonance_tol` is rejected.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        c: &MolecularConstants,
        comb: &CombSettings,
        trap: &TrapSettings,
        j_uppers: &BTreeSet<u32>,
        retune: bool,
        resonance_tol: f64,
        spont_rate_override: Option<f64>,
        scatter: ScatterModel,
        cool_duration: Option<f64>,
        q_weights: Option<BTreeMap<i32, f64>>,
        ground_target: f64,
    ) -> Result<Self> {
        c.validate()?;
        comb.validate()?;
        trap.validate()?;
        scatter.validate()?;
        let omega0 = comb.carrier_rabi_effective(c)?;
        let eta = lamb_dicke(trap);
        let mut drives = BTreeMap::new();
        for &j_upper in j_uppers {
            if j_upper < 2 {
                return Err(Error::invariant("J_upper must be >= 2"));
            }
            let dw = raman_splitting(j_upper - 2, c);
            let residual_hz = if retune {
                0.0
            } else {
                let a = best_assignment(dw, comb.f_rep, comb.nu_ao)?;
                if a.residual > resonance_tol {
                    return Err(Error::physics(format!(
                        "no resonant comb assignment for J_upper = {j_upper}: residual {} Hz > tol {} Hz",
                        a.residual, resonance_tol
                    )));
                }
                a.residual
            };
            let omega_s = eta * comb_rabi(omega0, dw, comb.tau);
            drives.insert(j_upper, PulseDrive { omega_s, residual_hz });
        }
        let spont = match spont_rate_override {
            Some(r) => r,
            None => spont_rate(c.gamma, omega0, comb.delta),
        };
        Ok(CoolingPhysics {
            drives,
            spont_rate: spont,
            scatter,
            cool_efficiency: trap.cool_efficiency,
            cool_duration,
            q_weights,
            ground_target,
            resonance_tol,
        })
    }

    fn q_weight(&self, q: i32) -> f64 {
        match &self.q_weights {
            Some(w) => w.get(&q).copied().unwrap_or(0.0),
            None => 1.0,
        }
    }
}

/// Spontaneous-emission rate estimate `R_s = 2 gamma Omega / |Delta|`.
pub fn spont_rate(gamma: f64, omega: f64, delta: f64) -> f64 {
    2.0 * gamma * omega / delta.abs()
}

/// Zeeman sublevels of `j_upper` with no allowed Raman path to any
/// sublevel of `j_upper - 2` under any configuration in `schedule`.
pub fn coupling_coverage(j_upper: u32, schedule: &[PolarizationConfig]) -> BTreeSet<i32> {
    assert!(j_upper >= 2, "coupling_coverage requires J_upper >= 2");
    let j_low = (j_upper - 2) as i32;
    let mut uncovered = BTreeSet::new();
    for m in -(j_upper as i32)..=(j_upper as i32) {
        let covered = schedule
            .iter()
            .flat_map(|p| p.allowed_q())
            .any(|q| (m + q).abs() <= j_low);
        if !covered {
            uncovered.insert(m);
        }
    }
    uncovered
}

/// Redistribute scattered mass: `f_vib` to `lost`, the rest to J +/- 1 of
/// the pre-scatter level (equal weight, J = 0 only to J = 1), uniform over
/// the new m, phonon number unchanged. Returns an unnormalized delta.
pub fn scatter_redistribute(
    scattered: &[(StateKey, f64)],
    model: &ScatterModel,
) -> PopulationState {
    let mut delta = PopulationState::empty();
    for &(key, mass) in scattered {
        debug_assert!(mass >= 0.0);
        delta.add_lost(mass * model.f_vib);
        let rest = mass * (1.0 - model.f_vib);
        if rest == 0.0 {
            continue;
        }
        let branches: &[u32] = if key.j == 0 { &[1] } else { &[key.j - 1, key.j + 1] };
        let share = rest / branches.len() as f64;
        for &jb in branches {
            let per_m = share / (2.0 * jb as f64 + 1.0);
            for m in -(jb as i32)..=(jb as i32) {
                delta.add_mass(StateKey::new(jb, m, key.n), per_m);
            }
        }
    }
    delta
}

fn sample_scatter(key: StateKey, model: &ScatterModel, rng: &mut impl Rng) -> Option<StateKey> {
    if rng.random::<f64>() < model.f_vib {
        return None;
    }
    let jb = if key.j == 0 {
        1
    } else if rng.random::<f64>() < 0.5 {
        key.j - 1
    } else {
        key.j + 1
    };
    let m = -(jb as i32) + rng.random_range(0..(2 * jb + 1)) as i32;
    Some(StateKey::new(jb, m, key.n))
}

fn allowed_qs(phys: &CoolingPhysics, pol: &PolarizationConfig, j_upper: u32, m: i32) -> Vec<i32> {
    let j_low = (j_upper - 2) as i32;
    pol.allowed_q()
        .filter(|&q| (m + q).abs() <= j_low && phys.q_weight(q) > 0.0)
        .collect()
}

/// Apply one Raman pulse to a population.
///
/// Every level holding population accrues scattering probability
/// `1 - exp(-R_s * duration)`; the surviving (J_upper, m, n=0) population
/// with an allowed q transfers to (J_upper - 2, m + q, n=1) with the
/// detuned flop probability, split over allowed q per the configured
/// weights. Without an RNG the expected values are applied; with an RNG
/// the state must be a point mass and the jump is sampled.
pub fn apply_pulse(
    p: &PopulationState,
    j_upper: u32,
    pol: &PolarizationConfig,
    duration: f64,
    physics: &CoolingPhysics,
    rng: Option<&mut ChaCha12Rng>,
) -> Result<PopulationState> {
    let drive = physics.drives.get(&j_upper).ok_or_else(|| {
        Error::physics(format!("no drive derived for J_upper = {j_upper}"))
    })?;
    if drive.residual_hz > physics.resonance_tol {
        return Err(Error::physics(format!(
            "pulse on J_upper = {j_upper} rejected: residual {} Hz > tol {} Hz",
            drive.residual_hz, physics.resonance_tol
        )));
    }
    let p_flip = sideband_flop_probability(drive.omega_s, duration, drive.residual_hz);
    let p_scatter = 1.0 - (-physics.spont_rate * duration).exp();

    match rng {
        None => {
            let mut out = PopulationState::empty();
            out.add_lost(p.lost());
            let mut scattered = Vec::new();
            for (k, &v) in p.iter() {
                let sc = v * p_scatter;
                if sc > 0.0 {
                    scattered.push((*k, sc));
                }
                let mut keep = v - sc;
                if k.j == j_upper && k.n == 0 {
                    let qs = allowed_qs(physics, pol, j_upper, k.m);
                    if !qs.is_empty() {
                        let moved = keep * p_flip;
                        keep -= moved;
                        let wsum: f64 = qs.iter().map(|&q| physics.q_weight(q)).sum();
                        for &q in &qs {
                            out.add_mass(
                                StateKey::new(j_upper - 2, k.m + q, 1),
                                moved * physics.q_weight(q) / wsum,
                            );
                        }
                    }
                }
                out.add_mass(*k, keep);
            }
            let delta = scatter_redistribute(&scattered, &physics.scatter);
            for (k, &v) in delta.iter() {
                out.add_mass(*k, v);
            }
            out.add_lost(delta.lost());
            out.prune_zeros();
            Ok(out)
        }
        Some(rng) => {
            let key = point_mass_key(p)?;
            let Some(key) = key else {
                return Ok(p.clone()); // already lost
            };
            if rng.random::<f64>() < p_scatter {
                return Ok(match sample_scatter(key, &physics.scatter, rng) {
                    Some(k2) => PopulationState::point(k2.j, k2.m, k2.n),
                    None => {
                        let mut s = PopulationState::empty();
                        s.add_lost(1.0);
                        s
                    }
                });
            }
            if key.j == j_upper && key.n == 0 {
                let qs = allowed_qs(physics, pol, j_upper, key.m);
                if !qs.is_empty() && rng.random::<f64>() < p_flip {
                    let wsum: f64 = qs.iter().map(|&q| physics.q_weight(q)).sum();
                    let mut u = rng.random::<f64>() * wsum;
                    let mut chosen = *qs.last().expect("non-empty");
                    for &q in &qs {
                        u -= physics.q_weight(q);
                        if u < 0.0 {
                            chosen = q;
                            break;
                        }
                    }
                    return Ok(PopulationState::point(j_upper - 2, key.m + chosen, 1));
                }
            }
            Ok(p.clone())
        }
    }
}

fn point_mass_key(p: &PopulationState) -> Result<Option<StateKey>> {
    if (p.lost() - 1.0).abs() < 1e-12 {
        return Ok(None);
    }
    let mut it = p.iter();
    match (it.next(), it.next()) {
        (Some((k, v)), None) if (v - 1.0).abs() < 1e-12 && p.lost() < 1e-12 => Ok(Some(*k)),
        _ => Err(Error::physics(
            "sampled mode requires a point-mass population state",
        )),
    }
}

/// Expected-value sideband cooling: n = 1 mass times `eff` moves to n = 0.
fn cool_expected(p: &PopulationState, eff: f64) -> PopulationState {
    let mut out = PopulationState::empty();
    out.add_lost(p.lost());
    for (k, &v) in p.iter() {
        if k.n == 1 {
            out.add_mass(StateKey::new(k.j, k.m, 0), v * eff);
            let rem = v * (1.0 - eff);
            if rem > 0.0 {
                out.add_mass(*k, rem);
            }
        } else {
            out.add_mass(*k, v);
        }
    }
    out
}

/// Population with J <= 1 (any m, any n), excluding `lost`.
pub fn ground_fraction(p: &PopulationState) -> f64 {
    p.fraction_where(|k| k.j <= 1)
}

fn cool_step_duration(physics: &CoolingPhysics, pulse: &PulseSpec) -> f64 {
    physics.cool_duration.unwrap_or(pulse.duration)
}

/// Deterministic rate-equation engine: iterates pulse, cooling and
/// scattering maps in expected value for `max_rounds` rounds or until the
/// ground fraction reaches the configured target.
pub fn run_rate_equations(
    p0: &PopulationState,
    schedule: &CoolingSchedule,
    physics: &CoolingPhysics,
) -> Result<CoolingReport> {
    p0.validate()?;
    schedule.validate()?;
    if p0.n1_mass() > 1e-12 {
        return Err(Error::physics("cooling must start with all motion in n = 0"));
    }
    for j in schedule.distinct_j_uppers() {
        if !physics.drives.contains_key(&j) {
            return Err(Error::physics(format!(
                "schedule references J_upper = {j} with no derived drive"
            )));
        }
    }

    let mut state = p0.clone();
    let mut t = 0.0;
    let mut trajectory = Trajectory::default();
    trajectory.push_snapshot(t, state.clone());
    let mut metrics = RunMetrics {
        target: physics.ground_target,
        ..RunMetrics::default()
    };
    let mut scatter_mass = 0.0;
    let mut pulses_to_target = None;
    let n_levels = schedule.distinct_j_uppers().len() as f64;

    'rounds: for round in 0..schedule.max_rounds {
        metrics.rounds_executed = round + 1;
        for pulse in &schedule.pulses {
            let before_j = state.fraction_where(|k| k.j == pulse.j_upper && k.n == 0);
            let before_survived = state.survived();
            state = apply_pulse(&state, pulse.j_upper, &pulse.pol, pulse.duration, physics, None)?;
            t += pulse.duration;
            metrics.pulses_executed += 1;
            let p_sc = 1.0 - (-physics.spont_rate * pulse.duration).exp();
            scatter_mass += before_survived * p_sc;
            let transferred =
                (before_j * (1.0 - p_sc) - state.fraction_where(|k| k.j == pulse.j_upper && k.n == 0)).max(0.0);
            trajectory.events.push(Event {
                time: t,
                kind: EventKind::Pulse,
                detail: format!(
                    "J_upper={} transferred={:.6e}",
                    pulse.j_upper, transferred
                ),
            });
            if p_sc > 0.0 {
                trajectory.events.push(Event {
                    time: t,
                    kind: EventKind::Scatter,
                    detail: format!("expected_mass={:.6e}", before_survived * p_sc),
                });
            }
            if schedule.cool_after_each {
                let removed = state.n1_mass() * physics.cool_efficiency;
                state = cool_expected(&state, physics.cool_efficiency);
                t += cool_step_duration(physics, pulse);
                trajectory.events.push(Event {
                    time: t,
                    kind: EventKind::Cool,
                    detail: format!("removed={removed:.6e}"),
                });
            }
            trajectory.push_snapshot(t, state.clone());
            if ground_fraction(&state) >= physics.ground_target {
                metrics.time_to_target = Some(t);
                pulses_to_target = Some(metrics.pulses_executed);
                break 'rounds;
            }
        }
    }

    metrics.scatter_events = scatter_mass;
    metrics.cycles_per_j_step = pulses_to_target.map(|p| p as f64 / n_levels);
    state.validate()?;
    trajectory.validate()?;
    Ok(CoolingReport {
        ground_fraction_final: ground_fraction(&state),
        wall_time_simulated: t,
        trajectory,
        metrics,
    })
}

/// Stochastic counterpart of [`run_rate_equations`]: `n_traj` independent
/// trajectories sampled from `p0`, each from its own RNG stream derived
/// from `(seed, index)`, reduced with integer counters so results are
/// identical under any execution order.
pub fn run_monte_carlo(
    p0: &PopulationState,
    schedule: &CoolingSchedule,
    physics: &CoolingPhysics,
    n_traj: u64,
    seed: u64,
) -> Result<CoolingReport> {
    p0.validate()?;
    schedule.validate()?;
    if n_traj < 1 {
        return Err(Error::invariant("n_traj must be >= 1"));
    }
    if p0.n1_mass() > 1e-12 {
        return Err(Error::physics("cooling must start with all motion in n = 0"));
    }
    for j in schedule.distinct_j_uppers() {
        if !physics.drives.contains_key(&j) {
            return Err(Error::physics(format!(
                "schedule references J_upper = {j} with no derived drive"
            )));
        }
    }

    // Slot times are trajectory-independent: pulse k of round r always ends
    // at the same simulated time.
    let slots_per_round = schedule.pulses.len();
    let max_slots = slots_per_round * schedule.max_rounds as usize;
    let mut slot_time = Vec::with_capacity(max_slots);
    let mut t_acc = 0.0;
    for _ in 0..schedule.max_rounds {
        for pulse in &schedule.pulses {
            t_acc += pulse.duration;
            if schedule.cool_after_each {
                t_acc += cool_step_duration(physics, pulse);
            }
            slot_time.push(t_acc);
        }
    }

    // All trajectories run the full plan; the ensemble stop rule (first
    // slot whose ground fraction crosses the target) is applied when the
    // report is assembled. Integer counters keep the reduction
    // order-independent, so a parallel schedule could not change results.
    let mut ground_counts = vec![0u64; max_slots];
    let mut snap_counts: Vec<BTreeMap<StateKey, u64>> = vec![BTreeMap::new(); max_slots];
    let mut snap_lost: Vec<u64> = vec![0; max_slots];
    let mut scatter_events = 0u64;

    for idx in 0..n_traj {
        let mut rng = stream_rng(seed, "cooling-traj", idx);
        let mut state = p0.sample_with(rng.random::<f64>());
        let mut slot = 0usize;
        for _round in 0..schedule.max_rounds {
            for pulse in &schedule.pulses {
                if let Some(key) = state {
                    let point = PopulationState::point(key.j, key.m, key.n);
                    let before = key;
                    let after =
                        apply_pulse(&point, pulse.j_upper, &pulse.pol, pulse.duration, physics, Some(&mut rng))?;
                    state = after.iter().next().map(|(k, _)| *k);
                    // scatters move J by exactly 1 (or into `lost`);
                    // pulses move J by exactly 2
                    match state {
                        Some(k2) if k2.j.abs_diff(before.j) == 1 => scatter_events += 1,
                        None => scatter_events += 1,
                        _ => {}
                    }
                    if schedule.cool_after_each {
                        if let Some(k2) = state {
                            if k2.n == 1 && rng.random::<f64>() < physics.cool_efficiency {
                                state = Some(StateKey::new(k2.j, k2.m, 0));
                            }
                        }
                    }
                }
                match state {
                    Some(k) => {
                        if k.j <= 1 {
                            ground_counts[slot] += 1;
                        }
                        *snap_counts[slot].entry(k).or_insert(0) += 1;
                    }
                    None => snap_lost[slot] += 1,
                }
                slot += 1;
            }
        }
    }

    let inv_n = 1.0 / n_traj as f64;
    let mut metrics = RunMetrics {
        target: physics.ground_target,
        n_traj: Some(n_traj),
        ..RunMetrics::default()
    };
    let mut pulses_to_target = None;
    for (slot, &count) in ground_counts.iter().enumerate() {
        if count as f64 * inv_n >= physics.ground_target {
            metrics.time_to_target = Some(slot_time[slot]);
            pulses_to_target = Some(slot as u64 + 1);
            break;
        }
    }
    let stop_slot = pulses_to_target.map(|p| p as usize).unwrap_or(max_slots);

    let mut trajectory = Trajectory::default();
    trajectory.push_snapshot(0.0, p0.clone());
    for slot in 0..stop_slot {
        let mut mean = PopulationState::empty();
        let mut j_counts: BTreeMap<u32, u64> = BTreeMap::new();
        for (k, &c) in &snap_counts[slot] {
            mean.add_mass(*k, c as f64 * inv_n);
            *j_counts.entry(k.j).or_insert(0) += c;
        }
        // binomial standard error of each J marginal
        let stderr: BTreeMap<u32, f64> = j_counts
            .iter()
            .map(|(&j, &c)| {
                let p = c as f64 * inv_n;
                (j, (p * (1.0 - p) * inv_n).sqrt())
            })
            .collect();
        mean.add_lost(snap_lost[slot] as f64 * inv_n);
        trajectory.snapshots.push(crate::report::Snapshot {
            time: slot_time[slot],
            state: mean,
            j_stderr: Some(stderr),
        });
    }

    metrics.rounds_executed = stop_slot.div_ceil(slots_per_round) as u32;
    metrics.pulses_executed = stop_slot as u64;
    metrics.scatter_events = scatter_events as f64 * inv_n;
    metrics.cycles_per_j_step =
        pulses_to_target.map(|p| p as f64 / schedule.distinct_j_uppers().len() as f64);

    trajectory.validate()?;
    let last = trajectory.snapshots.last().expect("at least initial");
    Ok(CoolingReport {
        ground_fraction_final: ground_fraction(&last.state),
        wall_time_simulated: last.time,
        trajectory,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::angular;
    use crate::constants::AMU;

    fn sio() -> MolecularConstants {
        MolecularConstants::sio_plus()
    }

    fn comb_settings() -> CombSettings {
        CombSettings {
            f_rep: 80e6,
            nu_ao: 21_191_600.0,
            tau: 100e-15,
            i_avg: 1e7,
            delta: angular(20e12),
            pol_schedule: vec![PolarizationConfig::full()],
            rabi_override: None,
        }
    }

    fn trap() -> TrapSettings {
        TrapSettings {
            omega_t: angular(10e6),
            mass_eff: 44.0 * AMU,
            k_eff: 4.0 * std::f64::consts::PI / 383e-9,
            eta_override: Some(0.1),
            cool_efficiency: 1.0,
            readout_fidelity: 1.0,
        }
    }

    fn physics(j_uppers: &BTreeSet<u32>, spont: f64) -> CoolingPhysics {
        CoolingPhysics::derive(
            &sio(),
            &comb_settings(),
            &trap(),
            j_uppers,
            true,
            1e3,
            Some(spont),
            ScatterModel { f_vib: 0.5 },
            None,
            None,
            0.9,
        )
        .unwrap()
    }

    fn pi_schedule(j_uppers: &[u32], pol: PolarizationConfig, phys: &CoolingPhysics) -> CoolingSchedule {
        let pulses = j_uppers
            .iter()
            .map(|&j| PulseSpec {
                j_upper: j,
                pol: pol.clone(),
                duration: std::f64::consts::PI / phys.drives[&j].omega_s,
            })
            .collect();
        CoolingSchedule {
            pulses,
            cool_after_each: true,
            max_rounds: 10,
        }
    }

    #[test]
    fn spont_rate_examples() {
        // gamma = 1/70 ns, Omega = 2 pi 0.2 MHz, Delta = 2 pi 20 THz -> 2/7 1/s
        let r = spont_rate(1.0 / 70e-9, angular(0.2e6), angular(20e12));
        assert!((r - 2.0 / 7.0).abs() < 1e-12);
        assert_eq!(spont_rate(1.0 / 70e-9, 0.0, angular(20e12)), 0.0);
        let r2 = spont_rate(1.0 / 70e-9, angular(0.2e6), 2.0 * angular(20e12));
        assert!((r / r2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_single_pi_config() {
        let sched = vec![PolarizationConfig::single(0).unwrap()];
        let uncovered = coupling_coverage(2, &sched);
        assert_eq!(uncovered, BTreeSet::from([-2, -1, 1, 2]));
    }

    #[test]
    fn coverage_full_config() {
        let sched = vec![PolarizationConfig::full()];
        assert!(coupling_coverage(2, &sched).is_empty());
    }

    #[test]
    fn coverage_j4_three_configs() {
        let sched = vec![
            PolarizationConfig::single(0).unwrap(),
            PolarizationConfig::single(2).unwrap(),
            PolarizationConfig::single(-2).unwrap(),
        ];
        assert!(coupling_coverage(4, &sched).is_empty());
    }

    #[test]
    fn ideal_pi_pulse_transfers_delta_state() {
        let js = BTreeSet::from([2]);
        let phys = physics(&js, 0.0);
        let p0 = PopulationState::point(2, 0, 0);
        let dur = std::f64::consts::PI / phys.drives[&2].omega_s;
        let p1 = apply_pulse(&p0, 2, &PolarizationConfig::single(0).unwrap(), dur, &phys, None)
            .unwrap();
        assert!((p1.mass(&StateKey::new(0, 0, 1)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blue_sideband_never_drives_up() {
        // Population already at J = 0 is untouched apart from scattering.
        let js = BTreeSet::from([2]);
        let phys = physics(&js, 0.0);
        let p0 = PopulationState::point(0, 0, 0);
        let dur = std::f64::consts::PI / phys.drives[&2].omega_s;
        let p1 = apply_pulse(&p0, 2, &PolarizationConfig::full(), dur, &phys, None).unwrap();
        assert_eq!(p1, p0);
    }

    #[test]
    fn dark_sublevel_untouched_coherently() {
        let js = BTreeSet::from([2]);
        let phys = physics(&js, 0.0);
        let p0 = PopulationState::point(2, 2, 0);
        let dur = std::f64::consts::PI / phys.drives[&2].omega_s;
        let p1 = apply_pulse(&p0, 2, &PolarizationConfig::single(0).unwrap(), dur, &phys, None)
            .unwrap();
        assert_eq!(p1, p0);
    }

    #[test]
    fn scatter_redistribute_examples() {
        let all_vib = ScatterModel { f_vib: 1.0 };
        let d = scatter_redistribute(&[(StateKey::new(3, 1, 0), 0.2)], &all_vib);
        assert_eq!(d.lost(), 0.2);
        assert_eq!(d.survived(), 0.0);

        let none_vib = ScatterModel { f_vib: 0.0 };
        let d = scatter_redistribute(&[(StateKey::new(0, 0, 0), 0.3)], &none_vib);
        assert!((d.mass(&StateKey::new(1, 0, 0)) - 0.1).abs() < 1e-15);
        assert!((d.mass(&StateKey::new(1, 1, 0)) - 0.1).abs() < 1e-15);
        assert!((d.survived() - 0.3).abs() < 1e-12);

        let half = ScatterModel { f_vib: 0.5 };
        let d = scatter_redistribute(
            &[(StateKey::new(4, -2, 1), 0.4), (StateKey::new(1, 0, 0), 0.6)],
            &half,
        );
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_equations_ground_state_is_fixed_point() {
        let js = BTreeSet::from([2]);
        let phys = physics(&js, 0.0);
        let sched = pi_schedule(&[2], PolarizationConfig::full(), &phys);
        let p0 = PopulationState::point(0, 0, 0);
        let report = run_rate_equations(&p0, &sched, &phys).unwrap();
        assert_eq!(report.ground_fraction_final, 1.0);
        for snap in &report.trajectory.snapshots {
            assert_eq!(ground_fraction(&snap.state), 1.0);
        }
    }

    #[test]
    fn rate_equations_two_step_chain() {
        // delta(J=4, m=0) with ascending pi pulses on 2 then 4 reaches
        // delta(J=0) after two rounds.
        let js = BTreeSet::from([2, 4]);
        let phys = physics(&js, 0.0);
        let sched = pi_schedule(&[2, 4], PolarizationConfig::full(), &phys);
        let p0 = PopulationState::point(4, 0, 0);
        let report = run_rate_equations(&p0, &sched, &phys).unwrap();
        assert!((report.ground_fraction_final - 1.0).abs() < 1e-9);
        assert_eq!(report.metrics.rounds_executed, 2);
        let j_marg = report.final_state().j_marginal();
        assert!((j_marg.get(&0).copied().unwrap_or(0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dark_state_trapping_reproduced() {
        let js = BTreeSet::from([2]);
        let phys = physics(&js, 0.0);
        let sched = pi_schedule(&[2], PolarizationConfig::single(0).unwrap(), &phys);
        let p0 = PopulationState::point(2, 1, 0);
        let report = run_rate_equations(&p0, &sched, &phys).unwrap();
        assert_eq!(report.ground_fraction_final, 0.0);
        assert_eq!(report.metrics.rounds_executed, sched.max_rounds);
    }

    #[test]
    fn mass_conserved_through_rounds_with_scattering() {
        let js = BTreeSet::from([2, 3, 4]);
        let phys = physics(&js, 5.0); // exaggerated scattering
        let sched = pi_schedule(&[2, 3, 4], PolarizationConfig::full(), &phys);
        let p0 = PopulationState::uniform_j(4);
        let report = run_rate_equations(&p0, &sched, &phys).unwrap();
        for snap in &report.trajectory.snapshots {
            assert!((snap.state.total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_single_deterministic_trajectory_matches_rate() {
        // All probabilities 0/1: delta start, ideal pulses, no scattering.
        let js = BTreeSet::from([2, 4]);
        let phys = physics(&js, 0.0);
        let sched = pi_schedule(&[2, 4], PolarizationConfig::single(0).unwrap(), &phys);
        let p0 = PopulationState::point(4, 0, 0);
        let rate = run_rate_equations(&p0, &sched, &phys).unwrap();
        let mc = run_monte_carlo(&p0, &sched, &phys, 1, 99).unwrap();
        assert_eq!(rate.ground_fraction_final, mc.ground_fraction_final);
        assert_eq!(rate.metrics.time_to_target, mc.metrics.time_to_target);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let js = BTreeSet::from([2, 3]);
        let phys = physics(&js, 1.0);
        let sched = pi_schedule(&[2, 3], PolarizationConfig::full(), &phys);
        let p0 = PopulationState::uniform_j(3);
        let a = run_monte_carlo(&p0, &sched, &phys, 500, 7).unwrap();
        let b = run_monte_carlo(&p0, &sched, &phys, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = run_monte_carlo(&p0, &sched, &phys, 500, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ground_fraction_definition() {
        assert_eq!(ground_fraction(&PopulationState::point(0, 0, 0)), 1.0);
        assert_eq!(ground_fraction(&PopulationState::point(5, 0, 0)), 0.0);
        let mut p = PopulationState::empty();
        p.add_mass(StateKey::new(1, -1, 0), 0.3);
        p.add_mass(StateKey::new(3, 0, 0), 0.7);
        assert!((ground_fraction(&p) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn non_resonant_schedule_rejected_without_retuning() {
        let js = BTreeSet::from([2]);
        let mut comb = comb_settings();
        comb.nu_ao = 5e6; // far from the J=0 line offset
        let err = CoolingPhysics::derive(
            &sio(),
            &comb,
            &trap(),
            &js,
            false,
            1e3,
            Some(0.0),
            ScatterModel { f_vib: 0.5 },
            None,
            None,
            0.9,
        );
        assert!(err.is_err());
    }
}
