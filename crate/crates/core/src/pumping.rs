//! Broadband optical-pumping prefilter: spectrally filtered light drives
//! P-branch excitations only, compressing the rotational distribution
//! before quantum-logic cooling.
//!
//! The excited electronic state is never stored: its lifetime is four
//! orders of magnitude shorter than the mean time between scatterings, so
//! excitation and decay collapse into one composite jump
//! `J -> J' = J - 1 -> J'' = J' +/- 1` with Honl-London emission weights
//! `J' : (J' + 1)`. The jump process is discretized on a fixed time step;
//! the rate-equation engine iterates its exact expected values and the
//! Monte Carlo engine samples the identical chain.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::error::{Error, Result};
use crate::molecule::{rot_energy, rot_energy_excited, MolecularConstants};
use crate::population::{PopulationState, StateKey};
use crate::report::{CoolingReport, Event, EventKind, RunMetrics, Trajectory};
use crate::rng::stream_rng;

/// Broadband pump light and filter parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSettings {
    /// Source spectral density dI/d(lambda) (W/m).
    pub spectral_density: f64,
    /// Focused spot diameter at the ions (m).
    pub spot_diameter: f64,
    /// Filter edge wavelength (m).
    pub filter_edge: f64,
    /// Width of the filter transmission ramp (m).
    pub filter_resolution: f64,
    /// Photon scattering rate at full transmission (1/s).
    pub scatter_rate: f64,
    /// Total pumping duration (s).
    pub duration: f64,
    /// Time step of the discretized jump chain (s).
    pub time_step: f64,
    /// Interval between recorded snapshots (s).
    pub snapshot_interval: f64,
    /// Fraction of scattering events lost to other vibrational states.
    pub loss_fraction: f64,
    /// Pass the R branch and block the P branch instead (heating
    /// direction; used as a sign test of the filter logic).
    pub reversed: bool,
    /// Compression target: fraction of unlost population below
    /// `target_j`.
    pub target_j: u32,
    pub target_fraction: f64,
}

impl PumpSettings {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.spectral_density, "pump.spectral_density"),
            (self.spot_diameter, "pump.spot"),
            (self.filter_edge, "pump.filter_edge"),
            (self.filter_resolution, "pump.filter_resolution"),
            (self.duration, "pump.duration"),
            (self.time_step, "pump.time_step"),
            (self.snapshot_interval, "pump.snapshot_interval"),
        ] {
            if !(v > 0.0) {
                return Err(Error::invariant(format!("{name} must be > 0")));
            }
        }
        if !(self.scatter_rate >= 0.0) {
            return Err(Error::invariant("pump.scatter_rate must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.loss_fraction) {
            return Err(Error::invariant("pump.loss_fraction must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.target_fraction) {
            return Err(Error::invariant("pump.target_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// P-branch (J -> J-1) and R-branch (J -> J+1) line wavelengths of level
/// J, with the excited-state term values taken from `b_excited`. J = 0 has
/// no P line.
pub fn branch_wavelengths(
    j: u32,
    c: &MolecularConstants,
    nu_00: f64,
) -> (Option<f64>, f64) {
    let e_lower = rot_energy(j, c);
    let p_line = if j == 0 {
        None
    } else {
        Some(C / (nu_00 + rot_energy_excited(j - 1, c) - e_lower))
    };
    let r_line = C / (nu_00 + rot_energy_excited(j + 1, c) - e_lower);
    (p_line, r_line)
}

/// Filter transmission at `lambda`: a linear ramp of width
/// `filter_resolution` centered on `filter_edge`, 1 on the long-wavelength
/// (P branch) side and 0 on the short-wavelength (R branch) side. With
/// `reversed` the ramp is mirrored.
pub fn filter_transmission(lambda: f64, settings: &PumpSettings) -> f64 {
    let x = (lambda - settings.filter_edge) / settings.filter_resolution + 0.5;
    let t = x.clamp(0.0, 1.0);
    if settings.reversed {
        1.0 - t
    } else {
        t
    }
}

/// Pump-excitation rate of level J: `scatter_rate` times the filter
/// transmission at the driven branch line. J = 0 has no P line and pumps
/// at rate 0 (in reversed mode the R line is driven instead).
pub fn excitation_rate(j: u32, settings: &PumpSettings, c: &MolecularConstants) -> f64 {
    let nu_00 = C / c.lambda_e;
    let (p_line, r_line) = branch_wavelengths(j, c, nu_00);
    let line = if settings.reversed {
        Some(r_line)
    } else {
        p_line
    };
    match line {
        Some(lambda) => settings.scatter_rate * filter_transmission(lambda, settings),
        None => 0.0,
    }
}

/// Engine selector shared by the pumping and cooling entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineMode {
    RateEquation,
    MonteCarlo { n_traj: u64, seed: u64 },
}

/// Composite-jump branching from initial level J: the excited level,
/// and the probability of the downward decay branch.
fn jump_targets(j: u32, reversed: bool) -> (u32, f64, u32, u32) {
    // returns (j_excited, w_down, j_down, j_up)
    if reversed {
        let jp = j + 1;
        let w_down = jp as f64 / (2.0 * jp as f64 + 1.0);
        (jp, w_down, j, j + 2)
    } else {
        debug_assert!(j >= 1);
        let jp = j - 1;
        if jp == 0 {
            (0, 0.0, 0, 1) // J' = 0 decays to J'' = 1 only
        } else {
            let w_down = jp as f64 / (2.0 * jp as f64 + 1.0);
            (jp, w_down, j - 2, j)
        }
    }
}

struct DenseState {
    /// cells[n] indexed by J^2 + (m + J); one lattice per phonon number.
    cells: Vec<Vec<f64>>,
    j_cap: u32,
    lost: f64,
}

impl DenseState {
    fn idx(j: u32, m: i32) -> usize {
        (j as usize) * (j as usize) + (m + j as i32) as usize
    }

    fn from_population(p: &PopulationState, j_cap: u32) -> Self {
        let size = (j_cap as usize + 1) * (j_cap as usize + 1);
        let mut cells = vec![vec![0.0; size], vec![0.0; size]];
        for (k, &v) in p.iter() {
            cells[k.n as usize][Self::idx(k.j, k.m)] += v;
        }
        DenseState {
            cells,
            j_cap,
            lost: p.lost(),
        }
    }

    fn to_population(&self) -> PopulationState {
        let mut p = PopulationState::empty();
        for (n, lattice) in self.cells.iter().enumerate() {
            for j in 0..=self.j_cap {
                for m in -(j as i32)..=(j as i32) {
                    let v = lattice[Self::idx(j, m)];
                    if v != 0.0 {
                        p.add_mass(StateKey::new(j, m, n as u8), v);
                    }
                }
            }
        }
        p.add_lost(self.lost);
        p
    }

    fn row_sum(&self, n: usize, j: u32) -> f64 {
        let base = (j as usize) * (j as usize);
        self.cells[n][base..base + 2 * j as usize + 1].iter().sum()
    }

    fn unlost(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    fn fraction_below(&self, j_cut: u32) -> f64 {
        let mut below = 0.0;
        for n in 0..self.cells.len() {
            for j in 0..j_cut.min(self.j_cap + 1) {
                below += self.row_sum(n, j);
            }
        }
        below
    }
}

/// Run the optical-pumping prefilter on `p0`.
///
/// The report's trajectory is sampled every `snapshot_interval`;
/// `time_to_target` is the first step at which the unlost fraction below
/// `target_j` reaches `target_fraction`.
pub fn run_pumping(
    p0: &PopulationState,
    settings: &PumpSettings,
    c: &MolecularConstants,
    mode: EngineMode,
) -> Result<CoolingReport> {
    p0.validate()?;
    settings.validate()?;
    c.validate()?;
    match mode {
        EngineMode::RateEquation => run_pumping_rate(p0, settings, c),
        EngineMode::MonteCarlo { n_traj, seed } => {
            if n_traj < 1 {
                return Err(Error::invariant("n_traj must be >= 1"));
            }
            run_pumping_mc(p0, settings, c, n_traj, seed)
        }
    }
}

fn j_capacity(p0: &PopulationState, settings: &PumpSettings) -> u32 {
    let max_j = p0.max_j().unwrap_or(0);
    if settings.reversed {
        // J climbs by at most 2 per step, so this bounds the support
        // exactly for short sign-test runs; the hard cap keeps long runs
        // affordable (mass underflows to zero long before reaching it)
        let steps = (settings.duration / settings.time_step).ceil() as u32;
        (max_j + 2 * steps.saturating_add(1)).min(max_j.max(10) + 1200)
    } else {
        max_j.max(1) // J never increases under P-branch pumping
    }
}

fn steps_and_stride(settings: &PumpSettings) -> (usize, usize) {
    let n_steps = (settings.duration / settings.time_step).round().max(1.0) as usize;
    let stride = (settings.snapshot_interval / settings.time_step)
        .round()
        .max(1.0) as usize;
    (n_steps, stride)
}

fn run_pumping_rate(
    p0: &PopulationState,
    settings: &PumpSettings,
    c: &MolecularConstants,
) -> Result<CoolingReport> {
    let j_cap = j_capacity(p0, settings);
    let mut state = DenseState::from_population(p0, j_cap);
    let (n_steps, stride) = steps_and_stride(settings);

    // per-J event probabilities for one step
    let p_event: Vec<f64> = (0..=j_cap)
        .map(|j| 1.0 - (-excitation_rate(j, settings, c) * settings.time_step).exp())
        .collect();

    let mut trajectory = Trajectory::default();
    trajectory.push_snapshot(0.0, p0.clone());
    let mut metrics = RunMetrics {
        target: settings.target_fraction,
        ..RunMetrics::default()
    };
    let mut scatter_mass = 0.0;
    let mut interval_scatter = 0.0;

    for step in 1..=n_steps {
        for n in 0..state.cells.len() {
            if state.cells[n].iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut inflow = vec![0.0f64; j_cap as usize + 1];
            let mut lost_inc = 0.0;
            for j in 0..=j_cap {
                let pe = p_event[j as usize];
                if pe == 0.0 {
                    continue;
                }
                if !settings.reversed && j == 0 {
                    continue;
                }
                let out = state.row_sum(n, j) * pe;
                if out == 0.0 {
                    continue;
                }
                scatter_mass += out;
                interval_scatter += out;
                lost_inc += out * settings.loss_fraction;
                let rest = out * (1.0 - settings.loss_fraction);
                let (_, w_down, j_down, j_up) = jump_targets(j, settings.reversed);
                inflow[j_down as usize] += rest * w_down;
                let up_flow = rest * (1.0 - w_down);
                if j_up <= j_cap {
                    inflow[j_up as usize] += up_flow;
                } else if up_flow < 1e-9 {
                    // park numerically negligible overflow at the cap so
                    // mass stays conserved
                    inflow[j_cap as usize] += up_flow;
                } else {
                    return Err(Error::physics(
                        "pumping lattice overflow: raise the J capacity",
                    ));
                }
                // deplete the row
                let base = (j as usize) * (j as usize);
                for cell in &mut state.cells[n][base..base + 2 * j as usize + 1] {
                    *cell *= 1.0 - pe;
                }
            }
            state.lost += lost_inc;
            for j in 0..=j_cap {
                let add = inflow[j as usize];
                if add != 0.0 {
                    let per_m = add / (2.0 * j as f64 + 1.0);
                    let base = (j as usize) * (j as usize);
                    for cell in &mut state.cells[n][base..base + 2 * j as usize + 1] {
                        *cell += per_m;
                    }
                }
            }
        }

        let t = step as f64 * settings.time_step;
        if metrics.time_to_target.is_none() {
            let unlost = state.unlost();
            if unlost > 0.0
                && state.fraction_below(settings.target_j) / unlost >= settings.target_fraction
            {
                metrics.time_to_target = Some(t);
            }
        }
        if step % stride == 0 || step == n_steps {
            trajectory.push_snapshot(t, state.to_population());
            trajectory.events.push(Event {
                time: t,
                kind: EventKind::Scatter,
                detail: format!("expected_events={interval_scatter:.6e}"),
            });
            interval_scatter = 0.0;
        }
    }

    metrics.scatter_events = scatter_mass;
    let final_pop = trajectory
        .snapshots
        .last()
        .expect("final snapshot present")
        .state
        .clone();
    final_pop.validate()?;
    trajectory.validate()?;
    Ok(CoolingReport {
        ground_fraction_final: final_pop.fraction_where(|k| k.j <= 1),
        wall_time_simulated: n_steps as f64 * settings.time_step,
        trajectory,
        metrics,
    })
}

fn run_pumping_mc(
    p0: &PopulationState,
    settings: &PumpSettings,
    c: &MolecularConstants,
    n_traj: u64,
    seed: u64,
) -> Result<CoolingReport> {
    let j_cap = j_capacity(p0, settings);
    let (n_steps, stride) = steps_and_stride(settings);
    let p_event: Vec<f64> = (0..=j_cap)
        .map(|j| 1.0 - (-excitation_rate(j, settings, c) * settings.time_step).exp())
        .collect();

    // snapshot step indices (1-based), mirroring the rate engine
    let mut snap_steps: Vec<usize> = (1..=n_steps)
        .filter(|s| s % stride == 0 || *s == n_steps)
        .collect();
    snap_steps.dedup();

    let mut snap_counts: Vec<BTreeMap<StateKey, u64>> =
        vec![BTreeMap::new(); snap_steps.len()];
    let mut snap_lost = vec![0u64; snap_steps.len()];
    let mut below_counts = vec![0u64; n_steps]; // unlost below target_j, per step
    let mut unlost_counts = vec![0u64; n_steps];
    let mut scatter_events = 0u64;

    for idx in 0..n_traj {
        let mut rng = stream_rng(seed, "pump-traj", idx);
        let mut state = p0.sample_with(rng.random::<f64>());
        let mut snap_i = 0usize;
        for step in 1..=n_steps {
            if let Some(k) = state {
                if (settings.reversed || k.j >= 1)
                    && rng.random::<f64>() < p_event[k.j as usize]
                {
                    scatter_events += 1;
                    if rng.random::<f64>() < settings.loss_fraction {
                        state = None;
                    } else {
                        let (_, w_down, j_down, j_up) = jump_targets(k.j, settings.reversed);
                        let j_new = if rng.random::<f64>() < w_down { j_down } else { j_up };
                        if j_new > j_cap {
                            return Err(Error::physics(
                                "pumping lattice overflow: raise the J capacity",
                            ));
                        }
                        let m_new = -(j_new as i32) + rng.random_range(0..(2 * j_new + 1)) as i32;
                        state = Some(StateKey::new(j_new, m_new, k.n));
                    }
                }
            }
            if let Some(k) = state {
                unlost_counts[step - 1] += 1;
                if k.j < settings.target_j {
                    below_counts[step - 1] += 1;
                }
            }
            if snap_i < snap_steps.len() && step == snap_steps[snap_i] {
                match state {
                    Some(k) => *snap_counts[snap_i].entry(k).or_insert(0) += 1,
                    None => snap_lost[snap_i] += 1,
                }
                snap_i += 1;
            }
        }
    }

    let inv_n = 1.0 / n_traj as f64;
    let mut trajectory = Trajectory::default();
    trajectory.push_snapshot(0.0, p0.clone());
    for (i, &step) in snap_steps.iter().enumerate() {
        let mut mean = PopulationState::empty();
        let mut j_counts: BTreeMap<u32, u64> = BTreeMap::new();
        for (k, &cnt) in &snap_counts[i] {
            mean.add_mass(*k, cnt as f64 * inv_n);
            *j_counts.entry(k.j).or_insert(0) += cnt;
        }
        mean.add_lost(snap_lost[i] as f64 * inv_n);
        let stderr: BTreeMap<u32, f64> = j_counts
            .iter()
            .map(|(&j, &cnt)| {
                let p = cnt as f64 * inv_n;
                (j, (p * (1.0 - p) * inv_n).sqrt())
            })
            .collect();
        trajectory.snapshots.push(crate::report::Snapshot {
            time: step as f64 * settings.time_step,
            state: mean,
            j_stderr: Some(stderr),
        });
    }

    let mut metrics = RunMetrics {
        target: settings.target_fraction,
        n_traj: Some(n_traj),
        scatter_events: scatter_events as f64 * inv_n,
        ..RunMetrics::default()
    };
    for step in 1..=n_steps {
        let unlost = unlost_counts[step - 1];
        if unlost > 0
            && below_counts[step - 1] as f64 / unlost as f64 >= settings.target_fraction
        {
            metrics.time_to_target = Some(step as f64 * settings.time_step);
            break;
        }
    }

    trajectory.validate()?;
    let last = trajectory.snapshots.last().expect("at least initial");
    Ok(CoolingReport {
        ground_fraction_final: last.state.fraction_where(|k| k.j <= 1),
        wall_time_simulated: n_steps as f64 * settings.time_step,
        trajectory,
        metrics,
    })
}
