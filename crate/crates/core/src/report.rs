//! Run reports: time-stamped population snapshots plus a typed event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::PopulationState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Pulse,
    Cool,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Simulated time (s) at which the event completed.
    pub time: f64,
    pub kind: EventKind,
    pub detail: String,
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub state: PopulationState,
    /// Per-J standard error of the mean (Monte Carlo runs only).
    pub j_stderr: Option<BTreeMap<u32, f64>>,
}

/// Time-stamped sequence of population snapshots plus the event log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn push_snapshot(&mut self, time: f64, state: PopulationState) {
        self.snapshots.push(Snapshot {
            time,
            state,
            j_stderr: None,
        });
    }

    /// Timestamps must be strictly increasing.
    pub fn validate(&self) -> Result<()> {
        for w in self.snapshots.windows(2) {
            if w[1].time <= w[0].time {
                return Err(Error::invariant(format!(
                    "trajectory timestamps not strictly increasing: {} then {}",
                    w[0].time, w[1].time
                )));
            }
        }
        Ok(())
    }
}

/// Counters and derived figures of a cooling or pumping run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Simulated time at which the run target was first crossed.
    pub time_to_target: Option<f64>,
    /// The target the engine was asked to reach.
    pub target: f64,
    pub rounds_executed: u32,
    pub pulses_executed: u64,
    /// Mean number of pulses each scheduled J_upper received up to the
    /// target crossing; comparable to the assumed cycles per J -> J-2 step.
    pub cycles_per_j_step: Option<f64>,
    /// Expected (rate equations) or per-trajectory mean (Monte Carlo)
    /// number of spontaneous-scattering events.
    pub scatter_events: f64,
    /// Number of Monte Carlo trajectories, when applicable.
    pub n_traj: Option<u64>,
}

/// Result of a cooling or pumping run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub trajectory: Trajectory,
    /// Population with J <= 1 at the end of the run (lost excluded).
    pub ground_fraction_final: f64,
    /// Total simulated wall time (s).
    pub wall_time_simulated: f64,
    pub metrics: RunMetrics,
}

impl CoolingReport {
    pub fn final_state(&self) -> &PopulationState {
        &self
            .trajectory
            .snapshots
            .last()
            .expect("report always holds at least the initial snapshot")
            .state
    }
}
