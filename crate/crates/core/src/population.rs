//! Population bookkeeping over rotational, Zeeman and motional quantum
//! numbers, plus a `lost` bucket for mass scattered out of the cooling
//! manifold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total-mass invariant `sum(probs) + lost = 1`.
pub const MASS_TOL: f64 = 1e-9;

/// A rotational level with its Zeeman sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RotLevel {
    pub j: u32,
    pub m: i32,
}

impl RotLevel {
    pub fn new(j: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > j {
            return Err(Error::invariant(format!("RotLevel: |m| = {} > J = {j}", m.abs())));
        }
        Ok(RotLevel { j, m })
    }
}

/// Full state label: rotational level plus phonon number of the addressed
/// common mode. The simulator restricts n to {0, 1}; anything higher is a
/// protocol bug and is rejected at validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub j: u32,
    pub m: i32,
    pub n: u8,
}

impl StateKey {
    pub fn new(j: u32, m: i32, n: u8) -> Self {
        StateKey { j, m, n }
    }

    pub fn level(&self) -> RotLevel {
        RotLevel { j: self.j, m: self.m }
    }
}

/// Probability distribution over `(J, m, n)` plus the `lost` bucket.
///
/// Invariants: all probabilities non-negative, `n <= 1`, `|m| <= J`, and
/// total mass 1 within [`MASS_TOL`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    probs: BTreeMap<StateKey, f64>,
    lost: f64,
}

impl PopulationState {
    pub fn empty() -> Self {
        Self::default()
    }

    /// All mass in a single state.
    pub fn point(j: u32, m: i32, n: u8) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(StateKey::new(j, m, n), 1.0);
        PopulationState { probs, lost: 0.0 }
    }

    /// Equal weight per J in `0..=j_max`, uniform over m within each J,
    /// all motion in n = 0. This is the "post-pumping" initial state.
    pub fn uniform_j(j_max: u32) -> Self {
        let mut probs = BTreeMap::new();
        let per_j = 1.0 / (j_max as f64 + 1.0);
        for j in 0..=j_max {
            let per_m = per_j / (2.0 * j as f64 + 1.0);
            for m in -(j as i32)..=(j as i32) {
                probs.insert(StateKey::new(j, m, 0), per_m);
            }
        }
        PopulationState { probs, lost: 0.0 }
    }

    pub fn add_mass(&mut self, key: StateKey, mass: f64) {
        if mass != 0.0 {
            *self.probs.entry(key).or_insert(0.0) += mass;
        }
    }

    pub fn set_mass(&mut self, key: StateKey, mass: f64) {
        if mass == 0.0 {
            self.probs.remove(&key);
        } else {
            self.probs.insert(key, mass);
        }
    }

    pub fn mass(&self, key: &StateKey) -> f64 {
        self.probs.get(key).copied().unwrap_or(0.0)
    }

    pub fn lost(&self) -> f64 {
        self.lost
    }

    pub fn add_lost(&mut self, mass: f64) {
        self.lost += mass;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, &f64)> {
        self.probs.iter()
    }

    /// Sum over surviving (non-lost) states.
    pub fn survived(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn total(&self) -> f64 {
        self.survived() + self.lost
    }

    /// Mass with phonon number n = 1.
    pub fn n1_mass(&self) -> f64 {
        self.probs
            .iter()
            .filter(|(k, _)| k.n == 1)
            .map(|(_, v)| v)
            .sum()
    }

    /// Sum of probability over states matching `pred`, excluding `lost`.
    pub fn fraction_where(&self, pred: impl Fn(&StateKey) -> bool) -> f64 {
        self.probs
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(_, v)| v)
            .sum()
    }

    /// Marginal over J (summing m and n), excluding `lost`.
    pub fn j_marginal(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.probs {
            *out.entry(k.j).or_insert(0.0) += v;
        }
        out
    }

    pub fn max_j(&self) -> Option<u32> {
        self.probs.keys().map(|k| k.j).max()
    }

    /// Drop entries with |mass| below `eps` and fold them into `lost`-free
    /// renormalization is deliberately NOT performed; pruning is used only
    /// for exactly-zero entries produced by arithmetic.
    pub fn prune_zeros(&mut self) {
        self.probs.retain(|_, v| *v != 0.0);
    }

    /// Check all invariants; the error names the violated condition.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.probs {
            if k.n > 1 {
                return Err(Error::physics(format!(
                    "PopulationState: phonon number n = {} > 1 at J = {}, m = {}",
                    k.n, k.j, k.m
                )));
            }
            if k.m.unsigned_abs() > k.j {
                return Err(Error::invariant(format!(
                    "PopulationState: |m| = {} > J = {}",
                    k.m.abs(),
                    k.j
                )));
            }
            if *v < -MASS_TOL {
                return Err(Error::invariant(format!(
                    "PopulationState: negative probability {v} at ({}, {}, {})",
                    k.j, k.m, k.n
                )));
            }
        }
        if self.lost < -MASS_TOL {
            return Err(Error::invariant(format!(
                "PopulationState: negative lost bucket {}",
                self.lost
            )));
        }
        let total = self.total();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invariant(format!(
                "PopulationState: total mass {total} != 1"
            )));
        }
        Ok(())
    }

    /// Multiply every entry (including `lost`) by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for v in self.probs.values_mut() {
            *v *= factor;
        }
        self.lost *= factor;
    }

    /// Sample one state label from the distribution given a uniform draw
    /// `u` in [0, 1). Returns `None` for the lost bucket.
    pub fn sample_with(&self, u: f64) -> Option<StateKey> {
        let mut acc = 0.0;
        let target = u * self.total();
        for (k, v) in &self.probs {
            acc += v;
            if target < acc {
                return Some(*k);
            }
        }
        None
    }
}
