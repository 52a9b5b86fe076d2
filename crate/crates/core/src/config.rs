//! Run configuration: the SiO+/Yb+ default profile, the sectioned
//! key-value config grammar, and derivation of engine inputs (schedules,
//! physics bundles, initial states) from a loaded configuration.
//!
//! Config files look like:
//!
//! ```text
//! [molecule]
//! B = 21.51 GHz
//! D = 33.1 kHz
//!
//! [run]
//! seed = 42
//! engine = monte_carlo
//! ```
//!
//! Numbers carry optional unit suffixes (see [`crate::units`]). Frequencies
//! are ordinary cycles/s everywhere in the file; quantities that are
//! angular internally (detuning, trap frequency, Rabi override) are
//! multiplied by 2 pi on load. Unknown keys are errors; missing keys take
//! the profile defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comb::{angular, CombSettings, PolarizationConfig};
use crate::cooling::{CoolingPhysics, CoolingSchedule, ScatterModel};
use crate::error::{Error, Result};
use crate::molecule::{boltzmann_distribution, MolecularConstants, TRUNCATION_TOL};
use crate::population::PopulationState;
use crate::pumping::PumpSettings;
use crate::trapdyn::{pi_time, TrapSettings};
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Engine {
    Rate,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialDist {
    /// Equal weight per J in 0..=initial_j_max (the post-pumping regime).
    UniformJ,
    /// Thermal distribution at the run temperature.
    Boltzmann,
}

/// Cooling-protocol configuration beyond the raw physics settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingConfig {
    /// Highest J_upper addressed by the schedule (J_upper = 2..=j_hi).
    pub j_hi: u32,
    pub initial: InitialDist,
    pub initial_j_max: u32,
    pub max_rounds: u32,
    pub ground_target: f64,
    /// Fraction of each scattering event lost from the cooling manifold.
    pub f_vib: f64,
    /// Spontaneous-emission rate during pulses (1/s); `None` derives
    /// `2 gamma Omega_0 / Delta` from the comb settings.
    pub spont_rate: Option<f64>,
    /// Retune nu_AO to exact resonance before every pulse.
    pub retune: bool,
    /// Maximum tolerated resonance residual (Hz) when not retuning.
    pub resonance_tol: f64,
    /// Fixed pulse duration (s); `None` uses the per-J pi time.
    pub pulse_duration: Option<f64>,
    /// Sideband-cooling step duration (s); `None` matches the pulse.
    pub cool_duration: Option<f64>,
    /// Raman branching weights per q; `None` is uniform.
    pub q_weights: Option<BTreeMap<i32, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Lower level of the tracked J <-> J+2 line.
    pub j_lower: u32,
    /// Repetition rates to scan; index extraction needs at least two.
    pub f_reps: Vec<f64>,
    pub grid_step: f64,
    /// Probe pulse length (s); `None` uses the pi time of the line.
    pub probe_time: Option<f64>,
    pub threshold: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub j_lowers: Vec<u32>,
    pub f_rep_min: f64,
    pub f_rep_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub tol: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub shots: u64,
    /// J levels whose full Zeeman manifold forms the detection target.
    pub target_j: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub temperature: f64,
    pub j_max: u32,
    pub seed: u64,
    pub engine: Engine,
    pub n_traj: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub molecule: MolecularConstants,
    pub comb: CombSettings,
    pub trap: TrapSettings,
    pub pump: PumpSettings,
    pub cooling: CoolingConfig,
    pub scan: ScanConfig,
    pub matching: MatchConfig,
    pub detect: DetectConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::sio_plus_profile()
    }
}

impl RunConfig {
    /// The paper's SiO+/Yb+ worked parameter set.
    pub fn sio_plus_profile() -> Self {
        let molecule = MolecularConstants::sio_plus();
        let pol_cycle = default_pol_cycle();
        RunConfig {
            comb: CombSettings {
                f_rep: 80e6,
                nu_ao: 21_191_600.0,
                tau: 100e-15,
                i_avg: 1e7, // 1000 W/cm^2
                delta: angular(20e12),
                pol_schedule: pol_cycle,
                rabi_override: None,
            },
            trap: TrapSettings {
                omega_t: angular(10e6),
                mass_eff: 44.0 * crate::constants::AMU,
                k_eff: 4.0 * std::f64::consts::PI / molecule.lambda_e,
                eta_override: Some(0.1),
                cool_efficiency: 1.0,
                readout_fidelity: 1.0,
            },
            pump: PumpSettings {
                spectral_density: 1e6, // 1 mW/nm
                spot_diameter: 50e-6,
                filter_edge: molecule.lambda_e,
                filter_resolution: 0.2e-9,
                scatter_rate: 1e5,
                duration: 3e-3,
                time_step: 1e-6,
                snapshot_interval: 100e-6,
                loss_fraction: 0.0,
                reversed: false,
                target_j: 10,
                target_fraction: 0.99,
            },
            cooling: CoolingConfig {
                j_hi: 9,
                initial: InitialDist::UniformJ,
                initial_j_max: 9,
                // one round sweeps every polarization configuration once,
                // so two rounds revisit each J ten times
                max_rounds: 2,
                ground_target: 0.9,
                f_vib: 0.5,
                // the source's own spontaneous-emission estimate (2/7 1/s)
                spont_rate: Some(2.0 / 7.0),
                retune: true,
                resonance_tol: 1e3,
                pulse_duration: None,
                cool_duration: None,
                q_weights: None,
            },
            scan: ScanConfig {
                j_lower: 0,
                f_reps: vec![80e6],
                grid_step: 2e3,
                probe_time: None,
                threshold: 0.5,
                noise_sigma: 0.0,
            },
            matching: MatchConfig {
                j_lowers: vec![3, 5],
                f_rep_min: 79e6,
                f_rep_max: 81e6,
                nu_min: 0.0,
                nu_max: 81e6,
                tol: 10e3,
                step: 100.0,
            },
            detect: DetectConfig {
                shots: 1000,
                target_j: vec![0],
            },
            run: RunSection {
                temperature: 300.0,
                j_max: 200,
                seed: 1,
                engine: Engine::Rate,
                n_traj: 1000,
                output_dir: PathBuf::from("."),
            },
            molecule,
        }
    }

    /// Look up a named built-in profile.
    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "sio+" | "sio_plus" | "SiO+" => Ok(Self::sio_plus_profile()),
            other => Err(Error::invariant(format!("unknown profile '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.molecule.validate()?;
        self.comb.validate()?;
        self.trap.validate()?;
        self.pump.validate()?;
        if self.cooling.j_hi < 2 {
            return Err(Error::invariant("cooling.j_hi must be >= 2"));
        }
        if self.cooling.max_rounds < 1 {
            return Err(Error::invariant("cooling.max_rounds must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.cooling.ground_target) {
            return Err(Error::invariant("cooling.ground_target must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.cooling.f_vib) {
            return Err(Error::invariant("cooling.f_vib must lie in [0, 1]"));
        }
        if let Some(r) = self.cooling.spont_rate {
            if r < 0.0 {
                return Err(Error::invariant("cooling.spont_rate must be >= 0"));
            }
        }
        if let Some(w) = &self.cooling.q_weights {
            if w.values().any(|&v| v < 0.0) {
                return Err(Error::invariant("cooling.q_weights must be >= 0"));
            }
        }
        if !(self.scan.grid_step > 0.0) {
            return Err(Error::invariant("scan.grid_step must be > 0"));
        }
        if !(0.0 < self.scan.threshold && self.scan.threshold < 1.0) {
            return Err(Error::invariant("scan.threshold must lie in (0, 1)"));
        }
        if self.scan.f_reps.is_empty() {
            return Err(Error::invariant("scan.f_reps must be non-empty"));
        }
        if self.matching.j_lowers.is_empty() {
            return Err(Error::invariant("match.j_lowers must be non-empty"));
        }
        if self.run.temperature < 0.0 {
            return Err(Error::invariant("run.temperature must be >= 0"));
        }
        if self.run.engine == Engine::MonteCarlo && self.run.n_traj < 1 {
            return Err(Error::invariant(
                "run.n_traj must be >= 1 for the monte_carlo engine",
            ));
        }
        Ok(())
    }

    /// Build the cooling schedule and derived physics for this
    /// configuration.
    pub fn cooling_setup(&self) -> Result<(CoolingSchedule, CoolingPhysics)> {
        let j_uppers: BTreeSet<u32> = (2..=self.cooling.j_hi).collect();
        let physics = CoolingPhysics::derive(
            &self.molecule,
            &self.comb,
            &self.trap,
            &j_uppers,
            self.cooling.retune,
            self.cooling.resonance_tol,
            self.cooling.spont_rate,
            ScatterModel {
                f_vib: self.cooling.f_vib,
            },
            self.cooling.cool_duration,
            self.cooling.q_weights.clone(),
            self.cooling.ground_target,
        )?;
        let mut durations = BTreeMap::new();
        for (&j, drive) in &physics.drives {
            let d = match self.cooling.pulse_duration {
                Some(d) => d,
                None => pi_time(drive.omega_s)?,
            };
            durations.insert(j, d);
        }
        let schedule = CoolingSchedule::sweep(
            self.cooling.j_hi,
            &self.comb.pol_schedule,
            &durations,
            self.cooling.max_rounds,
        )?;
        Ok((schedule, physics))
    }

    /// Initial state of the cooling run.
    pub fn cooling_initial(&self) -> Result<PopulationState> {
        match self.cooling.initial {
            InitialDist::UniformJ => Ok(PopulationState::uniform_j(self.cooling.initial_j_max)),
            InitialDist::Boltzmann => boltzmann_distribution(
                self.run.temperature,
                self.run.j_max,
                &self.molecule,
                TRUNCATION_TOL,
            ),
        }
    }

    /// Initial state of the pumping run (thermal).
    pub fn pump_initial(&self) -> Result<PopulationState> {
        boltzmann_distribution(
            self.run.temperature,
            self.run.j_max,
            &self.molecule,
            TRUNCATION_TOL,
        )
    }
}

/// The default polarization alternation: pi, then sigma+ pi, pi sigma-,
/// sigma+ sigma+, sigma- sigma- beam pairs, i.e. q = 0, +1, -1, +2, -2.
pub fn default_pol_cycle() -> Vec<PolarizationConfig> {
    [0, 1, -1, 2, -2]
        .into_iter()
        .map(|q| PolarizationConfig::single(q).expect("|q| <= 2"))
        .collect()
}

/// Load a configuration: the `sio+` profile defaults overridden by the
/// file at `path`, when given.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = RunConfig::sio_plus_profile();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        apply_config_text(&mut cfg, &text)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Apply config text on top of an existing configuration.
pub fn apply_config_text(cfg: &mut RunConfig, text: &str) -> Result<()> {
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                message: format!("malformed section header '{line}'"),
            })?;
            section = name.trim().to_string();
            if !matches!(
                section.as_str(),
                "molecule" | "comb" | "trap" | "pump" | "cooling" | "scan" | "match" | "detect"
                    | "run"
            ) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("unknown section [{section}]"),
                });
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return Err(Error::ConfigParse {
                line: line_no,
                message: "key outside any [section]".into(),
            });
        }
        apply_key(cfg, &section, key, value, line_no)?;
    }
    Ok(())
}

fn quantity(value: &str, dim: Dimension, line: usize) -> Result<f64> {
    parse_quantity(value, dim).map_err(|message| Error::UnitMismatch { line, message })
}

fn integer(value: &str, line: usize) -> Result<u64> {
    value.parse().map_err(|_| Error::ConfigParse {
        line,
        message: format!("expected an integer, got '{value}'"),
    })
}

fn boolean(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(Error::ConfigParse {
            line,
            message: format!("expected true/false, got '{value}'"),
        }),
    }
}

fn optional_quantity(value: &str, dim: Dimension, line: usize) -> Result<Option<f64>> {
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        quantity(value, dim, line).map(Some)
    }
}

fn int_list(value: &str, line: usize) -> Result<Vec<u32>> {
    value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| Error::ConfigParse {
                line,
                message: format!("expected a comma-separated integer list, got '{value}'"),
            })
        })
        .collect()
}

fn freq_list(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| quantity(s.trim(), Dimension::Frequency, line))
        .collect()
}

/// "0; +1; -1" -> one PolarizationConfig per ';' group, q values within a
/// group separated by ','.
fn pol_cycle(value: &str, line: usize) -> Result<Vec<PolarizationConfig>> {
    value
        .split(';')
        .map(|group| {
            let qs: Vec<i32> = group
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::ConfigParse {
                        line,
                        message: format!("bad q value '{}' in pol_cycle", s.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            PolarizationConfig::new(qs)
        })
        .collect()
}

/// "-2:1, 0:2, 2:1" -> weight table.
fn weight_table(value: &str, line: usize) -> Result<Option<BTreeMap<i32, f64>>> {
    if value == "uniform" || value == "none" {
        return Ok(None);
    }
    let mut table = BTreeMap::new();
    for item in value.split(',') {
        let (q, w) = item.trim().split_once(':').ok_or_else(|| Error::ConfigParse {
            line,
            message: format!("expected 'q:weight' pairs, got '{item}'"),
        })?;
        let q: i32 = q.trim().parse().map_err(|_| Error::ConfigParse {
            line,
            message: format!("bad q '{q}' in weight table"),
        })?;
        let w: f64 = w.trim().parse().map_err(|_| Error::ConfigParse {
            line,
            message: format!("bad weight '{w}' in weight table"),
        })?;
        table.insert(q, w);
    }
    Ok(Some(table))
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
    use Dimension as D;
    match (section, key) {
        ("molecule", "B") => cfg.molecule.b = quantity(value, D::Frequency, line)?,
        ("molecule", "D") => cfg.molecule.d = quantity(value, D::Frequency, line)?,
        ("molecule", "d_sign") => cfg.molecule.d_sign = quantity(value, D::Dimensionless, line)?,
        ("molecule", "lambda_e") => cfg.molecule.lambda_e = quantity(value, D::Length, line)?,
        ("molecule", "lifetime") => {
            cfg.molecule.gamma = 1.0 / quantity(value, D::Time, line)?;
        }
        ("molecule", "gamma") => cfg.molecule.gamma = quantity(value, D::Rate, line)?,
        ("molecule", "I_sat") => cfg.molecule.i_sat = quantity(value, D::Intensity, line)?,
        ("molecule", "B_excited") => {
            cfg.molecule.b_excited = optional_quantity(value, D::Frequency, line)?;
        }

        ("comb", "f_rep") => cfg.comb.f_rep = quantity(value, D::Frequency, line)?,
        ("comb", "nu_AO") => cfg.comb.nu_ao = quantity(value, D::Frequency, line)?,
        ("comb", "tau") => cfg.comb.tau = quantity(value, D::Time, line)?,
        ("comb", "intensity") => cfg.comb.i_avg = quantity(value, D::Intensity, line)?,
        ("comb", "detuning") => cfg.comb.delta = angular(quantity(value, D::Frequency, line)?),
        ("comb", "rabi_override") => {
            cfg.comb.rabi_override =
                optional_quantity(value, D::Frequency, line)?.map(angular);
        }
        ("comb", "pol_cycle") => cfg.comb.pol_schedule = pol_cycle(value, line)?,

        ("trap", "omega_t") => cfg.trap.omega_t = angular(quantity(value, D::Frequency, line)?),
        ("trap", "mass") => cfg.trap.mass_eff = quantity(value, D::Mass, line)?,
        ("trap", "k_eff") => cfg.trap.k_eff = quantity(value, D::Wavenumber, line)?,
        ("trap", "eta") => {
            cfg.trap.eta_override = optional_quantity(value, D::Dimensionless, line)?;
        }
        ("trap", "cool_efficiency") => {
            cfg.trap.cool_efficiency = quantity(value, D::Dimensionless, line)?;
        }
        ("trap", "readout_fidelity") => {
            cfg.trap.readout_fidelity = quantity(value, D::Dimensionless, line)?;
        }

        ("pump", "spectral_density") => {
            cfg.pump.spectral_density = quantity(value, D::SpectralDensity, line)?;
        }
        ("pump", "spot") => cfg.pump.spot_diameter = quantity(value, D::Length, line)?,
        ("pump", "filter_edge") => cfg.pump.filter_edge = quantity(value, D::Length, line)?,
        ("pump", "filter_resolution") => {
            cfg.pump.filter_resolution = quantity(value, D::Length, line)?;
        }
        ("pump", "scatter_rate") => cfg.pump.scatter_rate = quantity(value, D::Rate, line)?,
        ("pump", "duration") => cfg.pump.duration = quantity(value, D::Time, line)?,
        ("pump", "time_step") => cfg.pump.time_step = quantity(value, D::Time, line)?,
        ("pump", "snapshot_interval") => {
            cfg.pump.snapshot_interval = quantity(value, D::Time, line)?;
        }
        ("pump", "loss_fraction") => {
            cfg.pump.loss_fraction = quantity(value, D::Dimensionless, line)?;
        }
        ("pump", "reversed") => cfg.pump.reversed = boolean(value, line)?,
        ("pump", "target_j") => cfg.pump.target_j = integer(value, line)? as u32,
        ("pump", "target_fraction") => {
            cfg.pump.target_fraction = quantity(value, D::Dimensionless, line)?;
        }

        ("cooling", "j_hi") => cfg.cooling.j_hi = integer(value, line)? as u32,
        ("cooling", "initial") => {
            cfg.cooling.initial = match value {
                "uniform" => InitialDist::UniformJ,
                "boltzmann" => InitialDist::Boltzmann,
                _ => {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("cooling.initial must be uniform|boltzmann, got '{value}'"),
                    })
                }
            };
        }
        ("cooling", "initial_j_max") => cfg.cooling.initial_j_max = integer(value, line)? as u32,
        ("cooling", "max_rounds") => cfg.cooling.max_rounds = integer(value, line)? as u32,
        ("cooling", "ground_target") => {
            cfg.cooling.ground_target = quantity(value, D::Dimensionless, line)?;
        }
        ("cooling", "f_vib") => cfg.cooling.f_vib = quantity(value, D::Dimensionless, line)?,
        ("cooling", "spont_rate") => {
            cfg.cooling.spont_rate = optional_quantity(value, D::Rate, line)?;
        }
        ("cooling", "retune") => cfg.cooling.retune = boolean(value, line)?,
        ("cooling", "resonance_tol") => {
            cfg.cooling.resonance_tol = quantity(value, D::Frequency, line)?;
        }
        ("cooling", "pulse_duration") => {
            cfg.cooling.pulse_duration = optional_quantity(value, D::Time, line)?;
        }
        ("cooling", "cool_duration") => {
            cfg.cooling.cool_duration = optional_quantity(value, D::Time, line)?;
        }
        ("cooling", "q_weights") => cfg.cooling.q_weights = weight_table(value, line)?,

        ("scan", "j_lower") => cfg.scan.j_lower = integer(value, line)? as u32,
        ("scan", "f_reps") => cfg.scan.f_reps = freq_list(value, line)?,
        ("scan", "grid_step") => cfg.scan.grid_step = quantity(value, D::Frequency, line)?,
        ("scan", "probe_time") => cfg.scan.probe_time = optional_quantity(value, D::Time, line)?,
        ("scan", "threshold") => cfg.scan.threshold = quantity(value, D::Dimensionless, line)?,
        ("scan", "noise") => cfg.scan.noise_sigma = quantity(value, D::Dimensionless, line)?,

        ("match", "j_lowers") => cfg.matching.j_lowers = int_list(value, line)?,
        ("match", "f_rep_min") => cfg.matching.f_rep_min = quantity(value, D::Frequency, line)?,
        ("match", "f_rep_max") => cfg.matching.f_rep_max = quantity(value, D::Frequency, line)?,
        ("match", "nu_min") => cfg.matching.nu_min = quantity(value, D::Frequency, line)?,
        ("match", "nu_max") => cfg.matching.nu_max = quantity(value, D::Frequency, line)?,
        ("match", "tol") => cfg.matching.tol = quantity(value, D::Frequency, line)?,
        ("match", "step") => cfg.matching.step = quantity(value, D::Frequency, line)?,

        ("detect", "shots") => cfg.detect.shots = integer(value, line)?,
        ("detect", "target_j") => cfg.detect.target_j = int_list(value, line)?,

        ("run", "temperature") => cfg.run.temperature = quantity(value, D::Temperature, line)?,
        ("run", "J_max") => cfg.run.j_max = integer(value, line)? as u32,
        ("run", "seed") => cfg.run.seed = integer(value, line)?,
        ("run", "engine") => {
            cfg.run.engine = match value {
                "rate" => Engine::Rate,
                "monte_carlo" => Engine::MonteCarlo,
                _ => {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("run.engine must be rate|monte_carlo, got '{value}'"),
                    })
                }
            };
        }
        ("run", "n_traj") => cfg.run.n_traj = integer(value, line)?,
        ("run", "output_dir") => cfg.run.output_dir = PathBuf::from(value),

        _ => {
            return Err(Error::UnknownKey {
                line,
                section: section.to_string(),
                key: key.to_string(),
            })
        }
    }
    Ok(())
}
