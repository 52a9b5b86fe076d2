//! Command-line entry point: configuration ingestion, deterministic
//! seeding, and result serialization for plots and regression tests.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use combcool::comb::{match_multi, CombSettings};
use combcool::config::{load_config, Engine, RunConfig};
use combcool::cooling::{run_monte_carlo, run_rate_equations};
use combcool::error::{Error, Result};
use combcool::molecule::{boltzmann_distribution, raman_splitting, TRUNCATION_TOL};
use combcool::output::{
    self, BoltzmannSummary, CoolSummary, DetectSummary, ErrorBody, ErrorEnvelope, MatchSummary,
    PumpSummary, ScanIndexSummary,
};
use combcool::population::RotLevel;
use combcool::pumping::{run_pumping, EngineMode};
use combcool::report::CoolingReport;
use combcool::rng::stream_rng;
use combcool::spectro::{extract_comb_index, simulate_scan};
use combcool::trapdyn::{lamb_dicke, pi_time, quantum_logic_detect, sideband_rabi};

#[derive(Debug, Parser)]
#[command(
    name = "combcool",
    about = "Frequency-comb quantum-logic control of a trapped molecular ion: \
             rotational cooling, optical pumping, detection, and spectroscopy simulators"
)]
struct Cli {
    /// Configuration file (sectioned key = value with unit suffixes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in parameter profile.
    #[arg(long, global = true, default_value = "sio+")]
    profile: String,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the engine.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,

    /// Override the Monte Carlo trajectory count.
    #[arg(long, global = true)]
    n_traj: Option<u64>,

    /// Output directory for CSV/JSON results.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Emit machine-readable JSON on errors.
    #[arg(long, global = true)]
    error_json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Rate,
    MonteCarlo,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Thermal rotational distribution table.
    Boltzmann,
    /// Simultaneous comb-resonance matching over a repetition-rate grid.
    Match {
        /// Comma-separated lower J values of the target splittings.
        #[arg(long)]
        j_lowers: Option<String>,
        /// Resonance tolerance (Hz).
        #[arg(long)]
        tol: Option<f64>,
        /// Repetition-rate grid step (Hz).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Broadband optical-pumping compression of the thermal distribution.
    Pump,
    /// Quantum-logic rotational cooling to the J <= 1 manifold.
    Cool,
    /// Offset-frequency spectroscopy scans; with several repetition rates
    /// the absolute comb index is extracted.
    Scan {
        /// Repetition rates (Hz); repeat the flag for several scans.
        #[arg(long = "f-rep")]
        f_reps: Vec<f64>,
        /// Lower J of the probed J <-> J+2 line.
        #[arg(long)]
        j_lower: Option<u32>,
    },
    /// Repeated quantum-logic detection statistics.
    Detect {
        #[arg(long)]
        shots: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap usage problems are configuration errors (exit 1), except
            // for --help/--version which exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let error_json = cli.error_json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if error_json {
                let envelope = ErrorEnvelope {
                    error: ErrorBody {
                        kind: match e.exit_code() {
                            1 => "config".into(),
                            _ => "runtime".into(),
                        },
                        exit_code: e.exit_code(),
                        message: e.to_string(),
                    },
                };
                eprintln!(
                    "{}",
                    serde_json::to_string(&envelope).unwrap_or_else(|_| e.to_string())
                );
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = if cli.config.is_some() {
        load_config(cli.config.as_deref())?
    } else {
        RunConfig::profile(&cli.profile)?
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(engine) = cli.engine {
        cfg.run.engine = match engine {
            EngineArg::Rate => Engine::Rate,
            EngineArg::MonteCarlo => Engine::MonteCarlo,
        };
    }
    if let Some(n) = cli.n_traj {
        cfg.run.n_traj = n;
    }
    if let Some(out) = cli.out {
        cfg.run.output_dir = out;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.run.output_dir)?;

    match cli.command {
        Command::Boltzmann => cmd_boltzmann(&cfg),
        Command::Match { j_lowers, tol, step } => cmd_match(&cfg, j_lowers, tol, step),
        Command::Pump => cmd_pump(&cfg),
        Command::Cool => cmd_cool(&cfg),
        Command::Scan { f_reps, j_lower } => cmd_scan(&cfg, f_reps, j_lower),
        Command::Detect { shots } => cmd_detect(&cfg, shots),
    }
}

fn engine_mode(cfg: &RunConfig) -> EngineMode {
    match cfg.run.engine {
        Engine::Rate => EngineMode::RateEquation,
        Engine::MonteCarlo => EngineMode::MonteCarlo {
            n_traj: cfg.run.n_traj,
            seed: cfg.run.seed,
        },
    }
}

fn engine_name(cfg: &RunConfig) -> String {
    match cfg.run.engine {
        Engine::Rate => "rate".into(),
        Engine::MonteCarlo => "monte_carlo".into(),
    }
}

fn cmd_boltzmann(cfg: &RunConfig) -> Result<()> {
    let p = boltzmann_distribution(
        cfg.run.temperature,
        cfg.run.j_max,
        &cfg.molecule,
        TRUNCATION_TOL,
    )?;
    let path = cfg.run.output_dir.join("boltzmann.csv");
    output::write_boltzmann_csv(&path, &p)?;
    let marginal = p.j_marginal();
    let modal_j = *marginal
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap_or(&0);
    let summary = BoltzmannSummary {
        temperature_k: cfg.run.temperature,
        j_max: cfg.run.j_max,
        cumulative_j35: combcool::molecule::cumulative_fraction(&p, 35),
        modal_j,
    };
    output::write_json(&cfg.run.output_dir.join("boltzmann_summary.json"), &summary)?;
    println!(
        "boltzmann: T = {} K, J_max = {}, P(J<=35) = {:.4}, modal J = {}",
        cfg.run.temperature, cfg.run.j_max, summary.cumulative_j35, modal_j
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_match(
    cfg: &RunConfig,
    j_lowers: Option<String>,
    tol: Option<f64>,
    step: Option<f64>,
) -> Result<()> {
    let j_lowers: Vec<u32> = match j_lowers {
        Some(s) => s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::invariant(format!("bad J value '{x}' in --j-lowers")))
            })
            .collect::<Result<_>>()?,
        None => cfg.matching.j_lowers.clone(),
    };
    let tol = tol.unwrap_or(cfg.matching.tol);
    let step = step.unwrap_or(cfg.matching.step);
    let splittings: Vec<f64> = j_lowers
        .iter()
        .map(|&j| raman_splitting(j, &cfg.molecule))
        .collect();
    let solutions = match_multi(
        &splittings,
        (cfg.matching.f_rep_min, cfg.matching.f_rep_max),
        (cfg.matching.nu_min, cfg.matching.nu_max),
        tol,
        step,
    )?;
    let path = cfg.run.output_dir.join("match.csv");
    output::write_match_csv(&path, &solutions, splittings.len())?;
    output::write_json(
        &cfg.run.output_dir.join("match_summary.json"),
        &MatchSummary {
            n_solutions: solutions.len(),
            splittings_hz: splittings.clone(),
            tol_hz: tol,
            step_hz: step,
        },
    )?;
    println!(
        "match: {} splittings, {} simultaneous solutions (tol = {} Hz)",
        splittings.len(),
        solutions.len(),
        tol
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_pump(cfg: &RunConfig) -> Result<()> {
    let p0 = cfg.pump_initial()?;
    let report = run_pumping(&p0, &cfg.pump, &cfg.molecule, engine_mode(cfg))?;
    let path = cfg.run.output_dir.join("pump_trajectory.csv");
    output::write_trajectory_csv(&path, &report, false)?;
    let final_state = report.final_state();
    let below = final_state.fraction_where(|k| k.j < cfg.pump.target_j);
    let unlost = final_state.survived();
    let summary = PumpSummary {
        engine: engine_name(cfg),
        time_to_target_s: report.metrics.time_to_target,
        target_j: cfg.pump.target_j,
        target_fraction: cfg.pump.target_fraction,
        fraction_below_target_final: if unlost > 0.0 { below / unlost } else { 0.0 },
        final_states_populated: output::states_populated(final_state, 1e-3),
        lost_final: final_state.lost(),
        scatter_events: report.metrics.scatter_events,
        wall_time_simulated_s: report.wall_time_simulated,
        n_traj: report.metrics.n_traj,
        seed: cfg.run.seed,
    };
    output::write_json(&cfg.run.output_dir.join("pump_summary.json"), &summary)?;
    println!(
        "pump [{}]: {} states populated after {:.3e} s; time to >= {:.0}% below J = {}: {}",
        summary.engine,
        summary.final_states_populated,
        summary.wall_time_simulated_s,
        cfg.pump.target_fraction * 100.0,
        cfg.pump.target_j,
        summary
            .time_to_target_s
            .map(|t| format!("{t:.3e} s"))
            .unwrap_or_else(|| "not reached".into()),
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_cool(cfg: &RunConfig) -> Result<()> {
    let (schedule, physics) = cfg.cooling_setup()?;
    let p0 = cfg.cooling_initial()?;
    let report: CoolingReport = match cfg.run.engine {
        Engine::Rate => run_rate_equations(&p0, &schedule, &physics)?,
        Engine::MonteCarlo => {
            run_monte_carlo(&p0, &schedule, &physics, cfg.run.n_traj, cfg.run.seed)?
        }
    };
    let path = cfg.run.output_dir.join("cool_trajectory.csv");
    output::write_trajectory_csv(&path, &report, true)?;
    let summary = CoolSummary {
        engine: engine_name(cfg),
        time_to_target_s: report.metrics.time_to_target,
        target: physics.ground_target,
        ground_fraction_final: report.ground_fraction_final,
        lost_final: report.final_state().lost(),
        rounds_executed: report.metrics.rounds_executed,
        pulses_executed: report.metrics.pulses_executed,
        cycles_per_j_step: report.metrics.cycles_per_j_step,
        scatter_events: report.metrics.scatter_events,
        wall_time_simulated_s: report.wall_time_simulated,
        n_traj: report.metrics.n_traj,
        seed: cfg.run.seed,
    };
    output::write_json(&cfg.run.output_dir.join("cool_summary.json"), &summary)?;
    println!(
        "cool [{}]: ground fraction {:.4} after {:.3e} s; time to {:.0}%: {}; cycles per J step: {}",
        summary.engine,
        summary.ground_fraction_final,
        summary.wall_time_simulated_s,
        physics.ground_target * 100.0,
        summary
            .time_to_target_s
            .map(|t| format!("{t:.3e} s"))
            .unwrap_or_else(|| "not reached".into()),
        summary
            .cycles_per_j_step
            .map(|c| format!("{c:.1}"))
            .unwrap_or_else(|| "n/a".into()),
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan(cfg: &RunConfig, f_reps_flag: Vec<f64>, j_lower: Option<u32>) -> Result<()> {
    let f_reps = if f_reps_flag.is_empty() {
        cfg.scan.f_reps.clone()
    } else {
        f_reps_flag
    };
    let j_lower = j_lower.unwrap_or(cfg.scan.j_lower);
    let splitting = raman_splitting(j_lower, &cfg.molecule);
    let omega0 = cfg.comb.carrier_rabi_effective(&cfg.molecule)?;
    let eta = lamb_dicke(&cfg.trap);
    let omega_s = sideband_rabi(eta, combcool::comb::comb_rabi(omega0, splitting, cfg.comb.tau));
    let probe_time = match cfg.scan.probe_time {
        Some(t) => t,
        None => pi_time(omega_s)?,
    };

    let mut scans = Vec::new();
    for (i, &f_rep) in f_reps.iter().enumerate() {
        let settings = CombSettings {
            f_rep,
            nu_ao: 0.0,
            ..cfg.comb.clone()
        };
        let n = (f_rep / cfg.scan.grid_step).floor() as usize;
        let grid: Vec<f64> = (0..n).map(|k| k as f64 * cfg.scan.grid_step).collect();
        let mut rng = stream_rng(cfg.run.seed, "scan-noise", i as u64);
        let scan = simulate_scan(
            &[splitting],
            &settings,
            &cfg.molecule,
            &cfg.trap,
            probe_time,
            &grid,
            cfg.scan.noise_sigma,
            Some(&mut rng),
        )?;
        let path = cfg.run.output_dir.join(format!("scan_{i}.csv"));
        output::write_scan_csv(&path, &scan)?;
        println!("wrote {}", path.display());
        scans.push(scan);
    }

    if scans.len() >= 2 {
        let fit = extract_comb_index(&scans, cfg.scan.threshold)?;
        let summary = ScanIndexSummary {
            m: fit.m,
            sign: fit.sign.as_i8(),
            delta_omega_hz: fit.delta_omega,
            slope: fit.slope,
            n_scans: scans.len(),
        };
        output::write_json(&cfg.run.output_dir.join("scan_index.json"), &summary)?;
        println!(
            "scan: tracked line J = {j_lower} <-> {}: M = {}, sign = {:+}, delta_omega = {:.6e} Hz",
            j_lower + 2,
            fit.m,
            fit.sign.as_i8(),
            fit.delta_omega
        );
    } else {
        println!("scan: single repetition rate; comb index needs at least two");
    }
    Ok(())
}

fn cmd_detect(cfg: &RunConfig, shots: Option<u64>) -> Result<()> {
    let shots = shots.unwrap_or(cfg.detect.shots);
    let prior = cfg.cooling_initial()?;
    let target: BTreeSet<RotLevel> = cfg
        .detect
        .target_j
        .iter()
        .flat_map(|&j| (-(j as i32)..=(j as i32)).map(move |m| RotLevel { j, m }))
        .collect();
    let prior_mass = prior.fraction_where(|k| target.contains(&k.level()));
    let mut rng = stream_rng(cfg.run.seed, "detect", 0);
    let mut clicks = 0u64;
    for _ in 0..shots {
        let (bit, _) = quantum_logic_detect(&prior, &target, &cfg.trap, &mut rng)?;
        if bit {
            clicks += 1;
        }
    }
    let rate = if shots > 0 { clicks as f64 / shots as f64 } else { 0.0 };
    let (lo, hi) = output::wilson_interval(clicks, shots);
    let f = cfg.trap.readout_fidelity;
    let summary = DetectSummary {
        shots,
        clicks,
        click_rate: rate,
        readout_fidelity: f,
        target_mass_prior: prior_mass,
        inferred_population: output::invert_click_rate(rate, f),
        ci_low: output::invert_click_rate(lo, f),
        ci_high: output::invert_click_rate(hi, f),
        seed: cfg.run.seed,
    };
    output::write_json(&cfg.run.output_dir.join("detect_summary.json"), &summary)?;
    println!(
        "detect: {clicks}/{shots} clicks (rate {rate:.4}); inferred target population {}",
        summary
            .inferred_population
            .map(|q| format!("{q:.4}"))
            .unwrap_or_else(|| "undetermined at fidelity 0.5".into())
    );
    Ok(())
}
