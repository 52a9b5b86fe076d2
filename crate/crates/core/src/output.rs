//! CSV and JSON result serialization with byte-stable formatting, plus the
//! bundled readers the round-trip tests use.
//!
//! Floats are written with Rust's shortest round-trip scientific notation,
//! so identical runs produce identical bytes on any host.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comb::MatchSolution;
use crate::error::Result;
use crate::population::PopulationState;
use crate::report::CoolingReport;
use crate::spectro::ScanResult;

/// Shortest round-trip scientific formatting; the one float formatter used
/// in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic reader for the numeric CSVs this crate writes: header row plus
/// f64 cells (the leading column may be an integer).
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| {
                    crate::error::Error::invariant(format!("non-numeric CSV cell '{cell}'"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// `boltzmann.csv`: J, population, cumulative.
pub fn write_boltzmann_csv(path: &Path, p: &PopulationState) -> Result<()> {
    let marginal = p.j_marginal();
    let header = vec!["J".to_string(), "population".into(), "cumulative".into()];
    let mut rows = Vec::with_capacity(marginal.len());
    let mut cum = 0.0;
    for (j, mass) in &marginal {
        cum += mass;
        rows.push(vec![j.to_string(), fmt_f64(*mass), fmt_f64(cum)]);
    }
    write_csv(path, &header, &rows)
}

/// `match.csv`: f_rep, nu_AO, then (M, sign, residual) per splitting.
pub fn write_match_csv(path: &Path, solutions: &[MatchSolution], n_splittings: usize) -> Result<()> {
    let mut header = vec!["f_rep_hz".to_string(), "nu_ao_hz".into()];
    for i in 0..n_splittings {
        header.push(format!("M_{i}"));
        header.push(format!("sign_{i}"));
        header.push(format!("residual_hz_{i}"));
    }
    let rows: Vec<Vec<String>> = solutions
        .iter()
        .map(|s| {
            let mut row = vec![fmt_f64(s.f_rep), fmt_f64(s.nu_ao)];
            for a in &s.assignments {
                row.push(a.m.to_string());
                row.push(a.sign.as_i8().to_string());
                row.push(fmt_f64(a.residual));
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Trajectory CSV: time, summary columns, then the per-J mass histogram up
/// to the largest J seen anywhere in the run.
pub fn write_trajectory_csv(path: &Path, report: &CoolingReport, ground_column: bool) -> Result<()> {
    let j_max = report
        .trajectory
        .snapshots
        .iter()
        .filter_map(|s| s.state.max_j())
        .max()
        .unwrap_or(0);
    let mut header = vec!["time_s".to_string()];
    if ground_column {
        header.push("ground_fraction".into());
    }
    header.push("lost".into());
    for j in 0..=j_max {
        header.push(format!("J{j}"));
    }
    let mut rows = Vec::with_capacity(report.trajectory.snapshots.len());
    for snap in &report.trajectory.snapshots {
        let mut row = vec![fmt_f64(snap.time)];
        if ground_column {
            row.push(fmt_f64(crate::cooling::ground_fraction(&snap.state)));
        }
        row.push(fmt_f64(snap.state.lost()));
        let marginal = snap.state.j_marginal();
        for j in 0..=j_max {
            row.push(fmt_f64(marginal.get(&j).copied().unwrap_or(0.0)));
        }
        rows.push(row);
    }
    write_csv(path, &header, &rows)
}

/// `scan_<i>.csv`: nu_AO, signal.
pub fn write_scan_csv(path: &Path, scan: &ScanResult) -> Result<()> {
    let header = vec!["nu_ao_hz".to_string(), "signal".into()];
    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|(nu, s)| vec![fmt_f64(*nu), fmt_f64(*s)])
        .collect();
    write_csv(path, &header, &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// JSON summary of a cooling run.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoolSummary {
    pub engine: String,
    pub time_to_target_s: Option<f64>,
    pub target: f64,
    pub ground_fraction_final: f64,
    pub lost_final: f64,
    pub rounds_executed: u32,
    pub pulses_executed: u64,
    pub cycles_per_j_step: Option<f64>,
    pub scatter_events: f64,
    pub wall_time_simulated_s: f64,
    pub n_traj: Option<u64>,
    pub seed: u64,
}

/// JSON summary of a pumping run.
#[derive(Debug, Serialize, Deserialize)]
pub struct PumpSummary {
    pub engine: String,
    pub time_to_target_s: Option<f64>,
    pub target_j: u32,
    pub target_fraction: f64,
    pub fraction_below_target_final: f64,
    /// J levels holding more than 0.1% of the unlost population at the end.
    pub final_states_populated: usize,
    pub lost_final: f64,
    pub scatter_events: f64,
    pub wall_time_simulated_s: f64,
    pub n_traj: Option<u64>,
    pub seed: u64,
}

/// Count of J levels holding more than `threshold` of the unlost mass.
pub fn states_populated(p: &PopulationState, threshold: f64) -> usize {
    let unlost = p.survived();
    if unlost <= 0.0 {
        return 0;
    }
    p.j_marginal()
        .values()
        .filter(|&&v| v / unlost > threshold)
        .count()
}

/// JSON summary of repeated quantum-logic detection shots.
#[derive(Debug, Serialize, Deserialize)]
pub struct DetectSummary {
    pub shots: u64,
    pub clicks: u64,
    pub click_rate: f64,
    pub readout_fidelity: f64,
    /// Prior population inside the target set.
    pub target_mass_prior: f64,
    /// Population estimate inverted through the readout channel; absent at
    /// fidelity 0.5 where the channel carries no information.
    pub inferred_population: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub seed: u64,
}

/// Wilson 95% interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959_963_984_540_054; // 97.5th normal percentile
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Invert the symmetric binary readout channel: click rate
/// `r = q f + (1 - q)(1 - f)` gives `q = (r - (1 - f)) / (2 f - 1)`.
pub fn invert_click_rate(rate: f64, fidelity: f64) -> Option<f64> {
    let denom = 2.0 * fidelity - 1.0;
    if denom <= 0.0 {
        return None;
    }
    Some(((rate - (1.0 - fidelity)) / denom).clamp(0.0, 1.0))
}

/// Scan index-extraction JSON.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScanIndexSummary {
    pub m: u64,
    pub sign: i8,
    pub delta_omega_hz: f64,
    pub slope: f64,
    pub n_scans: usize,
}

/// Per-J summary table of a match run that found nothing (still a valid
/// result).
#[derive(Debug, Serialize, Deserialize)]
pub struct MatchSummary {
    pub n_solutions: usize,
    pub splittings_hz: Vec<f64>,
    pub tol_hz: f64,
    pub step_hz: f64,
}

/// Machine-readable error envelope for `--error-json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoltzmannSummary {
    pub temperature_k: f64,
    pub j_max: u32,
    pub cumulative_j35: f64,
    pub modal_j: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::StateKey;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, 0.1, 21.51e9, 1e-30, 2.0 / 7.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn boltzmann_csv_round_trip() {
        let dir = std::env::temp_dir().join("combcool-test-output");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("boltzmann.csv");
        let mut p = PopulationState::empty();
        p.add_mass(StateKey::new(0, 0, 0), 0.25);
        p.add_mass(StateKey::new(1, -1, 0), 0.5);
        p.add_mass(StateKey::new(2, 0, 0), 0.25);
        write_boltzmann_csv(&path, &p).unwrap();
        let (header, rows) = read_numeric_csv(&path).unwrap();
        assert_eq!(header, vec!["J", "population", "cumulative"]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1][1], 0.5);
        assert_eq!(rows[2][2], 1.0);
    }

    #[test]
    fn channel_inversion() {
        assert_eq!(invert_click_rate(0.5, 0.5), None);
        let q = invert_click_rate(0.5, 0.9).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
        let q = invert_click_rate(0.9, 1.0).unwrap();
        assert!((q - 0.9).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_contains_the_point() {
        let (lo, hi) = wilson_interval(500, 1000);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.07);
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
    }

    #[test]
    fn states_populated_threshold() {
        let p = PopulationState::uniform_j(9);
        assert_eq!(states_populated(&p, 1e-3), 10);
        assert_eq!(states_populated(&p, 0.2), 0);
    }
}
