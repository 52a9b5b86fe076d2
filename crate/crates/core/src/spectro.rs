//! Simulated offset-frequency scans and absolute comb-index determination
//! from scans at several repetition rates.
//!
//! The periodic comb spectrum makes every scan repeat with period `f_rep`;
//! the absolute splitting is pinned down by how a tracked line moves when
//! the repetition rate changes: `d nu_AO / d f_rep = -/+ M` for
//! `delta_omega = M f_rep +/- nu_AO`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comb::{best_assignment, comb_rabi, CombSettings, Sign};
use crate::error::{Error, Result};
use crate::molecule::MolecularConstants;
use crate::trapdyn::{lamb_dicke, sideband_flop_probability, TrapSettings};

/// One offset-frequency scan at a fixed repetition rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub f_rep: f64,
    /// (nu_AO, signal) points with strictly increasing nu_AO in [0, f_rep).
    pub points: Vec<(f64, f64)>,
    pub probe_time: f64,
}

impl ScanResult {
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invariant("scan grid must be strictly increasing"));
            }
        }
        if let (Some(first), Some(last)) = (self.points.first(), self.points.last()) {
            if first.0 < 0.0 || last.0 >= self.f_rep {
                return Err(Error::invariant("scan grid must lie in [0, f_rep)"));
            }
        }
        Ok(())
    }
}

/// Simulate a sideband spectroscopy scan: the signal at each offset is the
/// best flop probability over all splittings and both resonance branches,
/// so the lineshape is the detuned-Rabi profile with width set by the
/// probe time. Optional additive Gaussian noise exercises the peak fitter.
pub fn simulate_scan(
    splittings: &[f64],
    settings: &CombSettings,
    c: &MolecularConstants,
    trap: &TrapSettings,
    probe_time: f64,
    grid: &[f64],
    noise_sigma: f64,
    rng: Option<&mut impl Rng>,
) -> Result<ScanResult> {
    settings.validate()?;
    trap.validate()?;
    if !(probe_time > 0.0) {
        return Err(Error::invariant("probe_time must be > 0"));
    }
    let omega0 = settings.carrier_rabi_effective(c)?;
    let eta = lamb_dicke(trap);
    let drives: Vec<(f64, f64)> = splittings
        .iter()
        .map(|&dw| (dw, eta * comb_rabi(omega0, dw, settings.tau)))
        .collect();

    let mut points = Vec::with_capacity(grid.len());
    let mut noise_rng = rng;
    for &nu in grid {
        if nu < 0.0 || nu >= settings.f_rep {
            return Err(Error::invariant("scan grid must lie in [0, f_rep)"));
        }
        let mut signal = 0.0f64;
        for &(dw, omega_s) in &drives {
            let a = best_assignment(dw, settings.f_rep, nu)?;
            signal = signal.max(sideband_flop_probability(omega_s, probe_time, a.residual));
        }
        if noise_sigma > 0.0 {
            if let Some(r) = noise_rng.as_deref_mut() {
                // Box-Muller; two uniforms per point keeps the draw count fixed
                let u1: f64 = r.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = r.random::<f64>();
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                signal += noise_sigma * g;
            }
        }
        points.push((nu, signal));
    }
    let scan = ScanResult {
        f_rep: settings.f_rep,
        points,
        probe_time,
    };
    scan.validate()?;
    Ok(scan)
}

/// A located spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub nu_ao: f64,
    pub height: f64,
}

/// Local maxima above `threshold`, refined by quadratic interpolation over
/// the three nearest grid points. Edge points are reported unrefined.
pub fn find_peaks(scan: &ScanResult, threshold: f64) -> Result<Vec<Peak>> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::invariant("peak threshold must lie in (0, 1)"));
    }
    let pts = &scan.points;
    let mut peaks = Vec::new();
    for i in 0..pts.len() {
        let (x, y) = pts[i];
        if y < threshold {
            continue;
        }
        let left = if i > 0 { pts[i - 1].1 } else { f64::NEG_INFINITY };
        let right = if i + 1 < pts.len() {
            pts[i + 1].1
        } else {
            f64::NEG_INFINITY
        };
        // strictly above the left neighbour, at least as high as the right:
        // plateaus report their leftmost point
        if !(y > left && y >= right) {
            continue;
        }
        if i == 0 || i + 1 == pts.len() {
            peaks.push(Peak { nu_ao: x, height: y });
            continue;
        }
        let (xl, yl) = pts[i - 1];
        let (xr, yr) = pts[i + 1];
        let denom = yl - 2.0 * y + yr;
        if denom >= 0.0 {
            peaks.push(Peak { nu_ao: x, height: y });
            continue;
        }
        let offset = 0.5 * (yl - yr) / denom;
        let h = (xr - xl) / 2.0;
        let refined_x = x + offset * h;
        let refined_y = y - 0.25 * (yl - yr) * offset;
        peaks.push(Peak {
            nu_ao: refined_x,
            height: refined_y,
        });
    }
    Ok(peaks)
}

/// Result of the multi-repetition-rate comb-index fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombIndexFit {
    pub m: u64,
    pub sign: Sign,
    /// Reconstructed splitting (Hz), averaged over the scans.
    pub delta_omega: f64,
    /// Raw fitted slope d nu_AO / d f_rep.
    pub slope: f64,
}

/// Maximum deviation of the fitted slope from an integer before the index
/// is declared ambiguous.
pub const SLOPE_TOL: f64 = 0.4;

/// Determine the absolute comb index from scans at several slightly
/// different repetition rates.
///
/// The tracked line is the strongest peak of the first scan (ties broken
/// toward the lowest offset); in later scans its position is unwrapped by
/// picking the shift candidate of minimal magnitude, which requires the
/// repetition-rate steps to satisfy `M delta_f < f_rep / 2`. The slope of
/// position against repetition rate is `-M` on the plus branch and `+M`
/// on the minus branch.
pub fn extract_comb_index(scans: &[ScanResult], threshold: f64) -> Result<CombIndexFit> {
    extract_comb_index_tracking(scans, threshold, None)
}

/// Same fit, but track the line nearest to `hint` in the first scan
/// instead of the strongest one. Both resonance branches of a splitting
/// produce equally tall lines, so a caller interested in one specific
/// branch pins it down here.
pub fn extract_comb_index_tracking(
    scans: &[ScanResult],
    threshold: f64,
    hint: Option<f64>,
) -> Result<CombIndexFit> {
    if scans.len() < 2 {
        return Err(Error::DegenerateFit(
            "need at least two scans at distinct repetition rates".into(),
        ));
    }
    for pair in scans.windows(2) {
        if pair[0].f_rep == pair[1].f_rep {
            return Err(Error::DegenerateFit(
                "two scans share the same repetition rate".into(),
            ));
        }
    }

    let first_peaks = find_peaks(&scans[0], threshold)?;
    let tracked = match hint {
        Some(h) => first_peaks
            .iter()
            .min_by(|a, b| (a.nu_ao - h).abs().total_cmp(&(b.nu_ao - h).abs())),
        None => first_peaks.iter().max_by(|a, b| {
            a.height
                .total_cmp(&b.height)
                .then(b.nu_ao.total_cmp(&a.nu_ao)) // tie -> lower offset
        }),
    }
    .ok_or_else(|| Error::DegenerateFit("no peak above threshold in the first scan".into()))?;

    // Unwrapped line positions per scan.
    let mut xs = Vec::with_capacity(scans.len());
    let mut ys = Vec::with_capacity(scans.len());
    xs.push(scans[0].f_rep);
    ys.push(tracked.nu_ao);
    for scan in &scans[1..] {
        let peaks = find_peaks(scan, threshold)?;
        if peaks.is_empty() {
            return Err(Error::DegenerateFit(format!(
                "no peak above threshold at f_rep = {}",
                scan.f_rep
            )));
        }
        let mut best = f64::INFINITY;
        let mut best_pos = 0.0;
        for p in &peaks {
            for k in [-1.0, 0.0, 1.0] {
                let candidate = p.nu_ao + k * scan.f_rep;
                let shift = candidate - tracked.nu_ao;
                if shift.abs() < best {
                    best = shift.abs();
                    best_pos = candidate;
                }
            }
        }
        xs.push(scan.f_rep);
        ys.push(best_pos);
    }

    // Least-squares slope of position vs repetition rate.
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("repetition rates are degenerate".into()));
    }
    let slope = sxy / sxx;

    let m_float = slope.abs();
    let m = m_float.round();
    let deviation = (m_float - m).abs();
    if deviation > SLOPE_TOL {
        return Err(Error::AmbiguousIndex {
            slope,
            deviation,
            tol: SLOPE_TOL,
        });
    }
    if m < 1.0 {
        return Err(Error::AmbiguousIndex {
            slope,
            deviation: m_float,
            tol: SLOPE_TOL,
        });
    }
    let sign = if slope < 0.0 { Sign::Plus } else { Sign::Minus };

    // delta_omega = M f_rep + sign * nu(unwrapped), averaged over scans
    let delta_omega = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| m * x + sign.as_f64() * y)
        .sum::<f64>()
        / n;

    Ok(CombIndexFit {
        m: m as u64,
        sign,
        delta_omega,
        slope,
    })
}
