//! Independent oracles shared by the integration suites. Everything here
//! deliberately avoids the library's own closed-form paths.

use combcool::comb::{MatchSolution, Sign};

/// Transfer probability of the detuned two-level problem by direct RK4
/// integration of the Schrodinger equation in the rotating frame,
/// `H/hbar = [[-pi delta_a, omega_s/2], [omega_s/2, pi delta_a]]` with
/// `delta_a = 2 pi delta_hz`.
pub fn flop_probability_rk4(omega_s: f64, delta_hz: f64, t: f64, steps: usize) -> f64 {
    let da = 2.0 * std::f64::consts::PI * delta_hz;
    // c = (c0_re, c0_im, c1_re, c1_im)
    let mut c = [1.0f64, 0.0, 0.0, 0.0];
    let h = [[-da / 2.0, omega_s / 2.0], [omega_s / 2.0, da / 2.0]];
    let dt = t / steps as f64;
    let deriv = |c: &[f64; 4]| -> [f64; 4] {
        // dc/dt = -i H c  (componentwise on re/im pairs)
        let (c0r, c0i, c1r, c1i) = (c[0], c[1], c[2], c[3]);
        let h00 = h[0][0];
        let h01 = h[0][1];
        let h11 = h[1][1];
        [
            h00 * c0i + h01 * c1i,
            -(h00 * c0r + h01 * c1r),
            h01 * c0i + h11 * c1i,
            -(h01 * c0r + h11 * c1r),
        ]
    };
    for _ in 0..steps {
        let k1 = deriv(&c);
        let mut c2 = c;
        for i in 0..4 {
            c2[i] = c[i] + 0.5 * dt * k1[i];
        }
        let k2 = deriv(&c2);
        for i in 0..4 {
            c2[i] = c[i] + 0.5 * dt * k2[i];
        }
        let k3 = deriv(&c2);
        for i in 0..4 {
            c2[i] = c[i] + dt * k3[i];
        }
        let k4 = deriv(&c2);
        for i in 0..4 {
            c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    c[2] * c[2] + c[3] * c[3]
}

/// Minimal residual of `delta_omega` on the comb `(f_rep, nu)` for one
/// sign branch, by brute-force scan over the comb index (no rounding
/// shortcut).
fn brute_residual(delta_omega: f64, f_rep: f64, nu: f64, sign: f64) -> (u64, f64) {
    let m_center = (delta_omega / f_rep) as i64;
    let mut best = (1u64, f64::INFINITY);
    for m in (m_center - 3).max(1)..=(m_center + 3) {
        let line = m as f64 * f_rep + sign * nu;
        let r = (delta_omega - line).abs();
        if r < best.1 {
            best = (m as u64, r);
        }
    }
    best
}

/// Independent brute-force matcher: double loop over the repetition-rate
/// grid and both sign branches of every splitting, with residuals from a
/// comb-index scan. Mirrors the contract of `match_multi` without sharing
/// its arithmetic.
pub fn brute_force_match(
    splittings: &[f64],
    f_rep_range: (f64, f64),
    nu_range: (f64, f64),
    tol: f64,
    step: f64,
) -> Vec<MatchSolution> {
    let mut out = Vec::new();
    let n_steps = ((f_rep_range.1 - f_rep_range.0) / step).round() as u64;
    for i in 0..=n_steps {
        let f_rep = f_rep_range.0 + i as f64 * step;
        if f_rep > f_rep_range.1 * (1.0 + 1e-12) {
            break;
        }
        let mut candidates: Vec<f64> = Vec::new();
        for &dw in splittings {
            // zero-residual offsets of both branches, from first principles
            let m_plus = (dw / f_rep).floor();
            let m_minus = (dw / f_rep).ceil();
            for nu in [dw - m_plus * f_rep, m_minus * f_rep - dw] {
                if nu >= nu_range.0 && nu <= nu_range.1 {
                    candidates.push(nu);
                }
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        'cand: for nu in candidates {
            let mut assignments = Vec::new();
            let mut worst = 0.0f64;
            for &dw in splittings {
                let (mp, rp) = brute_residual(dw, f_rep, nu, 1.0);
                let (mm, rm) = brute_residual(dw, f_rep, nu, -1.0);
                let (m, sign, r) = if rm < rp {
                    (mm, Sign::Minus, rm)
                } else {
                    (mp, Sign::Plus, rp)
                };
                if r > tol {
                    continue 'cand;
                }
                worst = worst.max(r);
                assignments.push(combcool::comb::CombAssignment {
                    m,
                    sign,
                    residual: r,
                });
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
    out
}

/// Full width at half maximum of the detuned-Rabi line
/// `P(delta) = (Omega_s^2/Omega_eff^2) sin^2(Omega_eff t/2)` at fixed
/// probe time, found by bisection.
pub fn lineshape_fwhm(omega_s: f64, probe_time: f64) -> f64 {
    let p = |delta_hz: f64| {
        combcool::trapdyn::sideband_flop_probability(omega_s, probe_time, delta_hz)
    };
    let peak = p(0.0);
    let half = peak / 2.0;
    // march outward to bracket the half-max crossing
    let mut hi = omega_s / (2.0 * std::f64::consts::PI);
    while p(hi) > half {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + hi
}
