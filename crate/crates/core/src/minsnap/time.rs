//! Total-time estimate and segment-time redistribution.

use serde::{Deserialize, Serialize};

use super::{MinSnapProblem, TimeAllocation, Waypoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    /// Speed used to turn chord length into time [m/s].
    pub v_nominal: f64,
    /// Duration given to segments whose endpoints coincide [s].
    pub zero_chord_floor: f64,
    pub max_iter: usize,
    /// Initial step as a fraction of the mean segment duration.
    pub initial_step: f64,
    /// No segment may shrink below this fraction of the mean duration.
    pub min_share: f64,
    /// Stop when the relative cost decrease of an iteration drops below this.
    pub rel_tol: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            v_nominal: 4.0,
            zero_chord_floor: 0.5,
            max_iter: 200,
            initial_step: 0.2,
            min_share: 0.02,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeEstimate {
    pub total: f64,
    /// Chord-proportional split of `total`.
    pub allocation: TimeAllocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeOptimization {
    pub allocation: TimeAllocation,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    /// False when the iteration limit was reached.
    pub converged: bool,
}

const ZERO_CHORD: f64 = 1e-9;

pub fn initial_time_estimate(wps: &[Waypoint], cfg: &TimeConfig) -> Result<TimeEstimate> {
    if wps.len() < 2 {
        return Err(Error::InvalidWaypoints(format!("need at least 2 waypoints, got {}", wps.len())));
    }
    if !(cfg.v_nominal > 0.0 && cfg.zero_chord_floor > 0.0) {
        return Err(Error::Domain("v_nominal and zero_chord_floor must be positive".into()));
    }
    let t: Vec<f64> = wps
        .windows(2)
        .map(|w| {
            let chord = (w[1].position - w[0].position).norm();
            if chord < ZERO_CHORD {
                cfg.zero_chord_floor
            } else {
                chord / cfg.v_nominal
            }
        })
        .collect();
    let allocation = TimeAllocation::new(t)?;
    Ok(TimeEstimate { total: allocation.total(), allocation })
}

fn cost(wps: &[Waypoint], t: &[f64], mu_psi: f64) -> f64 {
    TimeAllocation::new(t.to_vec())
        .and_then(|a| MinSnapProblem::new(wps, &a, mu_psi))
        .and_then(|p| p.solve())
        .map_or(f64::INFINITY, |(_, c)| c)
}

/// Euclidean projection onto `{t : sum t = total, t_i >= lo}`.
fn project(t: &[f64], total: f64, lo: f64) -> Vec<f64> {
    let budget = total - lo * t.len() as f64;
    let y: Vec<f64> = t.iter().map(|v| v - lo).collect();
    let mut sorted = y.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut shift = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        let cand = (acc - budget) / (i + 1) as f64;
        if v - cand > 0.0 {
            shift = cand;
        }
    }
    y.iter().map(|v| (v - shift).max(0.0) + lo).collect()
}

/// Redistributes segment durations with the total held at `total`.
///
/// Projected gradient descent on the log of the objective with
/// central-difference gradients and backtracking. The result never costs
/// more than the chord-proportional split.
pub fn optimize_segment_times(
    wps: &[Waypoint],
    total: f64,
    mu_psi: f64,
    cfg: &TimeConfig,
) -> Result<TimeOptimization> {
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidTimeAllocation(format!("total time must be positive, got {total}")));
    }
    let est = initial_time_estimate(wps, cfg)?;
    let scale = total / est.total;
    let mut t: Vec<f64> = est.allocation.durations().iter().map(|d| d * scale).collect();
    let m = t.len();
    let initial_cost = {
        let a = TimeAllocation::new(t.clone())?;
        MinSnapProblem::new(wps, &a, mu_psi)?.solve()?.1
    };
    let mut c = initial_cost;
    if m == 1 || c <= 0.0 {
        return Ok(TimeOptimization {
            allocation: TimeAllocation::new(t)?,
            cost: c,
            initial_cost,
            iterations: 0,
            converged: true,
        });
    }

    let mean = total / m as f64;
    let lo = cfg.min_share * mean;
    let h = 1e-6 * mean;
    let mut step = cfg.initial_step * mean;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let lc = c.ln();
        let mut g = vec![0.0; m];
        for i in 0..m {
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[i] += h;
            tm[i] -= h;
            g[i] = (cost(wps, &tp, mu_psi).ln() - cost(wps, &tm, mu_psi).ln()) / (2.0 * h);
        }
        let gmean = g.iter().sum::<f64>() / m as f64;
        let gt: Vec<f64> = g.iter().map(|v| v - gmean).collect();
        let gnorm = gt.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !gnorm.is_finite() || gnorm == 0.0 {
            converged = true;
            break;
        }
        // Backtracking along the projected path.
        let mut accepted = None;
        let mut s = step;
        for _ in 0..40 {
            let trial: Vec<f64> = t.iter().zip(&gt).map(|(ti, gi)| ti - s * gi / gnorm).collect();
            let trial = project(&trial, total, lo);
            let dec: f64 = t.iter().zip(&trial).zip(&g).map(|((a, b), gi)| gi * (a - b)).sum();
            let ct = cost(wps, &trial, mu_psi);
            if ct.is_finite() && ct.ln() <= lc - 1e-4 * dec.max(0.0) && ct < c {
                accepted = Some((trial, ct, s));
                break;
            }
            s *= 0.5;
        }
        match accepted {
            Some((trial, ct, s)) => {
                let rel = (c - ct) / c;
                t = trial;
                c = ct;
                step = (2.0 * s).min(cfg.initial_step * mean);
                if rel < cfg.rel_tol {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    // Remove the rounding drift of the projection from the sum.
    let drift = (total - t.iter().sum::<f64>()) / m as f64;
    let adjusted: Vec<f64> = t.iter().map(|v| v + drift).collect();
    let adjusted_cost = cost(wps, &adjusted, mu_psi);
    if adjusted_cost <= c {
        t = adjusted;
        c = adjusted_cost;
    }
    Ok(TimeOptimization {
        allocation: TimeAllocation::new(t)?,
        cost: c,
        initial_cost,
        iterations,
        converged,
    })
}
