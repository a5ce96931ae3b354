use crate::elliptic::Mesh;
use crate::error::{Error, Result};
use crate::kernel::{relaxation_family, KernelPair, RelaxationOptions, TimeGrid};

use super::stepper::run;
use super::{BlowupReport, Nonlinearity, Problem, Trajectory};

/// `W_n = Σ_i ψ_i u_{n,i} Π h` for a trajectory stored at every step.
pub fn kaplan_series(traj: &Trajectory, psi: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    if traj.snapshot_steps.len() != traj.times.len() {
        return Err(Error::Invalid(
            "Kaplan series needs snapshots at every step (stride 1)".into(),
        ));
    }
    if psi.len() != mesh.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.len(),
            got: psi.len(),
        });
    }
    let vol = mesh.cell_volume();
    traj.snapshots
        .iter()
        .map(|u| {
            if u.len() != psi.len() {
                return Err(Error::LengthMismatch {
                    expected: psi.len(),
                    got: u.len(),
                });
            }
            Ok(psi.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() * vol)
        })
        .collect()
}

/// `min_n (C |u_0|_∞ s_{ε1}(t_n) - |u_n|_∞)` on a uniform trajectory.
pub fn decay_envelope_check(traj: &Trajectory, pair: &KernelPair, rate: f64, c: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Invalid(format!("decay rate {rate} must be positive")));
    }
    if !traj.uniform {
        return Err(Error::Invalid("decay envelope needs a uniform trajectory".into()));
    }
    let u0_sup = traj.supnorm[0];
    let steps = traj.times.len() - 1;
    if steps == 0 {
        return Ok(c * u0_sup - u0_sup);
    }
    let grid = TimeGrid::new(traj.times[1], steps)?;
    let fam = relaxation_family(pair, rate, &grid, RelaxationOptions::default())?;
    Ok(fam
        .s
        .iter()
        .zip(&traj.supnorm)
        .map(|(s, sup)| c * u0_sup * s - sup)
        .fold(f64::INFINITY, f64::min))
}

/// `min_{n≥1} (W_n - W_0 exp(κ L(t_n)))` over the available samples.
pub fn instability_lowerbound_check(
    w: &[f64],
    w0: f64,
    kappa: f64,
    pair: &KernelPair,
    grid: &TimeGrid,
) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::Invalid(format!("growth rate {kappa} must be ≥ 0")));
    }
    if w.len() > grid.steps() + 1 {
        return Err(Error::LengthMismatch {
            expected: grid.steps() + 1,
            got: w.len(),
        });
    }
    let mut margin = f64::INFINITY;
    for (n, &wn) in w.iter().enumerate().skip(1) {
        let l = pair.cumulative_l(grid.time(n))?;
        margin = margin.min(wn - w0 * (kappa * l).exp());
    }
    Ok(margin)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowupBound {
    Finite(f64),
    Infinite,
}

impl BlowupBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            BlowupBound::Finite(t) => Some(t),
            BlowupBound::Infinite => None,
        }
    }
}

/// Time `t` with `L(t) = factor · ∫_{u0}^∞ dr/f(r)`.
pub fn blowup_time_bound(
    f: &Nonlinearity,
    pair: &KernelPair,
    u0: f64,
    safety_factor: f64,
) -> Result<BlowupBound> {
    if !(safety_factor > 0.0) {
        return Err(Error::Invalid(format!("safety factor {safety_factor} must be positive")));
    }
    let target = match f.reciprocal_integral_to_infinity(u0)? {
        Some(v) => safety_factor * v,
        None => return Ok(BlowupBound::Infinite),
    };
    let l = |t: f64| pair.cumulative_l(t);
    let mut hi = 1.0;
    while l(hi)? < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(BlowupBound::Infinite);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if l(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BlowupBound::Finite(hi))
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    /// `u_low ≤ u_high + 1e-10` at every common step.
    pub ordered: bool,
    /// `max |u_high - u_low|` over common steps.
    pub max_gap: f64,
    pub low: (Trajectory, BlowupReport),
    pub high: (Trajectory, BlowupReport),
}

/// Runs the problem from two ordered initial data concurrently and compares
/// the trajectories step by step.
pub fn comparison_run(problem: &Problem, u0_low: &[f64], u0_high: &[f64]) -> Result<ComparisonOutcome> {
    if u0_low.len() != u0_high.len() {
        return Err(Error::LengthMismatch {
            expected: u0_low.len(),
            got: u0_high.len(),
        });
    }
    if u0_low.iter().zip(u0_high).any(|(a, b)| a > b) {
        return Err(Error::Invalid("initial data are not ordered".into()));
    }
    let make = |u0: &[f64]| {
        let mut p = problem.clone();
        p.u0 = u0.to_vec();
        p.snapshot_stride = 1;
        p
    };
    let (p_low, p_high) = (make(u0_low), make(u0_high));
    let (low, high) = std::thread::scope(|s| {
        let h = s.spawn(|| run(&p_high));
        let l = run(&p_low);
        (l, h.join().expect("comparison run panicked"))
    });
    let (low, high) = (low?, high?);
    let mut ordered = true;
    let mut max_gap: f64 = 0.0;
    for ((tl, ul), (th, uh)) in low
        .0
        .times
        .iter()
        .zip(&low.0.snapshots)
        .zip(high.0.times.iter().zip(&high.0.snapshots))
    {
        if tl != th {
            break;
        }
        for (a, b) in ul.iter().zip(uh) {
            if *a > b + 1e-10 {
                ordered = false;
            }
            max_gap = max_gap.max((b - a).abs());
        }
    }
    Ok(ComparisonOutcome {
        ordered,
        max_gap,
        low,
        high,
    })
}
