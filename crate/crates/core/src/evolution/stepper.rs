use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::kernel::{dual_k_weights, k_weights, l_weights, KWeightRule};

use super::diagnostics::{blowup_time_bound, BlowupBound};
use super::{
    supnorm, BlowupReport, BlowupStatus, NonlinearMode, Problem, Scheme, Trajectory,
};

/// Runs a scalar problem (no spatial operator).
pub fn run_ode(problem: &Problem) -> Result<(Trajectory, BlowupReport)> {
    if problem.spatial.is_some() {
        return Err(Error::Invalid("run_ode expects a problem without a spatial operator".into()));
    }
    let (traj, mut report) = run(problem)?;
    if problem.forcing.is_none() {
        if let Ok(BlowupBound::Finite(t)) =
            blowup_time_bound(&problem.nonlinearity, &problem.pair, problem.u0[0], 1.0)
        {
            report.theoretical_bound = Some(t);
        }
    }
    Ok((traj, report))
}

/// Runs a problem with a spatial operator.
pub fn run_pde(problem: &Problem) -> Result<(Trajectory, BlowupReport)> {
    if problem.spatial.is_none() {
        return Err(Error::Invalid("run_pde expects a spatial operator".into()));
    }
    run(problem)
}

/// Runs either kind of problem.
pub fn run(problem: &Problem) -> Result<(Trajectory, BlowupReport)> {
    problem.validate()?;
    Stepper::new(problem)?.run()
}

enum Space<'a> {
    Scalar,
    Field(&'a EllipticOperator),
}

impl Space<'_> {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Space::Scalar => out.iter_mut().for_each(|o| *o = 0.0),
            Space::Field(op) => op.apply_into(u, out),
        }
    }

    fn solve_diag(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Space::Scalar => shift
                .iter()
                .zip(rhs)
                .map(|(&s, &r)| {
                    if s > 0.0 && s.is_finite() {
                        Ok(r / s)
                    } else {
                        Err(Error::StepSize { pivot: s })
                    }
                })
                .collect(),
            Space::Field(op) => op.solve_with_diagonal_shift(shift, rhs),
        }
    }
}

/// Weights for the uniform part of the run.
enum UniformWeights {
    /// `b_{n-1}` for `u_0` and `d_m = b_m - b_{m+1}` for the history.
    K { b: Vec<f64>, diffs: Vec<f64> },
    L { w: Vec<f64> },
}

struct Stepper<'a> {
    p: &'a Problem,
    space: Space<'a>,
    weights: UniformWeights,
    zero_forcing: Vec<f64>,
    // accepted history
    times: Vec<f64>,
    fields: Vec<Vec<f64>>,
    // l-form history of f-term minus L_h u
    g_hist: Vec<Vec<f64>>,
    uniform: bool,
    traj: Trajectory,
}

enum Attempt {
    Accepted(Vec<f64>, Vec<f64>),
    Rejected,
}

impl<'a> Stepper<'a> {
    fn new(p: &'a Problem) -> Result<Self> {
        let space = match &p.spatial {
            Some(op) => Space::Field(op),
            None => Space::Scalar,
        };
        let weights = match p.scheme {
            Scheme::KForm => {
                let b = match p.k_rule {
                    KWeightRule::Dual => dual_k_weights(&l_weights(&p.pair, &p.grid)?)?,
                    KWeightRule::Cumulative => k_weights(&p.pair, &p.grid)?,
                }
                .values()
                .to_vec();
                let diffs = b.windows(2).map(|w| w[0] - w[1]).collect();
                UniformWeights::K { b, diffs }
            }
            Scheme::LForm => UniformWeights::L {
                w: l_weights(&p.pair, &p.grid)?.values().to_vec(),
            },
        };
        let u0 = p.u0.clone();
        let kaplan = p.kaplan_weights.as_ref().map(|psi| vec![kaplan_value(p, psi, &u0)]);
        let traj = Trajectory {
            times: vec![0.0],
            supnorm: vec![supnorm(&u0)],
            snapshot_stride: p.snapshot_stride,
            snapshot_steps: vec![0],
            snapshots: vec![u0.clone()],
            kaplan,
            uniform: true,
        };
        Ok(Self {
            p,
            space,
            weights,
            zero_forcing: vec![0.0; u0.len()],
            times: vec![0.0],
            fields: vec![u0],
            g_hist: vec![Vec::new()],
            uniform: true,
            traj,
        })
    }

    fn forcing(&self) -> &[f64] {
        self.p.forcing.as_deref().unwrap_or(&self.zero_forcing)
    }

    fn run(mut self) -> Result<(Trajectory, BlowupReport)> {
        let tau = self.p.grid.step();
        let horizon = self.p.grid.horizon();
        let n_steps = self.p.grid.steps();
        let mut dt = tau;
        let mut halvings = 0usize;
        let mut successes_since_halving = 0usize;
        let mut bracket = None;
        loop {
            let n = self.times.len();
            let t_acc = *self.times.last().expect("nonempty");
            let on_uniform = self.uniform && dt == tau;
            if on_uniform && n > n_steps {
                break;
            }
            if !on_uniform && t_acc >= horizon - 1e-9 * tau {
                break;
            }
            let (t_new, step) = if on_uniform {
                (self.p.grid.time(n), tau)
            } else {
                let step = dt.min(horizon - t_acc);
                (t_acc + step, step)
            };
            if t_new <= t_acc {
                // The step fell below one ulp of t: keep the bracket open.
                let ulp = t_acc.abs().max(f64::MIN_POSITIVE) * f64::EPSILON;
                bracket = Some((t_acc, t_acc + ulp.max(step)));
                break;
            }
            match self.attempt(t_new, step, on_uniform)? {
                Attempt::Accepted(u, g) => {
                    let sup = supnorm(&u);
                    if sup > self.p.blowup_threshold {
                        bracket = Some((t_acc, t_new));
                        break;
                    }
                    if !on_uniform {
                        self.uniform = false;
                    }
                    self.accept(t_new, u, g);
                    halvings = 0;
                    successes_since_halving += 1;
                    if dt < tau && successes_since_halving >= 2 {
                        dt = (2.0 * dt).min(tau);
                        successes_since_halving = 0;
                    }
                }
                Attempt::Rejected => {
                    if halvings >= self.p.max_halvings {
                        bracket = Some((t_acc, t_new));
                        break;
                    }
                    halvings += 1;
                    successes_since_halving = 0;
                    dt = 0.5 * step;
                }
            }
        }
        let last = self.fields.len() - 1;
        if self.traj.snapshot_steps.last() != Some(&last) {
            self.traj.snapshot_steps.push(last);
            self.traj.snapshots.push(self.fields[last].clone());
        }
        self.traj.uniform = self.uniform;
        let report = BlowupReport {
            status: if bracket.is_some() {
                BlowupStatus::Blowup
            } else {
                BlowupStatus::CompletedHorizon
            },
            t_star_bracket: bracket,
            theoretical_bound: None,
            threshold: self.p.blowup_threshold,
        };
        Ok((self.traj, report))
    }

    fn accept(&mut self, t: f64, u: Vec<f64>, g: Vec<f64>) {
        let n = self.fields.len();
        self.traj.times.push(t);
        self.traj.supnorm.push(supnorm(&u));
        if let (Some(w), Some(psi)) = (self.traj.kaplan.as_mut(), self.p.kaplan_weights.as_ref()) {
            w.push(kaplan_value(self.p, psi, &u));
        }
        if n % self.p.snapshot_stride == 0 {
            self.traj.snapshot_steps.push(n);
            self.traj.snapshots.push(u.clone());
        }
        self.times.push(t);
        self.fields.push(u);
        self.g_hist.push(g);
    }

    /// One implicit step to `t_new`. Solver failures and excessive growth
    /// reject the step; domain escapes are hard errors.
    fn attempt(&self, t_new: f64, dt: f64, uniform: bool) -> Result<Attempt> {
        let (sigma, rhs) = self.assemble(t_new, dt, uniform);
        let prev = self.fields.last().expect("nonempty");
        let implicit = self.p.nonlinear_mode == NonlinearMode::Newton;
        let rhs = if implicit {
            rhs
        } else {
            let fp = self.f_term(prev)?;
            rhs.iter().zip(&fp).map(|(r, f)| r + f).collect()
        };
        let solved = if implicit {
            self.newton(sigma, &rhs, prev)
        } else {
            self.space.solve_diag(&vec![sigma; rhs.len()], &rhs)
        };
        let u = match solved {
            Ok(u) if u.iter().all(|v| v.is_finite()) => u,
            Ok(_) => return Ok(Attempt::Rejected),
            Err(Error::NonlinearDomain { value }) => return Err(Error::NonlinearDomain { value }),
            Err(_) => return Ok(Attempt::Rejected),
        };
        let prev_sup = supnorm(prev);
        if supnorm(&u) > self.p.max_growth_per_step * prev_sup.max(1.0) {
            return Ok(Attempt::Rejected);
        }
        let g = if self.p.scheme == Scheme::LForm {
            let f_used = if implicit { self.f_term(&u)? } else { self.f_term(prev)? };
            let mut lu = vec![0.0; u.len()];
            self.space.apply(&u, &mut lu);
            f_used.iter().zip(&lu).map(|(f, l)| f - l).collect()
        } else {
            Vec::new()
        };
        Ok(Attempt::Accepted(u, g))
    }

    /// `f(u) + g`; a NaN from finite input is a domain escape.
    fn f_term(&self, u: &[f64]) -> Result<Vec<f64>> {
        let f = &self.p.nonlinearity;
        u.iter()
            .zip(self.forcing())
            .map(|(&x, &g)| {
                let v = f.value(x) + g;
                if v.is_nan() && x.is_finite() {
                    Err(Error::NonlinearDomain { value: x })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }

    /// Returns `(σ, r)` so that the step reads `(σ I + L_h) u - f(u) = r`.
    fn assemble(&self, t_new: f64, dt: f64, uniform: bool) -> (f64, Vec<f64>) {
        let n = self.fields.len();
        let m = self.fields[0].len();
        let u0 = &self.fields[0];
        let mut rhs = vec![0.0; m];
        match (self.p.scheme, uniform, &self.weights) {
            (Scheme::KForm, true, UniformWeights::K { b, diffs }) => {
                // b_{n-1} u_0 + Σ_{j=1}^{n-1} (b_{n-j-1} - b_{n-j}) u_j
                axpy(b[n - 1], u0, &mut rhs);
                for j in 1..n {
                    axpy(diffs[n - j - 1], &self.fields[j], &mut rhs);
                }
                (b[0], rhs)
            }
            (Scheme::LForm, true, UniformWeights::L { w }) => {
                rhs.copy_from_slice(u0);
                for j in 1..n {
                    axpy(w[n - j], &self.g_hist[j], &mut rhs);
                }
                let inv = 1.0 / w[0];
                rhs.iter_mut().for_each(|v| *v *= inv);
                (inv, rhs)
            }
            (Scheme::KForm, _, _) => {
                // B_j = (1/Δ_j) ∫_{t_{j-1}}^{t_j} k(t_new - s) ds
                let pair = &self.p.pair;
                let b_last = pair.integral_k(0.0, dt) / dt;
                axpy(b_last, &self.fields[n - 1], &mut rhs);
                for j in 1..n {
                    let (a, c) = (self.times[j - 1], self.times[j]);
                    let bj = pair.integral_k(t_new - c, t_new - a) / (c - a);
                    for i in 0..m {
                        rhs[i] -= bj * (self.fields[j][i] - self.fields[j - 1][i]);
                    }
                }
                (b_last, rhs)
            }
            (Scheme::LForm, _, _) => {
                let pair = &self.p.pair;
                rhs.copy_from_slice(u0);
                for j in 1..n {
                    let (a, c) = (self.times[j - 1], self.times[j]);
                    axpy(pair.integral_l(t_new - c, t_new - a), &self.g_hist[j], &mut rhs);
                }
                let inv = 1.0 / pair.integral_l(0.0, dt);
                rhs.iter_mut().for_each(|v| *v *= inv);
                (inv, rhs)
            }
        }
    }

    /// Damped Newton for `σ u + L_h u - f(u) - g = r`.
    fn newton(&self, sigma: f64, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let f = &self.p.nonlinearity;
        let m = rhs.len();
        let mut u = guess.to_vec();
        let mut res = vec![0.0; m];
        let mut res_norm = self.residual(sigma, rhs, &u, &mut res)?;
        let mut trial_res = vec![0.0; m];
        for _ in 0..60 {
            if res_norm == 0.0 {
                return Ok(u);
            }
            let shift: Vec<f64> = u.iter().map(|&x| sigma - f.derivative(x)).collect();
            let neg: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = self.space.solve_diag(&shift, &neg)?;
            let scale = supnorm(&u).max(1.0);
            let step_norm = supnorm(&delta);
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                let trial_norm = self.residual(sigma, rhs, &trial, &mut trial_res)?;
                let small_step = lambda * step_norm <= 1e-8 * scale;
                if trial_norm.is_finite()
                    && (trial_norm <= (1.0 - 1e-4 * lambda) * res_norm || small_step)
                {
                    u = trial;
                    std::mem::swap(&mut res, &mut trial_res);
                    res_norm = trial_norm;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-3 {
                    return Err(Error::NoConvergence {
                        what: "damped Newton line search",
                        iterations: 10,
                    });
                }
            }
            if lambda * step_norm <= self.p.newton_tol * scale {
                return Ok(u);
            }
        }
        Err(Error::NoConvergence {
            what: "damped Newton",
            iterations: 60,
        })
    }

    fn residual(&self, sigma: f64, rhs: &[f64], u: &[f64], out: &mut [f64]) -> Result<f64> {
        self.space.apply(u, out);
        let fu = self.f_term(u)?;
        let mut norm: f64 = 0.0;
        for i in 0..u.len() {
            out[i] += sigma * u[i] - fu[i] - rhs[i];
            norm = norm.max(out[i].abs());
        }
        Ok(if norm.is_nan() { f64::INFINITY } else { norm })
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn kaplan_value(p: &Problem, psi: &[f64], u: &[f64]) -> f64 {
    let vol = p.spatial.as_ref().map_or(1.0, |op| op.mesh().cell_volume());
    psi.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() * vol
}
