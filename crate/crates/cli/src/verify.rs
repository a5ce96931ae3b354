//! The acceptance suite run by `subdiff verify`.
//!
//! Criteria 1 to 15 each compute one or more scalar checks and a CSV table.
//! Criterion 16 recomputes all of them and compares the rendered CSV bytes
//! with the first pass.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use subdiff_core::evolution::{
    comparison_run, decay_envelope_check, instability_lowerbound_check, kaplan_series, run_ode, run_pde,
};
use subdiff_core::kernel::{check_convexity_inequality, relaxation_family, verify_pair};
use subdiff_core::special::{gamma, mittag_leffler_neg};
use subdiff_core::{
    CoefficientField, EllipticOperator, KernelPair, Mesh, Nonlinearity, Problem, Scheme, TimeGrid, Trajectory,
};

use crate::commands::log_space;
use crate::csv_out::{Cell, Table};
use crate::error::CliError;

/// Seed for every random field used by the suite.
pub const SEED: u64 = 42;

pub const TITLES: [&str; 16] = [
    "kernel identity",
    "mittag-leffler sandwich",
    "relaxation oracle",
    "ultraslow decay",
    "discrete maximum principle",
    "comparison principle",
    "positivity",
    "linear decay exact solution",
    "stability envelope",
    "instability lower bound",
    "ode blowup bound",
    "dichotomy of l",
    "pde kaplan blowup",
    "scheme cross-validation",
    "convexity inequality",
    "determinism",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Below(f64),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:e}"),
            Bound::AtLeast(b) => write!(f, ">= {b:e}"),
            Bound::Below(b) => write!(f, "< {b:e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub got: f64,
    pub bound: Bound,
}

impl Check {
    pub fn new(label: impl Into<String>, got: f64, bound: Bound) -> Self {
        Self {
            label: label.into(),
            got,
            bound,
        }
    }

    // NaN compares false everywhere, so it never passes.
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(b) => self.got <= b,
            Bound::AtLeast(b) => self.got >= b,
            Bound::Below(b) => self.got < b,
        }
    }

    // Signed distance to the bound relative to its scale; negative on failure.
    fn slack(&self) -> f64 {
        let (s, b) = match self.bound {
            Bound::AtMost(b) | Bound::Below(b) => (b - self.got, b),
            Bound::AtLeast(b) => (self.got - b, b),
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s / b.abs().max(1e-300)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Set when the computation itself failed.
    pub error: Option<String>,
}

impl Outcome {
    pub fn title(&self) -> &'static str {
        TITLES[self.id as usize - 1]
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    /// One human-readable line: status, id, title and the tightest check.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let head = format!("{status} #{:02} {}", self.id, self.title());
        if let Some(e) = &self.error {
            return format!("{head}: error: {e}");
        }
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        match self
            .checks
            .iter()
            .min_by(|a, b| a.slack().total_cmp(&b.slack()))
        {
            Some(c) => format!(
                "{head}: {passed}/{} checks; tightest: {} = {:e} (required {})",
                self.checks.len(),
                c.label,
                c.got,
                c.bound
            ),
            None => format!("{head}: no checks"),
        }
    }

    /// Machine-readable records for the failing checks.
    pub fn failure_records(&self) -> Vec<String> {
        if let Some(e) = &self.error {
            return vec![format!("failure id={} check=error message={e:?}", self.id)];
        }
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| {
                let tol = match c.bound {
                    Bound::AtMost(b) | Bound::AtLeast(b) | Bound::Below(b) => b,
                };
                format!(
                    "failure id={} check={:?} expected={:?} got={:e} tolerance={tol:e}",
                    self.id,
                    c.label,
                    c.bound.to_string(),
                    c.got
                )
            })
            .collect()
    }

    fn from_result(id: u8, r: Result<(Vec<Check>, Vec<Table>), CliError>) -> Self {
        match r {
            Ok((checks, tables)) => Outcome {
                id,
                checks,
                tables,
                error: None,
            },
            Err(e) => Outcome {
                id,
                checks: Vec::new(),
                tables: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub outcomes: Vec<Outcome>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(Outcome::passed)
    }
}

type Criterion = (Vec<Check>, Vec<Table>);

/// Runs criterion `id` (1 to 15).
pub fn run_criterion(id: u8) -> Outcome {
    let r = match id {
        1 => kernel_identity(),
        2 => ml_sandwich(),
        3 => relaxation_oracle(),
        4 => ultraslow_decay(),
        5 => maximum_principle(),
        6 => comparison(),
        7 => positivity(),
        8 => linear_decay(),
        9 => stability_envelope(),
        10 => instability_bound(),
        11 => ode_blowup(),
        12 => dichotomy(),
        13 => kaplan_blowup(),
        14 => scheme_cross_validation(),
        15 => convexity(),
        _ => Err(CliError::Io(std::io::Error::other(format!("no criterion {id}")))),
    };
    Outcome::from_result(id, r)
}

/// Criteria 1 to 15, run on the pool, in id order.
pub fn run_checks(pool: &rayon::ThreadPool) -> Vec<Outcome> {
    pool.install(|| (1..=15u8).into_par_iter().map(run_criterion).collect())
}

fn artifact_name(o: &Outcome, t: &Table) -> String {
    format!("c{:02}_{}.csv", o.id, t.name)
}

fn write_tables(dir: &Path, outcomes: &[Outcome]) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for o in outcomes {
        for t in &o.tables {
            let name = artifact_name(o, t);
            fs::write(dir.join(&name), t.render()?)?;
            names.push(name);
        }
    }
    Ok(names)
}

/// Runs the whole suite twice, writes the first pass to `dir`, and records
/// in criterion 16 whether the second pass rendered identical bytes.
pub fn run_suite(dir: &Path, pool: &rayon::ThreadPool) -> Result<SuiteReport, CliError> {
    let first = run_checks(pool);
    let names = write_tables(dir, &first)?;
    let second = run_checks(pool);
    let mut rerun: Vec<(String, Vec<u8>)> = Vec::new();
    for o in &second {
        for t in &o.tables {
            rerun.push((artifact_name(o, t), t.render()?));
        }
    }
    let mut differing = 0usize;
    let mut table = Table::new("determinism", &["artifact", "identical"]);
    for name in &names {
        let on_disk = fs::read(dir.join(name))?;
        let same = rerun.iter().any(|(n, bytes)| n == name && *bytes == on_disk);
        differing += usize::from(!same);
        table.push(vec![name.as_str().into(), same.into()]);
    }
    differing += rerun.len().abs_diff(names.len());
    let mut checks = vec![Check::new("differing artifacts", differing as f64, Bound::AtMost(0.0))];
    checks.push(Check::new("artifacts compared", names.len() as f64, Bound::AtLeast(15.0)));
    let det = Outcome {
        id: 16,
        checks,
        tables: vec![table],
        error: None,
    };
    write_tables(dir, std::slice::from_ref(&det))?;

    let mut outcomes = first;
    outcomes.push(det);
    let mut summary = Table::new("summary", &["id", "title", "passed", "checks", "failed_checks"]);
    for o in &outcomes {
        summary.push(vec![
            (o.id as usize).into(),
            o.title().into(),
            o.passed().into(),
            o.checks.len().into(),
            o.checks.iter().filter(|c| !c.passed()).count().into(),
        ]);
    }
    fs::write(dir.join("summary.csv"), summary.render()?)?;
    Ok(SuiteReport { outcomes })
}

fn frac(alpha: f64) -> Result<KernelPair, CliError> {
    Ok(KernelPair::fractional(alpha)?)
}

fn grid(tau: f64, horizon: f64) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::with_horizon(tau, horizon)?)
}

fn unit_operator(n: usize) -> Result<Arc<EllipticOperator>, CliError> {
    let mesh = Mesh::interval(1.0, n)?;
    let coeff = CoefficientField::constant(&mesh, 1.0)?;
    Ok(Arc::new(EllipticOperator::assemble(&mesh, &coeff)?))
}

fn sine(mesh: &Mesh, amplitude: f64) -> Vec<f64> {
    mesh.sample(|x| amplitude * (PI * x[0]).sin())
}

fn bump(mesh: &Mesh, height: f64) -> Vec<f64> {
    mesh.sample(|x| if (0.3..=0.7).contains(&x[0]) { height } else { 0.0 })
}

fn random_field(len: usize, lo: f64, hi: f64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    rng.set_stream(stream);
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn stride_rows(len: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |n| n % every == 0 || *n + 1 == len)
}

fn kernel_identity() -> Result<Criterion, CliError> {
    let mut checks = Vec::new();
    let mut t = Table::new("kernel_identity", &["alpha", "tau", "deviation"]);
    for alpha in [0.25, 0.5, 0.75] {
        let pair = frac(alpha)?;
        let g = grid(1e-4, 1.0)?;
        let d = verify_pair(&pair, &g, 0.1)?;
        let fine = g.refined();
        let d_half = verify_pair(&pair, &fine, 0.1)?;
        t.push(vec![alpha.into(), g.step().into(), d.into()]);
        t.push(vec![alpha.into(), fine.step().into(), d_half.into()]);
        checks.push(Check::new(format!("deviation alpha={alpha}"), d, Bound::AtMost(2e-2)));
        checks.push(Check::new(format!("halving ratio alpha={alpha}"), d_half / d, Bound::AtMost(0.9)));
    }
    Ok((checks, vec![t]))
}

fn ml_sandwich() -> Result<Criterion, CliError> {
    let mut t = Table::new("ml_sandwich", &["alpha", "x", "ml", "lower", "upper"]);
    let (mut lower_gap, mut upper_gap) = (f64::INFINITY, f64::INFINITY);
    let mut increases = 0usize;
    for alpha in [0.3, 0.5, 0.7] {
        let (ga, gb) = (gamma(1.0 - alpha)?, gamma(1.0 + alpha)?);
        let mut prev = f64::INFINITY;
        for x in log_space(1e-3, 1e3, 40) {
            let e = mittag_leffler_neg(alpha, x)?;
            let lower = 1.0 / (1.0 + ga * x);
            let upper = 1.0 / (1.0 + x / gb);
            lower_gap = lower_gap.min(e - lower);
            upper_gap = upper_gap.min(upper - e);
            increases += usize::from(e >= prev);
            prev = e;
            t.push(vec![alpha.into(), x.into(), e.into(), lower.into(), upper.into()]);
        }
    }
    let checks = vec![
        Check::new("points", t.rows.len() as f64, Bound::AtLeast(120.0)),
        Check::new("min(E - lower)", lower_gap, Bound::AtLeast(-1e-9)),
        Check::new("min(upper - E)", upper_gap, Bound::AtLeast(-1e-9)),
        Check::new("non-decreasing steps", increases as f64, Bound::AtMost(0.0)),
    ];
    Ok((checks, vec![t]))
}

fn relaxation_oracle() -> Result<Criterion, CliError> {
    let pair = frac(0.5)?;
    let g = grid(1e-4, 1.0)?;
    let mut checks = Vec::new();
    let mut t = Table::new("relaxation_oracle", &["mu", "t", "s", "ml"]);
    for mu in [0.5, 1.0, 2.0] {
        let fam = relaxation_family(&pair, mu, &g, Default::default())?;
        let mut worst: f64 = 0.0;
        for (n, s) in fam.s.iter().enumerate() {
            let tn = g.time(n);
            let e = mittag_leffler_neg(0.5, mu * tn.sqrt())?;
            worst = worst.max((s - e).abs());
            if n % 500 == 0 {
                t.push(vec![mu.into(), tn.into(), (*s).into(), e.into()]);
            }
        }
        checks.push(Check::new(format!("max |s - E| mu={mu}"), worst, Bound::AtMost(1e-3)));
    }
    Ok((checks, vec![t]))
}

fn ultraslow_decay() -> Result<Criterion, CliError> {
    let pair = KernelPair::distributed_order()?;
    let g = grid(0.1, 1000.0)?;
    let fam = relaxation_family(&pair, 1.0, &g, Default::default())?;
    let mut t = Table::new("ultraslow_decay", &["t", "s", "bound"]);
    let mut worst = f64::NEG_INFINITY;
    for (n, s) in fam.s.iter().enumerate() {
        let tn = g.time(n);
        if tn < 10.0 - 1e-9 {
            continue;
        }
        let bound = 1.05 / (1.0 + 0.5 * tn.ln());
        worst = worst.max(s - bound);
        if n % 100 == 0 {
            t.push(vec![tn.into(), (*s).into(), bound.into()]);
        }
    }
    Ok((vec![Check::new("max(s - bound) on [10, 1000]", worst, Bound::AtMost(0.0))], vec![t]))
}

fn field_extremes(traj: &Trajectory) -> (f64, f64) {
    traj.snapshots
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn maximum_principle() -> Result<Criterion, CliError> {
    let op = unit_operator(99)?;
    let mesh = op.mesh().clone();
    let shapes = [
        ("bump", bump(&mesh, 1.0)),
        ("signed_sine", mesh.sample(|x| (2.0 * PI * x[0]).sin())),
        ("random", random_field(mesh.len(), -1.0, 2.0, 5)),
    ];
    let pairs = [("fractional", frac(0.5)?), ("distributed", KernelPair::distributed_order()?)];
    let mut checks = Vec::new();
    let mut t = Table::new("maximum_principle", &["pair", "shape", "bound_low", "bound_high", "min_u", "max_u"]);
    for (pname, pair) in &pairs {
        for (sname, u0) in &shapes {
            let p = Problem::pde(pair.clone(), grid(1e-2, 1.0)?, op.clone(), Nonlinearity::zero(), u0.clone());
            let (traj, _) = run_pde(&p)?;
            let lo = u0.iter().copied().fold(0.0, f64::min);
            let hi = u0.iter().copied().fold(0.0, f64::max);
            let (min_u, max_u) = field_extremes(&traj);
            checks.push(Check::new(format!("{pname}/{sname} min u - lower"), min_u - lo, Bound::AtLeast(-1e-10)));
            checks.push(Check::new(format!("{pname}/{sname} upper - max u"), hi - max_u, Bound::AtLeast(-1e-10)));
            t.push(vec![(*pname).into(), (*sname).into(), lo.into(), hi.into(), min_u.into(), max_u.into()]);
        }
    }
    Ok((checks, vec![t]))
}

fn comparison() -> Result<Criterion, CliError> {
    let op = unit_operator(99)?;
    let mesh = op.mesh().clone();
    let low_sine = sine(&mesh, 0.3);
    let high_sine: Vec<f64> = low_sine.iter().map(|v| v + 0.5).collect();
    let low_rand = random_field(mesh.len(), -1.0, 1.0, 6);
    let high_rand: Vec<f64> = low_rand
        .iter()
        .zip(random_field(mesh.len(), 0.0, 0.5, 7))
        .map(|(a, d)| a + d)
        .collect();
    let n = mesh.len();
    let scenarios: Vec<(&str, KernelPair, Nonlinearity, Vec<f64>, Vec<f64>)> = vec![
        ("zero_reaction_shift", frac(0.5)?, Nonlinearity::zero(), low_sine, high_sine),
        (
            "linear_damping_random",
            KernelPair::distributed_order()?,
            Nonlinearity::Linear { c: -2.0 },
            low_rand,
            high_rand,
        ),
        ("quadratic_small_data", frac(0.5)?, Nonlinearity::Quadratic, vec![0.02; n], vec![0.05; n]),
    ];
    let mut checks = Vec::new();
    let mut t = Table::new("comparison", &["scenario", "min_difference", "max_gap", "initial_gap"]);
    for (name, pair, f, low, high) in scenarios {
        let p = Problem::pde(pair, grid(1e-2, 1.0)?, op.clone(), f, low.clone());
        let out = comparison_run(&p, &low, &high)?;
        let mut min_diff = f64::INFINITY;
        for ((tl, ul), (th, uh)) in out
            .low
            .0
            .times
            .iter()
            .zip(&out.low.0.snapshots)
            .zip(out.high.0.times.iter().zip(&out.high.0.snapshots))
        {
            if tl != th {
                break;
            }
            for (a, b) in ul.iter().zip(uh) {
                min_diff = min_diff.min(b - a);
            }
        }
        let initial_gap = low.iter().zip(&high).map(|(a, b)| b - a).fold(0.0, f64::max);
        checks.push(Check::new(format!("{name} min(u_high - u_low)"), min_diff, Bound::AtLeast(-1e-10)));
        if name == "zero_reaction_shift" {
            checks.push(Check::new(
                format!("{name} max gap - initial gap"),
                out.max_gap - initial_gap,
                Bound::AtMost(1e-10),
            ));
        }
        t.push(vec![name.into(), min_diff.into(), out.max_gap.into(), initial_gap.into()]);
    }
    Ok((checks, vec![t]))
}

fn positivity() -> Result<Criterion, CliError> {
    let op = unit_operator(99)?;
    let mesh = op.mesh().clone();
    let scenarios = [
        ("nsy_bump", frac(0.5)?, Nonlinearity::Nsy, bump(&mesh, 0.5)),
        (
            "source_from_zero",
            KernelPair::fractional_exp(0.5, 1.0)?,
            Nonlinearity::Polynomial { coeffs: vec![0.1, -2.0] },
            vec![0.0; mesh.len()],
        ),
    ];
    let mut checks = Vec::new();
    let mut t = Table::new("positivity", &["scenario", "min_u", "max_u"]);
    for (name, pair, f, u0) in scenarios {
        let p = Problem::pde(pair, grid(1e-2, 1.0)?, op.clone(), f, u0);
        let (traj, _) = run_pde(&p)?;
        let (min_u, max_u) = field_extremes(&traj);
        checks.push(Check::new(format!("{name} min u"), min_u, Bound::AtLeast(-1e-10)));
        t.push(vec![name.into(), min_u.into(), max_u.into()]);
    }
    Ok((checks, vec![t]))
}

// Midpoint value at t = 1 of the linear decay problem.
fn linear_decay_midpoint(op: &Arc<EllipticOperator>, tau: f64, scheme: Scheme) -> Result<(Trajectory, f64), CliError> {
    let u0 = sine(op.mesh(), 1.0);
    let mut p = Problem::pde(frac(0.5)?, grid(tau, 1.0)?, op.clone(), Nonlinearity::Linear { c: 5.0 }, u0);
    p.scheme = scheme;
    let (traj, _) = run_pde(&p)?;
    let mid = traj.last_snapshot()[op.len() / 2];
    Ok((traj, mid))
}

fn linear_decay() -> Result<Criterion, CliError> {
    let op = unit_operator(199)?;
    let exact = mittag_leffler_neg(0.5, PI * PI - 5.0)?;
    // The semi-discrete solution E(-(λ_h - c) t^α) sin(πx_i) isolates the
    // time-stepping error for the order estimate.
    let lambda_h = op.principal_eigenpair()?.0;
    let semi = mittag_leffler_neg(0.5, lambda_h - 5.0)?;
    let mut t = Table::new(
        "linear_decay",
        &["tau", "u_mid", "exact", "rel_error", "semi_discrete", "time_error"],
    );
    let mut errs = Vec::new();
    let mut rel = Vec::new();
    for tau in [1e-3, 5e-4] {
        let (_, mid) = linear_decay_midpoint(&op, tau, Scheme::KForm)?;
        let r = ((mid - exact) / exact).abs();
        let e = (mid - semi).abs();
        rel.push(r);
        errs.push(e);
        t.push(vec![tau.into(), mid.into(), exact.into(), r.into(), semi.into(), e.into()]);
    }
    let order = (errs[0] / errs[1]).log2();
    let checks = vec![
        Check::new("relative error at tau=1e-3", rel[0], Bound::AtMost(2e-2)),
        Check::new("observed order under halving", order, Bound::AtLeast(0.4)),
    ];
    Ok((checks, vec![t]))
}

fn stability_envelope() -> Result<Criterion, CliError> {
    let op = unit_operator(199)?;
    let lambda = op.principal_eigenpair()?.0;
    let pair = frac(0.5)?;
    let g = grid(1e-2, 10.0)?;
    let p = Problem::pde(pair.clone(), g.clone(), op.clone(), Nonlinearity::Quadratic, vec![0.05; op.len()]);
    let (traj, report) = run_pde(&p)?;
    let sup_at = |t: f64| {
        let n = ((t / g.step()).round() as usize).min(traj.supnorm.len() - 1);
        traj.supnorm[n]
    };
    let (sup1, sup10) = (sup_at(1.0), sup_at(10.0));
    let margin = decay_envelope_check(&traj, &pair, 0.5 * lambda, 1.1)?;
    let mut t = Table::new("stability_envelope", &["t", "supnorm"]);
    for n in stride_rows(traj.times.len(), 10) {
        t.push(vec![traj.times[n].into(), traj.supnorm[n].into()]);
    }
    let checks = vec![
        Check::new("blowup declared", f64::from(u8::from(report.blew_up())), Bound::AtMost(0.0)),
        Check::new("final time", traj.final_time(), Bound::AtLeast(10.0 - 1e-9)),
        Check::new("supnorm(10) - supnorm(1)", sup10 - sup1, Bound::Below(0.0)),
        Check::new("envelope margin", margin, Bound::AtLeast(0.0)),
    ];
    Ok((checks, vec![t]))
}

fn instability_bound() -> Result<Criterion, CliError> {
    let op = unit_operator(199)?;
    let (lambda, psi) = op.principal_eigenpair()?;
    let psi = psi.to_vec();
    let pair = frac(0.5)?;
    let g = grid(1e-4, 0.1)?;
    let mut p = Problem::pde(
        pair.clone(),
        g.clone(),
        op.clone(),
        Nonlinearity::Linear { c: 15.0 },
        vec![0.01; op.len()],
    );
    p.kaplan_weights = Some(psi);
    let (traj, _) = run_pde(&p)?;
    let w = traj.kaplan.clone().unwrap_or_default();
    let kappa = 15.0 - lambda;
    let margin = instability_lowerbound_check(&w, w[0], kappa, &pair, &g)?;
    let mut t = Table::new("instability_bound", &["t", "W", "lower_bound"]);
    for n in stride_rows(w.len(), 50) {
        let tn = traj.times[n];
        let bound = w[0] * (kappa * pair.cumulative_l(tn)?).exp();
        t.push(vec![tn.into(), w[n].into(), bound.into()]);
    }
    let checks = vec![
        Check::new("steps covered", (w.len() - 1) as f64, Bound::AtLeast(g.steps() as f64)),
        Check::new("min(W - W0 exp(kappa L))", margin, Bound::AtLeast(-1e-4)),
    ];
    Ok((checks, vec![t]))
}

fn ode_blowup() -> Result<Criterion, CliError> {
    let pair = frac(0.5)?;
    let g15 = gamma(1.5)?;
    let mut checks = Vec::new();
    let mut t = Table::new("ode_blowup", &["u0", "t_low", "t_high", "limit"]);
    for u0 in [1.0, 2.0, 5.0] {
        let p = Problem::ode(pair.clone(), grid(1e-4, 1.0)?, Nonlinearity::Quadratic, u0);
        let (_, report) = run_ode(&p)?;
        let limit = (g15 / u0).powi(2) * 1.02;
        let (lo, hi) = report.t_star_bracket.unwrap_or((f64::INFINITY, f64::INFINITY));
        checks.push(Check::new(format!("t_high u0={u0}"), hi, Bound::AtMost(limit)));
        t.push(vec![u0.into(), lo.min(f64::MAX).into(), hi.min(f64::MAX).into(), limit.into()]);
    }
    Ok((checks, vec![t]))
}

fn dichotomy() -> Result<Criterion, CliError> {
    let pair = KernelPair::fractional_exp(0.5, 1.0)?;
    let horizon = 20.0;
    let g = grid(1e-2, horizon)?;
    let l_t = pair.cumulative_l(horizon)?;
    let small = 0.05 / l_t;
    let run = |u0: f64| -> Result<_, CliError> {
        let p = Problem::ode(pair.clone(), g.clone(), Nonlinearity::Quadratic, u0);
        Ok(run_ode(&p)?)
    };
    let mut checks = Vec::new();
    let mut t = Table::new("dichotomy", &["u0", "blowup", "t_high", "bound"]);

    let (traj, report) = run(small)?;
    checks.push(Check::new(
        "small datum blowup declared",
        f64::from(u8::from(report.blew_up())),
        Bound::AtMost(0.0),
    ));
    checks.push(Check::new("small datum final time", traj.final_time(), Bound::AtLeast(horizon - 1e-9)));
    t.push(vec![small.into(), false.into(), Cell::S(String::new()), Cell::S(String::new())]);

    // 1/u0 < L(T) for both; 0.05 shows that with l not integrable even a
    // datum of the small run's order eventually blows up.
    for u0 in [1.0, 0.05] {
        let (_, report) = run(u0)?;
        let bound = report.theoretical_bound.unwrap_or(f64::INFINITY);
        let hi = report.t_high().unwrap_or(f64::INFINITY);
        checks.push(Check::new(format!("t_high u0={u0}"), hi, Bound::AtMost(1.02 * bound)));
        t.push(vec![
            u0.into(),
            report.blew_up().into(),
            hi.min(f64::MAX).into(),
            bound.min(f64::MAX).into(),
        ]);
    }
    Ok((checks, vec![t]))
}

fn kaplan_blowup() -> Result<Criterion, CliError> {
    let op = unit_operator(99)?;
    let (lambda, psi) = op.principal_eigenpair()?;
    let psi = psi.to_vec();
    let pair = frac(0.5)?;
    let g = grid(1e-5, 0.01)?;
    let mut p = Problem::pde(pair.clone(), g.clone(), op.clone(), Nonlinearity::Quadratic, vec![25.0; op.len()]);
    p.kaplan_weights = Some(psi.clone());
    let (traj, report) = run_pde(&p)?;
    let w = kaplan_series(&traj, &psi, op.mesh())?;
    // W solves D W ≥ -λ W + W² ≥ W²/2 while W ≥ 2λ, so the ODE with f = v²/2
    // from v_0 = W_0 is a lower bound.
    let half = Nonlinearity::Polynomial { coeffs: vec![0.0, 0.0, 0.5] };
    let (lower, _) = run_ode(&Problem::ode(pair, g, half, w[0]))?;
    let mut worst = f64::INFINITY;
    let mut compared = 0usize;
    let mut t = Table::new("kaplan_blowup", &["t", "W", "half_rate_lower"]);
    for (n, ((tw, wn), (tv, vn))) in traj
        .times
        .iter()
        .zip(&w)
        .zip(lower.times.iter().zip(lower.scalar_values()))
        .enumerate()
    {
        if tw != tv {
            break;
        }
        worst = worst.min((wn - vn) / vn);
        compared += 1;
        if n % 20 == 0 {
            t.push(vec![(*tw).into(), (*wn).into(), vn.into()]);
        }
    }
    let checks = vec![
        Check::new("W0 - 2 lambda", w[0] - 2.0 * lambda, Bound::AtLeast(0.0)),
        Check::new("t_high", report.t_high().unwrap_or(f64::INFINITY), Bound::AtMost(0.01)),
        Check::new("steps compared", compared as f64, Bound::AtLeast(2.0)),
        Check::new("min (W - v)/v", worst, Bound::AtLeast(-1e-9)),
    ];
    Ok((checks, vec![t]))
}

fn scheme_cross_validation() -> Result<Criterion, CliError> {
    let op = unit_operator(199)?;
    let (k, _) = linear_decay_midpoint(&op, 1e-3, Scheme::KForm)?;
    let (l, _) = linear_decay_midpoint(&op, 1e-3, Scheme::LForm)?;
    let mut t = Table::new("scheme_cross_validation", &["t", "sup_gap"]);
    let mut worst: f64 = 0.0;
    for (n, (a, b)) in k.snapshots.iter().zip(&l.snapshots).enumerate() {
        let gap = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
        if n % 50 == 0 {
            t.push(vec![k.times[n].into(), gap.into()]);
        }
    }
    let checks = vec![
        Check::new("snapshots compared", k.snapshots.len().min(l.snapshots.len()) as f64, Bound::AtLeast(1001.0)),
        Check::new("sup gap", worst, Bound::AtMost(5e-3)),
    ];
    Ok((checks, vec![t]))
}

fn convexity() -> Result<Criterion, CliError> {
    let g = grid(1e-3, 1.0)?;
    let fam = relaxation_family(&frac(0.5)?, 2.0, &g, Default::default())?;
    let times = g.times();
    let sin: Vec<f64> = times.iter().map(|t| t.sin()).collect();
    let ramp: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
    let k = &fam.k_gamma;
    let cases = [
        ("linear", check_convexity_inequality(k, |y| y, |_| 1.0, &sin, 0.0)),
        ("square", check_convexity_inequality(k, |y| y * y, |y| 2.0 * y, &sin, 0.0)),
        ("neg_log", check_convexity_inequality(k, |y| -y.ln(), |y| -1.0 / y, &ramp, 1.0)),
    ];
    let mut t = Table::new("convexity", &["case", "min_residual"]);
    let mut checks = Vec::new();
    for (name, r) in cases {
        checks.push(Check::new(format!("{name} min residual"), r, Bound::AtLeast(-1e-2)));
        t.push(vec![name.into(), r.into()]);
    }
    Ok((checks, vec![t]))
}
