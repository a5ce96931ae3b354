use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use subdiff_core::evolution::{blowup_time_bound, run_ode, run_pde};
use subdiff_core::kernel::{relaxation_family, verify_pair, RelaxationOptions};
use subdiff_core::special::{gamma, mittag_leffler_neg};
use subdiff_core::{BlowupBound, BlowupStatus, Nonlinearity};

use crate::config::{Command, ExperimentConfig};
use crate::csv_out::{write_csv, Cell};
use crate::error::{CliError, EXIT_OK, EXIT_VERIFY_FAILED};
use crate::{scan_pool, setup, verify};

/// Runs one command. Summary lines go to `stdout`; tables go to `out`, the
/// config's `out`, or `<command>.csv` (a directory for `verify`).
pub fn run_command(cfg: &ExperimentConfig, out: Option<&Path>, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let default = match cfg.command {
        Command::Verify => PathBuf::from("verify-artifacts"),
        c => PathBuf::from(format!("{}.csv", c.name())),
    };
    let path = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or(default);
    match cfg.command {
        Command::Relax => relax(cfg, &path, stdout),
        Command::Mlcheck => mlcheck(cfg, &path, stdout),
        Command::Pairverify => pairverify(cfg, &path, stdout),
        Command::Ode => ode(cfg, &path, stdout),
        Command::Pde => pde(cfg, &path, stdout),
        Command::Eigen => eigen(cfg, &path, stdout),
        Command::StabilityScan => stability_scan(cfg, &path, stdout),
        Command::BlowupScan => blowup_scan(cfg, &path, stdout),
        Command::Verify => run_verify(&path, stdout),
    }
}

fn relax(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let pair = cfg.kernel.build()?;
    let grid = cfg.grid()?;
    let opts = RelaxationOptions {
        cross_check: true,
        ..RelaxationOptions::default()
    };
    let fam = relaxation_family(&pair, cfg.params.gamma, &grid, opts)?;
    // h and r live on [t_{n-1}, t_n]; each row is keyed by the right endpoint.
    let rows: Vec<Vec<Cell>> = (1..fam.s.len())
        .map(|n| {
            vec![
                grid.time(n).into(),
                fam.s[n].into(),
                fam.k_gamma[n].into(),
                fam.h[n - 1].into(),
                fam.r[n - 1].into(),
            ]
        })
        .collect();
    write_csv(path, &["t", "s", "k_gamma", "h", "r"], &rows)?;
    writeln!(stdout, "identity_residual={:e}", fam.identity_residual())?;
    if let Some(gap) = fam.cross_check_gap {
        writeln!(stdout, "cross_check_gap={gap:e}")?;
    }
    Ok(EXIT_OK)
}

fn mlcheck(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let p = &cfg.params;
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for &alpha in &p.alphas {
        let (ga, gb) = (gamma(1.0 - alpha)?, gamma(1.0 + alpha)?);
        let mut prev = f64::INFINITY;
        for x in log_space(p.x_min, p.x_max, p.points) {
            let e = mittag_leffler_neg(alpha, x)?;
            let lower = 1.0 / (1.0 + ga * x);
            let upper = 1.0 / (1.0 + x / gb);
            let ok = e >= lower - 1e-9 && e <= upper + 1e-9 && e < prev;
            violations += usize::from(!ok);
            prev = e;
            rows.push(vec![alpha.into(), x.into(), e.into(), lower.into(), upper.into(), ok.into()]);
        }
    }
    write_csv(path, &["alpha", "x", "ml", "lower", "upper", "ok"], &rows)?;
    writeln!(stdout, "points={} violations={violations}", rows.len())?;
    Ok(if violations == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn pairverify(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let pair = cfg.kernel.build()?;
    let grid = cfg.grid()?;
    let fine = grid.refined();
    let d = verify_pair(&pair, &grid, cfg.params.t_min)?;
    let d_half = verify_pair(&pair, &fine, cfg.params.t_min)?;
    let rows = vec![
        vec![grid.step().into(), cfg.params.t_min.into(), d.into()],
        vec![fine.step().into(), cfg.params.t_min.into(), d_half.into()],
    ];
    write_csv(path, &["tau", "t_min", "deviation"], &rows)?;
    writeln!(stdout, "deviation={d:e} deviation_half={d_half:e} ratio={:e}", d_half / d)?;
    Ok(EXIT_OK)
}

fn write_report(stdout: &mut dyn Write, status: BlowupStatus, bracket: Option<(f64, f64)>) -> Result<(), CliError> {
    match (status, bracket) {
        (BlowupStatus::Blowup, Some((lo, hi))) => writeln!(stdout, "status=blowup t_low={lo:e} t_high={hi:e}")?,
        _ => writeln!(stdout, "status=completed")?,
    }
    Ok(())
}

fn ode(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let problem = setup::ode_problem(cfg, setup::scalar_initial(&cfg.initial)?)?;
    let (traj, report) = run_ode(&problem)?;
    let rows: Vec<Vec<Cell>> = traj
        .snapshot_steps
        .iter()
        .zip(&traj.snapshots)
        .map(|(&n, u)| vec![n.into(), traj.times[n].into(), u[0].into()])
        .collect();
    write_csv(path, &["step", "t", "u"], &rows)?;
    write_report(stdout, report.status, report.t_star_bracket)?;
    if let Some(b) = report.theoretical_bound {
        writeln!(stdout, "theoretical_bound={b:e}")?;
    }
    Ok(EXIT_OK)
}

fn field_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pde");
    path.with_file_name(format!("{stem}_field.csv"))
}

fn pde(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let op = setup::operator(&cfg.space)?;
    let (lambda, psi) = op.principal_eigenpair()?;
    let psi = psi.to_vec();
    let mut problem = setup::pde_problem(cfg, op.clone())?;
    problem.kaplan_weights = Some(psi);
    let (traj, report) = run_pde(&problem)?;
    let kaplan = traj.kaplan.clone().unwrap_or_default();
    let rows: Vec<Vec<Cell>> = (0..traj.times.len())
        .map(|n| vec![n.into(), traj.times[n].into(), traj.supnorm[n].into(), kaplan[n].into()])
        .collect();
    write_csv(path, &["step", "t", "supnorm", "kaplan"], &rows)?;

    let mesh = op.mesh();
    let mut header = vec!["step", "t", "x"];
    if mesh.dim() == 2 {
        header.push("y");
    }
    header.push("u");
    let mut field = Vec::new();
    for (&n, u) in traj.snapshot_steps.iter().zip(&traj.snapshots) {
        for (i, v) in u.iter().enumerate() {
            let mut row: Vec<Cell> = vec![n.into(), traj.times[n].into()];
            row.extend(mesh.coordinates(i).into_iter().map(Cell::F));
            row.push((*v).into());
            field.push(row);
        }
    }
    write_csv(&field_path(path), &header, &field)?;

    writeln!(stdout, "lambda_star={lambda:e}")?;
    writeln!(stdout, "f0prime={:e}", cfg.nonlinearity.f0prime())?;
    write_report(stdout, report.status, report.t_star_bracket)?;
    Ok(EXIT_OK)
}

fn eigen(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let op = setup::operator(&cfg.space)?;
    let (lambda, psi) = op.principal_eigenpair()?;
    let mesh = op.mesh();
    let header: &[&str] = if mesh.dim() == 1 { &["x", "psi"] } else { &["x", "y", "psi"] };
    let rows: Vec<Vec<Cell>> = psi
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row: Vec<Cell> = mesh.coordinates(i).into_iter().map(Cell::F).collect();
            row.push((*p).into());
            row
        })
        .collect();
    write_csv(path, header, &rows)?;
    writeln!(stdout, "lambda_star={lambda:e}")?;
    Ok(EXIT_OK)
}

fn classify(decays: bool) -> &'static str {
    if decays {
        "decay"
    } else {
        "growth"
    }
}

fn stability_scan(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let op = setup::operator(&cfg.space)?;
    let lambda = op.principal_eigenpair()?.0;
    let pool = scan_pool()?;
    let results: Vec<Result<(f64, f64, bool), CliError>> = pool.install(|| {
        cfg.params
            .c_values
            .par_iter()
            .map(|&c| {
                let mut local = cfg.clone();
                local.nonlinearity = Nonlinearity::Linear { c };
                let problem = setup::pde_problem(&local, op.clone())?;
                let (traj, report) = run_pde(&problem)?;
                let (first, last) = (traj.supnorm[0], *traj.supnorm.last().unwrap());
                Ok((first, last, !report.blew_up() && last < first))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut mismatches = 0usize;
    for (&c, res) in cfg.params.c_values.iter().zip(results) {
        let (first, last, decays) = res?;
        let predicted = classify(c < lambda);
        let observed = classify(decays);
        mismatches += usize::from(predicted != observed);
        writeln!(stdout, "c={c} {observed}")?;
        rows.push(vec![
            c.into(),
            lambda.into(),
            predicted.into(),
            observed.into(),
            first.into(),
            last.into(),
        ]);
    }
    write_csv(
        path,
        &["c", "lambda_star", "predicted", "observed", "sup_initial", "sup_final"],
        &rows,
    )?;
    writeln!(stdout, "lambda_star={lambda:e} mismatches={mismatches}")?;
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn blowup_scan(cfg: &ExperimentConfig, path: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let pool = scan_pool()?;
    let pair = cfg.kernel.build()?;
    let results: Vec<Result<_, CliError>> = pool.install(|| {
        cfg.params
            .u0_values
            .par_iter()
            .map(|&u0| {
                let problem = setup::ode_problem(cfg, u0)?;
                let (_, report) = run_ode(&problem)?;
                let bound = blowup_time_bound(&cfg.nonlinearity, &pair, u0, 1.0).ok();
                Ok((report, bound))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut inconsistent = 0usize;
    for (&u0, res) in cfg.params.u0_values.iter().zip(results) {
        let (report, bound) = res?;
        let bound = bound.and_then(BlowupBound::finite);
        let (lo, hi) = match report.t_star_bracket {
            Some((lo, hi)) => (Cell::F(lo), Cell::F(hi)),
            None => (Cell::S(String::new()), Cell::S(String::new())),
        };
        // A detected blowup must not come later than the bound plus 2%.
        let consistent = match (report.t_high(), bound) {
            (Some(hi), Some(b)) => hi <= 1.02 * b,
            _ => true,
        };
        inconsistent += usize::from(!consistent);
        rows.push(vec![
            u0.into(),
            if report.blew_up() { "blowup" } else { "completed" }.into(),
            lo,
            hi,
            bound.map_or(Cell::S("inf".into()), Cell::F),
            consistent.into(),
        ]);
    }
    write_csv(path, &["u0", "status", "t_low", "t_high", "bound", "consistent"], &rows)?;
    writeln!(stdout, "runs={} inconsistent={inconsistent}", rows.len())?;
    Ok(if inconsistent == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn run_verify(dir: &Path, stdout: &mut dyn Write) -> Result<u8, CliError> {
    let pool = scan_pool()?;
    let report = verify::run_suite(dir, &pool)?;
    for o in &report.outcomes {
        writeln!(stdout, "{}", o.line())?;
    }
    for o in report.outcomes.iter().filter(|o| !o.passed()) {
        for rec in o.failure_records() {
            writeln!(stdout, "{rec}")?;
        }
    }
    writeln!(
        stdout,
        "passed={} failed={}",
        report.outcomes.iter().filter(|o| o.passed()).count(),
        report.outcomes.iter().filter(|o| !o.passed()).count()
    )?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// `points` log-spaced values from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, points: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..points)
        .map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp())
        .collect()
}
