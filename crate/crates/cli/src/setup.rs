//! Builds core objects from a parsed config.

use std::f64::consts::PI;
use std::sync::Arc;

use subdiff_core::{CoefficientField, EllipticOperator, Mesh, Problem};

use crate::config::{table_value, CoefficientSpec, ConfigError, ExperimentConfig, InitialSpec, SpaceSpec};
use crate::error::CliError;

pub fn mesh(space: &SpaceSpec) -> Result<Mesh, CliError> {
    Ok(match (space.extent.as_slice(), space.n.as_slice()) {
        ([e], [n]) => Mesh::interval(*e, *n)?,
        ([ex, ey], [nx, ny]) => Mesh::rectangle(*ex, *ey, *nx, *ny)?,
        _ => return Err(ConfigError::Incompatible("space must have one or two axes".into()).into()),
    })
}

pub fn operator(space: &SpaceSpec) -> Result<Arc<EllipticOperator>, CliError> {
    let mesh = mesh(space)?;
    let coeff = match &space.coefficient {
        CoefficientSpec::Constant(a) => CoefficientField::constant(&mesh, *a)?,
        CoefficientSpec::Table(t) => CoefficientField::from_fn(&mesh, |x| table_value(t, x[0]))?,
    };
    Ok(Arc::new(EllipticOperator::assemble(&mesh, &coeff)?))
}

pub fn initial_field(initial: &InitialSpec, mesh: &Mesh) -> Vec<f64> {
    let extent = mesh.extent().to_vec();
    match initial {
        InitialSpec::Constant(v) => vec![*v; mesh.len()],
        InitialSpec::Sine { mode, amplitude } => mesh.sample(|x| {
            x.iter()
                .zip(&extent)
                .map(|(xi, e)| (*mode as f64 * PI * xi / e).sin())
                .product::<f64>()
                * amplitude
        }),
        InitialSpec::Table(t) => mesh.sample(|x| table_value(t, x[0])),
    }
}

pub fn scalar_initial(initial: &InitialSpec) -> Result<f64, CliError> {
    match initial {
        InitialSpec::Constant(v) => Ok(*v),
        _ => Err(ConfigError::Incompatible("scalar runs need [initial] shape = constant".into()).into()),
    }
}

fn apply_solver(cfg: &ExperimentConfig, p: &mut Problem) {
    p.scheme = cfg.solver.scheme;
    p.nonlinear_mode = cfg.solver.mode;
    p.blowup_threshold = cfg.solver.threshold;
    p.max_growth_per_step = cfg.solver.max_growth;
    p.newton_tol = cfg.solver.newton_tol;
    p.max_halvings = cfg.solver.max_halvings;
    p.snapshot_stride = cfg.stride;
}

pub fn ode_problem(cfg: &ExperimentConfig, u0: f64) -> Result<Problem, CliError> {
    let mut p = Problem::ode(cfg.kernel.build()?, cfg.grid()?, cfg.nonlinearity.clone(), u0);
    apply_solver(cfg, &mut p);
    Ok(p)
}

pub fn pde_problem(cfg: &ExperimentConfig, op: Arc<EllipticOperator>) -> Result<Problem, CliError> {
    let u0 = initial_field(&cfg.initial, op.mesh());
    let mut p = Problem::pde(cfg.kernel.build()?, cfg.grid()?, op, cfg.nonlinearity.clone(), u0);
    apply_solver(cfg, &mut p);
    Ok(p)
}
