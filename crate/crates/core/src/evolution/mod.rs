//! Time stepping for `∂_t(k ∗ [u - u0]) + L_h u = f(u)` and its scalar
//! counterpart, with blowup detection and the diagnostics built on top of
//! the stepper.

mod diagnostics;
mod nonlinearity;
mod stepper;
#[cfg(test)]
mod tests;

use std::sync::Arc;

pub use diagnostics::{
    blowup_time_bound, comparison_run, decay_envelope_check, instability_lowerbound_check,
    kaplan_series, BlowupBound, ComparisonOutcome,
};
pub use nonlinearity::{Nonlinearity, PowerExtension};
pub use stepper::{run, run_ode, run_pde};

use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::kernel::{KWeightRule, KernelPair, TimeGrid};

/// Discretization of the memory term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Increment form `Σ b_{n-j}(u_j - u_{j-1})`.
    #[default]
    KForm,
    /// Volterra form `u = u0 + l ∗ (f(u) - L_h u)`.
    LForm,
}

/// Treatment of the reaction term inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonlinearMode {
    /// Fully implicit, damped Newton.
    #[default]
    Newton,
    /// `f` evaluated at the previous step.
    Imex,
}

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_GROWTH: f64 = 10.0;
pub const DEFAULT_MAX_HALVINGS: usize = 40;

/// One evolution problem. Build with [`Problem::ode`] or [`Problem::pde`] and
/// adjust the public fields.
#[derive(Debug, Clone)]
pub struct Problem {
    pub pair: KernelPair,
    pub grid: TimeGrid,
    pub spatial: Option<Arc<EllipticOperator>>,
    pub nonlinearity: Nonlinearity,
    /// Additive time-independent source `g` (same length as `u0`).
    pub forcing: Option<Vec<f64>>,
    pub u0: Vec<f64>,
    pub scheme: Scheme,
    pub nonlinear_mode: NonlinearMode,
    pub k_rule: KWeightRule,
    pub blowup_threshold: f64,
    pub newton_tol: f64,
    pub max_growth_per_step: f64,
    pub max_halvings: usize,
    pub snapshot_stride: usize,
    /// When set, `W_n = Σ ψ_i u_{n,i} Π h` is recorded at every step.
    pub kaplan_weights: Option<Vec<f64>>,
}

impl Problem {
    pub fn ode(pair: KernelPair, grid: TimeGrid, nonlinearity: Nonlinearity, u0: f64) -> Self {
        Self::new(pair, grid, None, nonlinearity, vec![u0])
    }

    pub fn pde(
        pair: KernelPair,
        grid: TimeGrid,
        operator: Arc<EllipticOperator>,
        nonlinearity: Nonlinearity,
        u0: Vec<f64>,
    ) -> Self {
        Self::new(pair, grid, Some(operator), nonlinearity, u0)
    }

    fn new(
        pair: KernelPair,
        grid: TimeGrid,
        spatial: Option<Arc<EllipticOperator>>,
        nonlinearity: Nonlinearity,
        u0: Vec<f64>,
    ) -> Self {
        Self {
            pair,
            grid,
            spatial,
            nonlinearity,
            forcing: None,
            u0,
            scheme: Scheme::default(),
            nonlinear_mode: NonlinearMode::default(),
            k_rule: KWeightRule::default(),
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            newton_tol: DEFAULT_NEWTON_TOL,
            max_growth_per_step: DEFAULT_MAX_GROWTH,
            max_halvings: DEFAULT_MAX_HALVINGS,
            snapshot_stride: 1,
            kaplan_weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nonlinearity.validate()?;
        let expected = self.spatial.as_ref().map_or(1, |op| op.len());
        if self.u0.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: self.u0.len(),
            });
        }
        for extra in [&self.forcing, &self.kaplan_weights].into_iter().flatten() {
            if extra.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    got: extra.len(),
                });
            }
        }
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("initial data must be finite".into()));
        }
        let sup = supnorm(&self.u0);
        if !(self.blowup_threshold > sup) {
            return Err(Error::Invalid(format!(
                "blowup threshold {} must exceed sup|u0| = {sup}",
                self.blowup_threshold
            )));
        }
        if !(self.newton_tol > 0.0) || !(self.max_growth_per_step > 1.0) {
            return Err(Error::Invalid("newton_tol must be > 0 and max growth > 1".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Invalid("snapshot stride must be positive".into()));
        }
        Ok(())
    }
}

/// Accepted steps of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Accepted times, starting at 0; strictly increasing.
    pub times: Vec<f64>,
    /// `max_i |u_{n,i}|` at every accepted step.
    pub supnorm: Vec<f64>,
    pub snapshot_stride: usize,
    /// Step indices of the stored snapshots.
    pub snapshot_steps: Vec<usize>,
    pub snapshots: Vec<Vec<f64>>,
    /// Kaplan functional at every accepted step, when requested.
    pub kaplan: Option<Vec<f64>>,
    /// True while every accepted step had the nominal size.
    pub uniform: bool,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Last stored snapshot.
    pub fn last_snapshot(&self) -> &[f64] {
        self.snapshots.last().expect("initial snapshot stored")
    }

    /// Scalar values for an ODE trajectory stored at stride 1.
    pub fn scalar_values(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupStatus {
    CompletedHorizon,
    Blowup,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupReport {
    pub status: BlowupStatus,
    /// (last accepted time, first rejected time) when blowup was declared.
    pub t_star_bracket: Option<(f64, f64)>,
    pub theoretical_bound: Option<f64>,
    pub threshold: f64,
}

impl BlowupReport {
    pub fn blew_up(&self) -> bool {
        self.status == BlowupStatus::Blowup
    }

    pub fn t_high(&self) -> Option<f64> {
        self.t_star_bracket.map(|b| b.1)
    }
}

pub(crate) fn supnorm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
