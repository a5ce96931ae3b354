//! Checks that tie modules together through the public API only.

use std::f64::consts::PI;
use std::sync::Arc;

use subdiff_core::elliptic::dirichlet_laplacian_lambda1;
use subdiff_core::evolution::{blowup_time_bound, run_ode, run_pde};
use subdiff_core::kernel::{discrete_conv, l_weights, relaxation_family};
use subdiff_core::special::{erfcx, mittag_leffler_neg, mittag_leffler_pos};
use subdiff_core::{
    BlowupBound, CoefficientField, EllipticOperator, KernelPair, Mesh, Nonlinearity, Problem, TimeGrid,
};

fn grid(tau: f64, horizon: f64) -> TimeGrid {
    TimeGrid::with_horizon(tau, horizon).unwrap()
}

#[test]
fn linear_ode_reproduces_relaxation_function() {
    // u = s_γ solves the scalar problem with f(u) = -γ u and u0 = 1.
    for pair in [
        KernelPair::fractional(0.3).unwrap(),
        KernelPair::fractional_exp(0.6, 2.0).unwrap(),
        KernelPair::distributed_order().unwrap(),
    ] {
        let g = grid(1e-2, 2.0);
        let fam = relaxation_family(&pair, 1.5, &g, Default::default()).unwrap();
        let p = Problem::ode(pair.clone(), g, Nonlinearity::Linear { c: -1.5 }, 1.0);
        let (traj, _) = run_ode(&p).unwrap();
        let gap = traj
            .scalar_values()
            .iter()
            .zip(&fam.s)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-10, "{:?}: {gap}", pair.variant());
    }
}

#[test]
fn power_convolution_matches_closed_form() {
    let pair = KernelPair::fractional(0.5).unwrap();
    let g = grid(1e-3, 1.0);
    let w = l_weights(&pair, &g).unwrap();
    let v = g.times();
    let conv = discrete_conv(&w, &v).unwrap();
    // (g_α ∗ t)(1) = 1/Γ(2.5)
    let exact = 1.0 / (0.75 * PI.sqrt());
    assert!((conv[g.steps()] - exact).abs() < 2e-3);
}

#[test]
fn half_order_identities() {
    for x in [0.0, 0.3, 1.0, 4.0, 10.0] {
        let e = mittag_leffler_neg(0.5, x).unwrap();
        assert!((e - erfcx(x)).abs() < 1e-6, "x={x}");
    }
    // E_{1/2}(x) = e^{x²}(2 - erfc(x)) = 2e^{x²} - erfcx(x)
    let x: f64 = 1.622_37;
    let pos = mittag_leffler_pos(0.5, x).unwrap();
    let expected = 2.0 * (x * x).exp() - erfcx(x);
    assert!(((pos - expected) / expected).abs() < 1e-8);
}

#[test]
fn eigenmode_decays_like_mittag_leffler() {
    let mesh = Mesh::interval(1.0, 49).unwrap();
    let coeff = CoefficientField::constant(&mesh, 1.0).unwrap();
    let op = Arc::new(EllipticOperator::assemble(&mesh, &coeff).unwrap());
    let lambda = dirichlet_laplacian_lambda1(&mesh);
    assert!((op.principal_eigenpair().unwrap().0 - lambda).abs() < 1e-9 * lambda);
    let u0 = mesh.sample(|x| (PI * x[0]).sin());
    let p = Problem::pde(KernelPair::fractional(0.5).unwrap(), grid(1e-3, 0.5), op, Nonlinearity::zero(), u0.clone());
    let (traj, _) = run_pde(&p).unwrap();
    let exact = mittag_leffler_neg(0.5, lambda * 0.5f64.sqrt()).unwrap();
    let mid = traj.last_snapshot()[24];
    assert!(((mid - exact) / exact).abs() < 2e-2, "{mid} vs {exact}");
}

#[test]
fn quadratic_blowup_detected_before_bound() {
    let pair = KernelPair::fractional(0.5).unwrap();
    for u0 in [1.0, 2.0, 5.0] {
        let bound = match blowup_time_bound(&Nonlinearity::Quadratic, &pair, u0, 1.0).unwrap() {
            BlowupBound::Finite(t) => t,
            BlowupBound::Infinite => panic!("quadratic bound must be finite"),
        };
        let expected = (0.5 * PI.sqrt() / u0).powi(2);
        assert!((bound - expected).abs() < 1e-9 * expected);
        let (_, report) = run_ode(&Problem::ode(pair.clone(), grid(1e-4, 1.0), Nonlinearity::Quadratic, u0)).unwrap();
        let (lo, hi) = report.t_star_bracket.unwrap();
        assert!(lo < hi && hi <= 1.02 * bound, "u0={u0}: ({lo}, {hi}) vs {bound}");
    }
}
