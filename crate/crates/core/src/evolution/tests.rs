use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::elliptic::{CoefficientField, EllipticOperator, Mesh};
use crate::kernel::{KernelPair, TimeGrid};
use crate::special::mittag_leffler_neg;

fn frac(alpha: f64) -> KernelPair {
    KernelPair::fractional(alpha).unwrap()
}

fn grid(tau: f64, horizon: f64) -> TimeGrid {
    TimeGrid::with_horizon(tau, horizon).unwrap()
}

fn unit_operator(n: usize) -> Arc<EllipticOperator> {
    let mesh = Mesh::interval(1.0, n).unwrap();
    let coeff = CoefficientField::constant(&mesh, 1.0).unwrap();
    Arc::new(EllipticOperator::assemble(&mesh, &coeff).unwrap())
}

#[test]
fn linear_decay_matches_mittag_leffler() {
    let p = Problem::ode(frac(0.5), grid(1e-4, 1.0), Nonlinearity::Linear { c: -1.0 }, 1.0);
    let (traj, report) = run_ode(&p).unwrap();
    assert_eq!(report.status, BlowupStatus::CompletedHorizon);
    let u1 = traj.last_snapshot()[0];
    assert!((u1 - 0.427_583_576_155_807).abs() < 1e-3, "{u1}");
}

#[test]
fn zero_reaction_keeps_initial_value() {
    for scheme in [Scheme::KForm, Scheme::LForm] {
        let mut p = Problem::ode(frac(0.3), grid(1e-2, 1.0), Nonlinearity::zero(), 0.7);
        p.scheme = scheme;
        let (traj, _) = run_ode(&p).unwrap();
        assert!(traj.scalar_values().iter().all(|&v| (v - 0.7).abs() < 1e-14));
    }
}

#[test]
fn quadratic_ode_blows_up_before_bound() {
    let p = Problem::ode(frac(0.5), grid(1e-3, 2.0), Nonlinearity::Quadratic, 1.0);
    let (_, report) = run_ode(&p).unwrap();
    assert!(report.blew_up());
    let (lo, hi) = report.t_star_bracket.unwrap();
    assert!(lo < hi && hi <= PI / 4.0 + 0.02, "({lo}, {hi})");
    assert!((report.theoretical_bound.unwrap() - PI / 4.0).abs() < 1e-9);
}

#[test]
fn imex_and_lform_agree_with_newton_kform() {
    let base = Problem::ode(frac(0.5), grid(1e-3, 1.0), Nonlinearity::Linear { c: -2.0 }, 1.0);
    let reference = run_ode(&base).unwrap().0.scalar_values();
    let mut lform = base.clone();
    lform.scheme = Scheme::LForm;
    let l = run_ode(&lform).unwrap().0.scalar_values();
    let gap = reference.iter().zip(&l).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
    let mut imex = base.clone();
    imex.nonlinear_mode = NonlinearMode::Imex;
    let i = run_ode(&imex).unwrap().0.scalar_values();
    let gap = reference.iter().zip(&i).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 5e-2, "{gap}");
}

#[test]
fn pde_linear_decay_eigenmode() {
    let op = unit_operator(199);
    let mesh = op.mesh().clone();
    let u0 = mesh.sample(|x| (PI * x[0]).sin());
    let p = Problem::pde(frac(0.5), grid(1e-3, 1.0), op, Nonlinearity::Linear { c: 5.0 }, u0);
    let (traj, report) = run_pde(&p).unwrap();
    assert!(!report.blew_up());
    let mid = traj.last_snapshot()[99];
    let exact = mittag_leffler_neg(0.5, PI * PI - 5.0).unwrap();
    assert!(((mid - exact) / exact).abs() < 2e-2, "{mid} vs {exact}");
}

#[test]
fn pde_quadratic_large_datum_blows_up_fast() {
    let op = unit_operator(99);
    let u0 = vec![25.0; op.len()];
    let p = Problem::pde(frac(0.5), grid(1e-4, 0.02), op, Nonlinearity::Quadratic, u0);
    let (_, report) = run_pde(&p).unwrap();
    assert!(report.blew_up());
    assert!(report.t_high().unwrap() <= 0.01);
}

#[test]
fn kaplan_series_examples() {
    let op = unit_operator(199);
    let mesh = op.mesh().clone();
    let psi = op.principal_eigenpair().unwrap().1.to_vec();
    let constant = Problem::pde(frac(0.5), grid(0.1, 0.5), op.clone(), Nonlinearity::zero(), vec![3.0; mesh.len()]);
    let (traj, _) = run_pde(&constant).unwrap();
    let w = kaplan_series(&traj, &psi, &mesh).unwrap();
    // Dirichlet data pull the boundary down, so only W_0 equals the constant.
    assert!((w[0] - 3.0).abs() < 1e-9, "{}", w[0]);
    assert!(w.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let sine = mesh.sample(|x| (PI * x[0]).sin());
    let w = (psi.iter().zip(&sine).map(|(a, b)| a * b).sum::<f64>()) * mesh.cell_volume();
    assert!((w - PI / 4.0).abs() < 1e-3);
    let zero = Problem::pde(frac(0.5), grid(0.1, 0.3), op, Nonlinearity::zero(), vec![0.0; mesh.len()]);
    let (traj, _) = run_pde(&zero).unwrap();
    assert!(kaplan_series(&traj, &psi, &mesh).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn kaplan_series_needs_every_step() {
    let op = unit_operator(9);
    let mesh = op.mesh().clone();
    let mut p = Problem::pde(frac(0.5), grid(0.1, 1.0), op.clone(), Nonlinearity::zero(), vec![1.0; 9]);
    p.snapshot_stride = 3;
    let (traj, _) = run_pde(&p).unwrap();
    assert!(kaplan_series(&traj, &vec![1.0; 9], &mesh).is_err());
}

#[test]
fn decay_and_instability_trivial_cases() {
    let op = unit_operator(9);
    let p = Problem::pde(frac(0.5), grid(0.01, 0.5), op, Nonlinearity::zero(), vec![0.0; 9]);
    let (traj, _) = run_pde(&p).unwrap();
    assert_eq!(decay_envelope_check(&traj, &frac(0.5), 4.87, 1.05).unwrap(), 0.0);
    let g = grid(0.01, 0.5);
    let w = vec![2.0; 51];
    assert_eq!(instability_lowerbound_check(&w, 2.0, 0.0, &frac(0.5), &g).unwrap(), 0.0);
}

#[test]
fn blowup_bound_examples() {
    let q = Nonlinearity::Quadratic;
    let b = blowup_time_bound(&q, &frac(0.5), 1.0, 1.0).unwrap().finite().unwrap();
    assert!((b - PI / 4.0).abs() < 1e-9);
    let b = blowup_time_bound(&q, &frac(0.5), 25.0, 2.0).unwrap().finite().unwrap();
    assert!((b - 0.005_026_548_245_743_67).abs() < 1e-10);
    let lin = Nonlinearity::Linear { c: 1.0 };
    assert_eq!(
        blowup_time_bound(&lin, &KernelPair::distributed_order().unwrap(), 1.0, 1.0).unwrap(),
        BlowupBound::Infinite
    );
    assert!(blowup_time_bound(&Nonlinearity::Nsy, &frac(0.5), 0.5, 1.0).is_err());
}

#[test]
fn comparison_examples() {
    let op = unit_operator(19);
    let mesh = op.mesh().clone();
    let low = mesh.sample(|x| 0.3 * (PI * x[0]).sin());
    let p = Problem::pde(frac(0.5), grid(0.01, 0.5), op.clone(), Nonlinearity::zero(), low.clone());
    let same = comparison_run(&p, &low, &low).unwrap();
    assert!(same.ordered);
    assert_eq!(same.max_gap, 0.0);
    let high: Vec<f64> = low.iter().map(|v| v + 0.5).collect();
    let shifted = comparison_run(&p, &low, &high).unwrap();
    assert!(shifted.ordered && shifted.max_gap <= 0.5 + 1e-12);
    let mut q = p.clone();
    q.nonlinearity = Nonlinearity::Quadratic;
    q.grid = grid(0.01, 1.0);
    let out = comparison_run(&q, &vec![0.02; 19], &vec![0.05; 19]).unwrap();
    assert!(out.ordered);
    assert!(comparison_run(&p, &high, &low).is_err());
}

#[test]
fn problem_validation() {
    let mut p = Problem::ode(frac(0.5), grid(0.1, 1.0), Nonlinearity::Quadratic, 2.0);
    p.blowup_threshold = 1.0;
    assert!(run_ode(&p).is_err());
    let op = unit_operator(9);
    let q = Problem::pde(frac(0.5), grid(0.1, 1.0), op, Nonlinearity::Quadratic, vec![0.0; 8]);
    assert!(matches!(run_pde(&q), Err(crate::Error::LengthMismatch { .. })));
    assert!(run_ode(&q).is_err());
}

#[test]
fn halving_reaches_horizon_after_rejections() {
    // A tight growth cap forces rejections early; the run must still finish.
    let mut p = Problem::ode(frac(0.5), grid(0.05, 1.0), Nonlinearity::Linear { c: 1.0 }, 0.01);
    p.max_growth_per_step = 1.05;
    let (traj, report) = run_ode(&p).unwrap();
    assert!(!report.blew_up());
    assert!((traj.final_time() - 1.0).abs() < 1e-12);
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
}

fn pairs() -> Vec<KernelPair> {
    vec![
        frac(0.5),
        KernelPair::fractional_exp(0.4, 1.0).unwrap(),
        KernelPair::distributed_order().unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 16,
        rng_seed: proptest::test_runner::RngSeed::Fixed(42),
        ..ProptestConfig::default()
    })]

    #[test]
    fn discrete_maximum_principle(
        u0 in proptest::collection::vec(-1.0f64..2.0, 15),
        pair_idx in 0usize..3,
        tau_exp in 1i32..3,
    ) {
        let op = unit_operator(15);
        let tau = 10f64.powi(-tau_exp);
        let p = Problem::pde(pairs()[pair_idx].clone(), grid(tau, 1.0), op, Nonlinearity::zero(), u0.clone());
        let (traj, _) = run_pde(&p).unwrap();
        let lo = u0.iter().copied().fold(0.0, f64::min);
        let hi = u0.iter().copied().fold(0.0, f64::max);
        for s in &traj.snapshots {
            prop_assert!(s.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
        }
    }

    #[test]
    fn positivity_for_nonnegative_data(
        u0 in proptest::collection::vec(0.0f64..0.3, 15),
        pair_idx in 0usize..3,
    ) {
        let op = unit_operator(15);
        let p = Problem::pde(pairs()[pair_idx].clone(), grid(0.02, 1.0), op, Nonlinearity::Nsy, u0);
        let (traj, _) = run_pde(&p).unwrap();
        for s in &traj.snapshots {
            prop_assert!(s.iter().all(|&v| v >= -1e-10));
        }
    }

    #[test]
    fn frozen_source_bound(
        u0 in proptest::collection::vec(-1.0f64..1.0, 15),
        g in proptest::collection::vec(-2.0f64..2.0, 15),
        pair_idx in 0usize..3,
    ) {
        let op = unit_operator(15);
        let pair = pairs()[pair_idx].clone();
        let mut p = Problem::pde(pair.clone(), grid(0.02, 1.0), op, Nonlinearity::zero(), u0.clone());
        p.forcing = Some(g.clone());
        let (traj, _) = run_pde(&p).unwrap();
        let u0_sup = super::supnorm(&u0);
        let g_sup = super::supnorm(&g);
        for (t, sup) in traj.times.iter().zip(&traj.supnorm) {
            let bound = u0_sup + pair.cumulative_l(*t).unwrap() * g_sup + 1e-8;
            prop_assert!(*sup <= bound, "t={} sup={} bound={}", t, sup, bound);
        }
    }
}
