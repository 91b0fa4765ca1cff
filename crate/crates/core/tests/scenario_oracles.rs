mod common;

use common::*;
use mevolve::monotone::{asymptotic_equilibria, prepare_problem, EngineOptions};
use mevolve::nonlin::competition;
use mevolve::operators::{build_laplacian_1d, principal_eig, BoundaryCondition};
use mevolve::scenarios::{build_competition, SolveSettings, SqrtClosedForm};

#[test]
fn upper_branch_closed_form_matches_ode() {
    for (a, m) in [(1.0, 2.0), (1.0, 5.0), (2.0, 1.0), (0.5, 9.0)] {
        let cf = SqrtClosedForm { a, m };
        let dt = 1e-2;
        let ode = sqrt_ode(a, m, dt, 10.0);
        let worst = ode
            .iter()
            .enumerate()
            .fold(0.0_f64, |w, (k, u)| w.max((u - cf.upper_extremal(k as f64 * dt)).abs()));
        assert!(worst < 1e-10, "a = {a}, M = {m}: {worst:e}");
    }
}

#[test]
fn lower_branch_from_zero_matches_ode_once_off_zero() {
    let cf = SqrtClosedForm { a: 1.0, m: 2.0 };
    let t0 = 0.5;
    let dt = 1e-2;
    let ode = sqrt_ode(1.0, cf.u_max(t0), dt, 9.5);
    let worst = ode
        .iter()
        .enumerate()
        .fold(0.0_f64, |w, (k, u)| w.max((u - cf.u_max(t0 + k as f64 * dt)).abs()));
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn engine_extremals_converge_to_the_ode_oracle() {
    let s = sqrt_scenario();
    let mut errs = vec![];
    for dt in [2e-3, 1e-3] {
        let p = prepare_problem(&s.problem(4.0, dt).unwrap()).unwrap();
        let ext = mevolve::monotone::extremal_trajectories(&p, &EngineOptions::default()).unwrap();
        let ode = sqrt_ode(1.0, 2.0, dt, 4.0);
        let e = ode
            .iter()
            .enumerate()
            .fold(0.0_f64, |w, (k, u)| w.max((u - ext.u_max().state(k)[0]).abs()));
        errs.push(e);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!((order - 1.0).abs() < 0.2, "errors {errs:?}");
}

#[test]
fn scalar_newton_equilibria_lie_between_extremals() {
    let g = golden().into_iter().find(|g| g.name == "scalar").unwrap();
    let (eq, _) = run_golden(&g);
    assert!(eq.newton.holds);
    assert!(eq.newton.distinct.len() >= 2);
    assert!(!eq.unique);
}

#[test]
fn competition_without_growth_loses_the_species() {
    let a = build_laplacian_1d(30, BoundaryCondition::Dirichlet).unwrap();
    let l1 = principal_eig(&a).unwrap().lambda1;
    let c = competition(0.5 * l1, 1.5 * l1, 1.0, 0.1, 0.1, 1.0).unwrap();
    let s = build_competition(&a, &a, &c, &SolveSettings::default()).unwrap();
    assert_eq!(s.primary.label, "box");
    assert!(s.notes[0].contains("a1 > lambda_1(A1): false"));
    let p = prepare_problem(&s.problem(10.0, 0.05).unwrap()).unwrap();
    let eq = asymptotic_equilibria(&p, &EngineOptions::default()).unwrap();
    assert!(eq.converged());
    let (_, w2) = s.semi_trivial.clone().unwrap();
    for v in [&eq.u_star, &eq.u_upper_star] {
        assert!(v.component(0).iter().all(|x| x.abs() < 1e-8));
    }
    // u_* = (0, w2); u^* keeps the invariant face u2 = 0 of the upper corner (M, 0)
    let d = eq.u_star.component(1).iter().zip(w2.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(d < 1e-6, "{d}");
    assert!(eq.u_upper_star.component(1).iter().all(|x| *x == 0.0));
}

#[test]
fn every_golden_scenario_converges_and_certifies() {
    for g in golden() {
        let (eq, sol) = run_golden(&g);
        assert!(eq.converged(), "{}", g.name);
        assert!(sol.converged, "{}", g.name);
        assert!(g.scenario.primary.certificates.all_hold(), "{}", g.name);
    }
}
