#![allow(dead_code)]

use mevolve::mild::{ProblemSpec, Trajectory};
use mevolve::monotone::{asymptotic_equilibria, iterate_with, prepare_problem, EngineOptions, EquilibriumReport, IterationReport};
use mevolve::nonlin::WeightProfile;
use mevolve::operators::{build_laplacian_1d, BoundaryCondition};
use mevolve::order::GridFunction;
use mevolve::scenarios::{
    build_competition, build_fisher, build_logistic, build_scalar_nonunique, ScenarioSpec, SolveSettings,
};
use mevolve::nonlin::competition;
use ode_solvers::{Dopri5, System, Vector1};

pub struct Golden {
    pub name: &'static str,
    pub scenario: ScenarioSpec,
    pub problem: ProblemSpec,
}

pub fn sqrt_scenario() -> ScenarioSpec {
    build_scalar_nonunique(1.0, 2.0).unwrap()
}

pub fn logistic_neumann(n: usize) -> ScenarioSpec {
    build_logistic(&build_laplacian_1d(n, BoundaryCondition::Neumann).unwrap(), 1.0, 2.0).unwrap()
}

pub fn logistic_dirichlet(a: f64) -> ScenarioSpec {
    build_logistic(&build_laplacian_1d(99, BoundaryCondition::Dirichlet).unwrap(), a, 1.0).unwrap()
}

pub fn competition_neumann(n: usize) -> ScenarioSpec {
    let g = build_laplacian_1d(n, BoundaryCondition::Neumann).unwrap();
    let c = competition(1.0, 1.0, 1.0, 0.1, 0.1, 1.0).unwrap();
    build_competition(&g, &g, &c, &SolveSettings::default()).unwrap()
}

pub fn fisher_weight(a: &mevolve::operators::GeneratorSpec) -> GridFunction {
    WeightProfile::Cos { amplitude: 20.0, freq: 1.0, offset: 0.0 }.sample(a.coords()).unwrap()
}

pub fn fisher_neumann(n: usize) -> ScenarioSpec {
    let g = build_laplacian_1d(n, BoundaryCondition::Neumann).unwrap();
    build_fisher(&g, &fisher_weight(&g), 0.5).unwrap()
}

fn golden_entry(name: &'static str, scenario: ScenarioSpec, label: &str, dt: f64) -> Golden {
    let interval = scenario.select(label).unwrap().interval.clone();
    let problem = prepare_problem(&scenario.problem_on(&interval, 10.0, dt).unwrap()).unwrap();
    Golden { name, scenario, problem }
}

/// The golden scenarios, each on its working interval and prepared for the engine.
pub fn golden() -> Vec<Golden> {
    vec![
        golden_entry("scalar", sqrt_scenario(), "primary", 1e-3),
        golden_entry("logistic-neumann", logistic_neumann(50), "primary", 0.05),
        golden_entry("logistic-dirichlet-a5", logistic_dirichlet(5.0), "primary", 0.05),
        golden_entry("logistic-dirichlet-a15", logistic_dirichlet(15.0), "primary", 0.05),
        golden_entry("competition", competition_neumann(30), "primary", 0.05),
        golden_entry("fisher", fisher_neumann(60), "nontrivial", 0.05),
    ]
}

/// Equilibria plus the solution from the interval midpoint on the final horizon.
pub fn run_golden(g: &Golden) -> (EquilibriumReport, IterationReport) {
    let opts = EngineOptions::default();
    let eq = asymptotic_equilibria(&g.problem, &opts).unwrap();
    let p = g.problem.with_horizon(eq.horizon).unwrap();
    let i = p.interval();
    let mid = i.lower().add(i.upper()).unwrap().scaled(0.5);
    let sol = iterate_with(&p, &mid, &opts).unwrap();
    (eq, sol)
}

/// `max (a - b)` over all entries: positive where `a <= b` fails.
pub fn excess(a: &Trajectory, b: &Trajectory) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

struct SqrtOde {
    a: f64,
}

impl System<f64, Vector1<f64>> for SqrtOde {
    fn system(&self, _t: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        dy[0] = -self.a * y[0] + y[0].signum() * y[0].abs().sqrt();
    }
}

/// `u' = -a u + sign(u) sqrt|u|` by adaptive Dormand-Prince, sampled every `dt` up to `t_end`.
pub fn sqrt_ode(a: f64, u0: f64, dt: f64, t_end: f64) -> Vec<f64> {
    let mut s = Dopri5::new(SqrtOde { a }, 0.0, t_end, dt, Vector1::new(u0), 1e-12, 1e-12);
    s.integrate().unwrap();
    let xs = s.x_out();
    let ys = s.y_out();
    let steps = (t_end / dt).round() as usize;
    (0..=steps)
        .map(|k| {
            assert!((xs[k] - k as f64 * dt).abs() < 1e-9, "dense output off the grid at {k}");
            ys[k][0]
        })
        .collect()
}
