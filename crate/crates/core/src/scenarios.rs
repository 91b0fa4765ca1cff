//! Certified sub/super-solution pairs for the logistic, competition and Fisher
//! problems, and the scalar square-root problem with closed-form solutions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mild::ProblemSpec;
use crate::monotone::{asymptotic_equilibria, newton_equilibrium, prepare_problem, EngineOptions};
use crate::nonlin::{
    competition, fisher, logistic, signed_sqrt, Competition, Lipschitz, Nonlinearity, NonlinearityConfig, WeightProfile,
};
use crate::operators::{
    add_potential, build_laplacian_1d, check_submarkovian, principal_eig, BoundaryCondition, EigPair, GeneratorSpec,
};
use crate::order::{leq, sup_norm, ConeSpec, GridFunction, OrderInterval, TOL_ORDER};

/// Outcome of a sub- or super-solution test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holds: bool,
    /// Largest cone-oriented defect; `<= 0` means the inequality holds strictly.
    pub worst_margin: f64,
    pub slack: f64,
}

fn certificate(a: &GeneratorSpec, f: &dyn Nonlinearity, u: &GridFunction, cone: &ConeSpec, sub: bool) -> Result<Certificate> {
    if u.len() != a.dim() || u.components() != cone.components() || a.components() != cone.components() {
        return Err(Error::structural("certificate input has the wrong shape"));
    }
    let au = a.apply_slice(u.values());
    let fu = f.eval(u)?;
    let n = u.len() / cone.components();
    let mut worst = f64::NEG_INFINITY;
    for (i, (x, y)) in au.iter().zip(fu.values()).enumerate() {
        let s = cone.sign(i / n);
        let d = if sub { s * (x - y) } else { s * (y - x) };
        worst = worst.max(d);
    }
    let slack = TOL_ORDER * (a.norm_inf() * sup_norm(u.values())).max(1.0);
    Ok(Certificate {
        holds: worst <= slack,
        worst_margin: worst,
        slack,
    })
}

/// `A u <= F(u)` in the cone order, up to round-off slack.
pub fn verify_subsolution(a: &GeneratorSpec, f: &dyn Nonlinearity, u: &GridFunction, cone: &ConeSpec) -> Result<Certificate> {
    certificate(a, f, u, cone, true)
}

/// `A u >= F(u)` in the cone order, up to round-off slack.
pub fn verify_supersolution(a: &GeneratorSpec, f: &dyn Nonlinearity, u: &GridFunction, cone: &ConeSpec) -> Result<Certificate> {
    certificate(a, f, u, cone, false)
}

/// Both certificates and the ordering of an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCertificates {
    pub sub: Certificate,
    pub sup: Certificate,
    pub ordered: bool,
    pub quasi_increasing_shift: f64,
    pub lipschitz: Lipschitz,
}

impl IntervalCertificates {
    pub fn all_hold(&self) -> bool {
        self.sub.holds && self.sup.holds && self.ordered
    }
}

pub fn certify_interval(a: &GeneratorSpec, f: &dyn Nonlinearity, interval: &OrderInterval) -> Result<IntervalCertificates> {
    Ok(IntervalCertificates {
        sub: verify_subsolution(a, f, interval.lower(), interval.cone())?,
        sup: verify_supersolution(a, f, interval.upper(), interval.cone())?,
        ordered: leq(interval.lower(), interval.upper(), interval.cone())?,
        quasi_increasing_shift: f.quasi_increasing_shift(interval)?,
        lipschitz: f.lipschitz_on(interval),
    })
}

/// An interval with its certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedInterval {
    pub label: String,
    pub interval: OrderInterval,
    pub certificates: IntervalCertificates,
}

/// Principal eigen data a scenario relied on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub label: String,
    pub lambda1: f64,
    pub phi0: GridFunction,
}

impl EigenRecord {
    fn new(label: impl Into<String>, e: &EigPair) -> Self {
        Self {
            label: label.into(),
            lambda1: e.lambda1,
            phi0: e.phi0.clone(),
        }
    }
}

/// Closed forms of the scalar problem `u' + a u = sign(u) sqrt|u|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtClosedForm {
    pub a: f64,
    pub m: f64,
}

impl SqrtClosedForm {
    /// Maximal solution from `u0 = 0`.
    pub fn u_max(&self, t: f64) -> f64 {
        self.branch(t, 0.0)
    }

    pub fn u_min(&self, t: f64) -> f64 {
        -self.u_max(t)
    }

    /// The solution that leaves 0 at time `t0`.
    pub fn branch(&self, t: f64, t0: f64) -> f64 {
        if t <= t0 {
            0.0
        } else {
            (1.0 - (-(self.a / 2.0) * (t - t0)).exp()).powi(2) / (self.a * self.a)
        }
    }

    /// `U_max(0) = M` fixes the shift: `t_M = (2/a) ln(a sqrt(M) - 1)`.
    pub fn t_m(&self) -> f64 {
        (2.0 / self.a) * (self.a * self.m.sqrt() - 1.0).ln()
    }

    /// Solution from `u0 = M`.
    pub fn upper_extremal(&self, t: f64) -> f64 {
        let e = self.a * self.m.sqrt() - 1.0;
        if e <= 0.0 {
            return self.m;
        }
        (1.0 + (-(self.a / 2.0) * (t - self.t_m())).exp()).powi(2) / (self.a * self.a)
    }

    pub fn lower_extremal(&self, t: f64) -> f64 {
        -self.upper_extremal(t)
    }

    pub fn equilibria(&self) -> [f64; 3] {
        let e = 1.0 / (self.a * self.a);
        [-e, 0.0, e]
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub generator: GeneratorSpec,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub primary: CertifiedInterval,
    pub alternatives: Vec<CertifiedInterval>,
    pub eigen: Vec<EigenRecord>,
    pub epsilon: Option<f64>,
    pub bound: Option<f64>,
    pub predicted_equilibrium: Option<GridFunction>,
    pub closed_form: Option<SqrtClosedForm>,
    /// Semi-trivial states of the competition system.
    pub semi_trivial: Option<(GridFunction, GridFunction)>,
    pub notes: Vec<String>,
}

/// JSON-friendly view of a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary<'a> {
    pub name: &'a str,
    pub nonlinearity: &'a str,
    pub nodes: usize,
    pub components: usize,
    pub mesh_h: f64,
    pub primary: &'a CertifiedInterval,
    pub alternatives: &'a [CertifiedInterval],
    pub eigen: &'a [EigenRecord],
    pub epsilon: Option<f64>,
    pub bound: Option<f64>,
    pub predicted_equilibrium: &'a Option<GridFunction>,
    pub closed_form: &'a Option<SqrtClosedForm>,
    pub notes: &'a [String],
}

impl ScenarioSpec {
    pub fn interval(&self) -> &OrderInterval {
        &self.primary.interval
    }

    pub fn cone(&self) -> &ConeSpec {
        self.primary.interval.cone()
    }

    pub fn alternative(&self, label: &str) -> Option<&CertifiedInterval> {
        self.alternatives.iter().find(|c| c.label == label)
    }

    /// Interval by label; the primary one answers to its own label and to `"primary"`.
    pub fn select(&self, label: &str) -> Option<&CertifiedInterval> {
        if label == "primary" || label == self.primary.label {
            Some(&self.primary)
        } else {
            self.alternative(label)
        }
    }

    /// Unscaled problem on the primary interval.
    pub fn problem(&self, horizon: f64, dt: f64) -> Result<ProblemSpec> {
        self.problem_on(self.interval(), horizon, dt)
    }

    pub fn problem_on(&self, interval: &OrderInterval, horizon: f64, dt: f64) -> Result<ProblemSpec> {
        ProblemSpec::new(self.generator.clone(), self.nonlinearity.clone(), interval.clone(), horizon, dt)
    }

    pub fn summary(&self) -> ScenarioSummary<'_> {
        ScenarioSummary {
            name: &self.name,
            nonlinearity: self.nonlinearity.name(),
            nodes: self.generator.nodes(),
            components: self.generator.components(),
            mesh_h: self.generator.mesh_h(),
            primary: &self.primary,
            alternatives: &self.alternatives,
            eigen: &self.eigen,
            epsilon: self.epsilon,
            bound: self.bound,
            predicted_equilibrium: &self.predicted_equilibrium,
            closed_form: &self.closed_form,
            notes: &self.notes,
        }
    }

    fn new(name: &str, generator: GeneratorSpec, nonlinearity: Arc<dyn Nonlinearity>, primary: CertifiedInterval) -> Self {
        Self {
            name: name.into(),
            generator,
            nonlinearity,
            primary,
            alternatives: vec![],
            eigen: vec![],
            epsilon: None,
            bound: None,
            predicted_equilibrium: None,
            closed_form: None,
            semi_trivial: None,
            notes: vec![],
        }
    }
}

fn certified(label: &str, a: &GeneratorSpec, f: &dyn Nonlinearity, interval: OrderInterval) -> Result<CertifiedInterval> {
    let certificates = certify_interval(a, f, &interval)?;
    if !certificates.all_hold() {
        return Err(Error::validation(format!(
            "{label} interval fails its certificates: sub margin {:.3e}, super margin {:.3e}, ordered {}",
            certificates.sub.worst_margin, certificates.sup.worst_margin, certificates.ordered
        )));
    }
    Ok(CertifiedInterval {
        label: label.into(),
        interval,
        certificates,
    })
}

const MAX_HALVINGS: usize = 80;

/// Logistic `u' + A u = a u - b u^2` on `[eps phi0, M 1]` when `a > lambda_1(A)`,
/// on `[0, M 1]` otherwise.
pub fn build_logistic(a_op: &GeneratorSpec, a: f64, b: f64) -> Result<ScenarioSpec> {
    let f = logistic(a, b)?;
    let nodes = a_op.nodes();
    let eig = principal_eig(a_op)?;
    let phi_max = eig.phi0.max();
    let cone = ConeSpec::standard(1);
    let constant_kernel = a_op.row_sums().iter().all(|s| s.abs() <= TOL_ORDER * a_op.norm_inf().max(1.0));

    let (primary, epsilon, m, predicted, notes) = if a > eig.lambda1 {
        let eps0 = (a - eig.lambda1) / (b * phi_max);
        let mut eps = eps0 / 2.0;
        let mut found = None;
        for _ in 0..MAX_HALVINGS {
            let lower = eig.phi0.scaled(eps);
            if verify_subsolution(a_op, &f, &lower, &cone)?.holds {
                found = Some(lower);
                break;
            }
            eps /= 2.0;
        }
        let lower = found.ok_or_else(|| Error::validation("no eps phi0 passes the sub-solution certificate"))?;
        let m = (2.0 * a / b).max(2.0 * eps * phi_max);
        let interval = OrderInterval::new(lower, GridFunction::constant(nodes, 1, m), cone.clone())?;
        let predicted = constant_kernel.then(|| GridFunction::constant(nodes, 1, a / b));
        let notes = vec![format!("a = {a} > lambda_1 = {:.6e}: positive equilibrium expected", eig.lambda1)];
        (certified("positive", a_op, &f, interval)?, Some(eps), m, predicted, notes)
    } else {
        let m = 2.0 * a / b;
        let interval = OrderInterval::new(GridFunction::zeros(nodes, 1), GridFunction::constant(nodes, 1, m), cone.clone())?;
        let notes = vec![format!("a = {a} <= lambda_1 = {:.6e}: only the zero equilibrium", eig.lambda1)];
        (certified("trivial", a_op, &f, interval)?, None, m, Some(GridFunction::zeros(nodes, 1)), notes)
    };
    let mut s = ScenarioSpec::new("logistic", a_op.clone(), Arc::new(f), primary);
    s.eigen.push(EigenRecord::new("lambda1(A)", &eig));
    s.epsilon = epsilon;
    s.bound = Some(m);
    s.predicted_equilibrium = predicted;
    s.notes = notes;
    Ok(s)
}

/// Time stepping used when a scenario has to solve a sub-problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub dt: f64,
    pub horizon: f64,
    pub engine: EngineOptions,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 10.0,
            engine: EngineOptions::default(),
        }
    }
}

/// Positive logistic equilibrium (zero if none), from the engine then polished by Newton.
pub fn logistic_equilibrium(a_op: &GeneratorSpec, a: f64, b: f64, settings: &SolveSettings) -> Result<GridFunction> {
    let s = build_logistic(a_op, a, b)?;
    if s.epsilon.is_none() {
        return Ok(GridFunction::zeros(a_op.nodes(), 1));
    }
    let p = prepare_problem(&s.problem(settings.horizon, settings.dt)?)?;
    let eq = asymptotic_equilibria(&p, &settings.engine)?;
    if !eq.extremal.iteration.converged {
        return Err(Error::numerical("logistic sub-problem did not converge"));
    }
    let base = s.problem(settings.horizon, settings.dt)?;
    Ok(match newton_equilibrium(&base, &eq.u_upper_star, 50) {
        Some((v, _)) if sup_norm(v.sub(&eq.u_upper_star)?.values()) < 1e-6 => v,
        _ => eq.u_upper_star,
    })
}

/// Competition system in the cone with the second component flipped.
///
/// The box `[(0, M), (M, 0)]` is always available; the coexistence interval
/// `[(eps v1, w2), (w1, eps v2)]` is built when
/// `a1 > lambda_1(A1 + b12 w2)` and `a2 > lambda_1(A2 + b21 w1)`.
pub fn build_competition(a1_op: &GeneratorSpec, a2_op: &GeneratorSpec, params: &Competition, settings: &SolveSettings) -> Result<ScenarioSpec> {
    params.validate()?;
    let c = params;
    let f = competition(c.a1, c.a2, c.b11, c.b12, c.b21, c.b22)?;
    let op = GeneratorSpec::block_diagonal(&[a1_op.clone(), a2_op.clone()])?;
    let nodes = op.nodes();
    let cone = ConeSpec::competition();
    let e1 = principal_eig(a1_op)?;
    let e2 = principal_eig(a2_op)?;
    let mut notes = vec![format!(
        "necessary condition: a1 > lambda_1(A1): {}, a2 > lambda_1(A2): {}",
        c.a1 > e1.lambda1,
        c.a2 > e2.lambda1
    )];

    let m = 2.0 * (c.a1 / c.b11).max(c.a2 / c.b22);
    let zero = GridFunction::zeros(nodes, 1);
    let big = GridFunction::constant(nodes, 1, m);
    let box_interval = OrderInterval::new(
        GridFunction::stack(&[&zero, &big])?,
        GridFunction::stack(&[&big, &zero])?,
        cone.clone(),
    )?;
    let boxed = certified("box", &op, &f, box_interval)?;

    let w1 = logistic_equilibrium(a1_op, c.a1, c.b11, settings)?;
    let w2 = logistic_equilibrium(a2_op, c.a2, c.b22, settings)?;
    let g1 = principal_eig(&add_potential(a1_op, &w2.scaled(c.b12))?)?;
    let g2 = principal_eig(&add_potential(a2_op, &w1.scaled(c.b21))?)?;
    let gate = c.a1 > g1.lambda1 && c.a2 > g2.lambda1;
    notes.push(format!(
        "sufficient condition: a1 > lambda_1(A1 + b12 w2) = {:.6e}: {}, a2 > lambda_1(A2 + b21 w1) = {:.6e}: {}",
        g1.lambda1,
        c.a1 > g1.lambda1,
        g2.lambda1,
        c.a2 > g2.lambda1
    ));

    let mut coexistence = None;
    let mut epsilon = None;
    if gate {
        let mut eps = ((c.a1 - g1.lambda1) / (c.b11 * g1.phi0.max())).min((c.a2 - g2.lambda1) / (c.b22 * g2.phi0.max())) / 2.0;
        for _ in 0..MAX_HALVINGS {
            let lower = GridFunction::stack(&[&g1.phi0.scaled(eps), &w2])?;
            let upper = GridFunction::stack(&[&w1, &g2.phi0.scaled(eps)])?;
            if let Ok(interval) = OrderInterval::new(lower, upper, cone.clone()) {
                if let Ok(ci) = certified("coexistence", &op, &f, interval) {
                    coexistence = Some(ci);
                    epsilon = Some(eps);
                    break;
                }
            }
            eps /= 2.0;
        }
        if coexistence.is_none() {
            notes.push("coexistence certificates failed for every eps tried".into());
        }
    } else {
        notes.push("coexistence interval not available".into());
    }

    let (primary, alternatives) = match coexistence {
        Some(ci) => (ci, vec![boxed]),
        None => (boxed, vec![]),
    };
    let mut s = ScenarioSpec::new("competition", op, Arc::new(f), primary);
    s.alternatives = alternatives;
    s.eigen = vec![
        EigenRecord::new("lambda1(A1)", &e1),
        EigenRecord::new("lambda1(A2)", &e2),
        EigenRecord::new("lambda1(A1 + b12 w2)", &g1),
        EigenRecord::new("lambda1(A2 + b21 w1)", &g2),
    ];
    s.epsilon = epsilon;
    s.bound = Some(m);
    s.semi_trivial = Some((w1, w2));
    s.notes = notes;
    Ok(s)
}

/// Fisher equation `u' + A u = m h(u)` on `[0, 1]`, plus `[eps phi0, 1 - eps phi1]`
/// when `lambda_1(A - alpha m) < 0` and `lambda_1(A + (1 - alpha) m) < 0`.
pub fn build_fisher(a_op: &GeneratorSpec, m: &GridFunction, alpha: f64) -> Result<ScenarioSpec> {
    let f = fisher(m, alpha)?;
    if m.len() != a_op.dim() {
        return Err(Error::structural("fisher weight does not match the mesh"));
    }
    if !check_submarkovian(a_op, 1.0)? {
        return Err(Error::validation("fisher needs a sub-markovian generator"));
    }
    let nodes = a_op.nodes();
    let cone = ConeSpec::standard(1);
    let one = GridFunction::constant(nodes, 1, 1.0);
    let unit = OrderInterval::new(GridFunction::zeros(nodes, 1), one.clone(), cone.clone())?;
    let primary = certified("unit", a_op, &f, unit)?;

    let e0 = principal_eig(&add_potential(a_op, &m.scaled(-alpha))?)?;
    let e1 = principal_eig(&add_potential(a_op, &m.scaled(1.0 - alpha))?)?;
    let mut notes = vec![format!(
        "lambda_1(A - alpha m) = {:.6e}, lambda_1(A + (1 - alpha) m) = {:.6e}",
        e0.lambda1, e1.lambda1
    )];
    let mut nontrivial = None;
    let mut epsilon = None;
    if e0.lambda1 < 0.0 && e1.lambda1 < 0.0 {
        let mut eps = 0.5;
        for _ in 0..MAX_HALVINGS {
            let lower = e0.phi0.scaled(eps);
            let upper = one.axpy(-eps, &e1.phi0)?;
            if let Ok(interval) = OrderInterval::new(lower, upper, cone.clone()) {
                if let Ok(ci) = certified("nontrivial", a_op, &f, interval) {
                    nontrivial = Some(ci);
                    epsilon = Some(eps);
                    break;
                }
            }
            eps /= 2.0;
        }
        if nontrivial.is_none() {
            notes.push("nontrivial interval unavailable: eps sweep exhausted".into());
        }
    } else {
        notes.push("nontrivial interval unavailable: 0 and 1 are not both linearly unstable".into());
    }
    let mut s = ScenarioSpec::new("fisher", a_op.clone(), Arc::new(f), primary);
    s.alternatives = nontrivial.into_iter().collect();
    s.eigen = vec![
        EigenRecord::new("lambda1(A - alpha m)", &e0),
        EigenRecord::new("lambda1(A + (1 - alpha) m)", &e1),
    ];
    s.epsilon = epsilon;
    s.notes = notes;
    Ok(s)
}

/// `u' + a u = sign(u) sqrt|u|` on `[-M, M]`; needs `M >= 1/a^2`.
pub fn build_scalar_nonunique(a: f64, m: f64) -> Result<ScenarioSpec> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::validation(format!("a = {a} must be > 0")));
    }
    if !(m >= 1.0 / (a * a)) {
        return Err(Error::validation(format!(
            "M = {m} is below 1/a^2 = {}; -M and M are then not sub/super-solutions",
            1.0 / (a * a)
        )));
    }
    let op = GeneratorSpec::scalar(a)?;
    let f = signed_sqrt();
    let interval = OrderInterval::new(
        GridFunction::constant(1, 1, -m),
        GridFunction::constant(1, 1, m),
        ConeSpec::standard(1),
    )?;
    let primary = certified("symmetric", &op, &f, interval)?;
    let mut s = ScenarioSpec::new("scalar_nonunique", op, Arc::new(f), primary);
    s.bound = Some(m);
    s.closed_form = Some(SqrtClosedForm { a, m });
    s.notes = vec!["F is not Lipschitz at 0: solutions from u0 = 0 are not unique".into()];
    Ok(s)
}

/// `u' + A u = F(u)` for a scalar preset on a constant interval `[lower, upper]`.
pub fn build_custom(a_op: &GeneratorSpec, f: Arc<dyn Nonlinearity>, lower: f64, upper: f64) -> Result<ScenarioSpec> {
    if f.components() != 1 {
        return Err(Error::validation("custom scenarios take scalar nonlinearities"));
    }
    let n = a_op.nodes();
    let interval = OrderInterval::new(
        GridFunction::constant(n, 1, lower),
        GridFunction::constant(n, 1, upper),
        ConeSpec::standard(1),
    )?;
    let primary = certified("custom", a_op, f.as_ref(), interval)?;
    Ok(ScenarioSpec::new("custom", a_op.clone(), f, primary))
}

/// Uniform 1-D mesh on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
    pub bc: BoundaryCondition,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n: 50,
            bc: BoundaryCondition::Dirichlet,
        }
    }
}

impl MeshConfig {
    pub fn generator(&self) -> Result<GeneratorSpec> {
        build_laplacian_1d(self.n, self.bc)
    }
}

/// Scenario registry, keyed by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Logistic { a: f64, b: f64 },
    Competition { a1: f64, a2: f64, b11: f64, b12: f64, b21: f64, b22: f64 },
    Fisher { alpha: f64, m: WeightProfile },
    /// Scalar ODE; the mesh is ignored.
    ScalarNonunique { a: f64, m: f64 },
    Custom { nonlinearity: NonlinearityConfig, lower: f64, upper: f64 },
}

impl ScenarioConfig {
    pub const NAMES: [&'static str; 5] = ["logistic", "competition", "fisher", "scalar_nonunique", "custom"];

    pub fn build(&self, mesh: &MeshConfig, settings: &SolveSettings) -> Result<ScenarioSpec> {
        match self {
            ScenarioConfig::Logistic { a, b } => build_logistic(&mesh.generator()?, *a, *b),
            ScenarioConfig::Competition { a1, a2, b11, b12, b21, b22 } => {
                let g = mesh.generator()?;
                let c = competition(*a1, *a2, *b11, *b12, *b21, *b22)?;
                build_competition(&g, &g, &c, settings)
            }
            ScenarioConfig::Fisher { alpha, m } => {
                let g = mesh.generator()?;
                let w = m.sample(g.coords())?;
                build_fisher(&g, &w, *alpha)
            }
            ScenarioConfig::ScalarNonunique { a, m } => build_scalar_nonunique(*a, *m),
            ScenarioConfig::Custom { nonlinearity, lower, upper } => {
                let g = mesh.generator()?;
                let f = nonlinearity.build(g.coords())?;
                build_custom(&g, f, *lower, *upper)
            }
        }
    }
}
