//! Trajectories on a uniform time grid and the fixed-point map
//! `G(u)(t) = S(t) u0 + int_0^t S(t - s) F(u(s)) ds`.
//!
//! The integral is advanced one step at a time with `F` frozen at the right
//! node of each step:
//!
//! ```text
//! G(u)(t_{k+1}) = S(dt) G(u)(t_k) + Phi(dt) F(u(t_{k+1})),   Phi(dt) = int_0^dt S(s) ds
//! ```
//!
//! `S(dt)` and `Phi(dt)` are entrywise nonnegative (round-off negatives are
//! clipped), so every floating-point operation in `G` is monotone and the
//! discrete map preserves order exactly.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlin::Nonlinearity;
use crate::operators::GeneratorSpec;
use crate::order::{sup_dist, sup_norm, GridFunction, OrderInterval};

/// Largest fraction of entries `G` may clamp back into the interval.
pub const MAX_CLAMP_FRACTION: f64 = 1e-3;

/// States `u(t_0), ..., u(t_K)` on `t_k = k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dt: f64,
    components: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, states: &[GridFunction]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::structural("trajectory needs at least one state"))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation(format!("time step dt = {dt} must be > 0")));
        }
        let mut values = Vec::with_capacity(states.len() * first.len());
        for s in states {
            first.check_same_shape(s)?;
            values.extend_from_slice(s.values());
        }
        Ok(Self {
            dt,
            components: first.components(),
            dim: first.len(),
            values,
        })
    }

    /// The constant trajectory `t -> v` with `steps + 1` nodes.
    pub fn constant(v: &GridFunction, steps: usize, dt: f64) -> Result<Self> {
        Self::from_fn(dt, steps, |_| v.clone())
    }

    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> GridFunction) -> Result<Self> {
        let states: Vec<GridFunction> = (0..=steps).map(|k| f(k as f64 * dt)).collect();
        Self::new(dt, &states)
    }

    pub(crate) fn from_raw(dt: f64, components: usize, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % dim, 0);
        Self { dt, components, dim, values }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| self.time(k)).collect()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn state_fn(&self, k: usize) -> GridFunction {
        GridFunction::from_raw(self.state(k).to_vec(), self.components)
    }

    pub fn first(&self) -> GridFunction {
        self.state_fn(0)
    }

    pub fn last(&self) -> GridFunction {
        self.state_fn(self.steps())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_k |u(t_k) - v(t_k)|_inf`.
    pub fn sup_dist(&self, other: &Trajectory) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(sup_dist(&self.values, &other.values))
    }

    pub fn check_same_grid(&self, other: &Trajectory) -> Result<()> {
        if self.dim != other.dim || self.values.len() != other.values.len() || self.components != other.components {
            return Err(Error::structural("trajectories live on different grids"));
        }
        if (self.dt - other.dt).abs() > 1e-15 * self.dt {
            return Err(Error::structural("trajectories have different time steps"));
        }
        Ok(())
    }

    pub fn csv_header(&self) -> Vec<String> {
        let nodes = self.dim / self.components;
        let mut h = vec!["t".to_string()];
        for k in 0..self.components {
            for i in 0..nodes {
                if self.components == 1 {
                    h.push(format!("node_{i}"));
                } else {
                    h.push(format!("node_{i}_c{k}"));
                }
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(self.csv_header()).map_err(csv_err)?;
        let mut row = Vec::with_capacity(self.dim + 1);
        for k in 0..=self.steps() {
            row.clear();
            row.push(format!("{:e}", self.time(k)));
            row.extend(self.state(k).iter().map(|v| format!("{v:e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// `v(t) = u(t_0 + t)` with `t_0 = t0_index * dt`.
pub fn translate(u: &Trajectory, t0_index: usize) -> Result<Trajectory> {
    if t0_index > u.steps() {
        return Err(Error::validation(format!(
            "translation index {t0_index} exceeds the {} steps of the trajectory",
            u.steps()
        )));
    }
    Ok(Trajectory::from_raw(
        u.dt,
        u.components,
        u.dim,
        u.values[t0_index * u.dim..].to_vec(),
    ))
}

/// `S(dt)` and `Phi(dt)` with round-off negatives removed.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub dt: f64,
    pub s: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl Propagator {
    pub fn new(a: &GeneratorSpec, dt: f64) -> Result<Self> {
        let clip = |m: DMatrix<f64>| m.map(|v| v.max(0.0));
        Ok(Self {
            dt,
            s: clip(a.semigroup_matrix(dt)?),
            phi: clip(a.integral_matrix(dt)?),
        })
    }
}

/// Data of `u' + A u = F(u)` after the shift `A <- A + mu I`, `F <- F + mu id`.
///
/// `generator` already carries the shift; `nonlinearity` is the unshifted `F`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    generator: GeneratorSpec,
    nonlinearity: Arc<dyn Nonlinearity>,
    interval: OrderInterval,
    mu: f64,
    horizon: f64,
    dt: f64,
    propagator: OnceLock<Arc<Propagator>>,
}

impl ProblemSpec {
    pub fn new(
        generator: GeneratorSpec,
        nonlinearity: Arc<dyn Nonlinearity>,
        interval: OrderInterval,
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        if interval.dim() != generator.dim() {
            return Err(Error::structural(format!(
                "interval dimension {} does not match generator dimension {}",
                interval.dim(),
                generator.dim()
            )));
        }
        if interval.cone().components() != generator.components() {
            return Err(Error::structural("cone and generator disagree on components"));
        }
        nonlinearity.check(interval.dim(), generator.components())?;
        check_time(horizon, dt)?;
        Ok(Self {
            generator,
            nonlinearity,
            interval,
            mu: 0.0,
            horizon,
            dt,
            propagator: OnceLock::new(),
        })
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.generator
    }

    /// `A` without the scaling shift.
    pub fn base_generator(&self) -> GeneratorSpec {
        if self.mu == 0.0 {
            self.generator.clone()
        } else {
            self.generator.shifted(-self.mu)
        }
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    pub fn interval(&self) -> &OrderInterval {
        &self.interval
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn components(&self) -> usize {
        self.generator.components()
    }

    /// Number of time steps covering the horizon.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        check_time(horizon, self.dt)?;
        let mut p = self.clone();
        p.horizon = horizon;
        Ok(p)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        check_time(self.horizon, dt)?;
        let mut p = self.clone();
        p.dt = dt;
        p.propagator = OnceLock::new();
        Ok(p)
    }

    pub fn with_interval(&self, interval: OrderInterval) -> Result<Self> {
        if interval.dim() != self.dim() {
            return Err(Error::structural("interval dimension mismatch"));
        }
        let mut p = self.clone();
        p.interval = interval;
        Ok(p)
    }

    /// `F_mu(u) = F(u) + mu u` on raw values.
    pub fn f_mu_into(&self, u: &[f64], out: &mut [f64]) {
        self.nonlinearity.eval_into(u, out);
        if self.mu != 0.0 {
            for (o, &x) in out.iter_mut().zip(u) {
                *o += self.mu * x;
            }
        }
    }

    /// `|A v - F(v)|_inf` for the unshifted problem.
    pub fn equilibrium_residual(&self, v: &GridFunction) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::structural("state dimension mismatch"));
        }
        let av = self.generator.apply_slice(v.values());
        let mut f = vec![0.0; v.len()];
        self.f_mu_into(v.values(), &mut f);
        Ok(av
            .iter()
            .zip(&f)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
    }

    /// Cached step operators; fails when `A + mu` is not exponentially stable.
    pub fn propagator(&self) -> Result<Arc<Propagator>> {
        if let Some(p) = self.propagator.get() {
            return Ok(p.clone());
        }
        let lmin = self.generator.lambda_min();
        if !(lmin > 1e-10 * self.generator.norm_inf().max(1.0)) {
            return Err(Error::validation(format!(
                "lambda_1(A + mu) = {lmin:.6e} <= 0; scale the problem with a larger mu"
            )));
        }
        let p = Arc::new(Propagator::new(&self.generator, self.dt)?);
        Ok(self.propagator.get_or_init(|| p).clone())
    }
}

fn check_time(horizon: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation(format!("dt = {dt} must be > 0")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::validation(format!("horizon = {horizon} must be > 0")));
    }
    Ok(())
}

/// `A <- A + mu I`, `F <- F + mu id`; leaves the solution set unchanged.
pub fn scale_problem(p: &ProblemSpec, mu: f64) -> Result<ProblemSpec> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::validation(format!("scaling shift mu = {mu} must be >= 0")));
    }
    if mu == 0.0 {
        return Ok(p.clone());
    }
    let mut q = p.clone();
    q.generator = p.generator.shifted(mu);
    q.mu += mu;
    q.propagator = OnceLock::new();
    Ok(q)
}

/// Result of one application of `G` with the clamp count.
#[derive(Debug, Clone)]
pub struct GOutput {
    pub trajectory: Trajectory,
    pub clamped: usize,
}

/// `G(u)` on the grid of `u`. `u0` must lie in the interval; states of `u`
/// are clamped into it before `F` is evaluated.
pub fn apply_g(p: &ProblemSpec, u0: &GridFunction, u: &Trajectory) -> Result<Trajectory> {
    let out = apply_g_counted(p, u0, u)?;
    let total = u.steps() * u.dim();
    if out.clamped as f64 > MAX_CLAMP_FRACTION * total as f64 {
        return Err(Error::validation(format!(
            "{} of {total} trajectory entries left the order interval",
            out.clamped
        )));
    }
    Ok(out.trajectory)
}

pub fn apply_g_counted(p: &ProblemSpec, u0: &GridFunction, u: &Trajectory) -> Result<GOutput> {
    if u0.len() != p.dim() || u.dim() != p.dim() {
        return Err(Error::structural("state dimension does not match the problem"));
    }
    if !p.interval().contains(u0)? {
        return Err(Error::validation("initial value lies outside the order interval"));
    }
    let prop = if (u.dt() - p.dt).abs() <= 1e-15 * p.dt {
        p.propagator()?
    } else {
        p.with_dt(u.dt())?.propagator()?
    };
    let n = p.dim();
    let k_steps = u.steps();

    // F_mu(u(t_1)), ..., F_mu(u(t_K)) as the columns of one matrix
    let mut clamped = 0;
    let mut forcing = DMatrix::<f64>::zeros(n, k_steps);
    let mut state = vec![0.0; n];
    for k in 1..=k_steps {
        state.copy_from_slice(u.state(k));
        clamped += p.interval().clamp_slice(&mut state);
        p.f_mu_into(&state, forcing.column_mut(k - 1).as_mut_slice());
    }
    let increments = &prop.phi * forcing;

    let mut values = Vec::with_capacity((k_steps + 1) * n);
    values.extend_from_slice(u0.values());
    let mut x = DVector::from_column_slice(u0.values());
    let mut next = DVector::zeros(n);
    for k in 0..k_steps {
        next.gemv(1.0, &prop.s, &x, 0.0);
        next += increments.column(k);
        values.extend_from_slice(next.as_slice());
        std::mem::swap(&mut x, &mut next);
    }
    Ok(GOutput {
        trajectory: Trajectory::from_raw(u.dt(), u0.components(), n, values),
        clamped,
    })
}

/// `max_k |u(t_k) - G(u)(t_k)|_inf` with `u0 = u(0)`.
pub fn mild_residual(p: &ProblemSpec, u: &Trajectory) -> Result<f64> {
    let g = apply_g_counted(p, &u.first(), u)?.trajectory;
    u.sup_dist(&g)
}

/// Worst defect of the discrete weak form tested against the standard basis:
/// `(u_{k+1} - u_k)/dt + A (u_k + u_{k+1})/2 - (F(u_k) + F(u_{k+1}))/2`.
pub fn weak_residual(p: &ProblemSpec, u: &Trajectory) -> Result<f64> {
    if u.dim() != p.dim() {
        return Err(Error::structural("state dimension does not match the problem"));
    }
    let n = p.dim();
    let a = p.generator();
    let mut worst = 0.0_f64;
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut c0 = u.state(0).to_vec();
    p.interval().clamp_slice(&mut c0);
    p.f_mu_into(&c0, &mut f0);
    let mut a0 = a.apply_slice(u.state(0));
    for k in 0..u.steps() {
        let mut c1 = u.state(k + 1).to_vec();
        p.interval().clamp_slice(&mut c1);
        p.f_mu_into(&c1, &mut f1);
        let a1 = a.apply_slice(u.state(k + 1));
        let (x0, x1) = (u.state(k), u.state(k + 1));
        for i in 0..n {
            let d = (x1[i] - x0[i]) / u.dt() + 0.5 * (a0[i] + a1[i]) - 0.5 * (f0[i] + f1[i]);
            worst = worst.max(d.abs());
        }
        std::mem::swap(&mut f0, &mut f1);
        a0 = a1;
    }
    Ok(worst)
}

/// Scale of a trajectory, for relative reporting.
pub fn trajectory_scale(u: &Trajectory) -> f64 {
    sup_norm(u.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlin::{linear, logistic, signed_sqrt};
    use crate::operators::{build_laplacian_1d, semigroup_apply, BoundaryCondition};
    use crate::order::{leq, ConeSpec};
    use proptest::prelude::*;

    fn scalar_problem(a: f64, m: f64, horizon: f64, dt: f64) -> ProblemSpec {
        let interval = OrderInterval::new(
            GridFunction::constant(1, 1, -m),
            GridFunction::constant(1, 1, m),
            ConeSpec::standard(1),
        )
        .unwrap();
        ProblemSpec::new(GeneratorSpec::scalar(a).unwrap(), Arc::new(signed_sqrt()), interval, horizon, dt).unwrap()
    }

    fn scalar(v: f64) -> GridFunction {
        GridFunction::scalar_field(vec![v]).unwrap()
    }

    #[test]
    fn homogeneous_case_is_the_semigroup() {
        let a = build_laplacian_1d(10, BoundaryCondition::Dirichlet).unwrap();
        let interval = OrderInterval::new(
            GridFunction::constant(10, 1, -1.0),
            GridFunction::constant(10, 1, 1.0),
            ConeSpec::standard(1),
        )
        .unwrap();
        let p = ProblemSpec::new(a.clone(), Arc::new(linear(0.0)), interval, 0.2, 0.01).unwrap();
        let u0 = GridFunction::scalar_field((0..10).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let u = Trajectory::constant(&u0, p.steps(), p.dt()).unwrap();
        let g = apply_g(&p, &u0, &u).unwrap();
        for k in [0, 5, 20] {
            let want = semigroup_apply(&a, g.time(k), &u0).unwrap();
            assert!(sup_dist(g.state(k), want.values()) < 1e-12);
        }
    }

    #[test]
    fn zero_branch_of_the_sqrt_problem() {
        let p = scalar_problem(1.0, 2.0, 1.0, 1e-2);
        let zero = Trajectory::constant(&scalar(0.0), p.steps(), p.dt()).unwrap();
        let g = apply_g(&p, &scalar(0.0), &zero).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        // logistic on Neumann: constants a/b solve A v = F(v) exactly
        let a = build_laplacian_1d(8, BoundaryCondition::Neumann).unwrap();
        let interval = OrderInterval::new(
            GridFunction::constant(8, 1, 0.0),
            GridFunction::constant(8, 1, 2.0),
            ConeSpec::standard(1),
        )
        .unwrap();
        let p = ProblemSpec::new(a, Arc::new(logistic(1.0, 2.0).unwrap()), interval, 2.0, 0.05).unwrap();
        let p = scale_problem(&p, 7.0).unwrap();
        let v = GridFunction::constant(8, 1, 0.5);
        assert_eq!(p.equilibrium_residual(&v).unwrap(), 0.0);
        let u = Trajectory::constant(&v, p.steps(), p.dt()).unwrap();
        assert!(mild_residual(&p, &u).unwrap() < 1e-12);
        assert!(weak_residual(&p, &u).unwrap() < 1e-12);
    }

    #[test]
    fn unstable_generator_is_rejected() {
        let a = build_laplacian_1d(5, BoundaryCondition::Neumann).unwrap();
        let interval = OrderInterval::new(
            GridFunction::constant(5, 1, 0.0),
            GridFunction::constant(5, 1, 1.0),
            ConeSpec::standard(1),
        )
        .unwrap();
        let p = ProblemSpec::new(a, Arc::new(linear(0.0)), interval, 1.0, 0.1).unwrap();
        let u0 = GridFunction::constant(5, 1, 0.5);
        let u = Trajectory::constant(&u0, p.steps(), p.dt()).unwrap();
        assert!(matches!(apply_g(&p, &u0, &u), Err(Error::Validation(_))));
        let q = scale_problem(&p, 1.0).unwrap();
        assert!(apply_g(&q, &u0, &u).is_ok());
        assert!(scale_problem(&p, -1.0).is_err());
        assert_eq!(scale_problem(&p, 0.0).unwrap().mu(), 0.0);
    }

    #[test]
    fn scaled_and_unscaled_equilibria_agree() {
        // fixed point of the scaled sqrt problem, by iterating G on constants
        let p = scalar_problem(1.0, 2.0, 40.0, 0.05);
        for mu in [0.0, 0.5, 3.0] {
            let q = scale_problem(&p, mu).unwrap();
            let mut u = Trajectory::constant(&scalar(2.0), q.steps(), q.dt()).unwrap();
            for _ in 0..400 {
                u = apply_g(&q, &scalar(2.0), &u).unwrap();
            }
            assert!((u.last().values()[0] - 1.0).abs() < 1e-8, "mu = {mu}");
        }
    }

    fn u_max(t: f64) -> f64 {
        (1.0 - (-t / 2.0).exp()).powi(2)
    }

    #[test]
    fn closed_form_branch_residual_is_first_order() {
        let mut res = vec![];
        for dt in [4e-3, 2e-3, 1e-3] {
            let p = scalar_problem(1.0, 2.0, 2.0, dt);
            let u = Trajectory::from_fn(dt, p.steps(), |t| scalar(u_max(t))).unwrap();
            res.push(mild_residual(&p, &u).unwrap());
        }
        for w in res.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.2, "{res:?}");
        }
    }

    #[test]
    fn non_equilibrium_constant_has_residual() {
        let mut res = vec![];
        for dt in [1e-2, 1e-3] {
            let p = scalar_problem(1.0, 2.0, 1.0, dt);
            let u = Trajectory::constant(&scalar(0.5), p.steps(), dt).unwrap();
            res.push(mild_residual(&p, &u).unwrap());
        }
        assert!(res[1] > 0.1 && (res[0] - res[1]).abs() < 0.01, "{res:?}");
    }

    #[test]
    fn translation() {
        let p = scalar_problem(1.0, 2.0, 4.0, 1e-3);
        let u = Trajectory::from_fn(p.dt(), p.steps(), |t| scalar(u_max(t))).unwrap();
        assert_eq!(translate(&u, 0).unwrap(), u);
        let v = translate(&u, 1000).unwrap();
        assert_eq!(v.steps(), u.steps() - 1000);
        for k in (0..v.steps()).step_by(250) {
            assert!((v.state(k)[0] - u_max(1.0 + v.time(k))).abs() < 1e-12);
        }
        let pv = p.with_horizon(v.horizon()).unwrap();
        assert!(mild_residual(&pv, &v).unwrap() <= mild_residual(&p, &u).unwrap() + 1e-3);
        assert!(translate(&u, u.steps() + 1).is_err());
        let c = Trajectory::constant(&scalar(1.0), 10, 0.1).unwrap();
        assert!(translate(&c, 4).unwrap().values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn csv_headers() {
        let u = Trajectory::constant(&GridFunction::constant(2, 2, 1.0), 2, 0.5).unwrap();
        assert_eq!(u.csv_header(), vec!["t", "node_0_c0", "node_1_c0", "node_0_c1", "node_1_c1"]);
        let mut buf = vec![];
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let s = Trajectory::constant(&scalar(1.0), 1, 0.5).unwrap();
        assert_eq!(s.csv_header(), vec!["t", "node_0"]);
    }

    fn logistic_problem() -> ProblemSpec {
        let a = build_laplacian_1d(6, BoundaryCondition::Dirichlet).unwrap();
        let interval = OrderInterval::new(
            GridFunction::constant(6, 1, 0.0),
            GridFunction::constant(6, 1, 3.0),
            ConeSpec::standard(1),
        )
        .unwrap();
        let p = ProblemSpec::new(a, Arc::new(logistic(2.0, 1.0).unwrap()), interval, 0.5, 0.05).unwrap();
        let mu = p.nonlinearity().quasi_increasing_shift(p.interval()).unwrap();
        scale_problem(&p, mu).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn g_is_monotone(seed in proptest::collection::vec((0.0f64..3.0, 0.0f64..3.0), 66), u0a in 0.0f64..3.0, u0b in 0.0f64..3.0) {
            let p = logistic_problem();
            let steps = p.steps();
            prop_assume!(seed.len() >= 6 * (steps + 1));
            let lo: Vec<f64> = seed.iter().map(|(x, y)| x.min(*y)).take(6 * (steps + 1)).collect();
            let hi: Vec<f64> = seed.iter().map(|(x, y)| x.max(*y)).take(6 * (steps + 1)).collect();
            let u = Trajectory::from_raw(p.dt(), 1, 6, lo);
            let v = Trajectory::from_raw(p.dt(), 1, 6, hi);
            let (a0, b0) = (u0a.min(u0b), u0a.max(u0b));
            let ua = GridFunction::constant(6, 1, a0);
            let ub = GridFunction::constant(6, 1, b0);
            let gu = apply_g(&p, &ua, &u).unwrap();
            let gv = apply_g(&p, &ua, &v).unwrap();
            let gw = apply_g(&p, &ub, &u).unwrap();
            let cone = ConeSpec::standard(1);
            for k in 0..=steps {
                prop_assert!(leq(&gu.state_fn(k), &gv.state_fn(k), &cone).unwrap());
                prop_assert!(leq(&gu.state_fn(k), &gw.state_fn(k), &cone).unwrap());
                // the interval is invariant: 0 and 3 are sub/super-solutions
                prop_assert!(p.interval().contains(&gv.state_fn(k)).unwrap());
            }
        }
    }
}
