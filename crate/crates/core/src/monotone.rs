//! Lower and upper iteration sequences
//! `w_0 = u_lower, w_{n+1} = G(w_n)` and `W_0 = u_upper, W_{n+1} = G(W_n)`,
//! their limits (minimal and maximal mild solutions), the extremal
//! trajectories launched from the interval ends, and their limits as `t -> inf`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mild::{apply_g_counted, scale_problem, ProblemSpec, Trajectory, MAX_CLAMP_FRACTION};
use crate::order::{order_gap, sup_dist, sup_norm, GridFunction, TOL_ORDER};
use crate::par::ExecMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Stop when consecutive iterates differ by less than this (sup over the grid).
    pub tol: f64,
    pub max_iter: usize,
    /// Tail increment `|U(T) - U(T/2)|` accepted as convergence to equilibrium.
    pub tol_eq: f64,
    /// Accepted equilibrium residual `|A v - F(v)|`.
    pub tol_res: f64,
    /// Horizon cap for the doubling search.
    pub max_horizon: f64,
    /// Newton starts for the minimality cross-check.
    pub newton_starts: usize,
    pub seed: u64,
    pub exec: ExecMode,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 20_000,
            tol_eq: 1e-10,
            tol_res: 1e-6,
            max_horizon: 5_000.0,
            newton_starts: 20,
            seed: 0x5eed,
            exec: ExecMode::default(),
        }
    }
}

/// The last two iterates of each sequence plus the interval ends.
#[derive(Debug, Clone)]
pub struct StoredIterates {
    pub lower_bound: Trajectory,
    pub lower_prev: Trajectory,
    pub lower: Trajectory,
    pub upper: Trajectory,
    pub upper_prev: Trajectory,
    pub upper_bound: Trajectory,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub n_iters: usize,
    pub converged: bool,
    /// `|w_{n+1} - w_n|` and `|W_{n+1} - W_n|` per iteration.
    pub distances: Vec<[f64; 2]>,
    /// Worst order violation along the chain at each iteration.
    pub sandwich_violations: Vec<f64>,
    pub worst_violation: f64,
    /// Whether both distance sequences are non-increasing after the first step.
    pub distances_nonincreasing: bool,
    #[serde(skip)]
    pub u_min: Trajectory,
    #[serde(skip)]
    pub u_max: Trajectory,
    pub u_star: Option<GridFunction>,
    pub u_upper_star: Option<GridFunction>,
    /// `|A v - F(v)|` for `u_star` and `u_upper_star`, when present.
    pub equilibrium_residuals: Vec<f64>,
    /// `sup_t |u - G(u)|` for `u_min` and `u_max`.
    pub mild_residuals: [f64; 2],
    /// `sup_t |u_max(t) - u_min(t)|`.
    pub max_gap: f64,
    pub unique_flag: bool,
    pub clamped: usize,
    pub mu: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(skip)]
    pub stored: Option<StoredIterates>,
}

/// Worst violation of `a(t_k) <= b(t_k)` over all nodes.
fn traj_gap(a: &Trajectory, b: &Trajectory, signs: &[f64]) -> f64 {
    let d = a.dim();
    (0..=a.steps()).fold(f64::NEG_INFINITY, |w, k| {
        w.max(order_gap(&a.values()[k * d..(k + 1) * d], &b.values()[k * d..(k + 1) * d], signs))
    })
}

fn nonincreasing(d: &[f64]) -> bool {
    d.windows(2).skip(1).all(|w| w[1] <= w[0] + 1e-12)
}

/// Scaling policy: shift by the larger of the quasi-increasing shift and the
/// shift giving `lambda_1(A + mu) >= 0.1`.
pub fn prepare_problem(p: &ProblemSpec) -> Result<ProblemSpec> {
    let qs = p.nonlinearity().quasi_increasing_shift(p.interval())? - p.mu();
    let stab = 0.1 - p.generator().lambda_min();
    scale_problem(p, qs.max(stab).max(0.0))
}

/// Run the lower sequence with initial value `u0_lower` and the upper one with `u0_upper`.
fn run_sequences(
    p: &ProblemSpec,
    u0_lower: &GridFunction,
    u0_upper: &GridFunction,
    opts: &EngineOptions,
) -> Result<IterationReport> {
    let steps = p.steps();
    let interval = p.interval();
    let signs = interval.cone().signs().to_vec();
    let lower_bound = Trajectory::constant(interval.lower(), steps, p.dt())?;
    let upper_bound = Trajectory::constant(interval.upper(), steps, p.dt())?;

    if interval.is_degenerate() {
        let v = interval.lower();
        let r = p.equilibrium_residual(v)?;
        if r > opts.tol_res {
            return Err(Error::validation(format!(
                "degenerate interval is not an equilibrium (residual {r:.3e})"
            )));
        }
        return Ok(IterationReport {
            n_iters: 1,
            converged: true,
            distances: vec![[0.0, 0.0]],
            sandwich_violations: vec![0.0],
            worst_violation: 0.0,
            distances_nonincreasing: true,
            u_min: lower_bound.clone(),
            u_max: upper_bound.clone(),
            u_star: None,
            u_upper_star: None,
            equilibrium_residuals: vec![r, r],
            mild_residuals: [0.0, 0.0],
            max_gap: 0.0,
            unique_flag: true,
            clamped: 0,
            mu: p.mu(),
            dt: p.dt(),
            horizon: lower_bound.horizon(),
            stored: Some(StoredIterates {
                lower_prev: lower_bound.clone(),
                lower: lower_bound.clone(),
                upper: upper_bound.clone(),
                upper_prev: upper_bound.clone(),
                lower_bound,
                upper_bound,
            }),
        });
    }

    let mut lower = lower_bound.clone();
    let mut upper = upper_bound.clone();
    let mut lower_prev = lower.clone();
    let mut upper_prev = upper.clone();
    let mut distances = Vec::new();
    let mut violations = Vec::new();
    let mut converged = false;
    let mut clamped = 0;
    let total = steps * p.dim();
    for _ in 0..opts.max_iter {
        let (nl, nu) = opts.exec.join(
            || apply_g_counted(p, u0_lower, &lower),
            || apply_g_counted(p, u0_upper, &upper),
        );
        let (nl, nu) = (nl?, nu?);
        clamped = clamped.max(nl.clamped + nu.clamped);
        if (nl.clamped.max(nu.clamped)) as f64 > MAX_CLAMP_FRACTION * total as f64 {
            return Err(Error::validation(format!(
                "{} of {total} entries left the order interval during iteration",
                nl.clamped.max(nu.clamped)
            )));
        }
        let (nl, nu) = (nl.trajectory, nu.trajectory);
        let d = [sup_dist(nl.values(), lower.values()), sup_dist(nu.values(), upper.values())];
        let worst = [
            traj_gap(&lower_bound, &nl, &signs),
            traj_gap(&lower, &nl, &signs),
            traj_gap(&nl, &nu, &signs),
            traj_gap(&nu, &upper, &signs),
            traj_gap(&nu, &upper_bound, &signs),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
        distances.push(d);
        violations.push(worst);
        if worst > TOL_ORDER {
            return Err(Error::Invariant {
                what: format!("sandwich order broken at iteration {}", distances.len()),
                worst,
            });
        }
        lower_prev = std::mem::replace(&mut lower, nl);
        upper_prev = std::mem::replace(&mut upper, nu);
        if d[0] < opts.tol && d[1] < opts.tol {
            converged = true;
            break;
        }
    }

    let max_gap = sup_dist(lower.values(), upper.values());
    let dl: Vec<f64> = distances.iter().map(|d| d[0]).collect();
    let du: Vec<f64> = distances.iter().map(|d| d[1]).collect();
    let last = distances.last().copied().unwrap_or([0.0, 0.0]);
    Ok(IterationReport {
        n_iters: distances.len(),
        converged,
        worst_violation: violations.iter().copied().fold(0.0, f64::max),
        distances_nonincreasing: nonincreasing(&dl) && nonincreasing(&du),
        distances,
        sandwich_violations: violations,
        u_star: None,
        u_upper_star: None,
        equilibrium_residuals: vec![],
        mild_residuals: last,
        max_gap,
        unique_flag: max_gap <= 10.0 * opts.tol,
        clamped,
        mu: p.mu(),
        dt: p.dt(),
        horizon: lower.horizon(),
        u_min: lower.clone(),
        u_max: upper.clone(),
        stored: Some(StoredIterates {
            lower_bound,
            lower_prev,
            lower,
            upper,
            upper_prev,
            upper_bound,
        }),
    })
}

/// Minimal and maximal mild solutions with initial value `u0`.
///
/// `p` must already be scaled so that `F + mu id` is increasing on the
/// interval (see [`prepare_problem`]). Hitting `max_iter` returns a report
/// with `converged = false`.
pub fn iterate(p: &ProblemSpec, u0: &GridFunction, tol: f64, max_iter: usize) -> Result<IterationReport> {
    let opts = EngineOptions {
        tol,
        max_iter,
        ..EngineOptions::default()
    };
    iterate_with(p, u0, &opts)
}

pub fn iterate_with(p: &ProblemSpec, u0: &GridFunction, opts: &EngineOptions) -> Result<IterationReport> {
    check_u0(p, u0)?;
    run_sequences(p, u0, u0, opts)
}

/// Independent [`iterate_with`] runs for many initial values.
pub fn batch_iterate(p: &ProblemSpec, u0s: &[GridFunction], opts: &EngineOptions) -> Vec<Result<IterationReport>> {
    let _ = p.propagator();
    let inner = EngineOptions {
        exec: ExecMode::Sequential,
        ..opts.clone()
    };
    opts.exec.map(u0s, |u0| iterate_with(p, u0, &inner))
}

fn check_u0(p: &ProblemSpec, u0: &GridFunction) -> Result<()> {
    if u0.len() != p.dim() {
        return Err(Error::structural("initial value dimension mismatch"));
    }
    if !p.interval().contains(u0)? {
        return Err(Error::validation("initial value lies outside the order interval"));
    }
    Ok(())
}

/// `U_min` (launched from the lower end) and `U_max` (from the upper end).
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    #[serde(flatten)]
    pub iteration: IterationReport,
    /// Worst violation of `U_min(t_k) <= U_min(t_{k+1})` and `U_max(t_{k+1}) <= U_max(t_k)`.
    pub time_monotonicity_violation: f64,
}

impl ExtremalReport {
    pub fn u_min(&self) -> &Trajectory {
        &self.iteration.u_min
    }

    pub fn u_max(&self) -> &Trajectory {
        &self.iteration.u_max
    }
}

/// Worst violation of time-monotonicity: increasing for `increasing = true`.
pub fn time_monotonicity_gap(u: &Trajectory, signs: &[f64], increasing: bool) -> f64 {
    let d = u.dim();
    (0..u.steps()).fold(0.0_f64, |w, k| {
        let a = &u.values()[k * d..(k + 1) * d];
        let b = &u.values()[(k + 1) * d..(k + 2) * d];
        let g = if increasing { order_gap(a, b, signs) } else { order_gap(b, a, signs) };
        w.max(g)
    })
}

pub fn extremal_trajectories(p: &ProblemSpec, opts: &EngineOptions) -> Result<ExtremalReport> {
    let interval = p.interval();
    let iteration = run_sequences(p, interval.lower(), interval.upper(), opts)?;
    let signs = interval.cone().signs();
    let tm = time_monotonicity_gap(&iteration.u_min, signs, true)
        .max(time_monotonicity_gap(&iteration.u_max, signs, false));
    if tm > TOL_ORDER {
        return Err(Error::Invariant {
            what: "extremal trajectories are not monotone in time".into(),
            worst: tm,
        });
    }
    Ok(ExtremalReport {
        iteration,
        time_monotonicity_violation: tm,
    })
}

/// Equilibria found by Newton from random interior starts, checked against `[u_*, u^*]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonCheck {
    pub starts: usize,
    pub converged: usize,
    pub inside_interval: usize,
    /// Distinct equilibria (up to 1e-6) inside the interval.
    pub distinct: Vec<GridFunction>,
    /// Worst violation of `u_* <= v <= u^*` over those equilibria.
    pub worst_violation: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub u_star: GridFunction,
    pub u_upper_star: GridFunction,
    /// `|A u_* - F(u_*)|` and `|A u^* - F(u^*)|`.
    pub residuals: [f64; 2],
    pub residual_ok: bool,
    pub horizon: f64,
    pub tail_increment: f64,
    pub horizon_capped: bool,
    /// Worst violation of `u_* <= u^*`.
    pub order_violation: f64,
    pub unique: bool,
    pub newton: NewtonCheck,
    pub extremal: ExtremalReport,
}

impl EquilibriumReport {
    pub fn converged(&self) -> bool {
        self.extremal.iteration.converged && !self.horizon_capped && self.residual_ok && self.newton.holds
    }
}

/// Extend the horizon by doubling until `|U(T) - U(T/2)| < tol_eq`, then
/// take `u_* = U_min(T)` and `u^* = U_max(T)`.
pub fn asymptotic_equilibria(p: &ProblemSpec, opts: &EngineOptions) -> Result<EquilibriumReport> {
    let mut q = p.clone();
    let (extremal, tail, capped) = loop {
        let ext = extremal_trajectories(&q, opts)?;
        let k = ext.u_min().steps();
        let half = k / 2;
        let tail = sup_dist(ext.u_min().state(k), ext.u_min().state(half))
            .max(sup_dist(ext.u_max().state(k), ext.u_max().state(half)));
        if tail < opts.tol_eq || !ext.iteration.converged {
            break (ext, tail, false);
        }
        if 2.0 * q.horizon() > opts.max_horizon {
            break (ext, tail, true);
        }
        q = q.with_horizon(2.0 * q.horizon())?;
    };
    let u_star = extremal.u_min().last();
    let u_upper_star = extremal.u_max().last();
    let residuals = [q.equilibrium_residual(&u_star)?, q.equilibrium_residual(&u_upper_star)?];
    let order_violation = order_gap(u_star.values(), u_upper_star.values(), q.interval().cone().signs()).max(0.0);
    if order_violation > TOL_ORDER {
        return Err(Error::Invariant {
            what: "u_* <= u^* fails".into(),
            worst: order_violation,
        });
    }
    let newton = newton_cross_check(&q, &u_star, &u_upper_star, opts);
    let mut extremal = extremal;
    extremal.iteration.u_star = Some(u_star.clone());
    extremal.iteration.u_upper_star = Some(u_upper_star.clone());
    extremal.iteration.equilibrium_residuals = residuals.to_vec();
    let unique = sup_dist(u_star.values(), u_upper_star.values()) <= 10.0 * opts.tol_eq.max(opts.tol);
    Ok(EquilibriumReport {
        residual_ok: residuals[0] <= opts.tol_res && residuals[1] <= opts.tol_res,
        residuals,
        horizon: q.horizon(),
        tail_increment: tail,
        horizon_capped: capped,
        order_violation,
        unique,
        newton,
        u_star,
        u_upper_star,
        extremal,
    })
}

/// Damped Newton for `A v = F(v)`. Returns the root and its residual.
pub fn newton_equilibrium(p: &ProblemSpec, start: &GridFunction, max_iter: usize) -> Option<(GridFunction, f64)> {
    let a = p.generator();
    let n = p.dim();
    let c = p.components();
    let nodes = n / c;
    let scale = a.norm_inf().max(1.0);
    let residual = |v: &[f64]| -> Vec<f64> {
        let av = a.apply_slice(v);
        let mut f = vec![0.0; n];
        p.f_mu_into(v, &mut f);
        av.iter().zip(&f).map(|(x, y)| x - y).collect()
    };
    let mut v = start.values().to_vec();
    let mut r = residual(&v);
    let mut jac = vec![0.0; c * c];
    for _ in 0..max_iter {
        let rn = sup_norm(&r);
        let mut j = a.matrix().clone();
        for i in 0..nodes {
            p.nonlinearity().node_jacobian(&v, i, &mut jac);
            for k in 0..c {
                for l in 0..c {
                    j[(k * nodes + i, l * nodes + i)] -= jac[k * c + l];
                }
                j[(k * nodes + i, k * nodes + i)] -= p.mu();
            }
        }
        let delta = j.lu().solve(&DVector::from_column_slice(&r))?;
        if !delta.iter().all(|x| x.is_finite()) {
            return None;
        }
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(x, d)| x - step * d).collect();
            let rt = residual(&trial);
            if sup_norm(&rt) <= (1.0 - 1e-4 * step) * rn || step < 1e-10 {
                v = trial;
                r = rt;
                break;
            }
            step *= 0.5;
        }
        let moved = step * delta.amax();
        let vn = sup_norm(&v).max(1.0);
        if moved <= 1e-13 * vn && sup_norm(&r) <= 1e-8 * scale * vn {
            return Some((GridFunction::from_raw(v, c), sup_norm(&r)));
        }
        if step < 1e-10 {
            return None;
        }
    }
    let vn = sup_norm(&v).max(1.0);
    (sup_norm(&r) <= 1e-9 * scale * vn).then(|| {
        let rn = sup_norm(&r);
        (GridFunction::from_raw(v, c), rn)
    })
}

fn newton_cross_check(p: &ProblemSpec, u_star: &GridFunction, u_upper: &GridFunction, opts: &EngineOptions) -> NewtonCheck {
    let interval = p.interval();
    let signs = interval.cone().signs();
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<GridFunction> = (0..opts.newton_starts)
        .map(|_| {
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let (lo, hi) = interval.entry_range(i);
                    lo + rng.random::<f64>() * (hi - lo)
                })
                .collect();
            GridFunction::from_raw(v, p.components())
        })
        .collect();
    let roots = opts.exec.map(&starts, |s| newton_equilibrium(p, s, 200));
    let slack = TOL_ORDER.max(100.0 * opts.tol_eq);
    let mut check = NewtonCheck {
        starts: starts.len(),
        holds: true,
        ..NewtonCheck::default()
    };
    for (v, _) in roots.into_iter().flatten() {
        check.converged += 1;
        let inside = order_gap(interval.lower().values(), v.values(), signs) <= slack
            && order_gap(v.values(), interval.upper().values(), signs) <= slack;
        if !inside {
            continue;
        }
        check.inside_interval += 1;
        let w = order_gap(u_star.values(), v.values(), signs)
            .max(order_gap(v.values(), u_upper.values(), signs))
            .max(0.0);
        check.worst_violation = check.worst_violation.max(w);
        if !check.distinct.iter().any(|d| sup_dist(d.values(), v.values()) < 1e-6) {
            check.distinct.push(v);
        }
    }
    check.holds = check.worst_violation <= slack;
    check
}

/// Outcome of re-checking the stored chain of iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCertificate {
    pub holds: bool,
    pub worst_violation: f64,
}

/// Re-verify `u_lower <= w_{n-1} <= w_n <= W_n <= W_{n-1} <= u_upper` on every node.
pub fn certify_sandwich(report: &IterationReport, signs: &[f64]) -> SandwichCertificate {
    let Some(s) = &report.stored else {
        return SandwichCertificate {
            holds: false,
            worst_violation: f64::INFINITY,
        };
    };
    let chain = [&s.lower_bound, &s.lower_prev, &s.lower, &s.upper, &s.upper_prev, &s.upper_bound];
    let mut worst = 0.0_f64;
    for w in chain.windows(2) {
        worst = worst.max(traj_gap(w[0], w[1], signs));
    }
    SandwichCertificate {
        holds: worst <= TOL_ORDER,
        worst_violation: worst,
    }
}
