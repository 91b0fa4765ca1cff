//! `mevolve` batch front-end: `run`, `eig` and `verify` over JSON configs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mild::Trajectory;
use crate::monotone::{
    asymptotic_equilibria, certify_sandwich, extremal_trajectories, iterate_with, prepare_problem, EngineOptions,
    EquilibriumReport, ExtremalReport, IterationReport, SandwichCertificate,
};
use crate::nonlin::WeightProfile;
use crate::operators::{add_potential, principal_eig, submarkovian_report, SubMarkovReport};
use crate::order::{sup_dist, GridFunction, OrderInterval};
use crate::par::{configure_threads, ExecMode};
use crate::scenarios::{
    certify_interval, EigenRecord, IntervalCertificates, MeshConfig, ScenarioConfig, ScenarioSpec, ScenarioSummary,
    SolveSettings,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;

/// Starting horizon for the `"auto"` doubling search.
const AUTO_HORIZON_START: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(name = "mevolve", version, about = "Monotone iteration between sub- and super-solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; with a directory of configs, runs them concurrently.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the engine and write report.json plus trajectory CSVs.
    Run { config: PathBuf },
    /// Print principal eigenvalues and eigenvectors for the scenario.
    Eig { config: PathBuf },
    /// Check the certificates without running the engine.
    Verify { config: PathBuf },
}

/// `T` as a positive number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Horizon {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Auto => s.serialize_str("auto"),
            Horizon::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Num(f64),
    Str(String),
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumOrStr::deserialize(d).map_err(|_| serde::de::Error::custom("expected a number or \"auto\""))? {
            NumOrStr::Num(t) => Ok(Horizon::Fixed(t)),
            NumOrStr::Str(s) if s == "auto" => Ok(Horizon::Auto),
            NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got \"{s}\""))),
        }
    }
}

/// A constant or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fill {
    Constant(f64),
    Values(Vec<f64>),
}

impl Fill {
    fn to_grid(&self, like: &GridFunction) -> Result<GridFunction> {
        match self {
            Fill::Constant(c) => Ok(GridFunction::constant(like.nodes(), like.components(), *c)),
            Fill::Values(v) => {
                if v.len() != like.len() {
                    return Err(Error::structural(format!("{} values for {} entries", v.len(), like.len())));
                }
                let parts: Vec<GridFunction> = v
                    .chunks(like.nodes())
                    .map(|c| GridFunction::scalar_field(c.to_vec()))
                    .collect::<Result<_>>()?;
                GridFunction::stack(&parts.iter().collect::<Vec<_>>())
            }
        }
    }
}

/// Initial value for the minimal/maximal solutions `u_min`, `u_max`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Lower,
    Upper,
    #[default]
    Midpoint,
    Value(Fill),
}

/// Replacement interval bounds; `epsilon` rescales the principal eigenvector lower bound.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub epsilon: Option<f64>,
    pub lower: Option<Fill>,
    pub upper: Option<Fill>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Emit {
    pub trajectories: bool,
    pub report: bool,
    pub certificates: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            trajectories: true,
            report: true,
            certificates: true,
        }
    }
}

/// A run config as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    pub dt: f64,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub engine: EngineOptions,
    #[serde(default)]
    pub initial: Initial,
    /// Interval label: `"primary"` or one of the scenario's alternatives.
    #[serde(default = "primary")]
    pub interval: String,
    #[serde(default)]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub emit: Emit,
    /// Extra potential `m` for the `lambda1(A + m)` row of `eig`.
    #[serde(default)]
    pub eig_potential: Option<WeightProfile>,
}

fn primary() -> String {
    "primary".into()
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, path: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(path, format!("must be a positive number, got {v}")))
            }
        };
        positive(self.dt, "dt")?;
        if let Horizon::Fixed(t) = self.horizon {
            positive(t, "horizon")?;
        }
        if self.mesh.n < 2 {
            return Err(config_err("mesh.n", "needs at least 2 nodes"));
        }
        positive(self.engine.tol, "engine.tol")?;
        positive(self.engine.tol_eq, "engine.tol_eq")?;
        positive(self.engine.tol_res, "engine.tol_res")?;
        positive(self.engine.max_horizon, "engine.max_horizon")?;
        if self.engine.max_iter == 0 {
            return Err(config_err("engine.max_iter", "must be positive"));
        }
        if let Some(e) = self.bounds.as_ref().and_then(|b| b.epsilon) {
            positive(e, "bounds.epsilon")?;
        }
        Ok(())
    }

    fn settings(&self) -> SolveSettings {
        SolveSettings {
            dt: self.dt,
            horizon: AUTO_HORIZON_START,
            engine: self.engine.clone(),
        }
    }

    pub fn build_scenario(&self) -> Result<ScenarioSpec> {
        self.scenario.build(&self.mesh, &self.settings())
    }

    /// Interval the engine runs on, with its certificates.
    pub fn interval_for(&self, s: &ScenarioSpec) -> Result<(String, OrderInterval, IntervalCertificates)> {
        let chosen = s.select(&self.interval).ok_or_else(|| {
            let mut labels = vec![s.primary.label.clone()];
            labels.extend(s.alternatives.iter().map(|c| c.label.clone()));
            config_err("interval", format!("unknown interval `{}`; available: {}", self.interval, labels.join(", ")))
        })?;
        let Some(b) = &self.bounds else {
            return Ok((chosen.label.clone(), chosen.interval.clone(), chosen.certificates.clone()));
        };
        let base = &chosen.interval;
        let mut lower = match &b.lower {
            Some(f) => f.to_grid(base.lower()).map_err(|e| config_err("bounds.lower", e.to_string()))?,
            None => base.lower().clone(),
        };
        if let Some(eps) = b.epsilon {
            let eig = s
                .eigen
                .first()
                .filter(|_| s.name == "logistic")
                .ok_or_else(|| config_err("bounds.epsilon", "only the logistic scenario takes epsilon"))?;
            lower = eig.phi0.scaled(eps);
        }
        let upper = match &b.upper {
            Some(f) => f.to_grid(base.upper()).map_err(|e| config_err("bounds.upper", e.to_string()))?,
            None => base.upper().clone(),
        };
        let interval = OrderInterval::new(lower, upper, base.cone().clone())?;
        let certs = certify_interval(&s.generator, s.nonlinearity.as_ref(), &interval)?;
        Ok(("override".into(), interval, certs))
    }

    fn initial_value(&self, interval: &OrderInterval) -> Result<GridFunction> {
        Ok(match &self.initial {
            Initial::Lower => interval.lower().clone(),
            Initial::Upper => interval.upper().clone(),
            Initial::Midpoint => interval.lower().add(interval.upper())?.scaled(0.5),
            Initial::Value(f) => f.to_grid(interval.lower()).map_err(|e| config_err("initial", e.to_string()))?,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Endpoints {
    pub lower_extremal: GridFunction,
    pub upper_extremal: GridFunction,
    pub minimal: GridFunction,
    pub maximal: GridFunction,
}

#[derive(Debug, Serialize)]
pub struct ClosedFormErrors {
    pub lower_extremal: f64,
    pub upper_extremal: f64,
    pub minimal_from_zero: Option<f64>,
    pub maximal_from_zero: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub status: &'static str,
    pub exit_code: i32,
    pub flags: Vec<String>,
    pub config: &'a RunConfig,
    pub scenario: ScenarioSummary<'a>,
    pub interval_label: String,
    pub interval_certificates: IntervalCertificates,
    pub mu: f64,
    pub horizon: f64,
    pub steps: usize,
    pub extremal: Option<&'a ExtremalReport>,
    pub equilibria: Option<&'a EquilibriumReport>,
    pub solution: &'a IterationReport,
    pub sandwich: [SandwichCertificate; 2],
    pub endpoints: Endpoints,
    pub prediction_error: Option<f64>,
    pub closed_form_errors: Option<ClosedFormErrors>,
}

fn closed_form_errors(s: &ScenarioSpec, ext: &ExtremalReport, sol: &IterationReport, u0: &GridFunction) -> Option<ClosedFormErrors> {
    let cf = s.closed_form?;
    let err = |u: &Trajectory, f: &dyn Fn(f64) -> f64| {
        (0..=u.steps()).fold(0.0_f64, |w, k| w.max((u.state(k)[0] - f(u.time(k))).abs()))
    };
    let from_zero = u0.values()[0] == 0.0;
    Some(ClosedFormErrors {
        lower_extremal: err(ext.u_min(), &|t| cf.lower_extremal(t)),
        upper_extremal: err(ext.u_max(), &|t| cf.upper_extremal(t)),
        minimal_from_zero: from_zero.then(|| err(&sol.u_min, &|t| cf.u_min(t))),
        maximal_from_zero: from_zero.then(|| err(&sol.u_max, &|t| cf.u_max(t))),
    })
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::numerical(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Execute `run` for one config; returns the exit code.
pub fn run_config(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let s = cfg.build_scenario()?;
    let (label, interval, certs) = cfg.interval_for(&s)?;
    if !certs.all_hold() {
        return Err(Error::validation(format!(
            "interval `{label}` fails its certificates: sub margin {:.3e}, super margin {:.3e}, ordered {}",
            certs.sub.worst_margin, certs.sup.worst_margin, certs.ordered
        )));
    }
    let opts = &cfg.engine;
    let t0 = match cfg.horizon {
        Horizon::Auto => AUTO_HORIZON_START.min(opts.max_horizon),
        Horizon::Fixed(t) => t,
    };
    let p = prepare_problem(&s.problem_on(&interval, t0, cfg.dt)?)?;
    let (eq, ext) = match cfg.horizon {
        Horizon::Auto => (Some(asymptotic_equilibria(&p, opts)?), None),
        Horizon::Fixed(_) => (None, Some(extremal_trajectories(&p, opts)?)),
    };
    let extremal = eq.as_ref().map(|e| &e.extremal).or(ext.as_ref()).expect("one branch ran");
    let horizon = eq.as_ref().map_or(t0, |e| e.horizon);
    let p = p.with_horizon(horizon)?;
    let u0 = cfg.initial_value(&interval)?;
    let sol = iterate_with(&p, &u0, opts)?;
    let signs = interval.cone().signs();
    let sandwich = [certify_sandwich(&extremal.iteration, signs), certify_sandwich(&sol, signs)];

    let mut flags = vec![];
    if !extremal.iteration.converged {
        flags.push(format!("extremal iteration not converged after {} iterations", extremal.iteration.n_iters));
    }
    if !sol.converged {
        flags.push(format!("solution iteration not converged after {} iterations", sol.n_iters));
    }
    if !sandwich.iter().all(|c| c.holds) {
        flags.push("sandwich certificate failed".into());
    }
    if let Some(e) = &eq {
        if e.horizon_capped {
            flags.push(format!("horizon cap {} reached, tail increment {:.3e}", opts.max_horizon, e.tail_increment));
        }
        if !e.residual_ok {
            flags.push(format!("equilibrium residuals {:.3e}, {:.3e} above tol_res", e.residuals[0], e.residuals[1]));
        }
        if !e.newton.holds {
            flags.push(format!("Newton equilibrium outside [u_*, u^*] by {:.3e}", e.newton.worst_violation));
        }
    }
    let code = if flags.is_empty() { EXIT_OK } else { EXIT_FLAGGED };

    let prediction_error = match (&eq, &s.predicted_equilibrium) {
        (Some(e), Some(v)) if v.len() == e.u_star.len() => Some(
            sup_dist(e.u_star.values(), v.values()).max(sup_dist(e.u_upper_star.values(), v.values())),
        ),
        _ => None,
    };
    let report = RunReport {
        status: if code == EXIT_OK { "converged" } else { "flagged" },
        exit_code: code,
        flags,
        config: cfg,
        scenario: s.summary(),
        interval_label: label,
        interval_certificates: certs,
        mu: p.mu(),
        horizon,
        steps: p.steps(),
        extremal: ext.as_ref(),
        equilibria: eq.as_ref(),
        solution: &sol,
        sandwich,
        endpoints: Endpoints {
            lower_extremal: extremal.u_min().last(),
            upper_extremal: extremal.u_max().last(),
            minimal: sol.u_min.last(),
            maximal: sol.u_max.last(),
        },
        prediction_error,
        closed_form_errors: closed_form_errors(&s, extremal, &sol, &u0),
    };

    fs::create_dir_all(out)?;
    if cfg.emit.report {
        write_json(&out.join("report.json"), &report)?;
    }
    if cfg.emit.certificates {
        write_json(&out.join("certificates.json"), &s.summary())?;
    }
    if cfg.emit.trajectories {
        extremal.u_min().save_csv(&out.join("U_min.csv"))?;
        extremal.u_max().save_csv(&out.join("U_max.csv"))?;
        sol.u_min.save_csv(&out.join("u_min.csv"))?;
        sol.u_max.save_csv(&out.join("u_max.csv"))?;
    }
    for f in &report.flags {
        eprintln!("flag: {f}");
    }
    println!("{}: {} after {} iterations (mu = {}, T = {horizon})", s.name, report.status, extremal.iteration.n_iters, p.mu());
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct EigReport {
    pub coords: Vec<f64>,
    pub records: Vec<EigenRecord>,
}

pub fn eig_config(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let s = cfg.build_scenario()?;
    let mut records = vec![];
    let base = match cfg.scenario {
        ScenarioConfig::ScalarNonunique { .. } => s.generator.clone(),
        _ => cfg.mesh.generator()?,
    };
    if !s.eigen.iter().any(|e| e.label == "lambda1(A)") {
        let e = principal_eig(&base)?;
        records.push(EigenRecord { label: "lambda1(A)".into(), lambda1: e.lambda1, phi0: e.phi0 });
    }
    records.extend(s.eigen.iter().cloned());
    if let Some(m) = &cfg.eig_potential {
        let e = principal_eig(&add_potential(&base, &m.sample(base.coords())?)?)?;
        records.push(EigenRecord { label: "lambda1(A + m)".into(), lambda1: e.lambda1, phi0: e.phi0 });
    }
    for r in &records {
        println!("{:<28} {:.12e}", r.label, r.lambda1);
    }
    let coords = base.coords().to_vec();
    println!("x,{}", records.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(","));
    for (i, x) in coords.iter().enumerate() {
        let row: Vec<String> = records.iter().map(|r| format!("{:e}", r.phi0.values()[i])).collect();
        println!("{x},{}", row.join(","));
    }
    fs::create_dir_all(out)?;
    write_json(&out.join("eig.json"), &EigReport { coords, records })?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub interval_label: String,
    pub certificates: IntervalCertificates,
    pub submarkovian: SubMarkovReport,
    pub all_pass: bool,
}

pub fn verify_config(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let s = cfg.build_scenario()?;
    let (label, _, certs) = cfg.interval_for(&s)?;
    let sm = submarkovian_report(&s.generator, 1.0)?;
    let shift_ok = certs.quasi_increasing_shift.is_finite() && certs.quasi_increasing_shift >= 0.0;
    let all_pass = certs.all_hold() && sm.row_sum_test && sm.semigroup_test && shift_ok;
    let mark = |b: bool| if b { "PASS" } else { "FAIL" };
    println!("sub-solution     {} margin {:.3e}", mark(certs.sub.holds), certs.sub.worst_margin);
    println!("super-solution   {} margin {:.3e}", mark(certs.sup.holds), certs.sup.worst_margin);
    println!("ordered          {}", mark(certs.ordered));
    println!("sub-markovian    {} min row sum {:.3e}", mark(sm.row_sum_test && sm.semigroup_test), sm.min_row_sum);
    println!("quasi-increasing {} mu = {:.6e}", mark(shift_ok), certs.quasi_increasing_shift);
    fs::create_dir_all(out)?;
    write_json(
        &out.join("verify.json"),
        &VerifyReport {
            scenario: s.name.clone(),
            interval_label: label,
            certificates: certs,
            submarkovian: sm,
            all_pass,
        },
    )?;
    Ok(if all_pass { EXIT_OK } else { EXIT_INVALID })
}

fn dispatch(cmd: &Command, config: &Path, out: &Path) -> i32 {
    let result = RunConfig::load(config).and_then(|cfg| match cmd {
        Command::Run { .. } => run_config(&cfg, out),
        Command::Eig { .. } => eig_config(&cfg, out),
        Command::Verify { .. } => verify_config(&cfg, out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            EXIT_INVALID
        }
    }
}

/// Worst exit code: validation errors outrank flags.
fn combine(codes: &[i32]) -> i32 {
    if codes.contains(&EXIT_INVALID) {
        EXIT_INVALID
    } else if codes.contains(&EXIT_FLAGGED) {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}

pub fn execute(cli: &Cli) -> i32 {
    if let Some(j) = cli.jobs {
        configure_threads(j);
    }
    let config = match &cli.command {
        Command::Run { config } | Command::Eig { config } | Command::Verify { config } => config,
    };
    if !config.is_dir() {
        return dispatch(&cli.command, config, &cli.out);
    }
    let mut paths: Vec<PathBuf> = match fs::read_dir(config) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return EXIT_INVALID;
        }
    };
    paths.sort();
    let exec = if cli.jobs.is_some_and(|j| j > 1) { ExecMode::Parallel } else { ExecMode::Sequential };
    let codes = exec.map(&paths, |p| {
        let stem = p.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
        dispatch(&cli.command, p, &cli.out.join(stem))
    });
    combine(&codes)
}

/// Parse arguments and execute; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            }
        }
    }
}
