//! Experiment configuration, method sweeps, and result files.
//!
//! Configs are plain `key = value` lines; `#` starts a comment.
//!
//! | key | default |
//! |-----|---------|
//! | `problem` | required (`kolmogorov`, `abc`, `manufactured`) |
//! | `epsilon` | required |
//! | `fine_n` | required |
//! | `T` | required |
//! | `coarse_n` | required by `two-grid` and `aug-coarse` |
//! | `T0` | 5 |
//! | `dt` | 5e-3 |
//! | `coarse_dt` | 0.2 |
//! | `update_window` | 4 |
//! | `gamma1`, `gamma2` | 0.999 |
//! | `gamma3` | 1 − 1e-8 |
//! | `snapshot_stride` | 20 |
//! | `eta0` | 1e-5 (`inf` disables updates) |
//! | `methods` | `pod` (comma list of `fem`, `pod`, `residual`, `two-grid`, `aug-random`, `aug-coarse`) |
//! | `reference` | true |
//! | `seed` | 0 |
//! | `rel_tol` | 1e-10 |
//! | `abc_w` | 1 |
//! | `output_dir` | unset |

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::adaptive::{run_adaptive, AdaptiveConfig, AdaptiveRun, CoarseContext, IndicatorKind, RunStats, StepRecord};
use crate::error::{Error, Result};
use crate::fem::{steps_in, FemStepper, FullOrderModel};
use crate::linalg::norm2;
use crate::mesh3d::build_mesh;
use crate::problems::problem_by_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum Method {
    Fem,
    Pod,
    Adaptive(IndicatorKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::Pod => "pod",
            Method::Adaptive(k) => k.name(),
        }
    }

    pub fn needs_coarse(self) -> bool {
        matches!(self, Method::Adaptive(k) if k.needs_coarse())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fem" => Ok(Method::Fem),
            "pod" => Ok(Method::Pod),
            other => other.parse().map(Method::Adaptive).map_err(|_| config_err("methods", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub epsilon: f64,
    pub fine_n: usize,
    pub coarse_n: Option<usize>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    pub dt: f64,
    pub coarse_dt: f64,
    pub update_window: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub snapshot_stride: usize,
    pub eta0: f64,
    pub methods: Vec<Method>,
    pub reference: bool,
    pub seed: u64,
    pub rel_tol: f64,
    pub abc_w: f64,
    pub output_dir: Option<String>,
}

const KEYS: [&str; 20] = [
    "problem",
    "epsilon",
    "fine_n",
    "coarse_n",
    "T",
    "T0",
    "dt",
    "coarse_dt",
    "update_window",
    "gamma1",
    "gamma2",
    "gamma3",
    "snapshot_stride",
    "eta0",
    "methods",
    "reference",
    "seed",
    "rel_tol",
    "abc_w",
    "output_dir",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config_err(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(key, format!("expected true/false, got `{value}`"))),
    }
}

/// Parse and validate a config document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err("?", format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(config_err(key, "unknown key"));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(config_err(key, "duplicate key"));
        }
        entries.push((key.to_string(), value.to_string()));
    }
    let get = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let required = |key: &str| get(key).ok_or_else(|| config_err(key, "missing required key"));
    let defaults = AdaptiveConfig::default();

    let methods = match get("methods") {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Method>>>()?,
        None => vec![Method::Pod],
    };
    let cfg = ExperimentConfig {
        problem: required("problem")?.to_string(),
        epsilon: parse_value("epsilon", required("epsilon")?)?,
        fine_n: parse_value("fine_n", required("fine_n")?)?,
        coarse_n: get("coarse_n").map(|v| parse_value("coarse_n", v)).transpose()?,
        t_end: parse_value("T", required("T")?)?,
        t0: get("T0").map_or(Ok(defaults.t0), |v| parse_value("T0", v))?,
        dt: get("dt").map_or(Ok(defaults.dt), |v| parse_value("dt", v))?,
        coarse_dt: get("coarse_dt").map_or(Ok(defaults.coarse_dt), |v| parse_value("coarse_dt", v))?,
        update_window: get("update_window").map_or(Ok(defaults.update_window), |v| parse_value("update_window", v))?,
        gamma1: get("gamma1").map_or(Ok(defaults.gamma1), |v| parse_value("gamma1", v))?,
        gamma2: get("gamma2").map_or(Ok(defaults.gamma2), |v| parse_value("gamma2", v))?,
        gamma3: get("gamma3").map_or(Ok(defaults.gamma3), |v| parse_value("gamma3", v))?,
        snapshot_stride: get("snapshot_stride")
            .map_or(Ok(defaults.snapshot_stride), |v| parse_value("snapshot_stride", v))?,
        eta0: get("eta0").map_or(Ok(defaults.eta0), |v| parse_value("eta0", v))?,
        methods,
        reference: get("reference").map_or(Ok(true), |v| parse_bool("reference", v))?,
        seed: get("seed").map_or(Ok(0), |v| parse_value("seed", v))?,
        rel_tol: get("rel_tol").map_or(Ok(defaults.rel_tol), |v| parse_value("rel_tol", v))?,
        abc_w: get("abc_w").map_or(Ok(1.0), |v| parse_value("abc_w", v))?,
        output_dir: get("output_dir").map(str::to_string),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render a config so that `parse_config(&print_config(c)) == c`.
pub fn print_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    line("problem", cfg.problem.clone());
    line("epsilon", real(cfg.epsilon));
    line("fine_n", cfg.fine_n.to_string());
    if let Some(c) = cfg.coarse_n {
        line("coarse_n", c.to_string());
    }
    line("T", real(cfg.t_end));
    line("T0", real(cfg.t0));
    line("dt", real(cfg.dt));
    line("coarse_dt", real(cfg.coarse_dt));
    line("update_window", real(cfg.update_window));
    line("gamma1", real(cfg.gamma1));
    line("gamma2", real(cfg.gamma2));
    line("gamma3", real(cfg.gamma3));
    line("snapshot_stride", cfg.snapshot_stride.to_string());
    line("eta0", real(cfg.eta0));
    line("methods", cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
    line("reference", cfg.reference.to_string());
    line("seed", cfg.seed.to_string());
    line("rel_tol", real(cfg.rel_tol));
    line("abc_w", real(cfg.abc_w));
    if let Some(dir) = &cfg.output_dir {
        line("output_dir", dir.clone());
    }
    s
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        problem_by_name(&self.problem, self.epsilon, self.abc_w).map_err(|e| match e {
            Error::InvalidArgument(m) if m.contains("epsilon") => config_err("epsilon", m),
            Error::InvalidArgument(m) => config_err("problem", m),
            other => other,
        })?;
        if self.fine_n == 0 {
            return Err(config_err("fine_n", "must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(config_err("T", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(config_err("dt", "must be positive"));
        }
        for (key, value) in [("T", self.t_end), ("T0", self.t0), ("update_window", self.update_window), ("coarse_dt", self.coarse_dt)] {
            let steps = steps_in(value, self.dt).map_err(|_| config_err(key, format!("{value} is not a multiple of dt = {}", self.dt)))?;
            if steps == 0 && key != "T0" {
                return Err(config_err(key, "must be at least one time step"));
            }
        }
        if self.t0 > self.t_end {
            return Err(config_err("T0", "exceeds T"));
        }
        for (key, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("gamma3", self.gamma3)] {
            if !(g > 0.0 && g < 1.0) {
                return Err(config_err(key, "must lie in (0, 1)"));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(config_err("snapshot_stride", "must be positive"));
        }
        if self.eta0.is_nan() || self.eta0 < 0.0 {
            return Err(config_err("eta0", "must be nonnegative"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(config_err("rel_tol", "must lie in (0, 1)"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "no methods requested"));
        }
        let unique: BTreeSet<_> = self.methods.iter().map(|m| m.name()).collect();
        if unique.len() != self.methods.len() {
            return Err(config_err("methods", "duplicate method"));
        }
        match self.coarse_n {
            Some(0) => return Err(config_err("coarse_n", "must be positive")),
            Some(c) if !self.fine_n.is_multiple_of(c) => {
                return Err(config_err("coarse_n", format!("{c} does not divide fine_n = {}", self.fine_n)))
            }
            None => {
                if let Some(m) = self.methods.iter().find(|m| m.needs_coarse()) {
                    return Err(config_err("coarse_n", format!("missing required key for method `{m}`")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn adaptive_config(&self, method: Method) -> AdaptiveConfig {
        AdaptiveConfig {
            dt: self.dt,
            coarse_dt: self.coarse_dt,
            t0: self.t0,
            t_end: self.t_end,
            update_window: self.update_window,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3: self.gamma3,
            snapshot_stride: self.snapshot_stride,
            eta0: self.eta0,
            indicator: match method {
                Method::Adaptive(k) => Some(k),
                _ => None,
            },
            rel_tol: self.rel_tol,
            seed: self.seed,
        }
    }

    pub fn fine_model(&self) -> Result<FullOrderModel> {
        let problem = problem_by_name(&self.problem, self.epsilon, self.abc_w)?;
        let mesh = build_mesh(self.fine_n, problem.kappa)?;
        FullOrderModel::new(mesh, problem, self.dt, self.rel_tol)
    }
}

/// Outcome of one method in a sweep.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub outcome: std::result::Result<AdaptiveRun, String>,
    pub wall_seconds: f64,
}

impl MethodResult {
    /// DOFs column: `N_g` for FEM, mean basis size otherwise.
    pub fn dofs(&self) -> Option<f64> {
        let run = self.outcome.as_ref().ok()?;
        Some(match self.method {
            Method::Fem => run.stats.num_dofs as f64,
            _ => run.stats.m_average,
        })
    }
}

/// Plain FEM over `[0, T]`, reported in the same shape as a reduced run.
pub fn run_full_order(cfg: &ExperimentConfig, fom: &FullOrderModel) -> Result<AdaptiveRun> {
    let nt = steps_in(cfg.t_end, cfg.dt)?;
    let n_g = fom.num_dofs();
    let clock = Instant::now();
    let mut stepper = FemStepper::new(fom);
    let mut records = Vec::with_capacity(nt + 1);
    loop {
        let s = stepper.state();
        let norm = norm2(&s.u);
        let rel_error = (cfg.reference && norm > 0.0).then_some(0.0);
        records.push(StepRecord { k: s.k, t: s.t, m: n_g, fine: true, norm, eta: None, marked: false, rel_error });
        if s.k == nt {
            break;
        }
        stepper.advance()?;
    }
    let errors: Vec<f64> = records.iter().filter_map(|r| r.rel_error).collect();
    let mut stats = RunStats {
        num_dofs: n_g,
        update_times: 0,
        m_history: vec![(0, n_g)],
        m_average: n_g as f64,
        reduced_steps: 0,
        fine_steps: nt,
        checks: 0,
        times: Default::default(),
        final_error: records.last().and_then(|r| r.rel_error),
        average_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
    };
    stats.times.fem_window = clock.elapsed().as_secs_f64();
    Ok(AdaptiveRun {
        records,
        samples: Vec::new(),
        stats,
        basis: crate::pod::PodBasis::empty(n_g),
        final_state: stepper.state().u.clone(),
    })
}

/// Run every requested method on a shared mesh and problem.
pub fn compare_methods(cfg: &ExperimentConfig) -> Result<Vec<MethodResult>> {
    cfg.validate()?;
    let fom = cfg.fine_model()?;
    let coarse = match cfg.coarse_n {
        Some(c) if cfg.methods.iter().any(|m| m.needs_coarse()) => Some(CoarseContext::new(&fom, c, cfg.coarse_dt)?),
        _ => None,
    };
    let mut results = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        log::info!("running {method}");
        let clock = Instant::now();
        let outcome = match method {
            Method::Fem => run_full_order(cfg, &fom),
            _ => run_adaptive(&cfg.adaptive_config(method), &fom, coarse.as_ref(), cfg.reference),
        };
        let wall = clock.elapsed().as_secs_f64();
        let outcome = outcome.map_err(|e| {
            log::error!("{method} failed: {e}");
            e.to_string()
        });
        let wall_seconds = match &outcome {
            Ok(run) => run.stats.times.method_total(),
            Err(_) => wall,
        };
        results.push(MethodResult { method, outcome, wall_seconds });
    }
    Ok(results)
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn timeseries_csv(results: &[MethodResult]) -> String {
    let mut s = String::from("t,k,method,m,eta,marked,rel_error\n");
    for r in results {
        let Ok(run) = &r.outcome else { continue };
        for rec in &run.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                real(rec.t),
                rec.k,
                r.method,
                rec.m,
                opt_real(rec.eta),
                u8::from(rec.marked),
                opt_real(rec.rel_error)
            );
        }
    }
    s
}

pub fn summary_csv(results: &[MethodResult], with_errors: bool) -> String {
    let mut s = String::from(if with_errors {
        "method,update_times,dofs,error_at_T,average_error,wall_seconds,status\n"
    } else {
        "method,update_times,dofs,wall_seconds,status\n"
    });
    for r in results {
        match &r.outcome {
            Ok(run) => {
                let dofs = match r.method {
                    Method::Fem | Method::Pod => format!("{}", run.stats.m_average.round() as usize),
                    _ => real(run.stats.m_average),
                };
                let mut row = format!("{},{},{}", r.method, run.stats.update_times, dofs);
                if with_errors {
                    let _ = write!(row, ",{},{}", opt_real(run.stats.final_error), opt_real(run.stats.average_error));
                }
                let _ = writeln!(s, "{row},{},ok", real(r.wall_seconds));
            }
            Err(msg) => {
                let blanks = if with_errors { ",,,," } else { ",," };
                let _ = writeln!(s, "{}{blanks},{},error: {}", r.method, real(r.wall_seconds), msg.replace(',', ";"));
            }
        }
    }
    s
}

/// `(t, rel_error)` and `(t, eta)` two-column files for one method.
pub fn plot_data(run: Option<&AdaptiveRun>) -> (String, String) {
    let mut err = String::from("# t rel_error\n");
    let mut eta = String::from("# t eta\n");
    if let Some(run) = run {
        for rec in &run.records {
            if let Some(e) = rec.rel_error {
                let _ = writeln!(err, "{} {}", real(rec.t), real(e));
            }
        }
        for s in &run.samples {
            let _ = writeln!(eta, "{} {}", real(s.t), real(s.eta));
        }
    }
    (err, eta)
}

#[derive(Serialize)]
struct MethodMeta<'a> {
    method: Method,
    status: &'a str,
    stats: Option<&'a RunStats>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config: &'a ExperimentConfig,
    versions: serde_json::Value,
    wall_time_note: &'a str,
    methods: Vec<MethodMeta<'a>>,
}

pub fn run_json(cfg: &ExperimentConfig, results: &[MethodResult]) -> Result<String> {
    let meta = RunMeta {
        config: cfg,
        versions: serde_json::json!({
            "apod-core": env!("CARGO_PKG_VERSION"),
            "target_os": std::env::consts::OS,
            "target_arch": std::env::consts::ARCH,
        }),
        wall_time_note: "wall_seconds are single-process timings on one node",
        methods: results
            .iter()
            .map(|r| MethodMeta {
                method: r.method,
                status: if r.outcome.is_ok() { "ok" } else { "failed" },
                stats: r.outcome.as_ref().ok().map(|run| &run.stats),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))
}

/// Run the sweep and write all result files into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<MethodResult>> {
    let results = compare_methods(cfg)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("timeseries.csv"), timeseries_csv(&results))?;
    fs::write(out_dir.join("summary.csv"), summary_csv(&results, cfg.reference))?;
    fs::write(out_dir.join("run.json"), run_json(cfg, &results)?)?;
    for r in &results {
        let (err, eta) = plot_data(r.outcome.as_ref().ok());
        fs::write(out_dir.join(format!("{}_error.dat", r.method)), err)?;
        fs::write(out_dir.join(format!("{}_eta.dat", r.method)), eta)?;
    }
    Ok(results)
}

/// Output directory: explicit override, then the config value, then `rom-apod-out`.
pub fn output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rom-apod-out"))
}
