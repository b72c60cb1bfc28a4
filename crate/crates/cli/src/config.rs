//! Run configuration files: a flat JSON object of scalar keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use riesz_ac::exact_oracle::InitialProfile;
use riesz_ac::fraccoeff::check_order;
use riesz_ac::stepper::{
    theory_warnings, Monitors, RunWarning, SolveMode, DEFAULT_CUBIC_TOL, DEFAULT_LINEAR_TOL,
};
use riesz_ac::{GridSpec, SolverConfig};

use crate::error::{CliError, CliResult};

/// What the config is for; decides the required keys and the admissible γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Allen–Cahn time stepping, γ ∈ (1,2].
    Run,
    /// Coefficients or the spatial formula, γ ∈ (0,1) ∪ (1,2].
    Formula,
}

const RUN_REQUIRED: [&str; 5] = ["gamma", "epsilon", "tau", "T", "M"];
const FORMULA_REQUIRED: [&str; 2] = ["gamma", "M"];
const OPTIONAL: [&str; 10] = [
    "dimension",
    "domain",
    "linear_tol",
    "cubic_tol",
    "initial",
    "forced",
    "energy",
    "snapshots",
    "snapshot_stride",
    "solve_mode",
];

/// Parsed config with defaults resolved. Serializes back to the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub dimension: usize,
    pub domain: [f64; 2],
    pub linear_tol: f64,
    pub cubic_tol: f64,
    pub initial: InitialProfile,
    /// Add the manufactured forcing (1D on [0,1] only).
    pub forced: bool,
    pub energy: bool,
    pub snapshots: bool,
    pub snapshot_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_mode: Option<SolveMode>,
}

impl RunConfig {
    /// Defaults for every optional key; required keys are placeholders.
    fn with_defaults(gamma: f64, m: usize) -> Self {
        Self {
            gamma,
            epsilon: 0.1,
            tau: 0.1,
            t_final: 1.0,
            m,
            dimension: 1,
            domain: [0.0, 1.0],
            linear_tol: DEFAULT_LINEAR_TOL,
            cubic_tol: DEFAULT_CUBIC_TOL,
            initial: InitialProfile::Maxprinciple,
            forced: false,
            energy: true,
            snapshots: false,
            snapshot_stride: 1,
            solve_mode: None,
        }
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        Ok(GridSpec::new(
            self.domain[0],
            self.domain[1],
            self.m,
            self.dimension,
        )?)
    }

    pub fn solver_config(&self) -> CliResult<SolverConfig> {
        let mut cfg = SolverConfig::new(
            self.grid()?,
            self.gamma,
            self.epsilon,
            self.tau,
            self.t_final,
        )?;
        cfg.linear_tol = self.linear_tol;
        cfg.cubic_tol = self.cubic_tol;
        cfg.monitors = Monitors {
            max_norm: true,
            energy: self.energy,
            snapshots: self.snapshots,
        };
        cfg.snapshot_stride = self.snapshot_stride;
        cfg.solve_mode = self.solve_mode;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn key_error(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("config key '{key}': {msg}"))
}

fn get_f64(obj: &Map<String, Value>, key: &str) -> CliResult<Option<f64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| key_error(key, format!("expected a number, got {v}"))),
    }
}

fn get_usize(obj: &Map<String, Value>, key: &str) -> CliResult<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| key_error(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn get_bool(obj: &Map<String, Value>, key: &str) -> CliResult<Option<bool>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_bool()
            .map(Some)
            .ok_or_else(|| key_error(key, format!("expected true or false, got {v}"))),
    }
}

fn get_parsed<T: std::str::FromStr<Err = riesz_ac::Error>>(
    obj: &Map<String, Value>,
    key: &str,
) -> CliResult<Option<T>> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => s.parse().map(Some).map_err(|e| key_error(key, e)),
        Some(v) => Err(key_error(key, format!("expected a string, got {v}"))),
    }
}

/// Parse and validate config text.
pub fn parse_config_str(text: &str, purpose: Purpose) -> CliResult<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        CliError::Validation(format!(
            "config parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let obj = value.as_object().ok_or_else(|| {
        CliError::Validation("config must be a JSON object of key/value pairs".into())
    })?;

    let required: &[&str] = match purpose {
        Purpose::Run => &RUN_REQUIRED,
        Purpose::Formula => &FORMULA_REQUIRED,
    };
    let known = |k: &str| RUN_REQUIRED.contains(&k) || OPTIONAL.contains(&k);
    let unknown: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|k| !known(k))
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::Validation(format!(
            "unknown config key(s): {}; allowed keys are {}, {}",
            unknown.join(", "),
            RUN_REQUIRED.join(", "),
            OPTIONAL.join(", ")
        )));
    }
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|k| !obj.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "missing required config key(s): {}; required keys are {}",
            missing.join(", "),
            required.join(", ")
        )));
    }

    let gamma = get_f64(obj, "gamma")?.unwrap();
    let m = get_usize(obj, "M")?.unwrap();
    let mut cfg = RunConfig::with_defaults(gamma, m);
    if let Some(v) = get_f64(obj, "epsilon")? {
        cfg.epsilon = v;
    }
    if let Some(v) = get_f64(obj, "tau")? {
        cfg.tau = v;
    }
    if let Some(v) = get_f64(obj, "T")? {
        cfg.t_final = v;
    }
    if let Some(v) = get_usize(obj, "dimension")? {
        cfg.dimension = v;
    }
    if let Some(v) = obj.get("domain") {
        let pair = v
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]))
            .ok_or_else(|| key_error("domain", format!("expected [a, b], got {v}")))?;
        cfg.domain = pair;
    }
    if let Some(v) = get_f64(obj, "linear_tol")? {
        cfg.linear_tol = v;
    }
    if let Some(v) = get_f64(obj, "cubic_tol")? {
        cfg.cubic_tol = v;
    }
    if let Some(v) = get_parsed::<InitialProfile>(obj, "initial")? {
        cfg.initial = v;
    }
    if let Some(v) = get_bool(obj, "forced")? {
        cfg.forced = v;
    }
    if let Some(v) = get_bool(obj, "energy")? {
        cfg.energy = v;
    }
    if let Some(v) = get_bool(obj, "snapshots")? {
        cfg.snapshots = v;
    }
    if let Some(v) = get_usize(obj, "snapshot_stride")? {
        cfg.snapshot_stride = v;
    }
    if let Some(v) = obj.get("solve_mode") {
        cfg.solve_mode = Some(match v.as_str() {
            Some("dense_cholesky") => SolveMode::DenseCholesky,
            Some("matrix_free_cg") => SolveMode::MatrixFreeCg,
            _ => {
                return Err(key_error(
                    "solve_mode",
                    format!("expected \"dense_cholesky\" or \"matrix_free_cg\", got {v}"),
                ))
            }
        });
    }

    check_order(cfg.gamma).map_err(|e| key_error("gamma", e))?;
    cfg.grid()?;
    if purpose == Purpose::Run {
        cfg.solver_config()?;
        if cfg.forced && (cfg.dimension != 1 || cfg.domain != [0.0, 1.0]) {
            return Err(key_error(
                "forced",
                "the manufactured forcing is defined on [0,1] in one dimension",
            ));
        }
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path, purpose: Purpose) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, purpose).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub trajectory_csv: Option<PathBuf>,
    pub snapshots: Option<PathBuf>,
}

/// Everything needed to reproduce a run: the resolved config, the
/// hypotheses it violates, and where results went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config: RunConfig,
    pub warnings: Vec<RunWarning>,
    pub outputs: OutputPaths,
}

impl RunManifest {
    pub fn new(
        config: RunConfig,
        initial_max: Option<f64>,
        outputs: OutputPaths,
    ) -> CliResult<Self> {
        let warnings = theory_warnings(&config.solver_config()?, initial_max)?;
        Ok(Self {
            artifact_version: riesz_ac::ARTIFACT_VERSION.to_string(),
            config,
            warnings,
            outputs,
        })
    }
}
