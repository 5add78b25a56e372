//! Experiment configuration: TOML with an explicit schema version. Every
//! default is materialised on load so the persisted copy is complete.

use crate::error::{Error, Result};
use crate::semigroup::MollifierProfile;
use crate::measures::{Window, XiScheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use toml::{Table, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sample and export a trajectory of `ψ` with its lifts.
    Field,
    /// One rough solve with diagnostics and snapshot frames.
    Solve,
    LinearCovariance,
    MollifierConvergence,
    HyperviscosityConvergence,
    StencilCompare,
    AreaShift,
    InvariantReversibility,
    ExpMoment,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Field,
        ExperimentKind::Solve,
        ExperimentKind::LinearCovariance,
        ExperimentKind::MollifierConvergence,
        ExperimentKind::HyperviscosityConvergence,
        ExperimentKind::StencilCompare,
        ExperimentKind::AreaShift,
        ExperimentKind::InvariantReversibility,
        ExperimentKind::ExpMoment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Field => "field",
            ExperimentKind::Solve => "solve",
            ExperimentKind::LinearCovariance => "linear_covariance",
            ExperimentKind::MollifierConvergence => "mollifier_convergence",
            ExperimentKind::HyperviscosityConvergence => "hyperviscosity_convergence",
            ExperimentKind::StencilCompare => "stencil_compare",
            ExperimentKind::AreaShift => "area_shift",
            ExperimentKind::InvariantReversibility => "invariant_reversibility",
            ExperimentKind::ExpMoment => "exp_moment",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Equation used by the solver-based experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `n = 2`, drift built from `G = (sin u₂, sin u₁)`, `F = −(cos u₁ + cos u₂)`.
    DefaultPair,
    /// `n = 1`, `g(u) = u`, `f = 0`.
    Burgers,
    /// `n = 1`, `g = 0`, `f(u) = −u`.
    Linear,
}

impl Nonlinearity {
    pub fn dim(self) -> usize {
        match self {
            Nonlinearity::DefaultPair => 2,
            Nonlinearity::Burgers | Nonlinearity::Linear => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `0.5 sin x` (and `0.3 cos 2x` for a second component).
    Smooth,
    /// `u₀ = ψ₀`.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FixedPoint,
    Stepping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    DefaultPair,
    ScalarSine,
}

/// Shared setup of a rough solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub nonlinearity: Nonlinearity,
    pub initial: InitialCondition,
    /// Grid cells `M`.
    pub cells: usize,
    /// Noise mode cutoff `N`.
    pub modes: usize,
    pub sigma: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Spacing of the noise time grid.
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub contraction_threshold: f64,
    pub max_halvings: usize,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            nonlinearity: Nonlinearity::DefaultPair,
            initial: InitialCondition::Smooth,
            cells: 128,
            modes: 63,
            sigma: 1.0,
            horizon: 0.25,
            dt: 1.0 / 1024.0,
            alpha: 0.4,
            beta: 0.45,
            tol: 1e-9,
            max_iter: 60,
            contraction_threshold: 0.9,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldParams {
    pub modes: usize,
    pub dim: usize,
    pub sigma: f64,
    pub hyperviscosity: f64,
    pub cells: usize,
    pub times: Vec<f64>,
    /// Export lifts as flat-float frames alongside the mode table.
    pub export_lifts: bool,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            modes: 64,
            dim: 1,
            sigma: 1.0,
            hyperviscosity: 0.0,
            cells: 256,
            times: (0..=10).map(|i| i as f64 * 0.01).collect(),
            export_lifts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    pub problem: ProblemParams,
    pub method: SolveMethod,
    /// Step stride (in noise intervals) of the stepping method.
    pub stride: usize,
    /// Write every `snapshot_every`-th state to the frame file.
    pub snapshot_every: usize,
    /// Pass threshold on the largest contraction factor.
    pub max_contraction: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            problem: ProblemParams::default(),
            method: SolveMethod::FixedPoint,
            stride: 1,
            snapshot_every: 32,
            max_contraction: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearCovarianceParams {
    pub modes: usize,
    pub samples: usize,
    pub sigma: f64,
    /// Lags `jπ/lags` for `j = 0..lags`.
    pub lags: usize,
    pub z_threshold: f64,
}

impl Default for LinearCovarianceParams {
    fn default() -> Self {
        Self {
            modes: 512,
            samples: 10_000,
            sigma: 1.0,
            lags: 16,
            z_threshold: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MollifierParams {
    pub problem: ProblemParams,
    pub eps: Vec<f64>,
    pub profile: MollifierProfile,
}

impl Default for MollifierParams {
    fn default() -> Self {
        Self {
            problem: ProblemParams::default(),
            eps: vec![0.2, 0.1, 0.05],
            profile: MollifierProfile::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperviscosityParams {
    pub problem: ProblemParams,
    pub eps: Vec<f64>,
}

impl Default for HyperviscosityParams {
    fn default() -> Self {
        Self {
            problem: ProblemParams::default(),
            eps: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StencilParams {
    /// Grid sizes, each twice the previous.
    pub cells: Vec<usize>,
    /// Noise cutoff is `M / noise_divisor`.
    pub noise_divisor: usize,
    pub horizon: f64,
    /// Gaps are measured on modes `|k| ≤ low_pass`.
    pub low_pass: i64,
    /// Required ratio of the forward/backward gap to the self-convergence error.
    pub gap_ratio: f64,
    /// Allowed relative spread of the gap across grids.
    pub gap_spread: f64,
    /// Also solve with the rough solver and report the centred-scheme gap.
    pub rough_reference: bool,
    /// Noise time spacing of the rough reference solve.
    pub rough_dt: f64,
}

impl Default for StencilParams {
    fn default() -> Self {
        Self {
            cells: vec![128, 256, 512],
            noise_divisor: 4,
            horizon: 0.25,
            low_pass: 4,
            gap_ratio: 10.0,
            gap_spread: 0.3,
            rough_reference: true,
            rough_dt: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AreaShiftParams {
    pub problem: ProblemParams,
    /// `F(x) = shift · x · A` with `A = [[0, 1], [−1, 0]]`.
    pub shift: f64,
    /// Required gap in multiples of the solver tolerance.
    pub gap_factor: f64,
}

impl Default for AreaShiftParams {
    fn default() -> Self {
        Self {
            problem: ProblemParams::default(),
            shift: 0.1,
            gap_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReversibilityParams {
    pub potential: Potential,
    pub ensemble: usize,
    pub cells: usize,
    pub lag: f64,
    pub dt: f64,
    pub burn_in: usize,
    pub rho: f64,
    /// Grid of the pCN versus importance-sampling cross-check.
    pub check_cells: usize,
    pub chain_steps: usize,
    pub chain_burn_in: usize,
    pub chain_rho: f64,
    pub importance_samples: usize,
    pub scheme: XiScheme,
    pub z_threshold: f64,
}

impl Default for ReversibilityParams {
    fn default() -> Self {
        Self {
            potential: Potential::DefaultPair,
            ensemble: 512,
            cells: 128,
            lag: 0.1,
            dt: 1e-3,
            burn_in: 300,
            rho: 0.3,
            check_cells: 16,
            chain_steps: 100_000,
            chain_burn_in: 2_000,
            chain_rho: 0.5,
            importance_samples: 100_000,
            scheme: XiScheme::Midpoint,
            z_threshold: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpMomentParams {
    pub potential: Potential,
    pub eps: Vec<f64>,
    pub modes: usize,
    pub cells: usize,
    pub samples: usize,
    pub window: Window,
    /// Largest estimate over smallest.
    pub ratio_bound: f64,
}

impl Default for ExpMomentParams {
    fn default() -> Self {
        Self {
            potential: Potential::DefaultPair,
            eps: vec![0.2, 0.1, 0.05, 0.025],
            modes: 128,
            cells: 512,
            samples: 10_000,
            window: Window::Full,
            ratio_bound: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Field(FieldParams),
    Solve(SolveParams),
    LinearCovariance(LinearCovarianceParams),
    MollifierConvergence(MollifierParams),
    HyperviscosityConvergence(HyperviscosityParams),
    StencilCompare(StencilParams),
    AreaShift(AreaShiftParams),
    InvariantReversibility(ReversibilityParams),
    ExpMoment(ExpMomentParams),
}

impl Params {
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Field => Params::Field(Default::default()),
            ExperimentKind::Solve => Params::Solve(Default::default()),
            ExperimentKind::LinearCovariance => Params::LinearCovariance(Default::default()),
            ExperimentKind::MollifierConvergence => Params::MollifierConvergence(Default::default()),
            ExperimentKind::HyperviscosityConvergence => {
                Params::HyperviscosityConvergence(Default::default())
            }
            ExperimentKind::StencilCompare => Params::StencilCompare(Default::default()),
            ExperimentKind::AreaShift => Params::AreaShift(Default::default()),
            ExperimentKind::InvariantReversibility => Params::InvariantReversibility(Default::default()),
            ExperimentKind::ExpMoment => Params::ExpMoment(Default::default()),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Params::Field(_) => ExperimentKind::Field,
            Params::Solve(_) => ExperimentKind::Solve,
            Params::LinearCovariance(_) => ExperimentKind::LinearCovariance,
            Params::MollifierConvergence(_) => ExperimentKind::MollifierConvergence,
            Params::HyperviscosityConvergence(_) => ExperimentKind::HyperviscosityConvergence,
            Params::StencilCompare(_) => ExperimentKind::StencilCompare,
            Params::AreaShift(_) => ExperimentKind::AreaShift,
            Params::InvariantReversibility(_) => ExperimentKind::InvariantReversibility,
            Params::ExpMoment(_) => ExperimentKind::ExpMoment,
        }
    }

    fn from_value(kind: ExperimentKind, value: Value) -> std::result::Result<Self, toml::de::Error> {
        Ok(match kind {
            ExperimentKind::Field => Params::Field(value.try_into()?),
            ExperimentKind::Solve => Params::Solve(value.try_into()?),
            ExperimentKind::LinearCovariance => Params::LinearCovariance(value.try_into()?),
            ExperimentKind::MollifierConvergence => Params::MollifierConvergence(value.try_into()?),
            ExperimentKind::HyperviscosityConvergence => {
                Params::HyperviscosityConvergence(value.try_into()?)
            }
            ExperimentKind::StencilCompare => Params::StencilCompare(value.try_into()?),
            ExperimentKind::AreaShift => Params::AreaShift(value.try_into()?),
            ExperimentKind::InvariantReversibility => Params::InvariantReversibility(value.try_into()?),
            ExperimentKind::ExpMoment => Params::ExpMoment(value.try_into()?),
        })
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub params: Params,
}

const TOP_LEVEL: [&str; 5] = ["schema_version", "kind", "seed", "output_dir", "params"];

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            seed: 1,
            output_dir: None,
            params: Params::default_for(kind),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        for key in table.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                return Err(Error::config(key.clone(), "unknown key"));
            }
        }
        match table.get("schema_version") {
            None => return Err(Error::config("schema_version", "missing")),
            Some(Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::config(
                    "schema_version",
                    format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                ))
            }
        }
        let kind = match table.get("kind") {
            Some(Value::String(s)) => ExperimentKind::parse(s).ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::config("kind", format!("unknown kind `{s}`, expected one of {}", names.join(", ")))
            })?,
            Some(_) => return Err(Error::config("kind", "expected a string")),
            None => return Err(Error::config("kind", "missing")),
        };
        let seed = match table.get("seed") {
            None => 1,
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(_) => return Err(Error::config("seed", "expected a nonnegative integer")),
        };
        let output_dir = match table.get("output_dir") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::config("output_dir", "expected a string")),
        };
        let user = match table.get("params") {
            None => Table::new(),
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(Error::config("params", "expected a table")),
        };
        let params = materialize(kind, &user)?;
        let config = Self {
            schema_version: SCHEMA_VERSION,
            kind,
            seed,
            output_dir,
            params,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Full TOML text, defaults included.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Range checks that the type system does not express.
    pub fn validate(&self) -> Result<()> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("params.{path}"), format!("must be positive, got {v}")))
            }
        };
        let at_least = |path: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(Error::config(format!("params.{path}"), format!("must be at least {min}, got {v}")))
            }
        };
        let eps_list = |path: &str, eps: &[f64]| {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::config(format!("params.{path}"), "need a nonempty list of positive values"));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config(format!("params.{path}"), "values must decrease"));
            }
            Ok(())
        };
        let problem = |p: &ProblemParams| -> Result<()> {
            at_least("problem.cells", p.cells, 8)?;
            if p.cells < 2 * p.modes + 2 {
                return Err(Error::config(
                    "params.problem.modes",
                    format!("{} cells cannot resolve {} modes", p.cells, p.modes),
                ));
            }
            at_least("problem.modes", p.modes, 1)?;
            positive("problem.horizon", p.horizon)?;
            positive("problem.dt", p.dt)?;
            positive("problem.tol", p.tol)?;
            if !(p.sigma >= 0.0) {
                return Err(Error::config("params.problem.sigma", "must be nonnegative"));
            }
            if !(1.0 / 3.0 < p.alpha && p.alpha < p.beta && p.beta < 0.5) {
                return Err(Error::config("params.problem.alpha", "need 1/3 < alpha < beta < 1/2"));
            }
            let steps = p.horizon / p.dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(Error::config("params.problem.dt", "horizon must be a multiple of dt"));
            }
            Ok(())
        };
        match &self.params {
            Params::Field(p) => {
                at_least("modes", p.modes, 1)?;
                at_least("dim", p.dim, 1)?;
                if p.cells < 2 * p.modes + 2 {
                    return Err(Error::config("params.cells", "grid cannot resolve the modes"));
                }
                if p.times.is_empty() || p.times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("params.times", "need increasing times"));
                }
            }
            Params::Solve(p) => {
                problem(&p.problem)?;
                at_least("stride", p.stride, 1)?;
                at_least("snapshot_every", p.snapshot_every, 1)?;
            }
            Params::LinearCovariance(p) => {
                at_least("samples", p.samples, 2)?;
                at_least("lags", p.lags, 1)?;
                positive("sigma", p.sigma)?;
            }
            Params::MollifierConvergence(p) => {
                problem(&p.problem)?;
                eps_list("eps", &p.eps)?;
            }
            Params::HyperviscosityConvergence(p) => {
                problem(&p.problem)?;
                eps_list("eps", &p.eps)?;
            }
            Params::StencilCompare(p) => {
                at_least("cells", p.cells.len(), 2)?;
                if p.cells.windows(2).any(|w| w[1] != 2 * w[0]) {
                    return Err(Error::config("params.cells", "each grid must double the previous"));
                }
                at_least("noise_divisor", p.noise_divisor, 3)?;
                positive("horizon", p.horizon)?;
                positive("rough_dt", p.rough_dt)?;
            }
            Params::AreaShift(p) => {
                problem(&p.problem)?;
                if p.problem.nonlinearity.dim() < 2 {
                    return Err(Error::config(
                        "params.problem.nonlinearity",
                        "area shifts need at least two components",
                    ));
                }
            }
            Params::InvariantReversibility(p) => {
                at_least("ensemble", p.ensemble, 2)?;
                at_least("cells", p.cells, 8)?;
                at_least("check_cells", p.check_cells, 4)?;
                positive("dt", p.dt)?;
                if !(p.lag >= 0.0) {
                    return Err(Error::config("params.lag", "must be nonnegative"));
                }
                if !(p.rho > 0.0 && p.rho <= 1.0) {
                    return Err(Error::config("params.rho", "must lie in (0, 1]"));
                }
                if !(p.chain_rho > 0.0 && p.chain_rho <= 1.0) {
                    return Err(Error::config("params.chain_rho", "must lie in (0, 1]"));
                }
                at_least("chain_steps", p.chain_steps, 100)?;
                at_least("importance_samples", p.importance_samples, 2)?;
            }
            Params::ExpMoment(p) => {
                eps_list("eps", &p.eps)?;
                at_least("samples", p.samples, 2)?;
                if p.cells < 2 * p.modes + 2 {
                    return Err(Error::config("params.cells", "grid cannot resolve the modes"));
                }
            }
        }
        Ok(())
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn compatible(default: &Value, given: &Value) -> bool {
    matches!(
        (default, given),
        (Value::Float(_), Value::Integer(_)) | (Value::Float(_), Value::Float(_))
    ) || std::mem::discriminant(default) == std::mem::discriminant(given)
}

/// Checks `user` against the defaults' shape and merges it over them.
fn overlay(defaults: &Table, user: &Table, prefix: &str) -> Result<Table> {
    let mut out = defaults.clone();
    for (key, given) in user {
        let path = format!("{prefix}.{key}");
        let default = defaults
            .get(key)
            .ok_or_else(|| Error::config(path.clone(), "unknown key"))?;
        if !compatible(default, given) {
            return Err(Error::config(
                path,
                format!("expected {}, got {}", type_name(default), type_name(given)),
            ));
        }
        let merged = match (default, given) {
            (Value::Table(d), Value::Table(g)) => Value::Table(overlay(d, g, &path)?),
            (Value::Array(d), Value::Array(g)) => {
                if let Some(proto) = d.first() {
                    if let Some((i, bad)) = g.iter().enumerate().find(|(_, v)| !compatible(proto, v)) {
                        return Err(Error::config(
                            format!("{path}[{i}]"),
                            format!("expected {}, got {}", type_name(proto), type_name(bad)),
                        ));
                    }
                }
                given.clone()
            }
            _ => given.clone(),
        };
        out.insert(key.clone(), merged);
    }
    Ok(out)
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value).expect("parameter structs serialise to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("parameter structs are tables"),
    }
}

fn materialize(kind: ExperimentKind, user: &Table) -> Result<Params> {
    let defaults = to_table(&Params::default_for(kind));
    let merged = overlay(&defaults, user, "params")?;
    match Params::from_value(kind, Value::Table(merged.clone())) {
        Ok(p) => Ok(p),
        Err(e) => {
            // find the first key that fails on its own
            for (key, v) in user {
                let mut single = defaults.clone();
                single.insert(key.clone(), v.clone());
                if Params::from_value(kind, Value::Table(single)).is_err() {
                    return Err(Error::config(format!("params.{key}"), e.message().to_string()));
                }
            }
            Err(Error::config("params", e.message().to_string()))
        }
    }
}

/// Parses a TOML table into `T`, rejecting keys absent from `T::default()`.
pub fn parse_strict<T: Serialize + DeserializeOwned + Default>(text: &str, prefix: &str) -> Result<T> {
    let user: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(prefix, e.message().to_string()))?;
    let merged = overlay(&to_table(&T::default()), &user, prefix)?;
    Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(prefix, e.message().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::default_for(kind);
            let text = c.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(c, back, "{text}");
        }
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let text = "schema_version = 1\nkind = \"solve\"\n[params.problem]\ncels = 64\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.problem.cels"),
            other => panic!("{other:?}"),
        }
        let text = "schema_version = 1\nkind = \"solve\"\nsed = 3\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "sed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_and_enum_errors_report_their_path() {
        let text = "schema_version = 1\nkind = \"exp_moment\"\n[params]\neps = [0.2, \"x\"]\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.eps[1]"),
            other => panic!("{other:?}"),
        }
        let text = "schema_version = 1\nkind = \"exp_moment\"\n[params]\nwindow = \"quarter\"\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.window"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_version_is_required() {
        assert!(ExperimentConfig::from_toml_str("kind = \"solve\"").is_err());
        assert!(ExperimentConfig::from_toml_str("schema_version = 2\nkind = \"solve\"").is_err());
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let text = "schema_version = 1\nkind = \"linear_covariance\"\n[params]\nsigma = 2\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        match c.params {
            Params::LinearCovariance(p) => assert_eq!(p.sigma, 2.0),
            _ => unreachable!(),
        }
    }
}
