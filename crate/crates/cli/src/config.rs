//! Run configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};

use gmc_core::{Backend, MidpointRule, Q0Kind, TruncationVariant};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A complete experiment description; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "one")]
    pub d: usize,
    /// Cells per axis of the uniform grid on the unit box.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Mollification ladder, strictly decreasing.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Complex parameters `[re, im]` of the single-field chaos.
    #[serde(default)]
    pub gammas: Vec<[f64; 2]>,
    /// `[alpha, beta]` pairs of the two-field chaos.
    #[serde(default)]
    pub two_field: Vec<[f64; 2]>,
    #[serde(default)]
    pub truncation: Option<TruncationConfig>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mollifier: MollifierName,
    #[serde(default)]
    pub test_function: TestFunctionConfig,
    /// Defaults to `ceil(log 1/eps_min) + 2`.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub rule: MidpointRule,
}

fn one() -> usize {
    1
}
fn default_cells() -> usize {
    128
}
fn default_replicas() -> usize {
    1000
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub t0: f64,
    pub q0: Q0Kind,
    /// `false` keeps only the constant part (degenerate checks).
    #[serde(default = "yes")]
    pub increments: bool,
}

fn yes() -> bool {
    true
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            q0: Q0Kind::Zero,
            increments: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierName {
    #[default]
    StandardBump,
    QuadraticBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    #[default]
    Radial,
    Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub shape: BumpShape,
    /// Defaults to the box center.
    pub center: Option<Vec<f64>>,
    pub radius: f64,
}

impl Default for TestFunctionConfig {
    fn default() -> Self {
        Self {
            shape: BumpShape::Radial,
            center: None,
            radius: 0.2,
        }
    }
}

/// `"auto"` picks the midpoint of the admissible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaPolicy {
    Explicit(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl LambdaPolicy {
    pub fn auto() -> Self {
        LambdaPolicy::Keyword(AutoKeyword::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub q: usize,
    pub lambda: LambdaPolicy,
    #[serde(default)]
    pub variant: TruncationVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelCheck {
    ClosedForm,
    PositiveDefinite,
    Estimates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    Mean,
    SecondMoment,
}

fn all_checks() -> Vec<KernelCheck> {
    vec![
        KernelCheck::ClosedForm,
        KernelCheck::PositiveDefinite,
        KernelCheck::Estimates,
    ]
}

fn scan_lo() -> f64 {
    -2.5
}
fn scan_hi() -> f64 {
    2.5
}
fn scan_n() -> usize {
    200
}
fn field_levels() -> Vec<usize> {
    vec![2, 5, 8]
}
fn probes() -> usize {
    20
}
fn sigmas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn ratios() -> Vec<f64> {
    (0..=5).map(f64::from).collect()
}
fn q_levels() -> Vec<usize> {
    vec![2, 4, 6, 8]
}
fn k_levels() -> Vec<usize> {
    (4..=10).collect()
}
fn tilt_q() -> usize {
    2
}
fn other_mollifier() -> MollifierName {
    MollifierName::QuadraticBump
}

/// Experiment kind with its specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    PhaseScan {
        #[serde(default = "scan_lo")]
        lo: f64,
        #[serde(default = "scan_hi")]
        hi: f64,
        #[serde(default = "scan_n")]
        n: usize,
    },
    KernelCheck {
        #[serde(default = "all_checks")]
        checks: Vec<KernelCheck>,
    },
    FieldStats {
        #[serde(default = "field_levels")]
        levels: Vec<usize>,
        #[serde(default = "probes")]
        probes: usize,
    },
    MomentCheck {
        estimand: MomentKind,
    },
    Cauchy,
    MollifierIndependence {
        #[serde(default = "other_mollifier")]
        other: MollifierName,
    },
    TailCheck {
        #[serde(default = "sigmas")]
        sigmas: Vec<f64>,
        #[serde(default = "ratios")]
        ratios: Vec<f64>,
    },
    SupProb {
        lambda: f64,
        #[serde(default = "k_levels")]
        ks: Vec<usize>,
        #[serde(default = "q_levels")]
        qs: Vec<usize>,
    },
    TiltCheck {
        alpha: f64,
        beta: f64,
        lambda: LambdaPolicy,
        #[serde(default = "tilt_q")]
        q: usize,
        /// Mollification scale at the tilt points.
        tilt_eps: f64,
        separations: Vec<f64>,
    },
    Sobolev {
        u: f64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::PhaseScan { .. } => "phase-scan",
            Experiment::KernelCheck { .. } => "kernel-check",
            Experiment::FieldStats { .. } => "field-stats",
            Experiment::MomentCheck { .. } => "moment-check",
            Experiment::Cauchy => "cauchy",
            Experiment::MollifierIndependence { .. } => "mollifier-independence",
            Experiment::TailCheck { .. } => "tail-check",
            Experiment::SupProb { .. } => "sup-prob",
            Experiment::TiltCheck { .. } => "tilt-check",
            Experiment::Sobolev { .. } => "sobolev",
        }
    }
}

impl RunConfig {
    /// A config with every shared field at its default.
    pub fn new(experiment: Experiment, output: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            d: one(),
            cells: default_cells(),
            eps: Vec::new(),
            gammas: Vec::new(),
            two_field: Vec::new(),
            truncation: None,
            replicas: default_replicas(),
            seed: default_seed(),
            output: output.into(),
            kernel: KernelConfig::default(),
            mollifier: MollifierName::default(),
            test_function: TestFunctionConfig::default(),
            n_max: None,
            backend: Backend::Auto,
            rule: MidpointRule::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
