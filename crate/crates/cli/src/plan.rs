//! Fail-fast validation: every precondition is checked and every derived parameter resolved
//! before a single replica is drawn.

use gmc_core::{
    classify, lambda_admissible, pick_lambda, BoxDomain, ChaosMode, ChaosParams, FieldSampler, Grid, KernelSpec,
    MollifierSpec, Phase, TestFunction, Truncation, TruncationVariant,
};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{BumpShape, Experiment, KernelCheck, LambdaPolicy, MollifierName, MomentKind, RunConfig};
use crate::CliError;

/// Sampled field on the run grid with its test function.
#[derive(Debug, Clone)]
pub struct FieldPlan {
    pub grid: Grid,
    pub f: TestFunction,
    pub sampler: FieldSampler,
}

/// A validated config with everything the experiment needs.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: RunConfig,
    pub spec: KernelSpec,
    pub theta: MollifierSpec,
    pub field: Option<FieldPlan>,
    /// One entry per requested gamma or (alpha, beta) pair, truncation resolved.
    pub modes: Vec<ChaosParams>,
    /// Barrier slope of a tilt check.
    pub tilt_lambda: Option<f64>,
    /// Resolved parameters recorded in the manifest.
    pub resolved: Value,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn mollifier(name: MollifierName, dim: usize) -> Result<MollifierSpec, CliError> {
    Ok(match name {
        MollifierName::StandardBump => MollifierSpec::standard(dim)?,
        MollifierName::QuadraticBump => MollifierSpec::quadratic(dim)?,
    })
}

fn resolve_lambda(policy: LambdaPolicy, dim: usize, alpha: f64, beta: f64) -> Result<f64, CliError> {
    match policy {
        LambdaPolicy::Explicit(l) => {
            if !lambda_admissible(dim, alpha, beta, l) {
                return Err(invalid(format!(
                    "lambda = {l} violates the barrier constraints at (alpha = {alpha}, beta = {beta})"
                )));
            }
            Ok(l)
        }
        LambdaPolicy::Keyword(_) => Ok(pick_lambda(dim, alpha, beta)?),
    }
}

fn check_ladder(eps: &[f64], min_len: usize, what: &str) -> Result<(), CliError> {
    if eps.len() < min_len {
        return Err(invalid(format!("{what} needs at least {min_len} eps values")));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e < 1.0)) {
        return Err(invalid("eps values must lie in (0, 1)"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("eps ladder must be strictly decreasing"));
    }
    Ok(())
}

fn modes(config: &RunConfig) -> Vec<ChaosMode> {
    let mut out: Vec<ChaosMode> = config
        .gammas
        .iter()
        .map(|g| ChaosMode::single(Complex64::new(g[0], g[1])))
        .collect();
    out.extend(config.two_field.iter().map(|p| ChaosMode::TwoField {
        alpha: p[0],
        beta: p[1],
    }));
    out
}

fn mode_params(config: &RunConfig, mode: ChaosMode) -> Result<ChaosParams, CliError> {
    let d = config.d;
    let truncation = match &config.truncation {
        None => None,
        Some(t) => {
            if t.variant == TruncationVariant::Mollified {
                return Err(invalid(
                    "the mollified barrier variant is not available from the runner; use \"increments\"",
                ));
            }
            let (alpha, beta) = mode.alpha_beta();
            let lambda = resolve_lambda(t.lambda, d, alpha, beta)?;
            Some(Truncation {
                q: t.q,
                lambda,
                variant: t.variant,
            })
        }
    };
    Ok(ChaosParams::new(d, mode, truncation)?)
}

/// Ladder experiments need a subcritical point, with truncation outside the L2 region.
fn require_subcritical(d: usize, p: &ChaosParams) -> Result<(), CliError> {
    let (alpha, beta) = p.mode.alpha_beta();
    match classify(d, alpha, beta)?.phase {
        Phase::L2Subcritical => Ok(()),
        Phase::SubcriticalNonL2 if p.truncation.is_some() => Ok(()),
        Phase::SubcriticalNonL2 => Err(invalid(format!(
            "(alpha = {alpha}, beta = {beta}) lies outside the L2 region; set \"truncation\""
        ))),
        other => Err(invalid(format!(
            "(alpha = {alpha}, beta = {beta}) is not subcritical ({})",
            other.as_str()
        ))),
    }
}

fn needs_field(e: &Experiment) -> bool {
    matches!(
        e,
        Experiment::FieldStats { .. }
            | Experiment::MomentCheck { .. }
            | Experiment::Cauchy
            | Experiment::MollifierIndependence { .. }
            | Experiment::SupProb { .. }
            | Experiment::Sobolev { .. }
    )
}

/// Default `n_max`: enough levels to reach the finest eps, plus two.
fn default_n_max(config: &RunConfig) -> usize {
    let from_eps = config.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let base = if from_eps.is_finite() {
        ((1.0 / from_eps).ln().ceil() as usize) + 2
    } else {
        1
    };
    let extra = match &config.experiment {
        Experiment::FieldStats { levels, .. } => levels.iter().copied().max().unwrap_or(1),
        Experiment::SupProb { ks, qs, .. } => ks.iter().chain(qs).copied().max().unwrap_or(1),
        _ => 1,
    };
    let q = config.truncation.map_or(1, |t| t.q);
    base.max(extra).max(q)
}

fn center(config: &RunConfig) -> Result<Vec<f64>, CliError> {
    let c = config
        .test_function
        .center
        .clone()
        .unwrap_or_else(|| vec![0.5; config.d]);
    if c.len() != config.d {
        return Err(invalid("test_function.center must have d coordinates"));
    }
    Ok(c)
}

fn field_plan(config: &RunConfig, spec: &KernelSpec) -> Result<(FieldPlan, usize), CliError> {
    let d = config.d;
    if config.cells < 2 {
        return Err(invalid("cells must be >= 2"));
    }
    let grid = Grid::uniform(BoxDomain::unit(d)?, config.cells)?;
    let (_, h) = grid.uniform_params().expect("uniform grid");
    if let Some(&e) = config.eps.iter().find(|&&e| h > e / 4.0) {
        return Err(invalid(format!(
            "grid spacing {h} does not resolve eps = {e} (need spacing <= eps/4); raise \"cells\""
        )));
    }
    let tf = &config.test_function;
    if !(tf.radius > 0.0) {
        return Err(invalid("test_function.radius must be positive"));
    }
    let c = center(config)?;
    let f = match tf.shape {
        BumpShape::Radial => TestFunction::bump(&grid, &c, tf.radius)?,
        BumpShape::Tensor => TestFunction::tensor_bump(&grid, &c, tf.radius)?,
    };
    if f.support().is_empty() {
        return Err(invalid("the test function vanishes on the grid"));
    }
    if let Some(&e) = config.eps.first() {
        if !f.supported_in(&grid, e) {
            return Err(invalid(format!(
                "supp f is not inside D_eps for eps = {e}; shrink the bump"
            )));
        }
    }
    let n_max = config.n_max.unwrap_or_else(|| default_n_max(config));
    if let Some(t) = config.truncation {
        if t.q > n_max {
            return Err(invalid(format!("truncation q = {} exceeds n_max = {n_max}", t.q)));
        }
    }
    let sampler = FieldSampler::new(spec, &grid, n_max, config.backend)?;
    Ok((FieldPlan { grid, f, sampler }, n_max))
}

fn check_experiment(config: &RunConfig, modes: &[ChaosParams]) -> Result<(), CliError> {
    let d = config.d;
    let need_modes = |what: &str| {
        if modes.is_empty() {
            Err(invalid(format!("{what} needs \"gammas\" or \"two_field\" entries")))
        } else {
            Ok(())
        }
    };
    match &config.experiment {
        Experiment::PhaseScan { lo, hi, n } => {
            if *n < 2 || !(hi > lo) {
                return Err(invalid("phase-scan needs n >= 2 and hi > lo"));
            }
        }
        Experiment::KernelCheck { checks } => {
            if checks.is_empty() {
                return Err(invalid("kernel-check needs at least one check"));
            }
            if checks.contains(&KernelCheck::ClosedForm) && (d != 1 || config.kernel.t0 != 0.0) {
                return Err(invalid("the closed-form check needs d = 1 and t0 = 0"));
            }
            if checks.contains(&KernelCheck::Estimates) {
                check_ladder(&config.eps, 2, "the estimate check")?;
            }
        }
        Experiment::FieldStats { levels, probes } => {
            check_ladder(&config.eps, 1, "field-stats")?;
            if config.eps.len() > 2 {
                return Err(invalid("field-stats takes eps = [eps] or [eps, eps']"));
            }
            if levels.is_empty() || levels.contains(&0) || *probes == 0 {
                return Err(invalid("field-stats needs levels >= 1 and probes >= 1"));
            }
            if let Some(n) = config.n_max {
                if levels.iter().any(|&l| l > n) {
                    return Err(invalid(format!("field-stats levels must be <= n_max = {n}")));
                }
            }
        }
        Experiment::MomentCheck { estimand } => {
            check_ladder(&config.eps, 1, "moment-check")?;
            need_modes("moment-check")?;
            if *estimand == MomentKind::SecondMoment && config.truncation.is_some() {
                return Err(invalid("the second-moment oracle is for untruncated chaos"));
            }
        }
        Experiment::Cauchy | Experiment::MollifierIndependence { .. } | Experiment::Sobolev { .. } => {
            check_ladder(&config.eps, 2, config.experiment.kind())?;
            need_modes(config.experiment.kind())?;
            for p in modes {
                require_subcritical(d, p)?;
            }
            if let Experiment::Sobolev { u } = config.experiment {
                if !(u > d as f64 / 2.0) {
                    return Err(invalid(format!("Sobolev index u = {u} must exceed d/2")));
                }
            }
        }
        Experiment::TailCheck { sigmas, ratios } => {
            if sigmas.is_empty() || ratios.is_empty() {
                return Err(invalid("tail-check needs sigmas and ratios"));
            }
            if sigmas.iter().any(|s| !(*s > 0.0)) || ratios.iter().any(|r| !(*r >= 0.0)) {
                return Err(invalid("tail-check needs sigma > 0 and ratios >= 0"));
            }
        }
        Experiment::SupProb { lambda, ks, qs } => {
            let crit = (2.0 * d as f64).sqrt();
            if !(*lambda > crit) {
                return Err(invalid(format!("lambda = {lambda} must exceed sqrt(2d) = {crit}")));
            }
            if ks.is_empty() || qs.is_empty() || ks.iter().chain(qs).any(|&k| k == 0) {
                return Err(invalid("sup-prob needs levels ks and qs >= 1"));
            }
            if let Some(n) = config.n_max {
                if ks.iter().chain(qs).any(|&k| k > n) {
                    return Err(invalid(format!("sup-prob levels must be <= n_max = {n}")));
                }
            }
        }
        Experiment::TiltCheck {
            q,
            tilt_eps,
            separations,
            ..
        } => {
            if *q == 0 || !(*tilt_eps > 0.0 && *tilt_eps < 1.0) {
                return Err(invalid("tilt-check needs q >= 1 and tilt_eps in (0, 1)"));
            }
            if separations.len() < 4 || separations.iter().any(|s| !(*s > 0.0)) {
                return Err(invalid("tilt-check needs at least 4 positive separations"));
            }
        }
    }
    if config.replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    Ok(())
}

/// Checks every precondition and resolves derived parameters; builds the sampler.
pub fn validate(config: &RunConfig) -> Result<Plan, CliError> {
    let d = config.d;
    if d != 1 && d != 2 {
        return Err(invalid(format!("d must be 1 or 2, got {d}")));
    }
    let k = &config.kernel;
    let spec = KernelSpec::new(d, k.t0, k.q0, BoxDomain::unit(d)?)?.with_increments(k.increments);
    let theta = mollifier(config.mollifier, d)?;
    let modes = modes(config)
        .into_iter()
        .map(|m| mode_params(config, m))
        .collect::<Result<Vec<_>, _>>()?;
    check_experiment(config, &modes)?;

    let tilt_lambda = match config.experiment {
        Experiment::TiltCheck {
            alpha, beta, lambda, ..
        } => {
            center(config)?;
            Some(resolve_lambda(lambda, d, alpha, beta)?)
        }
        _ => None,
    };

    let (field, n_max) = if needs_field(&config.experiment) {
        let (fp, n) = field_plan(config, &spec)?;
        (Some(fp), Some(n))
    } else {
        (None, None)
    };

    let modes_json: Vec<Value> = modes
        .iter()
        .map(|p| {
            let (alpha, beta) = p.mode.alpha_beta();
            let phase = classify(d, alpha, beta).map(|l| l.phase.as_str()).unwrap_or("unknown");
            json!({
                "mode": p.mode,
                "alpha": alpha,
                "beta": beta,
                "phase": phase,
                "truncation": p.truncation,
            })
        })
        .collect();
    let field_json = field.as_ref().map(|fp| {
        json!({
            "grid_hash": fp.grid.hash(),
            "points": fp.grid.len(),
            "n_max": n_max,
            "level_kinds": fp.sampler.level_kinds(),
            "residual": fp.sampler.residual(),
            "test_function": {
                "name": fp.f.name,
                "integral": fp.f.integral(&fp.grid),
                "support_points": fp.f.support().len(),
            },
        })
    });
    let resolved = json!({
        "kernel": { "dim": d, "t0": spec.t0(), "q0": spec.q0(), "increments": spec.has_increments() },
        "mollifier": theta.name(),
        "rule": config.rule.id(),
        "field": field_json,
        "modes": modes_json,
        "tilt_lambda": tilt_lambda,
    });
    Ok(Plan {
        config: config.clone(),
        spec,
        theta,
        field,
        modes,
        tilt_lambda,
        resolved,
    })
}
