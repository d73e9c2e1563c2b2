//! Experiment execution: each kind turns a [`Plan`] into tables, plots and verdicts.

use gmc_core::io::{fmt_f64, Table};
use gmc_core::kernels::kappa_spectrum_min;
use gmc_core::verify::{
    cauchy_ladder, chaos_table, kernel_estimate_check, mc_moment, mean_se, mollifier_independence,
    second_moment_oracle, sobolev_ladder, sup_field_prob, tail_bound_check, tilted_event_prob, Estimand, EstimateGrid,
    EstimateKind, LadderReport, McSetup, MomentEstimate, TiltSetup,
};
use gmc_core::{
    k_exact, k_mollified, lambda_admissible, map_replicas, pd_check, phase_scan, pick_lambda, replica_rng, BoxDomain,
    Channel, ChaosMode, ChaosParams, GramLevel, Grid,
};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, KernelCheck, MomentKind};
use crate::plan::{mollifier, FieldPlan, Plan};
use crate::svg::{line_plot, phase_diagram, Plot, Series};
use crate::CliError;

/// Pass/fail of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(check: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Everything a run writes besides the manifest.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// `(file stem, table)`, written as `<stem>.csv`.
    pub tables: Vec<(String, Table)>,
    /// `(file stem, svg)`, written as `<stem>.svg`.
    pub plots: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn table(&mut self, stem: &str, t: Table) {
        self.tables.push((stem.to_string(), t));
    }

    fn plot(&mut self, stem: &str, svg: String) {
        self.plots.push((stem.to_string(), svg));
    }

    fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }
}

/// Human-readable parameter label, e.g. `gamma=1.1+0.25i`.
pub fn mode_name(mode: &ChaosMode) -> String {
    match *mode {
        ChaosMode::Single { re, im } => {
            if im == 0.0 {
                format!("gamma={}", fmt_f64(re))
            } else {
                format!(
                    "gamma={}{}{}i",
                    fmt_f64(re),
                    if im < 0.0 { "-" } else { "+" },
                    fmt_f64(im.abs())
                )
            }
        }
        ChaosMode::TwoField { alpha, beta } => format!("alpha={},beta={}", fmt_f64(alpha), fmt_f64(beta)),
    }
}

fn field(plan: &Plan) -> &FieldPlan {
    plan.field.as_ref().expect("validated plan carries a field")
}

fn setup<'a>(plan: &'a Plan, fp: &'a FieldPlan, workers: Option<usize>) -> McSetup<'a> {
    McSetup {
        sampler: &fp.sampler,
        theta: &plan.theta,
        f: &fp.f,
        seed: plan.config.seed,
        replicas: plan.config.replicas,
        workers,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_f64)
}

fn z_score(est: f64, oracle: f64, se: f64) -> f64 {
    if se > 0.0 {
        (est - oracle) / se
    } else if est == oracle {
        0.0
    } else {
        f64::INFINITY.copysign(est - oracle)
    }
}

/// Runs the experiment; `workers = None` uses the ambient thread pool.
pub fn execute(plan: &Plan, workers: Option<usize>) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::default();
    match &plan.config.experiment {
        Experiment::PhaseScan { lo, hi, n } => run_phase_scan(plan, *lo, *hi, *n, &mut out)?,
        Experiment::KernelCheck { checks } => run_kernel_check(plan, checks, &mut out)?,
        Experiment::FieldStats { levels, probes } => run_field_stats(plan, levels, *probes, workers, &mut out)?,
        Experiment::MomentCheck { estimand } => run_moment_check(plan, *estimand, workers, &mut out)?,
        Experiment::Cauchy | Experiment::MollifierIndependence { .. } | Experiment::Sobolev { .. } => {
            run_ladders(plan, workers, &mut out)?
        }
        Experiment::TailCheck { sigmas, ratios } => run_tail_check(sigmas, ratios, &mut out)?,
        Experiment::SupProb { lambda, ks, qs } => run_sup_prob(plan, *lambda, ks, qs, workers, &mut out)?,
        Experiment::TiltCheck {
            alpha,
            beta,
            q,
            tilt_eps,
            separations,
            ..
        } => run_tilt(plan, *alpha, *beta, *q, *tilt_eps, separations, workers, &mut out)?,
    }
    Ok(out)
}

fn run_phase_scan(plan: &Plan, lo: f64, hi: f64, n: usize, out: &mut RunOutput) -> Result<(), CliError> {
    let d = plan.config.d;
    let table = phase_scan(d, lo, hi, n)?;
    let rows: Vec<(f64, f64, String)> = table
        .rows
        .iter()
        .map(|r| {
            (
                r[0].parse().unwrap_or(f64::NAN),
                r[1].parse().unwrap_or(f64::NAN),
                r[2].clone(),
            )
        })
        .collect();
    let known = [
        "L2_subcritical",
        "subcritical_non_L2",
        "boundary",
        "phase_II_glassy",
        "phase_III",
    ];
    let complete = rows.len() == n * n && rows.iter().all(|r| known.contains(&r.2.as_str()));
    out.verdict(Verdict::new(
        "scan_complete",
        complete,
        format!("{} labelled rows for a {n}x{n} scan", rows.len()),
    ));
    let mut bad = 0usize;
    let mut checked = 0usize;
    for (a, b, label) in &rows {
        if label == "subcritical_non_L2" {
            checked += 1;
            let ok = pick_lambda(d, *a, *b).is_ok_and(|l| lambda_admissible(d, *a, *b, l));
            bad += usize::from(!ok);
        }
    }
    out.verdict(Verdict::new(
        "auto_lambda_admissible",
        bad == 0,
        format!("{checked} subcritical non-L2 points, {bad} without an admissible auto lambda"),
    ));
    out.plot("phase_diagram", phase_diagram(&rows, n, lo, hi));
    out.table("phase_scan", table);
    Ok(())
}

fn run_kernel_check(plan: &Plan, checks: &[KernelCheck], out: &mut RunOutput) -> Result<(), CliError> {
    let spec = &plan.spec;
    let d = plan.config.d;
    if checks.contains(&KernelCheck::ClosedForm) {
        let e = std::f64::consts::E;
        let mut t = Table::new(["r", "k_exact", "closed_form", "abs_err"]);
        let mut worst = 0.0f64;
        for i in 1..=50 {
            let r = i as f64 / (50.0 * e);
            let k = k_exact(spec, r)?;
            let c = spec.q0() + (1.0 / r).ln() - 2.0 + e * r;
            let err = (k - c).abs();
            worst = worst.max(err);
            t.push(vec![fmt_f64(r), fmt_f64(k), fmt_f64(c), fmt_f64(err)]);
        }
        out.verdict(Verdict::new(
            "closed_form",
            worst <= 1e-9,
            format!("max |K(r) - (log 1/r - 2 + e r)| = {worst:e} on 50 radii"),
        ));
        out.table("closed_form", t);
    }
    if checks.contains(&KernelCheck::PositiveDefinite) {
        let mut t = Table::new(["check", "level", "min_eigenvalue", "trace", "pass"]);
        let fourier = kappa_spectrum_min(d, 1024);
        let f_ok = fourier >= -1e-8;
        t.push(vec![
            "kappa_dft".into(),
            String::new(),
            fmt_f64(fourier),
            String::new(),
            f_ok.to_string(),
        ]);
        out.verdict(Verdict::new(
            "kappa_spectrum_nonnegative",
            f_ok,
            format!("min DFT of sampled kappa on 1024 points per axis = {fourier:e}"),
        ));
        let cells = if d == 1 { 64 } else { 8 };
        let grid = Grid::uniform(BoxDomain::unit(d)?, cells)?;
        let mut all = true;
        for k in 1..=8 {
            let rep = pd_check(spec, &grid, GramLevel::Increment(k))?;
            let ok = rep.min_eigenvalue >= -1e-8 * rep.trace.abs();
            all &= ok;
            t.push(vec![
                "gram_increment".into(),
                k.to_string(),
                fmt_f64(rep.min_eigenvalue),
                fmt_f64(rep.trace),
                ok.to_string(),
            ]);
        }
        out.verdict(Verdict::new(
            "gram_psd",
            all,
            format!("increment Gram matrices Q_1..Q_8 on a {}-point grid", grid.len()),
        ));
        out.table("positive_definite", t);
    }
    if checks.contains(&KernelCheck::Estimates) {
        let mut grid = EstimateGrid::standard(plan.config.eps.clone());
        grid.log_term = spec.has_increments();
        let mut t = Table::new(["kind", "eps", "sup", "distance", "level"]);
        let mut series = Vec::new();
        for kind in [EstimateKind::MollifiedLog, EstimateKind::PartialMin] {
            let rep = kernel_estimate_check(spec, &plan.theta, kind, &grid, plan.config.rule)?;
            let name = match kind {
                EstimateKind::MollifiedLog => "mollified-log",
                EstimateKind::PartialMin => "partial-min",
            };
            for row in rep.table().rows {
                let mut r = vec![name.to_string()];
                r.extend(row);
                t.push(r);
            }
            series.push(Series::new(name, rep.steps.iter().map(|s| (s.eps, s.sup)).collect()));
            out.verdict(Verdict::new(
                format!("estimate_stable[{name}]"),
                rep.stable,
                format!("max consecutive ratio {:.4} (limit 1.5)", rep.max_ratio),
            ));
        }
        let p = Plot {
            title: "kernel estimate suprema".into(),
            x_label: "eps".into(),
            y_label: "sup gap".into(),
            log_x: true,
            ..Plot::default()
        };
        out.plot("kernel_estimates", line_plot(&p, &series));
        out.table("kernel_estimates", t);
    }
    Ok(())
}

fn run_field_stats(
    plan: &Plan,
    levels: &[usize],
    probes: usize,
    workers: Option<usize>,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let fp = field(plan);
    let cfg = &plan.config;
    let grid = &fp.grid;
    let eps = cfg.eps[0];
    let eps2 = cfg.eps.get(1).copied().unwrap_or(eps);
    let ladder: Vec<f64> = if eps2 == eps { vec![eps] } else { vec![eps, eps2] };
    let center = match grid.uniform_params() {
        Some((c, _)) if cfg.d == 2 => grid.flat_index((c / 2) as isize, (c / 2) as isize).expect("inside"),
        _ => grid.len() / 2,
    };
    let (inner, inner2) = (grid.interior(eps), grid.interior(eps2));
    if inner.is_empty() || inner2.is_empty() {
        return Err(CliError::Validation(format!(
            "no grid point lies in D_eps for eps = {eps}"
        )));
    }
    // probe pairs come from a stream index no replica reaches
    let mut rng = replica_rng(cfg.seed, Channel::Residual, u64::MAX);
    let pairs: Vec<(usize, usize)> = (0..probes)
        .map(|_| {
            (
                inner[rng.random_range(0..inner.len())],
                inner2[rng.random_range(0..inner2.len())],
            )
        })
        .collect();
    let sampler = &fp.sampler;
    let rows = map_replicas(cfg.replicas, workers, |r| -> Result<Vec<f64>, CliError> {
        let mut s = sampler.sample(cfg.seed, r as u64);
        sampler.mollify(&mut s, &ladder, &plan.theta)?;
        let mut v: Vec<f64> = levels.iter().map(|&n| s.y(n)[center].powi(2)).collect();
        let (xa, xb) = (s.x(eps).expect("mollified"), s.x(eps2).expect("mollified"));
        for &(i, j) in &pairs {
            v.push(xa.get(i).expect("interior") * xb.get(j).expect("interior"));
        }
        Ok(v)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();

    let mut t = Table::new(["quantity", "level", "x", "y", "estimate", "se", "oracle", "z"]);
    let mut var_z = Vec::new();
    for (k, &n) in levels.iter().enumerate() {
        let (m, se) = mean_se(&column(k));
        let oracle = plan.spec.partial(n, 0.0);
        let z = z_score(m, oracle, se);
        var_z.push(z);
        let x = fmt_f64(grid.point(center)[0]);
        t.push(vec![
            "var_Y".into(),
            n.to_string(),
            x.clone(),
            x,
            fmt_f64(m),
            fmt_f64(se),
            fmt_f64(oracle),
            fmt_f64(z),
        ]);
    }
    let mut cov_z = Vec::new();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let (m, se) = mean_se(&column(levels.len() + p));
        let (x, y) = (grid.point(i), grid.point(j));
        let oracle = k_mollified(&plan.spec, &plan.theta, eps, eps2, x, y, cfg.rule)?;
        let z = z_score(m, oracle, se);
        cov_z.push(z);
        t.push(vec![
            "cov_X".into(),
            String::new(),
            fmt_f64(x[0]),
            fmt_f64(y[0]),
            fmt_f64(m),
            fmt_f64(se),
            fmt_f64(oracle),
            fmt_f64(z),
        ]);
    }
    let max_abs = |zs: &[f64]| zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    out.verdict(Verdict::new(
        "variance_levels",
        max_abs(&var_z) <= 4.0,
        format!(
            "Var Y_n(x) against n for n in {levels:?}: max |z| = {:.3}",
            max_abs(&var_z)
        ),
    ));
    out.verdict(Verdict::new(
        "mollified_covariance",
        max_abs(&cov_z) <= 4.0,
        format!(
            "{probes} probes against the mollified kernel: max |z| = {:.3}",
            max_abs(&cov_z)
        ),
    ));
    let series = [
        Series::new(
            "Var Y_n",
            var_z.iter().enumerate().map(|(i, &z)| (i as f64, z)).collect(),
        ),
        Series::new(
            "Cov X_eps",
            cov_z
                .iter()
                .enumerate()
                .map(|(i, &z)| ((levels.len() + i) as f64, z))
                .collect(),
        ),
    ];
    out.plot("zscores", zscore_plot("field statistics", &series));
    out.table("field_stats", t);
    Ok(())
}

fn zscore_plot(title: &str, series: &[Series]) -> String {
    let p = Plot {
        title: title.into(),
        x_label: "check".into(),
        y_label: "z".into(),
        hlines: vec![(4.0, "+4".into()), (-4.0, "-4".into()), (0.0, "0".into())],
        ..Plot::default()
    };
    line_plot(&p, series)
}

fn moment_row(t: &mut Table, name: &str, eps: f64, est: &MomentEstimate) {
    t.push(vec![
        name.to_string(),
        fmt_f64(eps),
        est.id.clone(),
        est.replicas.to_string(),
        fmt_f64(est.re),
        fmt_f64(est.im),
        fmt_f64(est.se_re),
        fmt_f64(est.se_im),
        opt(est.oracle_re),
        opt(est.oracle_im),
        opt(est.z_re),
        opt(est.z_im),
        est.overflow_excluded.to_string(),
    ]);
}

fn moment_table() -> Table {
    Table::new([
        "mode",
        "eps",
        "estimand",
        "replicas",
        "re",
        "im",
        "se_re",
        "se_im",
        "oracle_re",
        "oracle_im",
        "z_re",
        "z_im",
        "overflow_excluded",
    ])
}

fn run_moment_check(
    plan: &Plan,
    kind: MomentKind,
    workers: Option<usize>,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let fp = field(plan);
    let setup = setup(plan, fp, workers);
    let mut t = moment_table();
    let mut series = Vec::new();
    for (idx, params) in plan.modes.iter().enumerate() {
        let name = mode_name(&params.mode);
        let mut zs = Vec::new();
        let mut all_values = Vec::new();
        for &eps in &plan.config.eps {
            let (estimand, oracle) = match kind {
                MomentKind::Mean => (Estimand::Mean { eps }, fp.f.integral(&fp.grid)),
                MomentKind::SecondMoment => {
                    let (a, b) = params.mode.alpha_beta();
                    let o = second_moment_oracle(
                        &plan.spec,
                        &plan.theta,
                        Complex64::new(a, b),
                        eps,
                        eps,
                        &fp.f,
                        &fp.grid,
                        plan.config.rule,
                    )?;
                    (Estimand::Cross { eps, eps2: eps }, o)
                }
            };
            let run = mc_moment(&setup, params, estimand, Some(Complex64::new(oracle, 0.0)))?;
            moment_row(&mut t, &name, eps, &run.estimate);
            let z = run.estimate.max_abs_z().unwrap_or(f64::INFINITY);
            zs.push((eps, run.estimate.z_re.unwrap_or(f64::NAN)));
            if run.estimate.z_im.is_some_and(|z| z != 0.0) {
                zs.push((eps, run.estimate.z_im.unwrap_or(f64::NAN)));
            }
            all_values.extend(run.values);
            let check = match kind {
                MomentKind::Mean => "mean_identity",
                MomentKind::SecondMoment => "second_moment_oracle",
            };
            out.verdict(Verdict::new(
                format!("{check}[{name},eps={}]", fmt_f64(eps)),
                run.estimate.within(4.0),
                format!(
                    "estimate {} + {}i against {}, max |z| = {z:.3}, {} overflow-excluded",
                    fmt_f64(run.estimate.re),
                    fmt_f64(run.estimate.im),
                    fmt_f64(oracle),
                    run.estimate.overflow_excluded
                ),
            ));
        }
        series.push(Series::new(name, zs));
        out.table(&format!("chaos_mode{idx}"), chaos_table(&all_values));
    }
    out.table("moments", t);
    let p = Plot {
        title: "moment z-scores".into(),
        x_label: "eps".into(),
        y_label: "z".into(),
        log_x: true,
        hlines: vec![(4.0, "+4".into()), (-4.0, "-4".into()), (0.0, "0".into())],
        ..Plot::default()
    };
    out.plot("moment_zscores", line_plot(&p, &series));
    Ok(())
}

fn ladder_for(plan: &Plan, setup: &McSetup<'_>, params: &ChaosParams) -> Result<LadderReport, CliError> {
    let eps = &plan.config.eps;
    Ok(match plan.config.experiment {
        Experiment::Cauchy => cauchy_ladder(setup, params, eps)?,
        Experiment::MollifierIndependence { other } => {
            let th = mollifier(other, plan.config.d)?;
            mollifier_independence(setup, &th, params, eps)?
        }
        Experiment::Sobolev { u } => sobolev_ladder(setup, params, eps, u)?,
        _ => unreachable!("not a ladder experiment"),
    })
}

fn run_ladders(plan: &Plan, workers: Option<usize>, out: &mut RunOutput) -> Result<(), CliError> {
    let fp = field(plan);
    let setup = setup(plan, fp, workers);
    let kind = plan.config.experiment.kind();
    let mut t = Table::new([
        "mode",
        "eps",
        "eps_prime",
        "value",
        "se",
        "step_se",
        "overflow_excluded",
    ]);
    let mut series = Vec::new();
    for params in &plan.modes {
        let name = mode_name(&params.mode);
        let rep = ladder_for(plan, &setup, params)?;
        for (j, row) in rep.table().rows.into_iter().enumerate() {
            let mut r = vec![name.clone()];
            r.extend(row);
            r.push(if j == 0 {
                String::new()
            } else {
                fmt_f64(rep.step_se[j - 1])
            });
            r.push(rep.overflow_excluded.to_string());
            t.push(r);
        }
        let (first, last) = (rep.values[0], rep.values[rep.values.len() - 1]);
        out.verdict(Verdict::new(
            format!("trend[{name}]"),
            rep.decreasing,
            format!(
                "{} -> {} over {} ladder entries (need last < 0.5 first, steps within 2 SE)",
                fmt_f64(first),
                fmt_f64(last),
                rep.values.len()
            ),
        ));
        series.push(
            Series::new(
                name,
                rep.pairs.iter().map(|p| p.1).zip(rep.values.iter().copied()).collect(),
            )
            .with_err(rep.se.clone()),
        );
    }
    let p = Plot {
        title: format!("{kind} ladder"),
        x_label: "eps'".into(),
        y_label: "coupled squared distance".into(),
        log_x: true,
        log_y: true,
        ..Plot::default()
    };
    out.plot(&format!("{}_ladder", kind.replace('-', "_")), line_plot(&p, &series));
    out.table(&kind.replace('-', "_"), t);
    Ok(())
}

fn run_tail_check(sigmas: &[f64], ratios: &[f64], out: &mut RunOutput) -> Result<(), CliError> {
    let rep = tail_bound_check(sigmas, ratios)?;
    out.verdict(Verdict::new(
        "corrected_bound",
        rep.all_hold,
        format!("P(N(0, s^2) > u) <= 2 exp(-u^2/(2 s^2)) on {} rows", rep.rows.len()),
    ));
    let probe = rep.rows.iter().find(|r| r.sigma == 1.0 && r.u == 3.0);
    if let Some(r) = probe {
        out.verdict(Verdict::new(
            "literal_form_violation_recorded",
            !r.literal_holds,
            format!(
                "at sigma = 1, u = 3: tail {:e} vs literal 2 exp(-u^2/s^2) = {:e}",
                r.tail, r.literal
            ),
        ));
    }
    let series: Vec<Series> = sigmas
        .iter()
        .flat_map(|&s| {
            let rows: Vec<_> = rep.rows.iter().filter(|r| r.sigma == s && r.u > 0.0).collect();
            [
                Series::new(
                    format!("tail s={}", fmt_f64(s)),
                    rows.iter().map(|r| (r.u / s, r.tail)).collect(),
                ),
                Series::new(
                    format!("bound s={}", fmt_f64(s)),
                    rows.iter().map(|r| (r.u / s, r.bound)).collect(),
                ),
            ]
        })
        .collect();
    let p = Plot {
        title: "Gaussian tail bound".into(),
        x_label: "u / sigma".into(),
        y_label: "probability".into(),
        log_y: true,
        ..Plot::default()
    };
    out.plot("tail_bound", line_plot(&p, &series));
    out.table("tail_bound", rep.table());
    Ok(())
}

fn run_sup_prob(
    plan: &Plan,
    lambda: f64,
    ks: &[usize],
    qs: &[usize],
    workers: Option<usize>,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let fp = field(plan);
    let cfg = &plan.config;
    let rep = sup_field_prob(&fp.sampler, &fp.f, lambda, ks, qs, cfg.seed, cfg.replicas, workers)?;
    let detail = match rep.fit {
        Some(f) => format!("log P vs k: slope {:.4}, R^2 {:.4}", f.slope, f.r2),
        None => "fewer than three levels with a positive exceedance frequency".into(),
    };
    out.verdict(Verdict::new("exceedance_log_linear_decay", rep.decays, detail));
    out.verdict(Verdict::new(
        "event_increasing_in_q",
        rep.increasing,
        rep.event
            .iter()
            .map(|(q, e)| format!("q={q}: {}", fmt_f64(e.re)))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    let last = rep.event.last().map_or(0.0, |e| e.1.re);
    out.verdict(Verdict::new(
        "event_near_certain_at_max_q",
        last >= 0.99,
        format!("P[A] = {} at q = {}", fmt_f64(last), qs.last().copied().unwrap_or(0)),
    ));
    let series = [
        Series::new(
            "P(sup Y_k > k lambda)",
            rep.exceed
                .iter()
                .filter(|e| e.1.re > 0.0)
                .map(|(k, e)| (*k as f64, e.re))
                .collect(),
        )
        .with_err(rep.exceed.iter().filter(|e| e.1.re > 0.0).map(|e| e.1.se_re).collect()),
        Series::new("P[A_q]", rep.event.iter().map(|(q, e)| (*q as f64, e.re)).collect())
            .with_err(rep.event.iter().map(|e| e.1.se_re).collect()),
    ];
    let p = Plot {
        title: format!("barrier events, lambda = {}", fmt_f64(lambda)),
        x_label: "level".into(),
        y_label: "probability".into(),
        log_y: true,
        ..Plot::default()
    };
    out.plot("sup_prob", line_plot(&p, &series));
    out.table("sup_prob", rep.table());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_tilt(
    plan: &Plan,
    alpha: f64,
    beta: f64,
    q: usize,
    tilt_eps: f64,
    separations: &[f64],
    workers: Option<usize>,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let cfg = &plan.config;
    let lambda = plan.tilt_lambda.expect("resolved during validation");
    let setup = TiltSetup {
        spec: &plan.spec,
        theta: &plan.theta,
        alpha,
        beta,
        lambda,
        q,
        eps: tilt_eps,
        center: cfg.test_function.center.clone().unwrap_or_else(|| vec![0.5; cfg.d]),
        separations: separations.to_vec(),
        n_max: cfg.n_max,
        seed: cfg.seed,
        replicas: cfg.replicas,
        workers,
        rule: cfg.rule,
    };
    let rep = tilted_event_prob(&setup)?;
    let detail = match rep.fit {
        Some(f) => format!(
            "fitted exponent {:.4} (R^2 {:.3}) against (2 alpha - lambda)^2/2 = {:.4}, margin 0.3",
            f.slope, f.r2, rep.target
        ),
        None => "no fit: too few separations with a positive frequency".into(),
    };
    out.verdict(Verdict::new("decay_exponent", rep.passes, detail));
    let series = [Series::new(
        "P~[A_q(x), A_q(y)]",
        rep.estimates.iter().map(|(s, e)| (*s, e.re)).collect(),
    )
    .with_err(rep.estimates.iter().map(|e| e.1.se_re).collect())];
    let p = Plot {
        title: format!("tilted barrier events, lambda = {}", fmt_f64(lambda)),
        x_label: "|x - y|".into(),
        y_label: "probability".into(),
        log_x: true,
        log_y: true,
        ..Plot::default()
    };
    out.plot("tilt", line_plot(&p, &series));
    out.table("tilt", rep.table());
    Ok(())
}
