use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use wavewell::nonlinearity::ValidationReport;
use wavewell::ode::{concavity_check, integrate_power_ode, integrate_shifted_ode, ConcavityReport, Forcing, OdeOutcome};
use wavewell::scenarios::{
    check_conditions, run_scenario, ComparisonCheck, ConditionReport, DataPair, MonotonicityReport, PairConstants,
    Provenance,
};
use wavewell::solver::{simulate as integrate, MonitorVerdicts, TrajectoryRecord, Verdict};
use wavewell::well::{classify as place, depth_estimate, Classification, WellReport};
use wavewell::{Domain, Nonlinearity};

use crate::config::{ExperimentConfig, OdeSpec, SweepPoint};
use crate::output::{num, opt, write_json, write_rows, write_timeseries};
use crate::CliError;

struct Context {
    domain: Domain,
    nl: Nonlinearity,
    validation: ValidationReport,
    well: Option<WellReport>,
}

impl Context {
    /// Builds the domain and nonlinearity and rejects structurally invalid
    /// nonlinearities. The well depth is estimated when requested and the
    /// nonlinearity supports it.
    fn build(cfg: &ExperimentConfig, with_well: bool) -> Result<Self, CliError> {
        let domain = cfg.build_domain()?;
        let nl = cfg.build_nonlinearity(&domain)?;
        let validation = nl.validate();
        if !nl.is_empty() && !validation.structural_ok() {
            let failed: Vec<String> = validation
                .failures()
                .map(|c| match &c.detail {
                    Some(d) => format!("{} ({d})", c.condition),
                    None => c.condition.to_string(),
                })
                .collect();
            return Err(CliError::Validation(format!("nonlinearity violates {}", failed.join("; "))));
        }
        let well = if with_well && validation.supports_well_theory() {
            Some(depth_estimate(&domain, &nl, &cfg.well.options()).map_err(|e| CliError::from_core("well depth", e))?)
        } else {
            None
        };
        Ok(Self { domain, nl, validation, well })
    }

    fn well_summary(&self) -> Option<WellSummary> {
        self.well.as_ref().map(WellSummary::from)
    }
}

#[derive(Serialize)]
struct WellSummary {
    xi0: f64,
    d_lower: f64,
    d_upper: f64,
    n_directions: usize,
    seed: u64,
    refined: bool,
}

impl From<&WellReport> for WellSummary {
    fn from(w: &WellReport) -> Self {
        Self {
            xi0: w.xi0,
            d_lower: w.d_lower,
            d_upper: w.d_upper,
            n_directions: w.n_directions,
            seed: w.seed,
            refined: w.refined,
        }
    }
}

#[derive(Serialize)]
struct DataInfo {
    provenance: Provenance,
    constants: Option<PairConstants>,
}

impl From<&DataPair> for DataInfo {
    fn from(p: &DataPair) -> Self {
        Self { provenance: p.provenance.clone(), constants: p.constants.clone() }
    }
}

#[derive(Serialize)]
struct RunSummary {
    data: DataInfo,
    verdict: Verdict,
    t_blowup_est: Option<f64>,
    last_trusted_time: f64,
    i_sign_changes: usize,
    drift_suspended_at: Option<f64>,
    max_trusted_drift: f64,
    e0: f64,
    accepted_steps: u64,
    rejected_steps: u64,
    n_records: usize,
    conditions: Option<ConditionReport>,
    monitors: Option<MonitorVerdicts>,
    comparison: Option<ComparisonCheck>,
    monotonicity: Option<MonotonicityReport>,
    /// Statements whose hypotheses hold for the initial data.
    predictions: Vec<String>,
    predicts_blowup: Option<bool>,
    agreement: Option<bool>,
}

fn run_point(ctx: &Context, cfg: &ExperimentConfig, pair: &DataPair) -> Result<(RunSummary, TrajectoryRecord), CliError> {
    let core = |e| CliError::from_core("simulation", e);
    let data = DataInfo::from(pair);
    let (rec, conditions, monitors, comparison, monotonicity, predictions, predicts_blowup, agreement) = match &ctx.well {
        Some(well) => {
            let r = run_scenario(&ctx.domain, &ctx.nl, pair, &cfg.solver, well).map_err(core)?;
            (
                r.record,
                Some(r.conditions),
                Some(r.monitors),
                r.comparison,
                Some(r.monotonicity),
                r.predictions,
                r.predicts_blowup,
                r.agreement,
            )
        }
        None => {
            let state = pair.state().map_err(core)?;
            let rec = integrate(&ctx.domain, &ctx.nl, &state, &cfg.solver).map_err(core)?;
            let conditions = match ctx.nl.leading_exponent() {
                Some(_) => Some(check_conditions(&ctx.domain, &ctx.nl, &state, None).map_err(core)?),
                None => None,
            };
            (rec, conditions, None, None, None, Vec::new(), None, None)
        }
    };
    let summary = RunSummary {
        data,
        verdict: rec.verdict,
        t_blowup_est: rec.t_blowup_est,
        last_trusted_time: rec.last_trusted_time,
        i_sign_changes: rec.i_sign_changes,
        drift_suspended_at: rec.drift_suspended_at,
        max_trusted_drift: rec.max_trusted_drift,
        e0: rec.e0,
        accepted_steps: rec.accepted_steps,
        rejected_steps: rec.rejected_steps,
        n_records: rec.times.len(),
        conditions,
        monitors,
        comparison,
        monotonicity,
        predictions,
        predicts_blowup,
        agreement,
    };
    Ok((summary, rec))
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    config: &'a ExperimentConfig,
    validation: &'a ValidationReport,
    well: Option<WellSummary>,
    run: RunSummary,
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let ctx = Context::build(cfg, true)?;
    cfg.solver.validate(&ctx.domain).map_err(|e| CliError::from_core("solver", e))?;
    let pair = cfg.build_data(&ctx.domain, &ctx.nl, &SweepPoint::default())?;
    let (run, rec) = run_point(&ctx, cfg, &pair)?;
    write_timeseries(&out.join("timeseries.csv"), &rec)?;
    let report = SimulationReport { config: cfg, validation: &ctx.validation, well: ctx.well_summary(), run };
    write_json(&out.join("summary.json"), &report)
}

#[derive(Serialize)]
struct DepthReport<'a> {
    config: &'a ExperimentConfig,
    validation: &'a ValidationReport,
    well: &'a WellReport,
}

pub fn depth(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let ctx = Context::build(cfg, true)?;
    let Some(well) = &ctx.well else {
        return Err(CliError::Validation(
            "nonlinearity has no positive leading part, so the well depth is undefined".into(),
        ));
    };
    if !(well.d_upper >= well.d_lower) {
        return Err(CliError::Run(format!("d_upper {} is below d_lower {}", well.d_upper, well.d_lower)));
    }
    write_json(&out.join("well.json"), &DepthReport { config: cfg, validation: &ctx.validation, well })
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    config: &'a ExperimentConfig,
    validation: &'a ValidationReport,
    well: Option<WellSummary>,
    data: DataInfo,
    classification: Classification,
    conditions: Option<ConditionReport>,
}

pub fn classify(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let ctx = Context::build(cfg, true)?;
    let pair = cfg.build_data(&ctx.domain, &ctx.nl, &SweepPoint::default())?;
    let core = |e| CliError::from_core("classification", e);
    let classification = place(&ctx.domain, &ctx.nl, &pair.u0).map_err(core)?;
    let conditions = match ctx.nl.leading_exponent() {
        Some(_) => Some(check_conditions(&ctx.domain, &ctx.nl, &pair.state().map_err(core)?, ctx.well.as_ref()).map_err(core)?),
        None => None,
    };
    let report = ClassifyReport {
        config: cfg,
        validation: &ctx.validation,
        well: ctx.well_summary(),
        data: DataInfo::from(&pair),
        classification,
        conditions,
    };
    write_json(&out.join("classification.json"), &report)
}

#[derive(Serialize)]
struct OdeReport<'a> {
    ode: &'a OdeSpec,
    outcome: OdeOutcome,
    blowup_time: Option<f64>,
    /// `ψ_0 / ((γ−1)ψ_0')` when the forcing and the linear terms vanish.
    closed_form_blowup_time: Option<f64>,
    n_samples: usize,
    /// Whether `ψ^{1−γ}` must be concave (nonnegative constant forcing, no
    /// linear terms).
    concavity_expected: bool,
    concavity: Option<ConcavityReport>,
}

pub fn verify_ode(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (p, t_max, dt) = cfg.build_ode()?;
    let spec = cfg.ode.as_ref().expect("checked by build_ode");
    let core = |e| CliError::from_core("ode", e);
    let basic = p.alpha == 0.0 && p.beta == 0.0;
    let tr = if basic { integrate_power_ode(&p, t_max, dt) } else { integrate_shifted_ode(&p, t_max, dt) }.map_err(core)?;
    let unforced = matches!(p.forcing, Forcing::Constant(c) if c == 0.0);
    let closed_form = (basic && unforced && p.gamma > 1.0 && p.psi0 > 0.0 && p.dpsi0 > 0.0)
        .then(|| p.psi0 / ((p.gamma - 1.0) * p.dpsi0));
    let concavity_expected = basic && matches!(p.forcing, Forcing::Constant(c) if c >= 0.0);
    let concavity = (p.gamma > 1.0 && tr.psi.iter().all(|&v| v > 0.0))
        .then(|| concavity_check(&tr.times, &tr.psi, p.gamma))
        .transpose()
        .map_err(core)?;
    let rows: Vec<Vec<String>> =
        tr.times.iter().zip(&tr.psi).zip(&tr.dpsi).map(|((t, a), b)| vec![num(*t), num(*a), num(*b)]).collect();
    write_rows(&out.join("ode.csv"), "t,psi,psi_dot", &rows)?;
    let report = OdeReport {
        ode: spec,
        outcome: tr.outcome,
        blowup_time: tr.blowup_time,
        closed_form_blowup_time: closed_form,
        n_samples: tr.times.len(),
        concavity_expected,
        concavity,
    };
    write_json(&out.join("ode.json"), &report)
}

pub const SWEEP_HEADER: &str = "index,amplitude,k_target,sigma,verdict,t_blowup_est,last_trusted_time,e0,\
i_sign_changes,arbitrary_sign_margin,positive_product_margin,quotient_bound_margin,norm_bound_margin,\
product_bound_margin,summary";

#[derive(Serialize)]
struct PointReport {
    index: usize,
    point: SweepPoint,
    run: RunSummary,
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let points = cfg.sweep.points();
    if points.is_empty() {
        return write_rows(&out.join("sweep.csv"), SWEEP_HEADER, &[]);
    }
    let ctx = Context::build(cfg, true)?;
    cfg.solver.validate(&ctx.domain).map_err(|e| CliError::from_core("solver", e))?;
    let results: Vec<RunSummary> = points
        .par_iter()
        .map(|p| {
            let pair = cfg.build_data(&ctx.domain, &ctx.nl, p)?;
            run_point(&ctx, cfg, &pair).map(|(s, _)| s)
        })
        .collect::<Result<_, _>>()?;

    let dir = out.join("points");
    std::fs::create_dir_all(&dir)?;
    let mut rows = Vec::with_capacity(points.len());
    for (index, (point, run)) in points.into_iter().zip(results).enumerate() {
        let name = format!("points/point_{index:05}.json");
        let margins = match &run.conditions {
            Some(c) => [c.arbitrary_sign, c.positive_product, c.quotient_bound, c.norm_bound, c.product_bound]
                .map(|o| num(o.margin))
                .to_vec(),
            None => vec![String::new(); 5],
        };
        let verdict = serde_json::to_value(run.verdict).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let mut row = vec![
            index.to_string(),
            opt(point.amplitude),
            opt(point.k_target),
            opt(point.sigma),
            verdict,
            opt(run.t_blowup_est),
            num(run.last_trusted_time),
            num(run.e0),
            run.i_sign_changes.to_string(),
        ];
        row.extend(margins);
        row.push(name.clone());
        rows.push(row);
        write_json(&out.join(&name), &PointReport { index, point, run })?;
    }
    write_rows(&out.join("sweep.csv"), SWEEP_HEADER, &rows)
}
