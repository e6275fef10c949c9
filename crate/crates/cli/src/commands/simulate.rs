//! `simulate`: single-Gaussian experiments selected in `[simulate]`.

use std::collections::BTreeMap;

use gsanatomy::numeric::median;
use gsanatomy::seed::derive_seed;
use gsanatomy::sim::{
    build_scene, covariance_scaling_experiment, optimize, probe_variance, scale_dynamics_sim, trace_csv, Scheme,
    TrainingTrace,
};
use gsanatomy::stats::sample_report;
use serde::Serialize;
use serde_json::{json, Value};

use super::{Context, Outcome};
use crate::config::Experiment;
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;
use crate::svg;

fn variance(ctx: &Context, a: &mut Artifacts) -> CliResult<Value> {
    let cfg = ctx.config.scaling_config();
    let r = probe_variance(&ctx.config.scene_config(), &cfg, derive_seed(ctx.seed, 0), derive_seed(ctx.seed, 1))?;
    a.add_json("variance.json", &r)?;
    Ok(json!({"v_total": r.v_total, "cov": r.cov}))
}

fn scaling(ctx: &Context, a: &mut Artifacts) -> CliResult<Value> {
    let r = covariance_scaling_experiment(&ctx.config.scaling_config(), ctx.seed)?;
    a.add_json("scaling.json", &r)?;
    let points: Vec<(f64, f64)> = r
        .points
        .iter()
        .filter(|p| p.cov_abs_median > 0.0 && p.predictor_median > 0.0)
        .map(|p| (p.predictor_median.ln(), p.cov_abs_median.ln()))
        .collect();
    let fit = r.slope.zip(r.intercept);
    a.add(
        "scaling.svg",
        svg::scatter("Gradient covariance against its predictor", "ln predictor", "ln |cov|", &points, fit),
    );
    Ok(json!({"pearson_r": r.pearson_r, "slope": r.slope, "inconclusive": r.inconclusive}))
}

#[derive(Debug, Serialize)]
struct SchemeSummary {
    runs: usize,
    diverged: usize,
    median_final_l_app_clean: Option<f64>,
    median_final_l_total: Option<f64>,
    median_late_diff_variance: Option<f64>,
}

fn summarize(traces: &[TrainingTrace]) -> SchemeSummary {
    let ok: Vec<&TrainingTrace> = traces.iter().filter(|t| !t.diverged && t.last().is_some()).collect();
    let med = |f: &dyn Fn(&TrainingTrace) -> f64| median(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
    SchemeSummary {
        runs: traces.len(),
        diverged: traces.len() - ok.len(),
        median_final_l_app_clean: med(&|t| t.last().expect("filtered").l_app_clean),
        median_final_l_total: med(&|t| t.last().expect("filtered").l_total),
        median_late_diff_variance: med(&|t| t.late_diff_variance()),
    }
}

fn optimize_all(ctx: &Context, a: &mut Artifacts) -> CliResult<Value> {
    let schemes = ctx.config.optimize.scheme.schemes();
    let scene_cfg = ctx.config.scene_config();
    let mut traces: BTreeMap<&str, Vec<TrainingTrace>> = BTreeMap::new();
    for s in 0..ctx.config.optimize.seeds as u64 {
        let item_seed = derive_seed(ctx.seed, s);
        let scene = build_scene(&scene_cfg, item_seed)?;
        for &scheme in &schemes {
            let t = optimize(&scene, &ctx.config.optimize_config(scheme), item_seed)?;
            traces.entry(scheme.label()).or_default().push(t);
        }
    }

    let mut series = Vec::new();
    let mut summaries = BTreeMap::new();
    for (&label, ts) in &traces {
        a.add(
            format!("trace_{label}.csv"),
            trace_csv(&ts[0]).map_err(|e| CliError::Internal(e.to_string()))?,
        );
        series.push(svg::Series {
            name: label,
            points: ts[0].rows.iter().map(|r| (r.step as f64, r.l_total)).collect(),
        });
        summaries.insert(label, summarize(ts));
    }
    let ratio = match (summaries.get(Scheme::G1.label()), summaries.get(Scheme::G4.label())) {
        (Some(g1), Some(g4)) => g4
            .median_final_l_app_clean
            .zip(g1.median_final_l_app_clean)
            .filter(|(_, d)| *d > 0.0)
            .map(|(n, d)| n / d),
        _ => None,
    };
    a.add_json(
        "optimize.json",
        &json!({"schemes": summaries, "clean_ratio_g4_over_g1": ratio, "rays": scene_cfg.rays, "seeds": ctx.config.optimize.seeds}),
    )?;
    a.add(
        "traces.svg",
        svg::line_chart("Full-batch loss, first seed", "step", "L_total", &series, true),
    );
    Ok(json!({"clean_ratio_g4_over_g1": ratio}))
}

fn dynamics(ctx: &Context, a: &mut Artifacts) -> CliResult<Value> {
    let finals = scale_dynamics_sim(&ctx.config.dynamics_config(), ctx.seed)?;
    let r = sample_report(&finals, &ctx.config.stats_options(ctx.seed), "final log-scales of the dynamics simulation")?;
    a.add_json("dynamics.json", &r)?;
    a.add(
        "dynamics.svg",
        super::stats::distribution_svg("Simulated scale dynamics", "final log-scale", &r),
    );
    Ok(json!({"selected_k": r.selected_k, "verdict": r.verdict}))
}

pub fn run(ctx: &Context) -> CliResult<Outcome> {
    let mut experiments = ctx.config.simulate.experiments.clone();
    experiments.sort();
    experiments.dedup();
    let mut artifacts = Artifacts::default();
    let mut summary = serde_json::Map::new();
    for e in experiments {
        let (key, value) = match e {
            Experiment::Variance => ("variance", variance(ctx, &mut artifacts)?),
            Experiment::Scaling => ("scaling", scaling(ctx, &mut artifacts)?),
            Experiment::Optimize => ("optimize", optimize_all(ctx, &mut artifacts)?),
            Experiment::Dynamics => ("dynamics", dynamics(ctx, &mut artifacts)?),
        };
        summary.insert(key.into(), value);
    }
    Ok(Outcome {
        artifacts,
        inputs: Vec::new(),
        summary: Value::Object(summary),
    })
}
