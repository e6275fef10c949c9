//! `probe`: per-block MLPs on a stratification produced by `stratify`.

use std::path::Path;

use gsanatomy::density::PartitionOptions;
use gsanatomy::probe::{block_results_csv, build_block_data, tercile_report, train_probe_models};
use serde_json::json;

use super::stratify::{describe, stratify, StratificationFile};
use super::{load_cloud, load_splats, Context, Outcome};
use crate::error::{CliError, CliResult};
use crate::output::{read_input, Artifacts};
use crate::svg;

pub struct ProbeArgs<'a> {
    pub stratification: &'a Path,
    pub splats: &'a Path,
    pub cloud: &'a Path,
    pub save_models: bool,
}

fn read_stratification(path: &Path) -> CliResult<(StratificationFile, crate::output::InputDigest)> {
    let (bytes, digest) = read_input(path)?;
    let file = serde_json::from_slice(&bytes).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: format!("not a stratification file: {e}"),
    })?;
    Ok((file, digest))
}

pub fn run(ctx: &Context, args: &ProbeArgs<'_>) -> CliResult<Outcome> {
    let (stored, strat_digest) = read_stratification(args.stratification)?;
    let (prims, splat_digest) = load_splats(args.splats)?;
    let (cloud, cloud_digest) = load_cloud(args.cloud)?;
    if stored.splats_sha256 != splat_digest.sha256 {
        return Err(CliError::Stale(format!(
            "{} was built from different splats than {}",
            args.stratification.display(),
            args.splats.display()
        )));
    }
    if stored.cloud_sha256 != cloud_digest.sha256 {
        return Err(CliError::Stale(format!(
            "{} was built from a different cloud than {}",
            args.stratification.display(),
            args.cloud.display()
        )));
    }

    // The file records assignments only, so the partition is rebuilt and
    // must reproduce it.
    let opts = PartitionOptions {
        density_k: stored.density_k,
    };
    let (partition, strat) = stratify(&cloud, &prims, stored.target_blocks, &opts)?;
    let rebuilt = describe(&partition, &strat);
    let same = rebuilt.len() == stored.blocks.len()
        && rebuilt.iter().zip(&stored.blocks).all(|(a, b)| {
            a.id == b.id && a.n_points == b.n_points && a.n_gaussians == b.n_gaussians && a.tercile == b.tercile
        });
    if !same {
        return Err(CliError::Stale(format!(
            "{} does not match the partition of its inputs",
            args.stratification.display()
        )));
    }

    let data = build_block_data(&cloud, &prims, &partition.blocks, &strat, ctx.config.probe.feature_k)?;
    let (run, models) = train_probe_models(&data, &ctx.config.probe_config(ctx.seed))?;
    for s in &run.skipped {
        eprintln!("warning: block {} ({}) skipped: {}", s.block_id, s.tercile.label(), s.reason);
    }
    let report = tercile_report(&run.results);

    let mut artifacts = Artifacts::default();
    artifacts.add(
        "probe_blocks.csv",
        block_results_csv(&run.results).map_err(|e| CliError::Internal(e.to_string()))?,
    );
    artifacts.add_json(
        "probe_terciles.json",
        &json!({"terciles": report.terciles, "skipped": run.skipped, "n_trained": run.results.len()}),
    )?;
    let bars: Vec<(&str, Option<f64>)> = report
        .terciles
        .iter()
        .map(|r| (r.tercile.label(), r.median_improvement_pct))
        .collect();
    artifacts.add(
        "probe_improvement.svg",
        svg::bar_chart("Median probe improvement by density tercile", "improvement (%)", &bars),
    );
    if args.save_models {
        for (id, model) in &models {
            artifacts.add_json(&format!("models/block_{id:04}.json"), model)?;
        }
    }

    let summary = json!({
        "n_trained": run.results.len(),
        "n_skipped": run.skipped.len(),
        "median_improvement_pct": report.terciles.iter()
            .map(|r| (r.tercile.label(), r.median_improvement_pct))
            .collect::<std::collections::BTreeMap<_, _>>(),
    });
    Ok(Outcome {
        artifacts,
        inputs: vec![strat_digest, splat_digest, cloud_digest],
        summary,
    })
}
