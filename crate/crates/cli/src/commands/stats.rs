//! `stats`: mixture fits of the scale spectrum and DC radiance.

use std::path::Path;

use gsanatomy::stats::{radiance_report, scale_spectrum_report, DistributionReport};
use serde_json::json;

use super::{load_splats, Context, Outcome};
use crate::error::CliResult;
use crate::output::Artifacts;
use crate::svg;

/// Selected mixture density scaled to expected counts per histogram bin.
pub fn mixture_overlay(r: &DistributionReport) -> Vec<(f64, f64)> {
    let edges = &r.histogram.edges;
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let width = (hi - lo) / (edges.len() - 1) as f64;
    let scale = r.n_samples as f64 * width;
    (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let pdf: f64 = r
                .components
                .iter()
                .map(|c| c.weight * (-(x - c.mean).powi(2) / (2.0 * c.variance)).exp() / (2.0 * std::f64::consts::PI * c.variance).sqrt())
                .sum();
            (x, scale * pdf)
        })
        .collect()
}

pub fn distribution_svg(title: &str, x_label: &str, r: &DistributionReport) -> String {
    let title = format!("{title} (k = {}, {:?})", r.selected_k, r.verdict).to_lowercase();
    svg::histogram(&title, x_label, &r.histogram.edges, &r.histogram.counts, Some(&mixture_overlay(r)))
}

pub fn run(ctx: &Context, splats: &Path) -> CliResult<Outcome> {
    let (prims, digest) = load_splats(splats)?;
    let opts = ctx.config.stats_options(ctx.seed);
    let spectrum = scale_spectrum_report(&prims, &opts)?;
    let radiance = radiance_report(&prims, &opts)?;

    let mut artifacts = Artifacts::default();
    artifacts.add_json("scale_spectrum.json", &spectrum)?;
    artifacts.add("scale_spectrum.svg", distribution_svg("Scale spectrum", "ln eigenvalue", &spectrum));
    artifacts.add_json("radiance.json", &radiance)?;
    artifacts.add("radiance.svg", distribution_svg("Radiance", "mean DC radiance", &radiance));
    let summary = json!({
        "n_primitives": prims.len(),
        "scale_spectrum": {"selected_k": spectrum.selected_k, "verdict": spectrum.verdict},
        "radiance": {"selected_k": radiance.selected_k, "verdict": radiance.verdict, "ashman_d": radiance.ashman_d},
    });
    Ok(Outcome {
        artifacts,
        inputs: vec![digest],
        summary,
    })
}
