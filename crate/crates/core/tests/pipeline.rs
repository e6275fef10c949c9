mod common;

use gsanatomy::density::{partition_blocks, stratify_terciles, PartitionOptions, Tercile};
use gsanatomy::ingest::{parse_cloud_auto, parse_gaussian_ply, write_pointcloud_ply};
use gsanatomy::probe::{
    build_block_data, synthetic_stratified_scene, tercile_report, train_probe, ProbeConfig, SyntheticConfig,
    DEFAULT_FEATURE_K,
};
use gsanatomy::stats::{scale_spectrum_report, StatsOptions};

#[test]
fn splat_file_to_spectrum_report() {
    let (_, bytes) = common::splat_fixtures().into_iter().find(|(n, _)| *n == "degree3").unwrap();
    let parsed = parse_gaussian_ply(&bytes).unwrap();
    let rep = scale_spectrum_report(&parsed.primitives, &StatsOptions::default()).unwrap();
    assert_eq!(rep.histogram.counts.len(), 128);
    assert_eq!(rep.histogram.total(), 3 * parsed.primitives.len() as u64);
    assert!((1..=4).contains(&rep.selected_k));
}

#[test]
fn cloud_file_to_probe_run() {
    let cloud = common::uniform_cloud(1500, 8, true);
    let cloud = parse_cloud_auto(&write_pointcloud_ply(&cloud)).unwrap();
    let (_, bytes) = common::splat_fixtures().into_iter().find(|(n, _)| *n == "dc_only").unwrap();
    let mut prims = parse_gaussian_ply(&bytes).unwrap().primitives;
    // Move the fixture splats into the cloud's unit cube.
    for p in &mut prims {
        p.position = p.position.map(|v| (v + 5.0) / 10.0);
    }
    let pos: Vec<[f64; 3]> = prims.iter().map(|p| p.position).collect();
    let part = partition_blocks(&cloud, &pos, 6, &PartitionOptions::default()).unwrap();
    let strat = stratify_terciles(&part.blocks);
    assert_eq!(strat.counts.iter().sum::<usize>(), part.blocks.len());
    let data = build_block_data(&cloud, &prims, &part.blocks, &strat, DEFAULT_FEATURE_K).unwrap();
    assert_eq!(data.iter().map(|d| d.features.len()).sum::<usize>(), prims.len());
    let cfg = ProbeConfig {
        epochs: 5,
        ..Default::default()
    };
    let run = train_probe(&data, &cfg).unwrap();
    assert_eq!(run.results.len() + run.skipped.len(), part.blocks.len());
    for r in &run.results {
        assert!(r.init_mse >= 0.0 && r.final_mse >= 0.0);
        let recomputed = 100.0 * (r.init_mse - r.final_mse) / r.init_mse;
        assert!((r.improvement_pct - recomputed).abs() <= 1e-9);
    }
    assert_eq!(run, train_probe(&data, &cfg).unwrap());
}

#[test]
fn noiseless_scene_is_learnable_everywhere() {
    let cfg = SyntheticConfig {
        noise_ref: 0.0,
        sparse_noise_override: Some(0.0),
        ..Default::default()
    };
    for seed in 0..2 {
        let scene = synthetic_stratified_scene(&cfg, seed).unwrap();
        let run = train_probe(
            &scene.data,
            &ProbeConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let rep = tercile_report(&run.results);
        for t in Tercile::ALL {
            let imp = rep.row(t).median_improvement_pct.unwrap();
            assert!(imp >= 90.0, "seed {seed} {t:?}: {imp}");
        }
    }
}

#[test]
fn tercile_medians_match_raw_results() {
    let scene = synthetic_stratified_scene(
        &SyntheticConfig {
            blocks_per_tercile: 3,
            gaussians_per_block: 40,
            ..Default::default()
        },
        5,
    )
    .unwrap();
    let run = train_probe(
        &scene.data,
        &ProbeConfig {
            epochs: 10,
            ..Default::default()
        },
    )
    .unwrap();
    let rep = tercile_report(&run.results);
    for t in Tercile::ALL {
        let mut v: Vec<f64> = run.results.iter().filter(|r| r.tercile == t).map(|r| r.improvement_pct).collect();
        v.sort_by(f64::total_cmp);
        // Three blocks per tercile, so the median is the middle element.
        assert_eq!(rep.row(t).median_improvement_pct, Some(v[1]));
        assert_eq!(rep.row(t).n_blocks, 3);
    }
}
