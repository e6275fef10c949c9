//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! to stderr (bypassing the test harness capture) and the test fails if any
//! criterion does.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gsanatomy::density::{
    brute_force_knn, coverage_divergence, knn_density, partition_blocks, stratify_pairs, stratify_terciles,
    PartitionOptions,
};
use gsanatomy::ingest::{
    parse_cloud_auto, parse_colmap_points, parse_gaussian_ply, parse_pointcloud_ply, to_canonical_json, to_csv,
    write_gaussian_ply, Cell,
};
use gsanatomy::numeric::{median, quantile_sorted, sorted};
use gsanatomy::probe::{
    block_results_csv, mlp_grad_check, synthetic_stratified_scene, tercile_report, train_probe, Mlp, ProbeConfig,
    SyntheticConfig, DIMS,
};
use gsanatomy::seed::{derive_seed, rng_for};
use gsanatomy::sim::{
    build_scene, covariance_scaling_experiment, grad_check, optimize, probe_variance, scale_dynamics_sim,
    DynamicsConfig, OptimizeConfig, ScalingConfig, ScalingReport, Scheme, SceneConfig, SimState,
};
use gsanatomy::stats::{radiance_report, scale_spectrum_report, select_k_bic, StatsOptions};
use gsanatomy::{GaussianPrimitive, PointCloud};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const BUDGET: Duration = Duration::from_secs(300);

fn report(id: usize, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{tag}] {id:>2} {name} ({:.1} s): {detail}", elapsed.as_secs_f64());
}

fn check(id: usize, name: &str, f: impl FnOnce() -> (bool, String)) -> bool {
    let t = Instant::now();
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    report(id, name, pass, t.elapsed(), &detail);
    pass
}

fn variance_identity() -> (bool, String) {
    let cfg = ScalingConfig::default();
    let mut worst = 0.0f64;
    let mut n = 0;
    for (c, &rays) in cfg.r_grid.iter().enumerate() {
        for (j, &sigma_obs) in cfg.sigma_grid.iter().enumerate() {
            for s in 0..2u64 {
                let scene = SceneConfig {
                    rays,
                    sigma_obs,
                    ..cfg.scene.clone()
                };
                let r = probe_variance(&scene, &cfg, s, derive_seed(99, (c * 10 + j) as u64 * 2 + s)).unwrap();
                worst = worst.max((r.v_total - (r.var_sigma + r.var_s + 2.0 * r.cov)).abs());
                n += 1;
            }
        }
    }
    (worst <= 1e-12, format!("{n} reports, max |v_total - (var_sigma + var_s + 2 cov)| = {worst:.3e}"))
}

fn covariance_tracks_predictor(r: &ScalingReport) -> (bool, String) {
    let rr = r.pearson_r.unwrap_or(f64::NAN);
    (
        r.points.len() == 21 && rr >= 0.8,
        format!(
            "{} configurations, Pearson r = {rr:.4} (need >= 0.8), log-log slope = {:.4}",
            r.points.len(),
            r.slope.unwrap_or(f64::NAN)
        ),
    )
}

fn sparse_amplification(r: &ScalingReport) -> (bool, String) {
    let at = |rays: usize| r.points.iter().find(|p| p.rays == rays && p.sigma_obs == 0.05).expect("grid point");
    let (sparse, dense) = (at(8), at(512));
    let ratio = sparse.cov_abs_median / dense.cov_abs_median;
    (
        ratio >= 5.0 && sparse.cov_share_median > dense.cov_share_median,
        format!(
            "median |cov| R=8 / R=512 = {ratio:.1} (need >= 5); cov share {:.4} vs {:.4}",
            sparse.cov_share_median, dense.cov_share_median
        ),
    )
}

struct SchemeStats {
    clean: [f64; 2],
    total: [f64; 2],
    diff_var: [f64; 2],
}

fn compare_schemes(rays: usize) -> SchemeStats {
    let mut v: [[Vec<f64>; 2]; 3] = Default::default();
    for s in 0..20u64 {
        let scene = build_scene(
            &SceneConfig {
                rays,
                ..Default::default()
            },
            s,
        )
        .unwrap();
        for (i, scheme) in [Scheme::G1, Scheme::G4].into_iter().enumerate() {
            let cfg = OptimizeConfig {
                scheme,
                ..Default::default()
            };
            let t = optimize(&scene, &cfg, s).unwrap();
            let last = t.last().unwrap();
            v[0][i].push(last.l_app_clean);
            v[1][i].push(last.l_total);
            v[2][i].push(t.late_diff_variance());
        }
    }
    let med = |k: usize| [median(&v[k][0]).unwrap(), median(&v[k][1]).unwrap()];
    SchemeStats {
        clean: med(0),
        total: med(1),
        diff_var: med(2),
    }
}

fn decoupled_schemes() -> (bool, String) {
    let sparse = compare_schemes(8);
    let dense = compare_schemes(512);
    let ratio = sparse.clean[1] / sparse.clean[0];
    let smoother = sparse.diff_var[1] < sparse.diff_var[0];
    let dense_gap = (dense.total[1] / dense.total[0] - 1.0).abs();
    (
        ratio <= 0.9 && smoother && dense_gap <= 0.1,
        format!(
            "sparse final L_app G4/G1 = {ratio:.3} (need <= 0.9); late step variance G1 {:.3e} vs G4 {:.3e}; dense final loss gap {:.2}% (need <= 10%)",
            sparse.diff_var[0],
            sparse.diff_var[1],
            100.0 * dense_gap
        ),
    )
}

fn gradients() -> (bool, String) {
    let mut rng = rng_for(4242, 0);
    let mut sim_worst = 0.0f64;
    for i in 0..100u64 {
        let rays = [8, 24, 64, 512][(i % 4) as usize];
        let scene = build_scene(
            &SceneConfig {
                rays,
                sigma_obs: rng.random_range(0.0..0.1),
                ..Default::default()
            },
            i,
        )
        .unwrap();
        let theta: [f64; 6] =
            std::array::from_fn(|j| if j < 3 { rng.random_range(-1.5..0.5) } else { rng.random_range(-0.5..0.5) });
        let sigma = SimState {
            theta,
            s: 1.0,
            omega: 1.0,
        }
        .sigma();
        let state = SimState::from_sigma(&sigma, rng.random_range(0.2..1.5), rng.random_range(0.5..2.0)).unwrap();
        let batch: Vec<usize> = (0..4).map(|_| rng.random_range(0..rays)).collect();
        sim_worst = sim_worst.max(grad_check(&state, &scene, &batch, 1e-5).unwrap());
    }
    let mut mlp_worst = 0.0f64;
    for i in 0..100u64 {
        let m = Mlp::random(&DIMS, 1000 + i, 0.3);
        let x: Vec<f64> = (0..DIMS[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..DIMS[3]).map(|_| rng.random_range(-2.0..2.0)).collect();
        mlp_worst = mlp_worst.max(mlp_grad_check(&m, &x, &t));
    }
    (
        sim_worst <= 1e-5 && mlp_worst <= 1e-5,
        format!("max relative error: simulator {sim_worst:.2e}, MLP {mlp_worst:.2e} (100 instances each, need <= 1e-5)"),
    )
}

/// Per-tercile medians across seeds of per-seed tercile medians.
fn probe_pattern(cfg: &SyntheticConfig) -> [f64; 3] {
    let mut per: [Vec<f64>; 3] = Default::default();
    for seed in 0..10u64 {
        let scene = synthetic_stratified_scene(cfg, seed).unwrap();
        let run = train_probe(
            &scene.data,
            &ProbeConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        for (i, row) in tercile_report(&run.results).terciles.iter().enumerate() {
            per[i].push(row.median_improvement_pct.unwrap());
        }
    }
    per.map(|v| median(&v).unwrap())
}

fn learnability() -> (bool, String) {
    let [q1, q2, q3] = probe_pattern(&SyntheticConfig::default());
    let noise = probe_pattern(&SyntheticConfig {
        sparse_noise_override: Some(f64::INFINITY),
        ..Default::default()
    })[2];
    (
        q1 > q3 && q2 > q3 && q3 < 0.5 * q1.min(q2) && noise <= 15.0,
        format!("median improvement Q1 {q1:.1}%, Q2 {q2:.1}%, Q3 {q3:.1}%; pure-noise tier {noise:.1}% (need <= 15%)"),
    )
}

fn bimodality() -> (bool, String) {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let narrow = Normal::new(0.0, 0.1).unwrap();
    let (mut uni, mut bi, mut dyn_ok) = (0, 0, 0);
    for t in 0..100u64 {
        let mut rng = rng_for(7000 + t, 0);
        let xs: Vec<f64> = (0..2000).map(|_| unit.sample(&mut rng)).collect();
        if select_k_bic(&xs, 4, 3, t).unwrap().best_k == 1 {
            uni += 1;
        }
        let xs: Vec<f64> = (0..1000).map(|i| narrow.sample(&mut rng) + if i < 500 { 0.0 } else { 10.0 }).collect();
        if select_k_bic(&xs, 4, 3, t).unwrap().best_k == 2 {
            bi += 1;
        }
        let xs = scale_dynamics_sim(&DynamicsConfig::default(), 8000 + t).unwrap();
        if select_k_bic(&xs, 4, 3, t).unwrap().best_k == 2 {
            dyn_ok += 1;
        }
    }
    (
        uni >= 95 && bi >= 95 && dyn_ok >= 90,
        format!("unimodal k=1 {uni}/100 (need 95), two-mode k=2 {bi}/100 (need 95), two-attractor dynamics k=2 {dyn_ok}/100 (need 90)"),
    )
}

fn stratification() -> (bool, String) {
    let cloud = common::uniform_cloud(6000, 11, false);
    let part = partition_blocks(&cloud, &[], 129, &PartitionOptions::default()).unwrap();
    let strat = stratify_terciles(&part.blocks);
    let mut rng = rng_for(12, 0);
    let mut worst_spread = 0;
    for n in 0..=600usize {
        let pairs: Vec<(usize, f64)> = (0..n).map(|i| (i * 3 + 1, rng.random_range(0.0..10.0f64).round())).collect();
        let c = stratify_pairs(&pairs).counts;
        worst_spread = worst_spread.max(c.iter().max().unwrap() - c.iter().min().unwrap());
    }
    (
        part.blocks.len() == 129 && strat.counts == [43, 43, 43] && worst_spread <= 1,
        format!(
            "{} blocks, terciles {:?}; largest tercile size difference over N = 0..=600 is {worst_spread}",
            part.blocks.len(),
            strat.counts
        ),
    )
}

fn brute_density(pts: &[[f64; 3]], k: usize) -> Vec<f64> {
    (0..pts.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| (0..3).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum::<f64>())
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            let r = kth.sqrt().max(1e-9);
            k as f64 / (4.0 / 3.0 * std::f64::consts::PI * r * r * r)
        })
        .collect()
}

fn fuzz_input(i: usize, rng: &mut impl Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    const WORDS: [&str; 22] = [
        "ply", "format", "ascii", "binary_little_endian", "binary_big_endian", "1.0", "element", "vertex", "face",
        "property", "float", "double", "uchar", "int", "list", "x", "y", "z", "end_header", "comment", "red", "4294967296",
    ];
    match i % 4 {
        0 => (0..rng.random_range(0..200)).map(|_| rng.random()).collect(),
        1 => {
            let mut s = String::from("ply\n");
            for _ in 0..rng.random_range(0..30) {
                for _ in 0..rng.random_range(1..5) {
                    s.push_str(WORDS[rng.random_range(0..WORDS.len())]);
                    s.push(' ');
                }
                s.push('\n');
            }
            let mut b = s.into_bytes();
            b.extend((0..rng.random_range(0..64)).map(|_| rng.random::<u8>()));
            b
        }
        2 => {
            let mut b = seeds[rng.random_range(0..seeds.len())].clone();
            match rng.random_range(0..3) {
                0 => b.truncate(rng.random_range(0..=b.len())),
                1 => {
                    for _ in 0..rng.random_range(1..6) {
                        let at = rng.random_range(0..b.len());
                        b[at] = rng.random();
                    }
                }
                _ => {
                    let at = rng.random_range(0..=b.len());
                    b.insert(at, rng.random());
                }
            }
            b
        }
        _ => (0..rng.random_range(0..6))
            .map(|_| {
                (0..rng.random_range(0..12))
                    .map(|_| match rng.random_range(0..4) {
                        0 => format!("{}", rng.random::<u32>()),
                        1 => format!("{:e}", rng.random_range(-1e6..1e6f64)),
                        2 => "nan".into(),
                        _ => "#".into(),
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
                    + "\n"
            })
            .collect::<String>()
            .into_bytes(),
    }
}

fn parser_fidelity() -> (bool, String) {
    let mut issues = Vec::new();
    let fixtures = common::splat_fixtures();
    for (name, bytes) in &fixtures {
        match parse_gaussian_ply(bytes) {
            Ok(p) => {
                if write_gaussian_ply(&p.primitives, &p.header, Some(&p.extra)) != *bytes {
                    issues.push(format!("{name} round trip differs"));
                }
            }
            Err(e) => issues.push(format!("{name}: {e}")),
        }
    }

    for (n, seed, k) in [(5000usize, 1u64, 32usize), (2000, 2, 8), (64, 3, 1)] {
        let cloud = if seed == 2 { common::clustered_cloud(n, seed) } else { common::uniform_cloud(n, seed, false) };
        if knn_density(&cloud, k).unwrap() != brute_density(&cloud.positions, k) {
            issues.push(format!("knn_density differs from brute force (n={n}, k={k})"));
        }
        for q in cloud.positions.iter().step_by(97) {
            let fast = gsanatomy::density::KdTree::new(&cloud.positions).knn(q, k, None);
            if fast != brute_force_knn(&cloud.positions, q, k, None) {
                issues.push(format!("kd-tree query differs from brute force (n={n})"));
                break;
            }
        }
    }

    let cloud = common::clustered_cloud(5000, 4);
    let mut rng = rng_for(5, 0);
    let gs: Vec<[f64; 3]> = (0..1500).map(|_| std::array::from_fn(|_| rng.random_range(-0.2..3.2))).collect();
    let part = partition_blocks(&cloud, &gs, 30, &PartitionOptions::default()).unwrap();
    let strat = stratify_terciles(&part.blocks);
    let rep = coverage_divergence(&cloud, &gs, &part.blocks, &strat).unwrap();
    let brute: Vec<f64> = gs
        .iter()
        .map(|g| {
            cloud
                .positions
                .iter()
                .map(|p| (0..3).map(|a| (p[a] - g[a]).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let all = sorted(&brute);
    let mut coverage_ok = rep.median == quantile_sorted(&all, 0.5).unwrap() && rep.p90 == quantile_sorted(&all, 0.9).unwrap();
    for t in &rep.terciles {
        let mine: Vec<f64> = part
            .blocks
            .iter()
            .filter(|b| strat.tercile_of(b.id) == Some(t.tercile))
            .flat_map(|b| b.gaussian_indices.iter().map(|&i| brute[i]))
            .collect();
        let s = sorted(&mine);
        coverage_ok &= t.n == s.len() && t.median == quantile_sorted(&s, 0.5) && t.p90 == quantile_sorted(&s, 0.9);
    }
    if !coverage_ok {
        issues.push("coverage_divergence differs from brute force".into());
    }

    let seeds: Vec<Vec<u8>> = vec![
        common::splat_fixture(
            &common::SplatLayout {
                normals: true,
                sh_rest: false,
                extras: vec![("uchar", "tag")],
                comments: vec![],
            },
            3,
            9,
        ),
        b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 0\n1 2 3 0 255 0\n".to_vec(),
        b"# 3D point list\n1 0.5 0.25 -1 255 128 0 0.1 1 2 3 4\n2 1 1 1 0 0 0 0.2\n".to_vec(),
    ];
    let mut rng = rng_for(31337, 0);
    let mut crashes = 0usize;
    let mut accepted = 0usize;
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..100_000 {
        let input = fuzz_input(i, &mut rng, &seeds);
        let out = catch_unwind(|| {
            let text = String::from_utf8_lossy(&input);
            [
                parse_gaussian_ply(&input).is_ok(),
                parse_pointcloud_ply(&input).is_ok(),
                parse_colmap_points(&text).is_ok(),
                parse_cloud_auto(&input).is_ok(),
            ]
        });
        match out {
            Ok(v) => accepted += v.iter().filter(|&&b| b).count(),
            Err(_) => crashes += 1,
        }
    }
    std::panic::set_hook(prev);
    if crashes > 0 {
        issues.push(format!("{crashes} fuzz inputs panicked"));
    }
    (
        issues.is_empty(),
        if issues.is_empty() {
            format!(
                "{} splat fixtures round-trip byte-identical; density, kd-tree and coverage match brute force; 100000 fuzz inputs, 0 panics ({accepted} parses accepted)",
                fixtures.len()
            )
        } else {
            issues.join("; ")
        },
    )
}

/// Every serialized artifact the library produces, for one seed.
fn artifacts(seed: u64) -> Vec<String> {
    let mut out = Vec::new();
    let mut rng = rng_for(seed, 0);
    let prims: Vec<GaussianPrimitive> = (0..400)
        .map(|i| {
            let mut p = GaussianPrimitive::at(std::array::from_fn(|_| rng.random::<f64>()));
            let base = if i % 2 == 0 { -4.0 } else { -1.5 };
            p.log_scales = std::array::from_fn(|_| base + 0.2 * rng.random::<f64>());
            p.sh_dc = [if i % 3 == 0 { -1.4 } else { 1.4 } + 0.1 * rng.random::<f64>(); 3];
            p
        })
        .collect();
    let opts = StatsOptions {
        seed,
        ..Default::default()
    };
    out.push(to_canonical_json(&scale_spectrum_report(&prims, &opts).unwrap()).unwrap());
    out.push(to_canonical_json(&radiance_report(&prims, &opts).unwrap()).unwrap());

    let cloud: PointCloud = common::clustered_cloud(3000, seed);
    let pos: Vec<[f64; 3]> = prims.iter().map(|p| p.position).collect();
    let part = partition_blocks(&cloud, &pos, 12, &PartitionOptions::default()).unwrap();
    let strat = stratify_terciles(&part.blocks);
    out.push(to_canonical_json(&strat).unwrap());
    out.push(to_canonical_json(&coverage_divergence(&cloud, &pos, &part.blocks, &strat).unwrap()).unwrap());

    let syn = synthetic_stratified_scene(
        &SyntheticConfig {
            blocks_per_tercile: 1,
            gaussians_per_block: 40,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let run = train_probe(
        &syn.data,
        &ProbeConfig {
            epochs: 10,
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    out.push(block_results_csv(&run.results).unwrap());
    out.push(to_canonical_json(&tercile_report(&run.results)).unwrap());

    let scene = build_scene(
        &SceneConfig {
            rays: 16,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let trace = optimize(
        &scene,
        &OptimizeConfig {
            scheme: Scheme::G4,
            steps: 200,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let rows: Vec<Vec<Cell>> = trace.rows.iter().map(|r| vec![r.step.into(), r.l_total.into(), r.l_app.into()]).collect();
    out.push(to_csv(&["step", "l_total", "l_app"], &rows).unwrap());
    let small = ScalingConfig {
        r_grid: vec![8, 64, 512],
        sigma_grid: vec![0.05],
        seeds: 3,
        ..Default::default()
    };
    out.push(to_canonical_json(&covariance_scaling_experiment(&small, seed).unwrap()).unwrap());
    out
}

fn determinism(started: Instant) -> (bool, String) {
    let a = artifacts(3);
    let b = artifacts(3);
    let c = artifacts(4);
    let same = a == b;
    let seed_sensitive = a != c;
    let elapsed = started.elapsed();
    (
        same && seed_sensitive && elapsed < BUDGET,
        format!(
            "{} artifacts byte-identical on rerun: {same}; differ under another seed: {seed_sensitive}; suite wall time {:.1} s (budget {} s)",
            a.len(),
            elapsed.as_secs_f64(),
            BUDGET.as_secs()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let started = Instant::now();
    let mut results = Vec::new();
    results.push(check(1, "variance decomposition identity", variance_identity));
    let t = Instant::now();
    let scaling = catch_unwind(|| covariance_scaling_experiment(&ScalingConfig::default(), 7).unwrap());
    let scaling_time = t.elapsed();
    match &scaling {
        Ok(r) => {
            let (p, d) = covariance_tracks_predictor(r);
            report(2, "covariance scales with sensitivity x appearance variance", p, scaling_time, &d);
            results.push(p);
            results.push(check(3, "sparse amplification of covariance", || sparse_amplification(r)));
        }
        Err(_) => {
            report(2, "covariance scales with sensitivity x appearance variance", false, scaling_time, "experiment panicked");
            report(3, "sparse amplification of covariance", false, Duration::ZERO, "experiment panicked");
            results.extend([false, false]);
        }
    }
    results.push(check(4, "decoupled vs coupled optimization", decoupled_schemes));
    results.push(check(5, "analytic gradients vs finite differences", gradients));
    results.push(check(6, "learnability falls with density", learnability));
    results.push(check(7, "mixture order selection", bimodality));
    results.push(check(8, "block stratification", stratification));
    results.push(check(9, "parser and spatial oracle fidelity", parser_fidelity));
    results.push(check(10, "determinism and runtime", || determinism(started)));
    let passed = results.iter().filter(|&&p| p).count();
    let _ = writeln!(std::io::stderr().lock(), "acceptance: {passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len(), "some acceptance criteria failed");
}

