//! Minibatch gradient variance estimation and optimizer runs.

use criterion::{criterion_group, criterion_main, Criterion};
use gsanatomy::seed::rng_for;
use gsanatomy::sim::{build_scene, estimate_variance, optimize, OptimizeConfig, SceneConfig, Scheme, SimState, VarianceOptions};

fn bench(c: &mut Criterion) {
    let scene = build_scene(&SceneConfig::default(), 3).unwrap();
    let state = SimState::from_sigma(&scene.sigma_pc, 0.5, 1.0).unwrap();
    let opts = VarianceOptions::default();
    c.bench_function("estimate_variance_default", |b| {
        b.iter(|| estimate_variance(&state, &scene, &opts, &mut rng_for(5, 0)).unwrap())
    });
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    for scheme in [Scheme::G1, Scheme::G4] {
        let cfg = OptimizeConfig {
            scheme,
            ..Default::default()
        };
        g.bench_function(scheme.label(), |b| b.iter(|| optimize(&scene, &cfg, 1).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
