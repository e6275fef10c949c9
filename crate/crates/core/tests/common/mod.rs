//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use gsanatomy::seed::rng_for;
use rand::Rng;

pub struct SplatLayout {
    pub normals: bool,
    pub sh_rest: bool,
    /// Uninterpreted trailing properties as `(type, name)`.
    pub extras: Vec<(&'static str, &'static str)>,
    /// Comment lines placed after the format line.
    pub comments: Vec<&'static str>,
}

/// A binary splat PLY with random but valid contents.
pub fn splat_fixture(layout: &SplatLayout, n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_for(seed, 0);
    let mut props: Vec<(String, &str)> = ["x", "y", "z"].iter().map(|s| (s.to_string(), "float")).collect();
    if layout.normals {
        props.extend(["nx", "ny", "nz"].iter().map(|s| (s.to_string(), "float")));
    }
    props.extend((0..3).map(|i| (format!("f_dc_{i}"), "float")));
    if layout.sh_rest {
        props.extend((0..45).map(|i| (format!("f_rest_{i}"), "float")));
    }
    props.push(("opacity".into(), "float"));
    props.extend((0..3).map(|i| (format!("scale_{i}"), "float")));
    props.extend((0..4).map(|i| (format!("rot_{i}"), "float")));
    props.extend(layout.extras.iter().map(|(t, n)| (n.to_string(), *t)));

    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for c in &layout.comments {
        header.push_str(&format!("comment {c}\n"));
    }
    header.push_str(&format!("element vertex {n}\n"));
    for (name, ty) in &props {
        header.push_str(&format!("property {ty} {name}\n"));
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    for _ in 0..n {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        for (name, ty) in &props {
            match *ty {
                "float" => {
                    let v: f64 = match name.as_str() {
                        n if n.starts_with("rot_") => q[n[4..].parse::<usize>().unwrap()] / qn,
                        n if n.starts_with("scale_") => rng.random_range(-6.0..0.0),
                        _ => rng.random_range(-5.0..5.0),
                    };
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
                "double" => out.extend_from_slice(&rng.random_range(-1e3..1e3f64).to_le_bytes()),
                "uchar" => out.push(rng.random()),
                t => panic!("unsupported fixture type {t}"),
            }
        }
    }
    out
}

/// Every splat fixture exercised by the round-trip checks.
pub fn splat_fixtures() -> Vec<(&'static str, Vec<u8>)> {
    let plain = |normals, sh_rest| SplatLayout {
        normals,
        sh_rest,
        extras: vec![],
        comments: vec![],
    };
    vec![
        ("empty", splat_fixture(&plain(false, false), 0, 1)),
        ("single", splat_fixture(&plain(false, false), 1, 2)),
        ("dc_only", splat_fixture(&plain(false, false), 257, 3)),
        ("normals", splat_fixture(&plain(true, false), 100, 4)),
        ("degree3", splat_fixture(&plain(true, true), 300, 5)),
        (
            "extras",
            splat_fixture(
                &SplatLayout {
                    normals: true,
                    sh_rest: true,
                    extras: vec![("uchar", "segment"), ("double", "confidence"), ("float", "age")],
                    comments: vec!["exported by a trainer", "iteration 30000"],
                },
                64,
                6,
            ),
        ),
    ]
}

/// Uniform cloud in the unit cube with optional colors.
pub fn uniform_cloud(n: usize, seed: u64, colored: bool) -> gsanatomy::PointCloud {
    let mut rng = rng_for(seed, 0);
    let positions = (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
    let mut c = gsanatomy::PointCloud::from_positions(positions);
    if colored {
        c.colors = Some((0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect());
    }
    c
}

/// Clustered cloud with a strong density gradient and exact duplicate points.
pub fn clustered_cloud(n: usize, seed: u64) -> gsanatomy::PointCloud {
    let mut rng = rng_for(seed, 1);
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    while positions.len() < n {
        let r: f64 = rng.random();
        let p = if r < 0.6 {
            let c = [0.2, 0.3, 0.4];
            std::array::from_fn(|i| c[i] + 0.05 * (rng.random::<f64>() - 0.5))
        } else if r < 0.95 {
            std::array::from_fn(|_| rng.random::<f64>() * 3.0)
        } else if let Some(&q) = positions.last() {
            q
        } else {
            [0.0; 3]
        };
        positions.push(p);
    }
    gsanatomy::PointCloud::from_positions(positions)
}
