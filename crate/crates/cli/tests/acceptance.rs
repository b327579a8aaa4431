//! Acceptance criteria, one line of output each. Exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfs_core::integrate::{integrate, integrate_line, normals_to_gradients, GradientField, Mask, Method, DEFAULT_NZ_FLOOR};
use sfs_core::metrics::{angular_error, depth_rmse, epochs_to_target, light_errors};
use sfs_core::model::{
    diffuse_reflectance, estimate_direction_raw, normalize_direction, Direction, HybridModel,
    IntensityImage, NormalField, OutputLayer, Vec3, INVARIANT_TOL,
};
use sfs_core::scene::{canonical_sphere, make_height_field, render, AlbedoSpec, GroundTruth, SceneSpec, Shape};
use sfs_core::train::{diffuse_normal_deltas, initial_model, total_error, train, OptimizerMode, TrainConfig, Trainer};
use sfs_core::{AlbedoMap, DepthMap};

/// Outcome of one criterion: pass flag and a one-line detail.
type Verdict = (bool, String);

struct Canonical {
    truth: GroundTruth,
    lights: Vec<Direction>,
    images: Vec<IntensityImage>,
}

fn canonical() -> Canonical {
    let (scene, spec) = canonical_sphere();
    let truth = make_height_field(&scene).unwrap();
    let images = render(&truth, &spec).unwrap();
    Canonical {
        truth,
        lights: spec.lights,
        images,
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Largest `|L4(L3(V s)) - s|` over 10 seeded unit `s`, for both subnetworks.
fn mirror_identity_error(model: &HybridModel, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let s = Direction::new_unchecked(random_unit(rng));
        for sub in [&model.diffuse, &model.specular] {
            let image = diffuse_reflectance(&s, &sub.normals);
            let back = normalize_direction(estimate_direction_raw(&image, &sub.mirror).unwrap()).unwrap();
            worst = worst.max((back.into_inner() - s.into_inner()).norm());
        }
    }
    worst
}

/// Criteria 1, 2, 4 and 5 share one canonical training run.
fn canonical_run() -> [Verdict; 4] {
    let data = canonical();
    let config = TrainConfig::default();
    let start = Instant::now();
    let mut trainer = Trainer::new(&data.images, &data.truth.albedo, config.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    let mut worst_sum: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut worst_mirror: f64 = 0.0;
    let mut boundaries = 0usize;
    loop {
        let m = trainer.model();
        let sum_dev = m
            .lambdas
            .diffuse()
            .iter()
            .zip(m.lambdas.specular())
            .map(|(d, s)| (d + s - 1.0).abs())
            .fold(0.0, f64::max);
        let norm_dev = m.diffuse.normals.max_norm_deviation().max(m.specular.normals.max_norm_deviation());
        let floor_ok = m
            .lambdas
            .diffuse()
            .iter()
            .chain(m.lambdas.specular())
            .all(|&l| l >= m.lambdas.floor() * (1.0 - 1e-12));
        if sum_dev > INVARIANT_TOL || norm_dev > INVARIANT_TOL || !floor_ok {
            violations += 1;
        }
        worst_sum = worst_sum.max(sum_dev);
        worst_norm = worst_norm.max(norm_dev);
        worst_mirror = worst_mirror.max(mirror_identity_error(m, &mut rng));
        boundaries += 1;
        if trainer.is_done() {
            break;
        }
        trainer.step().unwrap();
    }
    let trained = trainer.finish().unwrap();
    let elapsed = start.elapsed();

    let ac1 = (
        violations == 0 && trained.record.len() == 501 && elapsed < Duration::from_secs(120),
        format!(
            "{violations} violations over {boundaries} epoch boundaries; max |sum-1| {worst_sum:.1e}, max |n|-1 {worst_norm:.1e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    let ac2 = (
        worst_mirror < 1e-6,
        format!("max |L3L4(Vs) - s| = {worst_mirror:.1e} over {boundaries} refreshes x 10 lights x 2 subnetworks"),
    );

    let light_deg = light_errors(&trained.lights, &data.lights).unwrap();
    let max_light = light_deg.iter().copied().fold(0.0, f64::max);
    let ac4 = (max_light < 5.0, format!("per-image light errors {light_deg:.2?} deg (max {max_light:.2})"));

    let normals = trained.normals().unwrap();
    let ang = angular_error(&normals, &data.truth.normals, &data.truth.mask).unwrap();
    let grads = normals_to_gradients(&normals, &data.truth.mask, DEFAULT_NZ_FLOOR).unwrap();
    let depth = integrate_line(&grads).unwrap();
    let (rmse, rel) = depth_rmse(&depth, &data.truth.depth, &data.truth.mask).unwrap();
    let ac5 = (
        ang.mean < 15.0 && rel < 0.10,
        format!("mean normal error {:.2} deg; depth rmse {rmse:.3} px = {:.2}% of range", ang.mean, 100.0 * rel),
    );
    [ac1, ac2, ac4, ac5]
}

fn gradient_check() -> Verdict {
    const N: usize = 8;
    let config = TrainConfig {
        diffuse_only: true,
        output: OutputLayer::Bypass,
        init_noise: 0.2,
        seed: 3,
        ..TrainConfig::default()
    };
    let albedo = AlbedoMap::constant(N, N, 1.0).unwrap();
    let model = initial_model(&albedo, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let img = IntensityImage::new(N, N, (0..N * N).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
    let eta = 0.01;
    let out = model.forward(&img, OutputLayer::Bypass).unwrap();
    let deltas = diffuse_normal_deltas(&out.diffuse.direction, img.values(), &out.combined, eta);

    let error_at = |normals: &[Vec3]| {
        let mut m = model.clone();
        let field = normals.iter().map(|v| Direction::new_unchecked(*v)).collect();
        m.diffuse.normals = NormalField::new(N, N, field).unwrap();
        total_error(&m.forward(&img, OutputLayer::Bypass).unwrap().combined, &img).unwrap()
    };
    let base: Vec<Vec3> = model.diffuse.normals.normals().iter().map(|n| n.into_inner()).collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..N * N {
        for c in 0..3 {
            let (mut plus, mut minus) = (base.clone(), base.clone());
            plus[k][c] += h;
            minus[k][c] -= h;
            let expected = -eta * (error_at(&plus) - error_at(&minus)) / (2.0 * h);
            if expected.abs() > 1e-10 {
                worst = worst.max((deltas[k][c] - expected).abs() / expected.abs());
            }
        }
    }
    (worst < 1e-4, format!("max relative deviation {worst:.1e} over {} components", 3 * N * N))
}

fn integration_oracle() -> Verdict {
    let n = 64;
    let c = 0.02;
    let para = make_height_field(&SceneSpec {
        shape: Shape::Paraboloid { curvature: c },
        size: n,
        albedo: AlbedoSpec::Constant(1.0),
        background: false,
    })
    .unwrap();
    let half = (n as f64 - 1.0) / 2.0;
    let grads = GradientField::from_fn(Mask::full(n, n), |x, y| {
        (-2.0 * c * (x as f64 - half), -2.0 * c * (y as f64 - half))
    })
    .unwrap();
    let ramp_grads = GradientField::from_fn(Mask::full(n, n), |_, _| (1.0, 0.0)).unwrap();
    let ramp = DepthMap::new((0..n * n).map(|i| (i % n) as f64).collect(), Mask::full(n, n)).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for method in [Method::Line, Method::Spectral] {
        let (_, rel) = depth_rmse(&integrate(&grads, method).unwrap(), &para.depth, &para.mask).unwrap();
        let z = integrate(&ramp_grads, method).unwrap();
        let max_err = z.heights().iter().zip(ramp.heights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ok &= rel < 1e-2 && max_err < 1e-6;
        parts.push(format!("{method}: paraboloid rel rmse {rel:.1e}, ramp max err {max_err:.1e}"));
    }
    (ok, parts.join("; "))
}

fn optimizer_comparison() -> Verdict {
    let data = canonical();
    let records: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = [OptimizerMode::Fixed, OptimizerMode::Momentum, OptimizerMode::Adaptive]
            .into_iter()
            .map(|mode| {
                let data = &data;
                s.spawn(move || {
                    let cfg = TrainConfig {
                        optimizer: mode,
                        ..TrainConfig::default()
                    };
                    train(&data.images, &data.truth.albedo, &cfg).unwrap().record
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let target = records[0].last().unwrap().error;
    let [fixed, momentum, adaptive] = [0, 1, 2].map(|i| epochs_to_target(&records[i], target));
    let beats = |e: Option<usize>| matches!((e, fixed), (Some(a), Some(f)) if a < f);
    (
        beats(adaptive) && beats(momentum),
        format!("target {target:.4}; epochs to target: fixed {fixed:?}, momentum {momentum:?}, adaptive {adaptive:?}"),
    )
}

fn files_under(dir: &Path, sub: &str) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir.join(sub))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Verdict {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sphere.cfg");
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    let codes: Vec<i32> = thread::scope(|s| {
        let handles: Vec<_> = dirs
            .iter()
            .map(|d| {
                let config = &config;
                s.spawn(move || {
                    sfs_cli::run_cli([
                        "sfs".as_ref(),
                        "pipeline".as_ref(),
                        "--config".as_ref(),
                        config.as_os_str(),
                        "--out".as_ref(),
                        d.as_os_str(),
                    ])
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    if codes != [0, 0] {
        return (false, format!("pipeline exit codes {codes:?}"));
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["model", "depth"] {
        let (a, b) = (files_under(&dirs[0], sub), files_under(&dirs[1], sub));
        if a.len() != b.len() {
            differing.push(format!("{sub}: file lists differ"));
        }
        for ((name, x), (_, y)) in a.iter().zip(&b) {
            compared += 1;
            if x != y {
                differing.push(name.clone());
            }
        }
    }
    (
        differing.is_empty() && compared >= 9,
        format!("{compared} model/depth/record files compared, differing: {differing:?}"),
    )
}

fn hybrid_benefit() -> Verdict {
    let (scene, mut spec) = canonical_sphere();
    spec.specular = 0.3;
    spec.exponent = 2.0;
    let truth = make_height_field(&scene).unwrap();
    let images = render(&truth, &spec).unwrap();
    let [hybrid, diffuse] = thread::scope(|s| {
        [false, true].map(|diffuse_only| {
            let (images, albedo) = (&images, &truth.albedo);
            s.spawn(move || {
                let cfg = TrainConfig {
                    diffuse_only,
                    ..TrainConfig::default()
                };
                train(images, albedo, &cfg).unwrap().record.last().unwrap().error
            })
        })
        .map(|h| h.join().unwrap())
    });
    (hybrid < diffuse, format!("final error hybrid {hybrid:.4} vs diffuse-only {diffuse:.4}"))
}

fn main() {
    let start = Instant::now();
    let (shared, rest) = thread::scope(|s| {
        let shared = s.spawn(canonical_run);
        let ac3 = s.spawn(gradient_check);
        let ac6 = s.spawn(integration_oracle);
        let ac7 = s.spawn(optimizer_comparison);
        let ac8 = s.spawn(determinism);
        let ac9 = s.spawn(hybrid_benefit);
        (
            shared.join().unwrap(),
            [ac3, ac6, ac7, ac8, ac9].map(|h| h.join().unwrap()),
        )
    });
    let [ac1, ac2, ac4, ac5] = shared;
    let [ac3, ac6, ac7, ac8, ac9] = rest;
    let results = [
        ("AC1 invariants", ac1),
        ("AC2 mirror identity", ac2),
        ("AC3 gradient check", ac3),
        ("AC4 light recovery", ac4),
        ("AC5 shape recovery", ac5),
        ("AC6 integration oracle", ac6),
        ("AC7 optimizer comparison", ac7),
        ("AC8 determinism", ac8),
        ("AC9 hybrid benefit", ac9),
    ];
    println!();
    for (name, (ok, detail)) in &results {
        println!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|(_, (ok, _))| !ok).count();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
