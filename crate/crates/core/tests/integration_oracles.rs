use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfs_core::integrate::{integrate, integrate_spectral, GradientField, Mask, Method};
use sfs_core::metrics::depth_rmse;
use sfs_core::scene::{make_height_field, AlbedoSpec, SceneSpec, Shape};
use sfs_core::DepthMap;

fn centered(n: usize, i: usize) -> (f64, f64) {
    let c = (n as f64 - 1.0) / 2.0;
    (i as f64 - c, 0.0)
}

#[test]
fn paraboloid_from_exact_gradients() {
    let n = 64;
    let c = 0.02;
    let spec = SceneSpec {
        shape: Shape::Paraboloid { curvature: c },
        size: n,
        albedo: AlbedoSpec::Constant(1.0),
        background: false,
    };
    let truth = make_height_field(&spec).unwrap();
    let grads = GradientField::from_fn(Mask::full(n, n), |x, y| {
        let (x, _) = centered(n, x);
        let (y, _) = centered(n, y);
        (-2.0 * c * x, -2.0 * c * y)
    })
    .unwrap();
    for method in [Method::Line, Method::Spectral] {
        let z = integrate(&grads, method).unwrap();
        let (_, rel) = depth_rmse(&z, &truth.depth, &truth.mask).unwrap();
        assert!(rel < 1e-2, "{method}: relative rmse {rel}");
    }
}

#[test]
fn ramp_is_exact() {
    let n = 64;
    let grads = GradientField::from_fn(Mask::full(n, n), |_, _| (0.4, -0.25)).unwrap();
    let truth = DepthMap::new(
        (0..n * n).map(|i| 0.4 * (i % n) as f64 - 0.25 * (i / n) as f64).collect(),
        Mask::full(n, n),
    )
    .unwrap();
    for method in [Method::Line, Method::Spectral] {
        let z = integrate(&grads, method).unwrap();
        let worst = z
            .heights()
            .iter()
            .zip(truth.heights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{method}: max error {worst:e}");
    }
}

/// Least squares over every forward difference, solved densely, with the
/// zero-mean gauge appended as one more equation.
fn dense_least_squares(w: usize, h: usize, p: &[f64], q: &[f64]) -> Vec<f64> {
    let m = w * h;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                rows.push((vec![(i + 1, 1.0), (i, -1.0)], 0.5 * (p[i] + p[i + 1])));
            }
            if y + 1 < h {
                rows.push((vec![(i + w, 1.0), (i, -1.0)], 0.5 * (q[i] + q[i + w])));
            }
        }
    }
    rows.push(((0..m).map(|i| (i, 1.0)).collect(), 0.0));
    let mut a = DMatrix::zeros(rows.len(), m);
    let mut b = DVector::zeros(rows.len());
    for (r, (coeffs, rhs)) in rows.iter().enumerate() {
        for &(j, v) in coeffs {
            a[(r, j)] = v;
        }
        b[r] = *rhs;
    }
    let z = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * b));
    z.iter().copied().collect()
}

#[test]
fn spectral_matches_dense_normal_equations() {
    let (w, h) = (8, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Random fields are far from integrable, which exercises the projection.
    let p: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let q: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grads = GradientField::new(p.clone(), q.clone(), Mask::full(w, h)).unwrap();
    let z = integrate_spectral(&grads).unwrap();
    let oracle = dense_least_squares(w, h, &p, &q);
    for (a, b) in z.heights().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn line_integration_follows_nonconvex_masks() {
    // A U shape: the two arms connect only through the bottom row.
    let n = 12;
    let bits: Vec<bool> = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            y >= 9 || x <= 2 || x >= 9
        })
        .collect();
    let mask = Mask::new(n, n, bits).unwrap();
    let f = |x: f64, y: f64| 0.3 * x - 0.7 * y;
    let grads = GradientField::from_fn(mask.clone(), |_, _| (0.3, -0.7)).unwrap();
    let truth = DepthMap::new(
        (0..n * n).map(|i| f((i % n) as f64, (i / n) as f64)).collect(),
        mask.clone(),
    )
    .unwrap();
    let z = integrate(&grads, Method::Line).unwrap();
    let (rmse, _) = depth_rmse(&z, &truth, &mask).unwrap();
    assert!(rmse < 1e-9, "rmse {rmse:e}");
}
