//! Scores against ground truth and convergence-curve comparison.

use std::fmt;

use crate::error::{Error, Result};
use crate::integrate::{DepthMap, Mask};
use crate::model::{CombinationWeights, Direction, NormalField};
use crate::train::TrainRecord;

/// Per-pixel angle between two normal fields, in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularError {
    /// One entry per on-mask pixel, in pixel order.
    pub degrees: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

/// `atan2(|a x b|, a.b)`, which stays accurate near 0 and 180 degrees
/// where `acos` of the dot product does not.
pub fn angle_between(a: &Direction, b: &Direction) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

pub fn angular_error(a: &NormalField, b: &NormalField, mask: &Mask) -> Result<AngularError> {
    for (what, w, h) in [("normal field", b.width(), b.height()), ("mask", mask.width(), mask.height())] {
        if w != a.width() || h != a.height() {
            return Err(Error::Shape {
                what,
                expected: a.len(),
                found: w * h,
            });
        }
    }
    if mask.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let degrees: Vec<f64> = mask
        .indices()
        .map(|i| angle_between(a.get(i), b.get(i)))
        .collect();
    let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
    Ok(AngularError {
        median: median(&degrees),
        mean,
        degrees,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Angle between each estimated light and the light it should match.
pub fn light_errors(estimated: &[Direction], truth: &[Direction]) -> Result<Vec<f64>> {
    if estimated.len() != truth.len() {
        return Err(Error::Shape {
            what: "light list",
            expected: truth.len(),
            found: estimated.len(),
        });
    }
    Ok(estimated
        .iter()
        .zip(truth)
        .map(|(a, b)| angle_between(a, b))
        .collect())
}

/// Root-mean-square depth difference after removing each map's on-mask mean,
/// and the same value divided by the on-mask range of `truth`.
pub fn depth_rmse(pred: &DepthMap, truth: &DepthMap, mask: &Mask) -> Result<(f64, f64)> {
    for (what, w, h) in [
        ("predicted depth", pred.width(), pred.height()),
        ("mask", mask.width(), mask.height()),
    ] {
        if w != truth.width() || h != truth.height() {
            return Err(Error::Shape {
                what,
                expected: truth.width() * truth.height(),
                found: w * h,
            });
        }
    }
    if mask.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let n = mask.count() as f64;
    let mean = |z: &[f64]| mask.indices().map(|i| z[i]).sum::<f64>() / n;
    let (zp, zt) = (pred.heights(), truth.heights());
    let (mp, mt) = (mean(zp), mean(zt));
    let sq: f64 = mask
        .indices()
        .map(|i| ((zp[i] - mp) - (zt[i] - mt)).powi(2))
        .sum();
    let rmse = (sq / n).sqrt();
    let (lo, hi) = mask
        .indices()
        .map(|i| zt[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
    let range = hi - lo;
    let relative = if range > 0.0 { rmse / range } else if rmse == 0.0 { 0.0 } else { f64::INFINITY };
    Ok((rmse, relative))
}

/// First epoch whose error is at or below `target`.
pub fn epochs_to_target(record: &TrainRecord, target: f64) -> Option<usize> {
    record
        .entries()
        .iter()
        .find(|e| e.error <= target)
        .map(|e| e.epoch)
}

pub fn convergence_compare<'a, K: Clone>(
    records: impl IntoIterator<Item = (K, &'a TrainRecord)>,
    target: f64,
) -> Vec<(K, Option<usize>)> {
    records
        .into_iter()
        .map(|(k, r)| (k, epochs_to_target(r, target)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut n = 0usize;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in values {
            n += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (n > 0).then(|| Summary {
            min,
            mean: sum / n as f64,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub normal_mean_deg: f64,
    pub normal_median_deg: f64,
    pub light_deg: Vec<f64>,
    pub depth_rmse: f64,
    pub depth_rmse_relative: f64,
    pub lambda_diffuse: Summary,
    pub lambda_specular: Summary,
    /// Layer-6 passes that saw a constant map.
    pub flat_reflectance_events: usize,
    /// Pixels whose normal z-component was raised to the integration floor.
    pub clamped_gradients: usize,
}

impl EvalReport {
    /// Flattened `key=value` pairs in a fixed order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("normal_mean_deg".to_string(), format!("{:.6}", self.normal_mean_deg)),
            ("normal_median_deg".to_string(), format!("{:.6}", self.normal_median_deg)),
        ];
        for (i, d) in self.light_deg.iter().enumerate() {
            kv.push((format!("light_deg.{i}"), format!("{d:.6}")));
        }
        kv.push(("depth_rmse".into(), format!("{:.6}", self.depth_rmse)));
        kv.push(("depth_rmse_relative".into(), format!("{:.6}", self.depth_rmse_relative)));
        for (name, s) in [("lambda_d", self.lambda_diffuse), ("lambda_s", self.lambda_specular)] {
            kv.push((format!("{name}.min"), format!("{:.6}", s.min)));
            kv.push((format!("{name}.mean"), format!("{:.6}", s.mean)));
            kv.push((format!("{name}.max"), format!("{:.6}", s.max)));
        }
        kv.push(("flat_reflectance_events".into(), self.flat_reflectance_events.to_string()));
        kv.push(("clamped_gradients".into(), self.clamped_gradients.to_string()));
        kv
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "normals: mean {:.3} deg, median {:.3} deg",
            self.normal_mean_deg, self.normal_median_deg
        )?;
        let lights: Vec<String> = self.light_deg.iter().map(|d| format!("{d:.3}")).collect();
        writeln!(f, "lights (deg): {}", lights.join(" "))?;
        writeln!(
            f,
            "depth: rmse {:.4} px ({:.2}% of range)",
            self.depth_rmse,
            100.0 * self.depth_rmse_relative
        )?;
        writeln!(
            f,
            "lambda_d: min {:.4} mean {:.4} max {:.4}",
            self.lambda_diffuse.min, self.lambda_diffuse.mean, self.lambda_diffuse.max
        )?;
        writeln!(
            f,
            "lambda_s: min {:.4} mean {:.4} max {:.4}",
            self.lambda_specular.min, self.lambda_specular.mean, self.lambda_specular.max
        )?;
        write!(
            f,
            "flat layer-6 events: {}, clamped gradients: {}",
            self.flat_reflectance_events, self.clamped_gradients
        )
    }
}

/// Inputs to [`evaluate`] that come from a trained model.
pub struct Estimate<'a> {
    pub normals: &'a NormalField,
    pub lights: &'a [Direction],
    pub depth: &'a DepthMap,
    pub lambdas: &'a CombinationWeights,
    pub flat_reflectance_events: usize,
    pub clamped_gradients: usize,
}

pub fn evaluate(
    est: &Estimate<'_>,
    truth_normals: &NormalField,
    truth_lights: &[Direction],
    truth_depth: &DepthMap,
    mask: &Mask,
) -> Result<EvalReport> {
    let ang = angular_error(est.normals, truth_normals, mask)?;
    let (rmse, rel) = depth_rmse(est.depth, truth_depth, mask)?;
    let on = |v: &[f64]| Summary::of(mask.indices().map(|i| v[i])).ok_or(Error::Empty("mask"));
    Ok(EvalReport {
        normal_mean_deg: ang.mean,
        normal_median_deg: ang.median,
        light_deg: light_errors(est.lights, truth_lights)?,
        depth_rmse: rmse,
        depth_rmse_relative: rel,
        lambda_diffuse: on(est.lambdas.diffuse())?,
        lambda_specular: on(est.lambdas.specular())?,
        flat_reflectance_events: est.flat_reflectance_events,
        clamped_gradients: est.clamped_gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{direction, Vec3};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field(vs: &[(f64, f64, f64)]) -> NormalField {
        let v: Vec<Vec3> = vs.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
        NormalField::from_vectors(v.len(), 1, &v).unwrap()
    }

    fn record(errors: &[f64]) -> TrainRecord {
        let mut r = TrainRecord::new();
        for (t, e) in errors.iter().enumerate() {
            r.push(t, *e, 0.1).unwrap();
        }
        r
    }

    #[test]
    fn angular_error_examples() {
        let a = field(&[(0.0, 0.0, 1.0), (0.0, 0.0, 1.0), (0.3, 0.1, 1.0)]);
        let b = field(&[(1.0, 0.0, 0.0), (0.0, 0.0, -1.0), (0.3, 0.1, 1.0)]);
        let e = angular_error(&a, &b, &Mask::full(3, 1)).unwrap();
        assert_abs_diff_eq!(e.degrees[0], 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.degrees[1], 180.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.degrees[2], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(e.median, 90.0, epsilon = 1e-12);
        assert!(angular_error(&a, &field(&[(0.0, 0.0, 1.0)]), &Mask::full(3, 1)).is_err());
    }

    #[test]
    fn angular_error_ignores_off_mask() {
        let a = field(&[(0.0, 0.0, 1.0), (0.0, 0.0, 1.0)]);
        let b = field(&[(0.0, 0.0, 1.0), (1.0, 0.0, 0.0)]);
        let mask = Mask::new(2, 1, vec![true, false]).unwrap();
        let e = angular_error(&a, &b, &mask).unwrap();
        assert_eq!(e.degrees, vec![0.0]);
    }

    fn depth(z: Vec<f64>) -> DepthMap {
        let n = z.len();
        DepthMap::new(z, Mask::full(n, 1)).unwrap()
    }

    #[test]
    fn depth_rmse_examples() {
        let t = depth(vec![0.0, 1.0, 3.0, 2.0]);
        let mask = Mask::full(4, 1);
        assert_eq!(depth_rmse(&t, &t, &mask).unwrap().0, 0.0);
        // A constant offset is removed by the gauge.
        let shifted = DepthMap::new(vec![7.0, 8.0, 10.0, 9.0], mask.clone()).unwrap();
        assert_abs_diff_eq!(depth_rmse(&shifted, &t, &mask).unwrap().0, 0.0, epsilon = 1e-12);
        // One pixel off by delta: residual after mean shift is delta(1 - 1/N)
        // there and -delta/N elsewhere, so RMSE^2 = delta^2 (N-1)/N^2.
        let delta = 0.8;
        let bumped = DepthMap::new(vec![0.0, 1.0 + delta, 3.0, 2.0], mask.clone()).unwrap();
        let (rmse, rel) = depth_rmse(&bumped, &t, &mask).unwrap();
        let n: f64 = 4.0;
        assert_abs_diff_eq!(rmse, delta * ((n - 1.0) / (n * n)).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(rel, rmse / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn epochs_to_target_examples() {
        assert_eq!(epochs_to_target(&record(&[0.5, 0.4]), 1.0), Some(0));
        let falling: Vec<f64> = (0..40).map(|t| 100.0 - t as f64).collect();
        assert_eq!(epochs_to_target(&record(&falling), 83.0), Some(17));
        assert_eq!(epochs_to_target(&record(&falling), -1.0), None);
        let a = record(&falling);
        let out = convergence_compare([("a", &a)], 83.0);
        assert_eq!(out, vec![("a", Some(17))]);
    }

    #[test]
    fn report_kv_is_stable() {
        let s = Summary::of([0.5, 0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.5, epsilon = 1e-15);
        let r = EvalReport {
            normal_mean_deg: 1.0,
            normal_median_deg: 0.5,
            light_deg: vec![0.1, 0.2],
            depth_rmse: 0.3,
            depth_rmse_relative: 0.01,
            lambda_diffuse: s,
            lambda_specular: s,
            flat_reflectance_events: 0,
            clamped_gradients: 3,
        };
        let kv = r.to_kv();
        assert_eq!(kv[0], ("normal_mean_deg".into(), "1.000000".into()));
        assert_eq!(kv[3].0, "light_deg.1");
        assert_eq!(kv.last().unwrap(), &("clamped_gradients".into(), "3".into()));
        assert!(r.to_string().contains("median 0.500 deg"));
    }

    proptest! {
        #[test]
        fn angular_error_is_symmetric(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0) {
            let a = field(&[(ax, ay, 0.5)]);
            let b = field(&[(bx, by, 0.5)]);
            let m = Mask::full(1, 1);
            let ab = angular_error(&a, &b, &m).unwrap().mean;
            let ba = angular_error(&b, &a, &m).unwrap().mean;
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=180.0).contains(&ab));
            prop_assert!(angular_error(&a, &a, &m).unwrap().mean < 1e-9);
        }

        #[test]
        fn depth_rmse_is_gauge_invariant(z in prop::collection::vec(-5.0f64..5.0, 6), c in -100.0f64..100.0) {
            let t = depth(z.clone());
            let p = depth(z.iter().map(|v| v * 0.9 + 0.1).collect());
            let shifted = depth(z.iter().map(|v| v * 0.9 + 0.1 + c).collect());
            let m = Mask::full(6, 1);
            let a = depth_rmse(&p, &t, &m).unwrap().0;
            let b = depth_rmse(&shifted, &t, &m).unwrap().0;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn lower_record_never_crosses_later(errs in prop::collection::vec(0.0f64..10.0, 1..30), drop in prop::collection::vec(0.0f64..1.0, 30), target in 0.0f64..10.0) {
            let hi = record(&errs);
            let lo = record(&errs.iter().zip(&drop).map(|(e, d)| e - d).map(|e| e.max(0.0)).collect::<Vec<_>>());
            match (epochs_to_target(&lo, target), epochs_to_target(&hi, target)) {
                (None, Some(_)) => prop_assert!(false, "lower record missed target"),
                (Some(l), Some(h)) => prop_assert!(l <= h),
                _ => {}
            }
        }
    }

    #[test]
    fn light_errors_match_lengths() {
        let z = direction(0.0, 0.0, 1.0).unwrap();
        let x = direction(1.0, 0.0, 1.0).unwrap();
        let e = light_errors(&[z, x], &[z, z]).unwrap();
        assert_abs_diff_eq!(e[1], 45.0, epsilon = 1e-12);
        assert!(light_errors(&[z], &[z, z]).is_err());
    }
}
