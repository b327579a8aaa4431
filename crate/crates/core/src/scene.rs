//! Analytic height fields and their rendered images, used as ground truth.

use crate::error::{Error, Result};
use crate::integrate::{DepthMap, Mask};
use crate::model::{direction, halfway_vector, AlbedoMap, Direction, IntensityImage, NormalField, Vec3};

/// Smallest accepted side length.
pub const MIN_SIZE: usize = 8;

/// Side length of the canonical datasets.
pub const CANONICAL_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `z = sqrt(R^2 - x^2 - y^2)` on the disk of radius `R`.
    Sphere { radius: f64 },
    /// `z = -c (x^2 + y^2)`.
    Paraboloid { curvature: f64 },
    /// `z = s x`.
    Ramp { slope: f64 },
    /// `z = A (cos(2 pi f x) + cos(2 pi f y))`, `f` in cycles per pixel.
    Sinusoid { frequency: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlbedoSpec {
    Constant(f64),
    /// Left half takes the first value, right half the second.
    TwoTone(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub shape: Shape,
    pub size: usize,
    pub albedo: AlbedoSpec,
    /// Restrict the object to its support (sphere disk, or the inscribed
    /// disk for unbounded shapes) and treat the rest as background.
    pub background: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < MIN_SIZE {
            return Err(Error::Config(format!(
                "scene size must be >= {MIN_SIZE}, got {}",
                self.size
            )));
        }
        let positive = match self.shape {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Paraboloid { curvature } => curvature > 0.0,
            Shape::Ramp { slope } => slope > 0.0,
            Shape::Sinusoid {
                frequency,
                amplitude,
            } => frequency > 0.0 && amplitude > 0.0,
        };
        if !positive {
            return Err(Error::Config(format!(
                "geometry parameters must be positive: {:?}",
                self.shape
            )));
        }
        let albedo_ok = |a: f64| a > 0.0 && a <= 1.0;
        let ok = match self.albedo {
            AlbedoSpec::Constant(a) => albedo_ok(a),
            AlbedoSpec::TwoTone(a, b) => albedo_ok(a) && albedo_ok(b),
        };
        if !ok {
            return Err(Error::Config(format!(
                "albedo values must lie in (0, 1]: {:?}",
                self.albedo
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub depth: DepthMap,
    pub normals: NormalField,
    pub albedo: AlbedoMap,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub lights: Vec<Direction>,
    pub view: Direction,
    /// Specular share `k_s`; the diffuse share is `1 - k_s`.
    pub specular: f64,
    pub exponent: f64,
    pub quantize: bool,
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lights.is_empty() {
            return Err(Error::Config("at least one light is required".into()));
        }
        if let Some(l) = self.lights.iter().find(|l| !(l.z > 0.0)) {
            return Err(Error::Config(format!(
                "light ({}, {}, {}) must have a positive z component",
                l.x, l.y, l.z
            )));
        }
        if !(0.0..=1.0).contains(&self.specular) {
            return Err(Error::Config(format!(
                "specular share must lie in [0, 1], got {}",
                self.specular
            )));
        }
        if !(self.exponent >= 1.0) {
            return Err(Error::Config(format!(
                "render exponent must be >= 1, got {}",
                self.exponent
            )));
        }
        Ok(())
    }
}

fn pixel_coords(size: usize, i: usize) -> (f64, f64) {
    let c = (size as f64 - 1.0) / 2.0;
    ((i % size) as f64 - c, (i / size) as f64 - c)
}

pub fn make_height_field(spec: &SceneSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let n = spec.size;
    let support = (n as f64 / 2.0).powi(2);
    let mut z = Vec::with_capacity(n * n);
    let mut slopes = Vec::with_capacity(n * n);
    let mut mask = Vec::with_capacity(n * n);
    for i in 0..n * n {
        let (x, y) = pixel_coords(n, i);
        let r2 = x * x + y * y;
        let (height, p, q, inside) = match spec.shape {
            Shape::Sphere { radius } => {
                let rr = radius * radius;
                if r2 < rr {
                    let h = (rr - r2).sqrt();
                    (h, -x / h, -y / h, true)
                } else {
                    (0.0, 0.0, 0.0, !spec.background)
                }
            }
            Shape::Paraboloid { curvature } => {
                let c = curvature;
                (-c * r2, -2.0 * c * x, -2.0 * c * y, !spec.background || r2 < support)
            }
            Shape::Ramp { slope } => (slope * x, slope, 0.0, !spec.background || r2 < support),
            Shape::Sinusoid {
                frequency,
                amplitude,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                (
                    amplitude * ((w * x).cos() + (w * y).cos()),
                    -amplitude * w * (w * x).sin(),
                    -amplitude * w * (w * y).sin(),
                    !spec.background || r2 < support,
                )
            }
        };
        z.push(height);
        slopes.push((p, q));
        mask.push(inside);
    }
    let mask = Mask::new(n, n, mask)?;
    if mask.is_empty() {
        return Err(Error::Empty("scene mask"));
    }
    let vectors: Vec<Vec3> = slopes
        .iter()
        .zip(mask.bits())
        .map(|(&(p, q), &on)| if on { Vec3::new(-p, -q, 1.0) } else { Vec3::z() })
        .collect();
    let normals = NormalField::from_vectors(n, n, &vectors)?;
    let albedo_values = (0..n * n)
        .map(|i| match spec.albedo {
            AlbedoSpec::Constant(a) => a,
            AlbedoSpec::TwoTone(a, b) => {
                if i % n < n / 2 {
                    a
                } else {
                    b
                }
            }
        })
        .collect();
    Ok(GroundTruth {
        depth: DepthMap::new(z, mask.clone())?,
        normals,
        albedo: AlbedoMap::new(n, n, albedo_values)?,
        mask,
    })
}

/// One image per light: `alpha (k_d max(0, s.n) + k_s max(0, h.n)^r)`,
/// clamped to `[0, 1]`, zero off the mask.
pub fn render(truth: &GroundTruth, spec: &RenderSpec) -> Result<Vec<IntensityImage>> {
    spec.validate()?;
    let (w, h) = (truth.normals.width(), truth.normals.height());
    let kd = 1.0 - spec.specular;
    spec.lights
        .iter()
        .map(|s| {
            let half = halfway_vector(s, &spec.view)?;
            let values = truth
                .normals
                .normals()
                .iter()
                .zip(truth.albedo.values())
                .zip(truth.mask.bits())
                .map(|((n, a), &on)| {
                    if !on {
                        return 0.0;
                    }
                    let shade = kd * s.dot(n).max(0.0)
                        + spec.specular * half.dot(n).max(0.0).powf(spec.exponent);
                    let v = (a * shade).clamp(0.0, 1.0);
                    if spec.quantize {
                        (v * 255.0).round() / 255.0
                    } else {
                        v
                    }
                })
                .collect();
            IntensityImage::new(w, h, values)
        })
        .collect()
}

/// Head-on light plus four lights tilted 30 degrees at 90-degree azimuth steps.
pub fn canonical_lights() -> Vec<Direction> {
    let tilt = 30f64.to_radians();
    let mut lights = vec![Direction::new_unchecked(Vec3::z())];
    for k in 0..4 {
        let az = k as f64 * std::f64::consts::FRAC_PI_2;
        lights.push(Direction::new_normalize(Vec3::new(
            tilt.sin() * az.cos(),
            tilt.sin() * az.sin(),
            tilt.cos(),
        )));
    }
    lights
}

/// Dataset A: one Lambertian sphere, unit albedo, five lights, 64 x 64.
pub fn canonical_sphere() -> (SceneSpec, RenderSpec) {
    let scene = SceneSpec {
        shape: Shape::Sphere {
            radius: CANONICAL_SIZE as f64 / 2.0 - 1.0,
        },
        size: CANONICAL_SIZE,
        albedo: AlbedoSpec::Constant(1.0),
        background: true,
    };
    let render = RenderSpec {
        lights: canonical_lights(),
        view: Direction::new_unchecked(Vec3::z()),
        specular: 0.0,
        exponent: 2.0,
        quantize: true,
    };
    (scene, render)
}

/// Dataset B: five objects under three lights each, 64 x 64.
pub fn canonical_objects() -> (Vec<SceneSpec>, RenderSpec) {
    let size = CANONICAL_SIZE;
    let shapes = [
        Shape::Sphere { radius: 31.0 },
        Shape::Sphere { radius: 24.0 },
        Shape::Paraboloid { curvature: 0.02 },
        Shape::Ramp { slope: 0.4 },
        Shape::Sinusoid {
            frequency: 1.0 / 32.0,
            amplitude: 2.0,
        },
    ];
    let scenes = shapes
        .iter()
        .map(|&shape| SceneSpec {
            shape,
            size,
            albedo: AlbedoSpec::Constant(1.0),
            background: true,
        })
        .collect();
    let lights = [(0.0, 0.0, 1.0), (0.4, 0.2, 1.0), (-0.3, 0.35, 1.0)]
        .iter()
        .map(|&(x, y, z)| direction(x, y, z).expect("nonzero light"))
        .collect();
    let render = RenderSpec {
        lights,
        view: Direction::new_unchecked(Vec3::z()),
        specular: 0.0,
        exponent: 2.0,
        quantize: true,
    };
    (scenes, render)
}
