//! Domain types and the forward passes of the two mirror-symmetric
//! subnetworks and the hybrid combiner.
//!
//! Every per-pixel quantity is stored in row-major order. A subnetwork maps an
//! image to a light estimate through its mirror weights (layers 1-4) and back
//! to a reflectance map through its per-pixel normals (layers 5-6).

use nalgebra::{Unit, Vector3};

use crate::error::{Error, Result};
use crate::train::refresh_mirror_weights;

pub type Vec3 = Vector3<f64>;

/// A unit 3-vector: light, view, halfway or surface normal direction.
pub type Direction = Unit<Vec3>;

/// Norms below this are treated as zero when normalizing directions.
pub const NORM_EPS: f64 = 1e-12;

/// Default lower bound on each combination weight.
pub const DEFAULT_LAMBDA_FLOOR: f64 = 1e-6;

/// Tolerance used when checking stored unit vectors and weight sums.
pub const INVARIANT_TOL: f64 = 1e-9;

pub fn direction(x: f64, y: f64, z: f64) -> Result<Direction> {
    normalize_direction(Vec3::new(x, y, z))
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("image"));
        }
        check_len("image", width * height, values.len())?;
        if let Some((pixel, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange {
                what: "intensity",
                pixel,
                value,
                range: "[0, 1]",
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Layer 1: scales 8-bit samples to `[0, 1]`.
    pub fn from_gray8(width: usize, height: usize, raw: &[u8]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("image"));
        }
        let values = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, values)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Alias for [`IntensityImage::from_gray8`].
pub fn normalize_image(width: usize, height: usize, raw: &[u8]) -> Result<IntensityImage> {
    IntensityImage::from_gray8(width, height, raw)
}

/// Per-pixel albedo in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlbedoMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AlbedoMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("albedo map"));
        }
        check_len("albedo map", width * height, values.len())?;
        if let Some((pixel, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v <= 1.0))
        {
            return Err(Error::OutOfRange {
                what: "albedo",
                pixel,
                value,
                range: "(0, 1]",
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Unit normals, one per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    width: usize,
    height: usize,
    normals: Vec<Direction>,
}

impl NormalField {
    pub fn new(width: usize, height: usize, normals: Vec<Direction>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("normal field"));
        }
        check_len("normal field", width * height, normals.len())?;
        Ok(Self {
            width,
            height,
            normals,
        })
    }

    /// Normalizes every vector, failing on the first near-zero one.
    pub fn from_vectors(width: usize, height: usize, vectors: &[Vec3]) -> Result<Self> {
        let normals = vectors
            .iter()
            .enumerate()
            .map(|(pixel, v)| unit_or_degenerate(*v, pixel))
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, normals)
    }

    pub fn uniform(width: usize, height: usize, n: Direction) -> Self {
        Self {
            width,
            height,
            normals: vec![n; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normals(&self) -> &[Direction] {
        &self.normals
    }

    pub fn get(&self, pixel: usize) -> &Direction {
        &self.normals[pixel]
    }

    /// Largest deviation of any stored normal from unit length.
    pub fn max_norm_deviation(&self) -> f64 {
        self.normals
            .iter()
            .map(|n| (n.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn unit_or_degenerate(v: Vec3, pixel: usize) -> Result<Direction> {
    let norm = v.norm();
    if norm >= NORM_EPS && norm.is_finite() {
        Ok(Unit::new_unchecked(v / norm))
    } else {
        Err(Error::DegenerateNormal { pixel, norm })
    }
}

/// Encoder weights between layers 2 and 3: an m x 3 matrix stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorWeights {
    rows: Vec<Vec3>,
}

impl MirrorWeights {
    pub fn new(rows: Vec<Vec3>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("mirror weights"));
        }
        if let Some(pixel) = rows.iter().position(|r| !r.iter().all(|v| v.is_finite())) {
            return Err(Error::OutOfRange {
                what: "mirror weight",
                pixel,
                value: f64::NAN,
                range: "finite values",
            });
        }
        Ok(Self { rows })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            rows: vec![Vec3::zeros(); m],
        }
    }

    pub fn rows(&self) -> &[Vec3] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-pixel convex mixing weights between the diffuse and specular outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    diffuse: Vec<f64>,
    specular: Vec<f64>,
    floor: f64,
}

impl CombinationWeights {
    pub fn new(diffuse: Vec<f64>, specular: Vec<f64>, floor: f64) -> Result<Self> {
        check_len("combination weights", diffuse.len(), specular.len())?;
        let w = Self {
            diffuse,
            specular,
            floor,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(m: usize, floor: f64) -> Self {
        Self {
            diffuse: vec![0.5; m],
            specular: vec![0.5; m],
            floor,
        }
    }

    /// Diffuse weight `1 - floor`, specular weight at the floor.
    pub fn pinned_diffuse(m: usize, floor: f64) -> Self {
        Self {
            diffuse: vec![1.0 - floor; m],
            specular: vec![floor; m],
            floor,
        }
    }

    /// Floors each raw weight and rescales every pair to sum to one. Rescaling
    /// can push a floored weight back under the floor when its partner is
    /// large, so the pair is then clamped to `[floor, 1 - floor]`.
    pub fn from_raw(raw_diffuse: &[f64], raw_specular: &[f64], floor: f64) -> Result<Self> {
        check_len(
            "combination weights",
            raw_diffuse.len(),
            raw_specular.len(),
        )?;
        let (diffuse, specular) = raw_diffuse
            .iter()
            .zip(raw_specular)
            .map(|(&d, &s)| {
                let d = d.max(floor);
                let s = s.max(floor);
                let d = (d / (d + s)).clamp(floor, 1.0 - floor);
                (d, 1.0 - d)
            })
            .unzip();
        Ok(Self {
            diffuse,
            specular,
            floor,
        })
    }

    pub fn diffuse(&self) -> &[f64] {
        &self.diffuse
    }

    pub fn specular(&self) -> &[f64] {
        &self.specular
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.diffuse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffuse.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        // Weights that are exactly at the floor may round a hair below it.
        let floor = self.floor * (1.0 - 1e-12);
        for (pixel, (&d, &s)) in self.diffuse.iter().zip(&self.specular).enumerate() {
            if (d + s - 1.0).abs() > INVARIANT_TOL {
                return Err(Error::OutOfRange {
                    what: "combination weight sum",
                    pixel,
                    value: d + s,
                    range: "1 +/- 1e-9",
                });
            }
            if !(d >= floor && s >= floor) {
                return Err(Error::OutOfRange {
                    what: "combination weight",
                    pixel,
                    value: d.min(s),
                    range: "[floor, 1]",
                });
            }
        }
        Ok(())
    }
}

/// Which reflectance law a subnetwork's layer 5 applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflectance {
    Diffuse,
    Specular { exponent: f64, view: Direction },
}

/// How layer 6 maps raw reflectance to the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputLayer {
    /// Min-max normalization to `[0, 1]`.
    #[default]
    MinMax,
    /// Pass raw layer-5 reflectance through unchanged.
    Bypass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubnetworkParams {
    pub reflectance: Reflectance,
    pub normals: NormalField,
    pub mirror: MirrorWeights,
}

impl SubnetworkParams {
    /// Builds a subnetwork whose mirror weights are the least-squares
    /// inverse of `normals`.
    pub fn new(reflectance: Reflectance, normals: NormalField) -> Result<Self> {
        let mirror = refresh_mirror_weights(&normals)?;
        Self::with_mirror(reflectance, normals, mirror)
    }

    pub fn with_mirror(
        reflectance: Reflectance,
        normals: NormalField,
        mirror: MirrorWeights,
    ) -> Result<Self> {
        check_len("mirror weights", normals.len(), mirror.len())?;
        if let Reflectance::Specular { exponent, .. } = reflectance {
            if !(exponent >= 1.0) {
                return Err(Error::Config(format!(
                    "specular exponent must be >= 1, got {exponent}"
                )));
            }
        }
        Ok(Self {
            reflectance,
            normals,
            mirror,
        })
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn is_specular(&self) -> bool {
        matches!(self.reflectance, Reflectance::Specular { .. })
    }
}

/// Both subnetworks, the per-pixel mixing weights and the albedo the input
/// is corrected with.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub diffuse: SubnetworkParams,
    pub specular: SubnetworkParams,
    pub lambdas: CombinationWeights,
    pub albedo: AlbedoMap,
}

impl HybridModel {
    pub fn new(
        diffuse: SubnetworkParams,
        specular: SubnetworkParams,
        lambdas: CombinationWeights,
        albedo: AlbedoMap,
    ) -> Result<Self> {
        let model = Self {
            diffuse,
            specular,
            lambdas,
            albedo,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    pub fn len(&self) -> usize {
        self.albedo.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks every structural and numerical invariant of the model.
    pub fn validate(&self) -> Result<()> {
        if self.diffuse.is_specular() {
            return Err(Error::Config("diffuse subnetwork has a specular law".into()));
        }
        if !self.specular.is_specular() {
            return Err(Error::Config("specular subnetwork has a diffuse law".into()));
        }
        let m = self.len();
        check_len("diffuse normals", m, self.diffuse.normals.len())?;
        check_len("specular normals", m, self.specular.normals.len())?;
        check_len("diffuse mirror weights", m, self.diffuse.mirror.len())?;
        check_len("specular mirror weights", m, self.specular.mirror.len())?;
        check_len("combination weights", m, self.lambdas.len())?;
        for field in [&self.diffuse.normals, &self.specular.normals] {
            if let Some(pixel) = field
                .normals()
                .iter()
                .position(|n| (n.norm() - 1.0).abs() > INVARIANT_TOL)
            {
                return Err(Error::DegenerateNormal {
                    pixel,
                    norm: field.get(pixel).norm(),
                });
            }
        }
        self.lambdas.validate()
    }

    pub fn forward(&self, img: &IntensityImage, output: OutputLayer) -> Result<HybridForward> {
        let diffuse = forward_subnetwork(&self.diffuse, img, &self.albedo, output)?;
        let specular = forward_subnetwork(&self.specular, img, &self.albedo, output)?;
        let combined = hybrid_combine(&diffuse.reflectance, &specular.reflectance, &self.lambdas)?;
        Ok(HybridForward {
            diffuse,
            specular,
            combined,
        })
    }
}

/// Activations of every layer of one subnetwork forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Layer 1.
    pub input: Vec<f64>,
    /// Layer 2: albedo-corrected intensities.
    pub corrected: Vec<f64>,
    /// Layer 3: un-normalized light direction.
    pub raw_direction: Vec3,
    /// Layer 4: unit light direction.
    pub direction: Direction,
    /// Halfway vector used by the specular layer 5.
    pub halfway: Option<Direction>,
    /// Layer 5.
    pub raw_reflectance: Vec<f64>,
    /// Layer 6.
    pub reflectance: Vec<f64>,
    /// Set when layer 6 saw a constant map and emitted zeros.
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridForward {
    pub diffuse: ForwardTrace,
    pub specular: ForwardTrace,
    pub combined: Vec<f64>,
}

/// Layer 2: `I / alpha`. The result is not clamped.
pub fn albedo_correct(img: &IntensityImage, albedo: &AlbedoMap) -> Result<Vec<f64>> {
    if img.width() != albedo.width() || img.height() != albedo.height() {
        return Err(Error::Shape {
            what: "albedo map",
            expected: img.len(),
            found: albedo.values().len(),
        });
    }
    Ok(img
        .values()
        .iter()
        .zip(albedo.values())
        .map(|(i, a)| i / a)
        .collect())
}

/// Layer 3: `s'_j = sum_i I_i w_ij`, summed in pixel order.
pub fn estimate_direction_raw(corrected: &[f64], mirror: &MirrorWeights) -> Result<Vec3> {
    check_len("layer-3 input", mirror.len(), corrected.len())?;
    Ok(corrected
        .iter()
        .zip(mirror.rows())
        .fold(Vec3::zeros(), |acc, (i, w)| acc + w * *i))
}

/// Layer 4.
pub fn normalize_direction(raw: Vec3) -> Result<Direction> {
    let norm = raw.norm();
    if norm > NORM_EPS && norm.is_finite() {
        Ok(Unit::new_unchecked(raw / norm))
    } else {
        Err(Error::DegenerateDirection {
            norm,
            eps: NORM_EPS,
        })
    }
}

/// Diffuse layer 5: `s . n_k`, left signed.
pub fn diffuse_reflectance(s: &Direction, normals: &NormalField) -> Vec<f64> {
    normals.normals().iter().map(|n| s.dot(n)).collect()
}

/// Specular layer 5: `max(0, h . n_k)^r`.
pub fn specular_reflectance(h: &Direction, normals: &NormalField, exponent: f64) -> Vec<f64> {
    normals
        .normals()
        .iter()
        .map(|n| h.dot(n).max(0.0).powf(exponent))
        .collect()
}

pub fn halfway_vector(s: &Direction, view: &Direction) -> Result<Direction> {
    normalize_direction(s.into_inner() + view.into_inner())
}

/// Layer 6: affine map of `raw` onto `[0, 1]`. A constant map yields zeros
/// and a `true` flag.
pub fn minmax_normalize(raw: &[f64]) -> (Vec<f64>, bool) {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return (vec![0.0; raw.len()], true);
    }
    let out = raw
        .iter()
        .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
        .collect();
    (out, false)
}

pub fn forward_subnetwork(
    params: &SubnetworkParams,
    img: &IntensityImage,
    albedo: &AlbedoMap,
    output: OutputLayer,
) -> Result<ForwardTrace> {
    check_len("image", params.len(), img.len())?;
    let input = img.values().to_vec();
    let corrected = albedo_correct(img, albedo)?;
    let raw_direction = estimate_direction_raw(&corrected, &params.mirror)?;
    let direction = normalize_direction(raw_direction)?;
    let (halfway, raw_reflectance) = match params.reflectance {
        Reflectance::Diffuse => (None, diffuse_reflectance(&direction, &params.normals)),
        Reflectance::Specular { exponent, view } => {
            let h = halfway_vector(&direction, &view)?;
            (Some(h), specular_reflectance(&h, &params.normals, exponent))
        }
    };
    let (reflectance, flat) = match output {
        OutputLayer::MinMax => minmax_normalize(&raw_reflectance),
        OutputLayer::Bypass => (raw_reflectance.clone(), false),
    };
    Ok(ForwardTrace {
        input,
        corrected,
        raw_direction,
        direction,
        halfway,
        raw_reflectance,
        reflectance,
        flat,
    })
}

pub fn hybrid_combine(
    diffuse: &[f64],
    specular: &[f64],
    lambdas: &CombinationWeights,
) -> Result<Vec<f64>> {
    check_len("specular reflectance", diffuse.len(), specular.len())?;
    check_len("combination weights", diffuse.len(), lambdas.len())?;
    Ok(diffuse
        .iter()
        .zip(specular)
        .zip(lambdas.diffuse().iter().zip(lambdas.specular()))
        .map(|((rd, rs), (ld, ls))| ld * rd + ls * rs)
        .collect())
}

/// Per-pixel convex combination of the two normal fields, renormalized.
pub fn hybrid_normals(model: &HybridModel) -> Result<NormalField> {
    let lambdas = &model.lambdas;
    let vectors = model
        .diffuse
        .normals
        .normals()
        .iter()
        .zip(model.specular.normals.normals())
        .zip(lambdas.diffuse().iter().zip(lambdas.specular()))
        .map(|((nd, ns), (ld, ls))| nd.into_inner() * *ld + ns.into_inner() * *ls)
        .collect::<Vec<_>>();
    NormalField::from_vectors(model.width(), model.height(), &vectors)
}
