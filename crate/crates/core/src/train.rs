//! Supervised training of the hybrid model.
//!
//! Per image: one forward pass through both subnetworks, then the
//! combination weights and both normal fields are moved along the residual
//! `D - R_hybrid` of that pass. Mirror weights are re-solved once per epoch
//! by least squares. The learning rate is fixed, heavy-ball accelerated, or
//! adapted from the last three epoch errors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    hybrid_normals, unit_or_degenerate, AlbedoMap, CombinationWeights, Direction,
    HybridModel, IntensityImage, MirrorWeights, NormalField, OutputLayer, Reflectance,
    SubnetworkParams, Vec3, DEFAULT_LAMBDA_FLOOR,
};

/// Smallest singular value of the normal matrix accepted by the mirror solve.
pub const RANK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMode {
    Fixed,
    Momentum,
    Adaptive,
}

/// Specular normal update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// `2 eta r h_j (D - R)`: the leading factor of the lobe derivative.
    Leading,
    /// `Leading` times `max(0, h . n)^(r-1)`, the exact lobe derivative.
    FullGradient,
}

/// Starting normal field before noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every normal starts at +z.
    Flat,
    /// Normals tilt away from the image center, `(k x / size, k y / size, 1)`.
    Dome,
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($ty),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(OptimizerMode { "fixed" => Fixed, "momentum" => Momentum, "adaptive" => Adaptive });
keyword_enum!(UpdateMode { "leading" => Leading, "full_gradient" => FullGradient });
keyword_enum!(InitMode { "flat" => Flat, "dome" => Dome });
keyword_enum!(OutputLayer { "minmax" => MinMax, "bypass" => Bypass });

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta0: f64,
    /// Learning-rate step of the adaptive rule.
    pub xi: f64,
    pub max_epochs: usize,
    /// Stop once consecutive epoch errors differ by less than this.
    pub stop_tol: f64,
    pub optimizer: OptimizerMode,
    pub momentum: f64,
    pub eta_floor: f64,
    pub update_mode: UpdateMode,
    pub seed: u64,
    pub init: InitMode,
    pub init_slope: f64,
    /// Half-width of the uniform noise added to each initial component.
    pub init_noise: f64,
    /// Specular lobe exponent `r` of the model.
    pub exponent: f64,
    pub view: Direction,
    pub lambda_floor: f64,
    /// Pin the combination weights at `(1 - floor, floor)`.
    pub diffuse_only: bool,
    pub output: OutputLayer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 0.005,
            xi: 0.00025,
            max_epochs: 500,
            stop_tol: 0.0,
            optimizer: OptimizerMode::Adaptive,
            momentum: 0.9,
            eta_floor: 1e-6,
            update_mode: UpdateMode::Leading,
            seed: 7,
            init: InitMode::Dome,
            init_slope: 1.0,
            init_noise: 0.05,
            exponent: 2.0,
            view: Direction::new_unchecked(Vec3::z()),
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
            diffuse_only: false,
            output: OutputLayer::MinMax,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.eta_floor > 0.0) {
            return fail(format!("eta_floor must be > 0, got {}", self.eta_floor));
        }
        if !(self.eta0 > self.eta_floor) {
            return fail(format!(
                "eta0 ({}) must exceed eta_floor ({})",
                self.eta0, self.eta_floor
            ));
        }
        if self.max_epochs < 1 {
            return fail("max_epochs must be >= 1".into());
        }
        if !(self.xi >= 0.0) {
            return fail(format!("xi must be >= 0, got {}", self.xi));
        }
        if !(self.stop_tol >= 0.0) {
            return fail(format!("stop_tol must be >= 0, got {}", self.stop_tol));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.exponent >= 1.0) {
            return fail(format!("model exponent must be >= 1, got {}", self.exponent));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor < 0.5) {
            return fail(format!(
                "lambda_floor must lie in (0, 0.5), got {}",
                self.lambda_floor
            ));
        }
        if !(self.init_noise >= 0.0 && self.init_slope >= 0.0) {
            return fail("init_noise and init_slope must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochEntry {
    pub epoch: usize,
    pub error: f64,
    pub eta: f64,
}

/// Per-epoch error and learning rate. Epoch 0 is the untrained model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainRecord {
    entries: Vec<EpochEntry>,
}

impl TrainRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, epoch: usize, error: f64, eta: f64) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if epoch <= last.epoch {
                return Err(Error::Config(format!(
                    "record epochs must increase ({epoch} after {})",
                    last.epoch
                )));
            }
        }
        if !(error.is_finite() && error >= 0.0) {
            return Err(Error::OutOfRange {
                what: "epoch error",
                pixel: epoch,
                value: error,
                range: "finite, >= 0",
            });
        }
        self.entries.push(EpochEntry { epoch, error, eta });
        Ok(())
    }

    pub fn entries(&self) -> &[EpochEntry] {
        &self.entries
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.error)
    }

    pub fn last(&self) -> Option<&EpochEntry> {
        self.entries.last()
    }

    pub fn first(&self) -> Option<&EpochEntry> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: HybridModel,
    pub record: TrainRecord,
    /// Layer-4 light direction of the diffuse subnetwork, one per image.
    pub lights: Vec<Direction>,
    /// Number of forward passes whose layer 6 saw a constant map.
    pub flat_reflectance_events: usize,
}

impl TrainedModel {
    pub fn normals(&self) -> Result<NormalField> {
        hybrid_normals(&self.model)
    }
}

/// `E_T = sum (R_hybrid - D)^2`.
pub fn total_error(hybrid: &[f64], desired: &IntensityImage) -> Result<f64> {
    if hybrid.len() != desired.len() {
        return Err(Error::Shape {
            what: "network output",
            expected: desired.len(),
            found: hybrid.len(),
        });
    }
    Ok(hybrid
        .iter()
        .zip(desired.values())
        .map(|(r, d)| (r - d) * (r - d))
        .sum())
}

/// Least-squares encoder weights `W = V (V^T V)^-1` for the normal matrix `V`.
///
/// With these weights layer 3 inverts layer 5: an image `V s` maps back to `s`.
pub fn refresh_mirror_weights(normals: &NormalField) -> Result<MirrorWeights> {
    let gram = normals
        .normals()
        .iter()
        .fold(Matrix3::zeros(), |acc, n| acc + n.into_inner() * n.transpose());
    let eig = SymmetricEigen::new(gram);
    let sigma_min = eig.eigenvalues.min().max(0.0).sqrt();
    if !(sigma_min > RANK_EPS) {
        return Err(Error::DegenerateGeometry { sigma: sigma_min });
    }
    let inv = gram
        .try_inverse()
        .ok_or(Error::DegenerateGeometry { sigma: sigma_min })?;
    MirrorWeights::new(normals.normals().iter().map(|n| inv * n.into_inner()).collect())
}

/// Raw combination-weight steps `2 eta (D - R) R_d` and `2 eta (D - R) R_s`.
pub fn lambda_deltas(
    desired: &[f64],
    hybrid: &[f64],
    diffuse: &[f64],
    specular: &[f64],
    eta: f64,
) -> (Vec<f64>, Vec<f64>) {
    desired
        .iter()
        .zip(hybrid)
        .zip(diffuse.iter().zip(specular))
        .map(|((d, r), (rd, rs))| {
            let g = 2.0 * eta * (d - r);
            (g * rd, g * rs)
        })
        .unzip()
}

pub fn apply_lambda_deltas(
    lambdas: &CombinationWeights,
    delta_diffuse: &[f64],
    delta_specular: &[f64],
) -> Result<CombinationWeights> {
    let raw_d: Vec<f64> = lambdas
        .diffuse()
        .iter()
        .zip(delta_diffuse)
        .map(|(l, d)| l + d)
        .collect();
    let raw_s: Vec<f64> = lambdas
        .specular()
        .iter()
        .zip(delta_specular)
        .map(|(l, d)| l + d)
        .collect();
    CombinationWeights::from_raw(&raw_d, &raw_s, lambdas.floor())
}

pub fn update_lambdas(
    lambdas: &CombinationWeights,
    desired: &IntensityImage,
    hybrid: &[f64],
    diffuse: &[f64],
    specular: &[f64],
    eta: f64,
) -> Result<CombinationWeights> {
    let m = lambdas.len();
    for (what, len) in [
        ("desired image", desired.len()),
        ("network output", hybrid.len()),
        ("diffuse reflectance", diffuse.len()),
        ("specular reflectance", specular.len()),
    ] {
        if len != m {
            return Err(Error::Shape {
                what,
                expected: m,
                found: len,
            });
        }
    }
    let (dd, ds) = lambda_deltas(desired.values(), hybrid, diffuse, specular, eta);
    apply_lambda_deltas(lambdas, &dd, &ds)
}

/// Diffuse normal steps `2 eta s (D_k - R_k)`.
pub fn diffuse_normal_deltas(s: &Direction, desired: &[f64], hybrid: &[f64], eta: f64) -> Vec<Vec3> {
    desired
        .iter()
        .zip(hybrid)
        .map(|(d, r)| s.into_inner() * (2.0 * eta * (d - r)))
        .collect()
}

/// Specular normal steps `2 eta r h (D_k - R_k)`, optionally times
/// `max(0, h . n_k)^(r-1)`.
pub fn specular_normal_deltas(
    normals: &NormalField,
    h: &Direction,
    exponent: f64,
    desired: &[f64],
    hybrid: &[f64],
    eta: f64,
    mode: UpdateMode,
) -> Vec<Vec3> {
    desired
        .iter()
        .zip(hybrid)
        .zip(normals.normals())
        .map(|((d, r), n)| {
            let mut g = 2.0 * eta * exponent * (d - r);
            if mode == UpdateMode::FullGradient {
                g *= h.dot(n).max(0.0).powf(exponent - 1.0);
            }
            h.into_inner() * g
        })
        .collect()
}

/// Adds the steps and renormalizes every normal.
pub fn apply_normal_deltas(normals: &NormalField, deltas: &[Vec3]) -> Result<NormalField> {
    if deltas.len() != normals.len() {
        return Err(Error::Shape {
            what: "normal update",
            expected: normals.len(),
            found: deltas.len(),
        });
    }
    let updated = normals
        .normals()
        .iter()
        .zip(deltas)
        .enumerate()
        .map(|(pixel, (n, d))| unit_or_degenerate(n.into_inner() + d, pixel))
        .collect::<Result<Vec<_>>>()?;
    NormalField::new(normals.width(), normals.height(), updated)
}

fn check_update_lengths(normals: &NormalField, desired: &IntensityImage, hybrid: &[f64]) -> Result<()> {
    if desired.len() != normals.len() || hybrid.len() != normals.len() {
        return Err(Error::Shape {
            what: "normal update",
            expected: normals.len(),
            found: desired.len().min(hybrid.len()),
        });
    }
    Ok(())
}

pub fn update_diffuse_normals(
    normals: &NormalField,
    s: &Direction,
    desired: &IntensityImage,
    hybrid: &[f64],
    eta: f64,
) -> Result<NormalField> {
    check_update_lengths(normals, desired, hybrid)?;
    apply_normal_deltas(normals, &diffuse_normal_deltas(s, desired.values(), hybrid, eta))
}

pub fn update_specular_normals(
    normals: &NormalField,
    h: &Direction,
    exponent: f64,
    desired: &IntensityImage,
    hybrid: &[f64],
    eta: f64,
    mode: UpdateMode,
) -> Result<NormalField> {
    check_update_lengths(normals, desired, hybrid)?;
    let deltas = specular_normal_deltas(normals, h, exponent, desired.values(), hybrid, eta, mode);
    apply_normal_deltas(normals, &deltas)
}

/// Adjusts the learning rate from the three most recent epoch errors.
///
/// Grows by `xi` when the newest error is below both predecessors, shrinks by
/// `xi` (never under `floor`) when it is above both, and is otherwise kept.
/// With fewer than three errors the rate is returned unchanged.
pub fn adapt_learning_rate(errors: &[f64], eta: f64, xi: f64, floor: f64) -> f64 {
    let [e2, e1, e0] = match errors {
        [.., a, b, c] => [*a, *b, *c],
        _ => return eta,
    };
    if e1 > e0 && e2 > e0 {
        eta + xi
    } else if e1 < e0 && e2 < e0 {
        (eta - xi).max(floor)
    } else {
        eta
    }
}

/// Starting model: perturbed flat or dome normals, equal weights and
/// least-squares mirror weights.
pub fn initial_model(albedo: &AlbedoMap, config: &TrainConfig) -> Result<HybridModel> {
    config.validate()?;
    let (w, h) = (albedo.width(), albedo.height());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let size = w.max(h) as f64;
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut field = || -> Result<NormalField> {
        let mut vectors = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let base = match config.init {
                    InitMode::Flat => Vec3::z(),
                    InitMode::Dome => Vec3::new(
                        config.init_slope * (x as f64 - cx) / size,
                        config.init_slope * (y as f64 - cy) / size,
                        1.0,
                    ),
                };
                let noise = if config.init_noise > 0.0 {
                    let a = config.init_noise;
                    Vec3::new(
                        rng.random_range(-a..=a),
                        rng.random_range(-a..=a),
                        rng.random_range(-a..=a),
                    )
                } else {
                    Vec3::zeros()
                };
                vectors.push(base + noise);
            }
        }
        NormalField::from_vectors(w, h, &vectors)
    };
    let diffuse_normals = field()?;
    let specular_normals = field()?;
    let diffuse = SubnetworkParams::new(Reflectance::Diffuse, diffuse_normals)?;
    let specular = SubnetworkParams::new(
        Reflectance::Specular {
            exponent: config.exponent,
            view: config.view,
        },
        specular_normals,
    )?;
    let lambdas = if config.diffuse_only {
        CombinationWeights::pinned_diffuse(w * h, config.lambda_floor)
    } else {
        CombinationWeights::uniform(w * h, config.lambda_floor)
    };
    HybridModel::new(diffuse, specular, lambdas, albedo.clone())
}

/// Mean total error of the model over the images.
pub fn model_error(model: &HybridModel, images: &[IntensityImage], output: OutputLayer) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::Empty("image list"));
    }
    let mut sum = 0.0;
    for img in images {
        let fwd = model.forward(img, output)?;
        sum += total_error(&fwd.combined, img)?;
    }
    Ok(sum / images.len() as f64)
}

/// Heavy-ball accumulators for every updated parameter.
#[derive(Debug, Clone)]
struct Velocity {
    lambda_d: Vec<f64>,
    lambda_s: Vec<f64>,
    normal_d: Vec<Vec3>,
    normal_s: Vec<Vec3>,
}

impl Velocity {
    fn zeros(m: usize) -> Self {
        Self {
            lambda_d: vec![0.0; m],
            lambda_s: vec![0.0; m],
            normal_d: vec![Vec3::zeros(); m],
            normal_s: vec![Vec3::zeros(); m],
        }
    }
}

fn accumulate<T>(velocity: &mut [T], delta: &mut [T], coeff: f64)
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    for (v, d) in velocity.iter_mut().zip(delta.iter_mut()) {
        *v = *v * coeff + *d;
        *d = *v;
    }
}

struct EpochOutcome {
    model: HybridModel,
    error: f64,
    flat_events: usize,
}

fn check_images(model: &HybridModel, images: &[IntensityImage]) -> Result<()> {
    if images.is_empty() {
        return Err(Error::Empty("image list"));
    }
    for img in images {
        if img.width() != model.width() || img.height() != model.height() {
            return Err(Error::Shape {
                what: "training image",
                expected: model.len(),
                found: img.len(),
            });
        }
    }
    Ok(())
}

fn run_epoch(
    model: &HybridModel,
    images: &[IntensityImage],
    config: &TrainConfig,
    eta: f64,
    mut velocity: Option<&mut Velocity>,
    epoch: usize,
) -> Result<EpochOutcome> {
    check_images(model, images)?;
    let mut model = model.clone();
    let mut flat_events = 0;
    let wrap = |image: usize| {
        move |source: Error| Error::Training {
            epoch,
            image,
            source: Box::new(source),
        }
    };
    for (index, img) in images.iter().enumerate() {
        let fwd = model.forward(img, config.output).map_err(wrap(index))?;
        flat_events += usize::from(fwd.diffuse.flat) + usize::from(fwd.specular.flat);
        let desired = img.values();

        let (mut dld, mut dls) = lambda_deltas(
            desired,
            &fwd.combined,
            &fwd.diffuse.reflectance,
            &fwd.specular.reflectance,
            eta,
        );
        let mut dnd = diffuse_normal_deltas(&fwd.diffuse.direction, desired, &fwd.combined, eta);
        let halfway = fwd
            .specular
            .halfway
            .expect("specular forward pass always has a halfway vector");
        let mut dns = specular_normal_deltas(
            &model.specular.normals,
            &halfway,
            config.exponent,
            desired,
            &fwd.combined,
            eta,
            config.update_mode,
        );

        if let Some(v) = velocity.as_deref_mut() {
            let mu = config.momentum;
            accumulate(&mut v.lambda_d, &mut dld, mu);
            accumulate(&mut v.lambda_s, &mut dls, mu);
            accumulate(&mut v.normal_d, &mut dnd, mu);
            accumulate(&mut v.normal_s, &mut dns, mu);
        }

        if !config.diffuse_only {
            model.lambdas = apply_lambda_deltas(&model.lambdas, &dld, &dls)?;
        }
        model.diffuse.normals =
            apply_normal_deltas(&model.diffuse.normals, &dnd).map_err(wrap(index))?;
        model.specular.normals =
            apply_normal_deltas(&model.specular.normals, &dns).map_err(wrap(index))?;
    }
    model.diffuse.mirror = refresh_mirror_weights(&model.diffuse.normals)?;
    model.specular.mirror = refresh_mirror_weights(&model.specular.normals)?;
    model.validate()?;
    let error = model_error(&model, images, config.output).map_err(wrap(images.len()))?;
    Ok(EpochOutcome {
        model,
        error,
        flat_events,
    })
}

/// One pass over `images` in order, followed by the mirror-weight refresh.
///
/// Returns the updated model and its mean total error. Momentum state is not
/// carried between calls; use [`Trainer`] for that.
pub fn train_epoch(
    model: &HybridModel,
    images: &[IntensityImage],
    config: &TrainConfig,
    eta: f64,
) -> Result<(HybridModel, f64)> {
    let mut velocity = (config.optimizer == OptimizerMode::Momentum).then(|| Velocity::zeros(model.len()));
    let out = run_epoch(model, images, config, eta, velocity.as_mut(), 1)?;
    Ok((out.model, out.error))
}

/// Epoch-by-epoch driver holding the model, record and optimizer state.
pub struct Trainer<'a> {
    images: &'a [IntensityImage],
    config: TrainConfig,
    model: HybridModel,
    record: TrainRecord,
    eta: f64,
    epoch: usize,
    velocity: Option<Velocity>,
    flat_events: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(images: &'a [IntensityImage], albedo: &AlbedoMap, config: TrainConfig) -> Result<Self> {
        let model = initial_model(albedo, &config)?;
        Self::from_model(images, model, config)
    }

    /// Starts from an existing model instead of the configured initialization.
    pub fn from_model(images: &'a [IntensityImage], model: HybridModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        check_images(&model, images)?;
        model.validate()?;
        let initial = model_error(&model, images, config.output)?;
        let mut record = TrainRecord::new();
        if !initial.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                record: Box::new(record),
            });
        }
        record.push(0, initial, config.eta0)?;
        let velocity = (config.optimizer == OptimizerMode::Momentum).then(|| Velocity::zeros(model.len()));
        Ok(Self {
            images,
            eta: config.eta0,
            config,
            model,
            record,
            epoch: 0,
            velocity,
            flat_events: 0,
        })
    }

    pub fn model(&self) -> &HybridModel {
        &self.model
    }

    pub fn record(&self) -> &TrainRecord {
        &self.record
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// True once the epoch budget is spent or the error has plateaued.
    pub fn is_done(&self) -> bool {
        if self.epoch >= self.config.max_epochs {
            return true;
        }
        match self.record.entries() {
            [.., a, b] if self.epoch >= 1 => (a.error - b.error).abs() < self.config.stop_tol,
            _ => false,
        }
    }

    /// Runs one epoch and returns its error.
    pub fn step(&mut self) -> Result<f64> {
        let epoch = self.epoch + 1;
        let out = run_epoch(
            &self.model,
            self.images,
            &self.config,
            self.eta,
            self.velocity.as_mut(),
            epoch,
        )?;
        if !out.error.is_finite() {
            return Err(Error::Divergence {
                epoch,
                record: Box::new(self.record.clone()),
            });
        }
        self.record.push(epoch, out.error, self.eta)?;
        self.model = out.model;
        self.epoch = epoch;
        self.flat_events += out.flat_events;
        if self.config.optimizer == OptimizerMode::Adaptive {
            let errors: Vec<f64> = self.record.errors().collect();
            self.eta = adapt_learning_rate(&errors, self.eta, self.config.xi, self.config.eta_floor);
        }
        Ok(out.error)
    }

    pub fn run(mut self) -> Result<TrainedModel> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<TrainedModel> {
        let lights = self
            .images
            .iter()
            .map(|img| {
                crate::model::forward_subnetwork(
                    &self.model.diffuse,
                    img,
                    &self.model.albedo,
                    self.config.output,
                )
                .map(|t| t.direction)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainedModel {
            model: self.model,
            record: self.record,
            lights,
            flat_reflectance_events: self.flat_events,
        })
    }
}

pub fn train(images: &[IntensityImage], albedo: &AlbedoMap, config: &TrainConfig) -> Result<TrainedModel> {
    Trainer::new(images, albedo, config.clone())?.run()
}
