//! The `sfs` command: synthesize, train, integrate and evaluate.
//!
//! Every subcommand reads the same `key = value` configuration (see
//! [`sfs_core::config`]), with `--set key=value` overrides applied on top.
//! Exit status is 0 on success, 1 for invalid input and 2 when the
//! numerics degenerate.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sfs_core::config::{PipelineConfig, RawConfig, SYNTH_REQUIRED, TRAIN_REQUIRED};
use sfs_core::io;
use sfs_core::metrics::{self, Estimate, EvalReport};
use sfs_core::scene::{make_height_field, render};
use sfs_core::train::{train, OptimizerMode, TrainRecord, TrainedModel};
use sfs_core::{
    integrate, normals_to_gradients, AlbedoMap, DepthMap, GroundTruth, IntensityImage, Mask, Method,
    NormalField,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sfs_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sfs", version, about = "Shape from shading with a hybrid reflectance network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scene and write images plus ground truth.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on a directory of graymaps and write the model.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory whose `*.pgm` files are read in name order.
        #[arg(long)]
        images: PathBuf,
        /// Albedo map; constant 1 when absent.
        #[arg(long)]
        albedo: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a normal field into a depth map and mesh.
    Integrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        normals: PathBuf,
        /// Object mask graymap; every pixel when absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model and its depth against ground truth.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Report file; printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run synth, train, integrate and eval in one go.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per optimizer with a shared seed and compare convergence.
    CompareOptimizers {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn load_config(args: &ConfigArgs, required: &[&str]) -> Result<PipelineConfig> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::parse(&fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?)?,
        None => RawConfig::default(),
    };
    for s in &args.set {
        raw.set(s)?;
    }
    Ok(PipelineConfig::from_raw(&raw, required)?)
}

fn out_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set out_dir".into()))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { cfg, out } => {
            let cfg = load_config(&cfg, SYNTH_REQUIRED)?;
            let dir = out_dir(out, &cfg)?;
            synth(&cfg, &dir)?;
        }
        Command::Train {
            cfg,
            images,
            albedo,
            out,
        } => {
            let cfg = load_config(&cfg, TRAIN_REQUIRED)?;
            let dir = out_dir(out, &cfg)?;
            let images = read_images(&images)?;
            let albedo = match albedo {
                Some(p) => io::read_albedo(&p)?,
                None => AlbedoMap::constant(images[0].width(), images[0].height(), 1.0)?,
            };
            let trained = train_and_log(&images, &albedo, &cfg)?;
            write_model(&dir, &trained)?;
        }
        Command::Integrate {
            cfg,
            normals,
            mask,
            method,
            out,
        } => {
            let cfg = load_config(&cfg, &[])?;
            let dir = out_dir(out, &cfg)?;
            let normals = io::read_normals(&normals)?;
            let mask = match mask {
                Some(p) => io::read_mask(&p)?,
                None => Mask::full(normals.width(), normals.height()),
            };
            integrate_to(&normals, &mask, method.unwrap_or(cfg.method), cfg.nz_floor, &dir)?;
        }
        Command::Eval {
            model,
            depth,
            truth,
            out,
        } => {
            let report = eval(&model, &depth, &truth)?;
            match out {
                Some(path) => io::write_report(&path, &report)?,
                None => print!("{}", io::format_report(&report)),
            }
            eprintln!("{report}");
        }
        Command::Pipeline { cfg, out } => {
            let mut required = SYNTH_REQUIRED.to_vec();
            required.extend(TRAIN_REQUIRED);
            let cfg = load_config(&cfg, &required)?;
            let dir = out_dir(out, &cfg)?;
            pipeline(&cfg, &dir)?;
        }
        Command::CompareOptimizers { cfg, out } => {
            let mut required = SYNTH_REQUIRED.to_vec();
            required.extend(TRAIN_REQUIRED);
            let cfg = load_config(&cfg, &required)?;
            let dir = out_dir(out, &cfg)?;
            compare_optimizers(&cfg, &dir)?;
        }
    }
    Ok(())
}

fn subdir(dir: &Path, name: &str) -> Result<PathBuf> {
    let d = dir.join(name);
    fs::create_dir_all(&d)?;
    Ok(d)
}

/// Writes `images/image_NN.pgm` and the `truth/` files.
pub fn synth(cfg: &PipelineConfig, dir: &Path) -> Result<(GroundTruth, Vec<IntensityImage>)> {
    let truth = make_height_field(&cfg.scene)?;
    let images = render(&truth, &cfg.render)?;
    let img_dir = subdir(dir, "images")?;
    for (k, img) in images.iter().enumerate() {
        io::write_image(&img_dir.join(format!("image_{k:02}.pgm")), img)?;
    }
    let t = subdir(dir, "truth")?;
    io::write_normals(&t.join("normals.nrm"), &truth.normals)?;
    io::write_depth(&t.join("depth.dpt"), &truth.depth)?;
    io::write_albedo(&t.join("albedo.alb"), &truth.albedo)?;
    io::write_mask(&t.join("mask.pgm"), &truth.mask)?;
    io::write_lights(&t.join("lights.lgt"), &cfg.render.lights)?;
    eprintln!("synth: {} images of {}x{}", images.len(), cfg.scene.size, cfg.scene.size);
    Ok((truth, images))
}

fn read_images(dir: &Path) -> Result<Vec<IntensityImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read image directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no .pgm images in {}", dir.display())));
    }
    paths.iter().map(|p| Ok(io::read_image(p)?)).collect()
}

fn train_and_log(images: &[IntensityImage], albedo: &AlbedoMap, cfg: &PipelineConfig) -> Result<TrainedModel> {
    let trained = train(images, albedo, &cfg.train)?;
    let first = trained.record.first().map_or(f64::NAN, |e| e.error);
    let last = trained.record.last().map_or(f64::NAN, |e| e.error);
    eprintln!(
        "train ({}): {} epochs, error {first:.4} -> {last:.4}",
        cfg.train.optimizer,
        trained.record.len() - 1
    );
    if trained.flat_reflectance_events > 0 {
        eprintln!(
            "train: layer 6 saw a constant map {} times",
            trained.flat_reflectance_events
        );
    }
    Ok(trained)
}

/// Writes the hybrid and per-subnetwork normals, weights, record, lights
/// and counters of a trained model.
pub fn write_model(dir: &Path, t: &TrainedModel) -> Result<()> {
    let m = &t.model;
    io::write_normals(&dir.join("normals.nrm"), &t.normals()?)?;
    io::write_normals(&dir.join("diffuse.nrm"), &m.diffuse.normals)?;
    io::write_normals(&dir.join("specular.nrm"), &m.specular.normals)?;
    io::write_lambdas(&dir.join("lambdas.lam"), &m.lambdas, m.width(), m.height())?;
    io::write_train_record(&dir.join("record.csv"), &t.record)?;
    io::write_lights(&dir.join("lights.lgt"), &t.lights)?;
    io::write_atomic(
        &dir.join("stats.txt"),
        format!(
            "lambda_floor={:e}\nflat_reflectance_events={}\n",
            m.lambdas.floor(),
            t.flat_reflectance_events
        )
        .as_bytes(),
    )?;
    Ok(())
}

fn read_stats(dir: &Path) -> Result<(f64, usize)> {
    let text = fs::read_to_string(dir.join("stats.txt"))?;
    let mut floor = None;
    let mut flat = None;
    for (i, line) in text.lines().enumerate() {
        let bad = || sfs_core::Error::CorruptField {
            line: i + 1,
            message: format!("stats.txt: {line:?}"),
        };
        match line.split_once('=') {
            Some(("lambda_floor", v)) => floor = Some(v.parse().map_err(|_| bad())?),
            Some(("flat_reflectance_events", v)) => flat = Some(v.parse().map_err(|_| bad())?),
            _ => return Err(bad().into()),
        }
    }
    match (floor, flat) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(CliError::Usage("stats.txt is incomplete".into())),
    }
}

/// Writes `depth.dpt`, `mesh.obj` and `clamped.txt` (the count of pixels
/// whose normal was too oblique).
pub fn integrate_to(normals: &NormalField, mask: &Mask, method: Method, nz_floor: f64, dir: &Path) -> Result<DepthMap> {
    let grads = normals_to_gradients(normals, mask, nz_floor)?;
    let depth = integrate(&grads, method)?;
    io::write_depth(&dir.join("depth.dpt"), &depth)?;
    io::export_mesh(&dir.join("mesh.obj"), &depth)?;
    io::write_atomic(&dir.join("clamped.txt"), format!("{}\n", grads.clamped).as_bytes())?;
    if grads.clamped > 0 {
        eprintln!("integrate: raised n_z to {nz_floor} at {} pixels", grads.clamped);
    }
    Ok(depth)
}

fn eval(model: &Path, depth_path: &Path, truth: &Path) -> Result<EvalReport> {
    let normals = io::read_normals(&model.join("normals.nrm"))?;
    let lights = io::read_lights(&model.join("lights.lgt"))?;
    let (floor, flat) = read_stats(model)?;
    let (lambdas, _, _) = io::read_lambdas(&model.join("lambdas.lam"), floor)?;
    let depth = io::read_depth(&depth_path.join("depth.dpt"))?;
    let clamped = fs::read_to_string(depth_path.join("clamped.txt"))?
        .trim()
        .parse()
        .map_err(|_| CliError::Usage("clamped.txt is not a count".into()))?;
    let mask = io::read_mask(&truth.join("mask.pgm"))?;
    let est = Estimate {
        normals: &normals,
        lights: &lights,
        depth: &depth,
        lambdas: &lambdas,
        flat_reflectance_events: flat,
        clamped_gradients: clamped,
    };
    Ok(metrics::evaluate(
        &est,
        &io::read_normals(&truth.join("normals.nrm"))?,
        &io::read_lights(&truth.join("lights.lgt"))?,
        &io::read_depth(&truth.join("depth.dpt"))?,
        &mask,
    )?)
}

/// `synth/`, `model/`, `depth/` and `report.txt` under `dir`.
pub fn pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<EvalReport> {
    let synth_dir = subdir(dir, "synth")?;
    let (truth, images) = synth(cfg, &synth_dir)?;
    let model_dir = subdir(dir, "model")?;
    let trained = train_and_log(&images, &truth.albedo, cfg)?;
    write_model(&model_dir, &trained)?;
    let depth_dir = subdir(dir, "depth")?;
    integrate_to(&trained.normals()?, &truth.mask, cfg.method, cfg.nz_floor, &depth_dir)?;
    let report = eval(&model_dir, &depth_dir, &synth_dir.join("truth"))?;
    io::write_report(&dir.join("report.txt"), &report)?;
    eprintln!("{report}");
    Ok(report)
}

const MODES: [OptimizerMode; 3] = [OptimizerMode::Fixed, OptimizerMode::Momentum, OptimizerMode::Adaptive];

/// Trains once per optimizer. Writes `record_<mode>.csv`, a joint
/// `compare.csv` and `compare.txt` with epochs-to-target, the target being
/// the final fixed-rate error.
pub fn compare_optimizers(cfg: &PipelineConfig, dir: &Path) -> Result<Vec<(OptimizerMode, TrainRecord, Option<usize>)>> {
    let truth = make_height_field(&cfg.scene)?;
    let images = render(&truth, &cfg.render)?;
    let mut records = Vec::new();
    for mode in MODES {
        let mut c = cfg.clone();
        c.train.optimizer = mode;
        let t = train_and_log(&images, &truth.albedo, &c)?;
        io::write_train_record(&dir.join(format!("record_{mode}.csv")), &t.record)?;
        records.push((mode, t.record));
    }
    let target = records[0].1.last().map_or(f64::NAN, |e| e.error);
    let reached = metrics::convergence_compare(records.iter().map(|(m, r)| (*m, r)), target);

    let mut joint = String::from("epoch,fixed,momentum,adaptive\n");
    let len = records.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    for t in 0..len {
        joint.push_str(&t.to_string());
        for (_, r) in &records {
            joint.push(',');
            if let Some(e) = r.entries().get(t) {
                joint.push_str(&format!("{:.16e}", e.error));
            }
        }
        joint.push('\n');
    }
    io::write_atomic(&dir.join("compare.csv"), joint.as_bytes())?;

    let mut summary = format!("target={target:.16e}\n");
    for (mode, epochs) in &reached {
        let v = epochs.map_or("not_reached".to_string(), |e| e.to_string());
        summary.push_str(&format!("epochs_to_target.{mode}={v}\n"));
    }
    io::write_atomic(&dir.join("compare.txt"), summary.as_bytes())?;
    let _ = std::io::stdout().write_all(summary.as_bytes());

    Ok(records
        .into_iter()
        .zip(reached)
        .map(|((m, r), (_, e))| (m, r, e))
        .collect())
}
