//! Plain-text `key = value` configuration with a closed schema.
//!
//! One file drives every stage of the pipeline. Blank lines and text after
//! `#` are ignored. Unknown and repeated keys are errors, as are missing
//! keys that the calling stage lists as required.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrate::{Method, DEFAULT_NZ_FLOOR};
use crate::model::{direction, Direction, Vec3};
use crate::scene::{canonical_lights, AlbedoSpec, RenderSpec, SceneSpec, Shape};
use crate::train::TrainConfig;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    // scene
    "shape", "size", "radius", "curvature", "slope", "frequency", "amplitude", "albedo",
    "albedo_right", "background",
    // rendering
    "lights", "view", "specular", "render_exponent", "quantize",
    // training
    "eta0", "xi", "max_epochs", "stop_tol", "optimizer", "momentum", "eta_floor", "update_mode",
    "seed", "init", "init_slope", "init_noise", "exponent", "lambda_floor", "diffuse_only",
    "output",
    // integration and output
    "method", "nz_floor", "out_dir",
];

/// Keys that must be present for each stage.
pub const SYNTH_REQUIRED: &[&str] = &["shape", "size", "lights"];
pub const TRAIN_REQUIRED: &[&str] = &["eta0", "max_epochs", "seed"];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// 0 for values given on the command line.
    line: usize,
}

/// Key-value pairs as written, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            raw.insert(content, i + 1, false)?;
        }
        Ok(raw)
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        self.insert(assignment, 0, true)
    }

    fn insert(&mut self, assignment: &str, line: usize, replace: bool) -> Result<()> {
        let at = |msg: String| {
            if line == 0 {
                Error::Config(msg)
            } else {
                Error::Config(format!("line {line}: {msg}"))
            }
        };
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| at(format!("expected key = value, got {assignment:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(at(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(at(format!("empty value for `{key}`")));
        }
        if !replace {
            if let Some(prev) = self.entries.get(key) {
                return Err(at(format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.entries.contains_key(**k)) {
            Some(k) => Err(Error::Config(format!("missing required key `{k}`"))),
            None => Ok(()),
        }
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value.parse().map(Some).map_err(|err| {
            let place = if e.line == 0 {
                "override".to_string()
            } else {
                format!("line {}", e.line)
            };
            Error::Config(format!("{place}: bad value {:?} for `{key}`: {err}", e.value))
        })
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.typed(key)?.unwrap_or(default))
    }

    /// Renders the pairs back to text in key order.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }
}

/// A direction written as `x,y,z`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dir(Direction);

impl FromStr for Dir {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [x, y, z] => direction(x, y, z).map(Dir).map_err(|e| e.to_string()),
            _ => Err(format!("expected x,y,z, got {s:?}")),
        }
    }
}

/// `canonical`, or directions `x,y,z` separated by `;`.
#[derive(Debug, Clone, PartialEq)]
struct Lights(Vec<Direction>);

impl FromStr for Lights {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "canonical" {
            return Ok(Lights(canonical_lights()));
        }
        s.split(';')
            .map(|d| d.parse::<Dir>().map(|d| d.0))
            .collect::<std::result::Result<_, _>>()
            .map(Lights)
    }
}

/// Every setting of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene: SceneSpec,
    pub render: RenderSpec,
    pub train: TrainConfig,
    pub method: Method,
    pub nz_floor: f64,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Types every present key and fills absent ones with defaults.
    pub fn from_raw(raw: &RawConfig, required: &[&str]) -> Result<Self> {
        raw.require(required)?;
        let size: usize = raw.or("size", 64)?;
        let shape_name: String = raw.or("shape", "sphere".to_string())?;
        let shape = match shape_name.as_str() {
            "sphere" => Shape::Sphere {
                radius: raw.or("radius", size as f64 / 2.0 - 1.0)?,
            },
            "paraboloid" => Shape::Paraboloid {
                curvature: raw.or("curvature", 0.02)?,
            },
            "ramp" => Shape::Ramp {
                slope: raw.or("slope", 0.4)?,
            },
            "sinusoid" => Shape::Sinusoid {
                frequency: raw.or("frequency", 1.0 / 32.0)?,
                amplitude: raw.or("amplitude", 2.0)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown shape {other:?} (expected sphere, paraboloid, ramp or sinusoid)"
                )))
            }
        };
        let albedo = raw.or("albedo", 1.0)?;
        let albedo = match raw.typed::<f64>("albedo_right")? {
            Some(right) => AlbedoSpec::TwoTone(albedo, right),
            None => AlbedoSpec::Constant(albedo),
        };
        let scene = SceneSpec {
            shape,
            size,
            albedo,
            background: raw.or("background", true)?,
        };
        scene.validate()?;

        let view = raw.or("view", Dir(Direction::new_unchecked(Vec3::z())))?.0;
        let render = RenderSpec {
            lights: raw.or("lights", Lights(canonical_lights()))?.0,
            view,
            specular: raw.or("specular", 0.0)?,
            exponent: raw.or("render_exponent", 2.0)?,
            quantize: raw.or("quantize", true)?,
        };
        render.validate()?;

        let d = TrainConfig::default();
        let train = TrainConfig {
            eta0: raw.or("eta0", d.eta0)?,
            xi: raw.or("xi", d.xi)?,
            max_epochs: raw.or("max_epochs", d.max_epochs)?,
            stop_tol: raw.or("stop_tol", d.stop_tol)?,
            optimizer: raw.or("optimizer", d.optimizer)?,
            momentum: raw.or("momentum", d.momentum)?,
            eta_floor: raw.or("eta_floor", d.eta_floor)?,
            update_mode: raw.or("update_mode", d.update_mode)?,
            seed: raw.or("seed", d.seed)?,
            init: raw.or("init", d.init)?,
            init_slope: raw.or("init_slope", d.init_slope)?,
            init_noise: raw.or("init_noise", d.init_noise)?,
            exponent: raw.or("exponent", d.exponent)?,
            view,
            lambda_floor: raw.or("lambda_floor", d.lambda_floor)?,
            diffuse_only: raw.or("diffuse_only", d.diffuse_only)?,
            output: raw.or("output", d.output)?,
        };
        train.validate()?;

        let nz_floor = raw.or("nz_floor", DEFAULT_NZ_FLOOR)?;
        if !(nz_floor > 0.0 && nz_floor <= 1.0) {
            return Err(Error::Config(format!("nz_floor must lie in (0, 1], got {nz_floor}")));
        }
        Ok(Self {
            scene,
            render,
            train,
            method: raw.or("method", Method::Line)?,
            nz_floor,
            out_dir: raw.typed("out_dir")?,
        })
    }
}
