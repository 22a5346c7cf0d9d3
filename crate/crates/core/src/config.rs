//! Run configuration: one JSON file with a block per module.
//!
//! Every block is optional except `seed`. Unknown keys are rejected and
//! errors carry the dotted path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::articulation::DetectionConfig;
use crate::bench::BenchConfig;
use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::mukf::FilterConfig;
use crate::segmentation::SegmentationConfig;
use crate::sim::WalkParams;

/// Sensor and push-model overrides applied on top of a scene description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_com: Option<f64>,
}

/// Simulated trajectory used by `track` when it is given a scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSettings {
    pub frames: usize,
    pub walk: WalkParams,
}

impl Default for TrackSettings {
    fn default() -> Self {
        Self {
            frames: 50,
            walk: WalkParams::default(),
        }
    }
}

/// Input files named in the config. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    /// Filter used by every command. When absent each command picks the
    /// preset matching its scenario (see [`FilterConfig`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ukf: Option<FilterConfig>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub track: TrackSettings,
    #[serde(default)]
    pub paths: Paths,
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            segmentation: SegmentationConfig::default(),
            ukf: None,
            sim: SimSettings::default(),
            controller: ControllerConfig::default(),
            detection: DetectionConfig::default(),
            bench: BenchConfig::default(),
            track: TrackSettings::default(),
            paths: Paths::default(),
        }
    }

    /// Parses and validates. `base` is used to resolve relative paths.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<root>".to_string() } else { path };
            Error::config(path, e.inner().to_string())
        })?;
        if let Some(base) = base {
            cfg.paths.resolve(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let within = |block: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidArgument(m) => Error::config(block, m),
                Error::Config { path, message } => Error::config(format!("{block}.{path}"), message),
                other => Error::config(block, other.to_string()),
            })
        };
        validate_segmentation(&self.segmentation)?;
        if let Some(ukf) = &self.ukf {
            within("ukf", ukf.validate())?;
        }
        if let Some(s) = self.sim.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config("sim.noise_sigma", "must be non-negative"));
            }
        }
        if let Some(d) = self.sim.dropout {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::config("sim.dropout", "must lie in [0, 1)"));
            }
        }
        if let Some(k) = self.sim.kappa_com {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::config("sim.kappa_com", "must be non-negative"));
            }
        }
        within("controller", self.controller.validate())?;
        validate_detection(&self.detection)?;
        within("bench", self.bench.validate())?;
        let w = &self.track.walk;
        for (name, v) in [("max_step", w.max_step), ("max_turn", w.max_turn), ("max_joint_fraction", w.max_joint_fraction)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("track.walk.{name}"), "must be non-negative"));
            }
        }
        self.paths.validate()
    }

    /// The configured filter, or `preset` when the config leaves it out.
    pub fn filter_or(&self, preset: FilterConfig) -> FilterConfig {
        self.ukf.clone().unwrap_or(preset)
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.scene.as_mut() {
            join(p);
        }
        self.objects.iter_mut().for_each(join);
        if let Some(p) = self.goal.as_mut() {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |field: String, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::config(field, format!("file not found: {}", p.display())))
            }
        };
        if let Some(p) = &self.scene {
            check("paths.scene".into(), p)?;
        }
        for (i, p) in self.objects.iter().enumerate() {
            check(format!("paths.objects[{i}]"), p)?;
        }
        if let Some(p) = &self.goal {
            check("paths.goal".into(), p)?;
        }
        Ok(())
    }
}

fn validate_segmentation(s: &SegmentationConfig) -> Result<()> {
    let positive = [
        ("plane_dist_thresh", s.plane_dist_thresh),
        ("std_ratio", s.std_ratio),
        ("normal_angle_thresh", s.normal_angle_thresh),
        ("color_thresh", s.color_thresh),
        ("neighbor_radius", s.neighbor_radius),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(format!("segmentation.{name}"), "must be positive"));
        }
    }
    if !(s.tool_margin >= 0.0) {
        return Err(Error::config("segmentation.tool_margin", "must be non-negative"));
    }
    for (name, v) in [("ransac_iterations", s.ransac_iterations), ("k_neighbors", s.k_neighbors), ("normal_k", s.normal_k)] {
        if v == 0 {
            return Err(Error::config(format!("segmentation.{name}"), "must be at least 1"));
        }
    }
    Ok(())
}

fn validate_detection(d: &DetectionConfig) -> Result<()> {
    for (name, v) in [
        ("push_distance", d.push_distance),
        ("pull_distance", d.pull_distance),
        ("substep", d.substep),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(format!("detection.{name}"), "must be positive"));
        }
    }
    if !(d.standoff >= 0.0) {
        return Err(Error::config("detection.standoff", "must be non-negative"));
    }
    if d.max_actions == 0 {
        return Err(Error::config("detection.max_actions", "must be at least 1"));
    }
    Ok(())
}
