//! Pose-error metrics and the articulated-object benchmark: sample joint
//! values, render one view, track every link from a perturbed start and
//! score each link with ADI.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{KdTree, PointCloud};
use crate::error::{Error, Result};
use crate::liegroup::Pose;
use crate::mukf::{FilterConfig, ObjectTracker};
use crate::segmentation::SegmentSet;
use crate::sim::{builtin_scene, CameraModel, KinematicScene, SimEnvironment};

/// Mean distance from each model point under `gt` to the closest model point
/// under `est`.
pub fn adi(model: &PointCloud, gt: &Pose, est: &Pose) -> Result<f64> {
    if model.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(&model.transformed(est).points);
    let total: f64 = model
        .points
        .iter()
        .map(|p| tree.nearest(&gt.apply(p)).map_or(0.0, |(_, d)| d))
        .sum();
    Ok(total / model.len() as f64)
}

/// Per-part planar distance between final and target positions.
pub fn goal_l2(final_xy: &[Vector2<f64>], target_xy: &[Vector2<f64>]) -> Result<Vec<f64>> {
    if final_xy.len() != target_xy.len() {
        return Err(Error::PartCountMismatch {
            left: final_xy.len(),
            right: target_xy.len(),
        });
    }
    Ok(final_xy.iter().zip(target_xy).map(|(a, b)| (a - b).norm()).collect())
}

/// Objects of the default suite.
pub const BENCH_OBJECTS: [&str; 4] = ["drawer-like", "glasses-like", "dishwasher-like", "blade-like"];

/// Objects whose links all face the camera without self-occlusion.
pub fn is_fully_visible(name: &str) -> bool {
    matches!(name, "glasses-like" | "blade-like")
}

#[derive(Debug, Clone)]
pub struct BenchObject {
    pub name: String,
    pub scene: KinematicScene,
    pub fully_visible: bool,
}

impl BenchObject {
    pub fn builtin(name: &str) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            scene: builtin_scene(name)?,
            fully_visible: is_fully_visible(name),
        })
    }
}

pub fn builtin_suite() -> Result<Vec<BenchObject>> {
    BENCH_OBJECTS.iter().map(|n| BenchObject::builtin(n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub trials_per_object: usize,
    pub camera_elevation_deg: f64,
    pub camera_distance: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub perturb_translation: f64,
    pub perturb_rotation_deg: f64,
    pub max_iterations: usize,
    /// Stop once no link moves more than this between frames, m.
    pub converged_translation: f64,
    /// Rotational counterpart of `converged_translation`, rad.
    pub converged_rotation: f64,
    pub filter: FilterConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            trials_per_object: 10,
            camera_elevation_deg: 45.0,
            camera_distance: 0.9,
            noise_sigma: 0.0,
            dropout: 0.0,
            perturb_translation: 0.03,
            perturb_rotation_deg: 10.0,
            max_iterations: 50,
            converged_translation: 1e-5,
            converged_rotation: 1e-4,
            filter: bench_filter(0.03, 10.0),
        }
    }
}

/// Filter for a static scene: the prior covers the start perturbation and
/// the process noise is small.
pub fn bench_filter(perturb_translation: f64, perturb_rotation_deg: f64) -> FilterConfig {
    let r = perturb_rotation_deg.to_radians().powi(2);
    let t = perturb_translation.powi(2);
    FilterConfig {
        q_diag: [1e-6; 6],
        r_scalar: 1e-4,
        p0_diag: [r, r, r, t, t, t],
        ..FilterConfig::default()
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        if self.trials_per_object == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("trials and iterations must be at least 1".into()));
        }
        if !(self.camera_distance > 0.0 && self.perturb_translation >= 0.0 && self.perturb_rotation_deg >= 0.0) {
            return Err(Error::InvalidArgument("camera distance and perturbation must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub object: String,
    pub trial: usize,
    /// Joint positions as fractions of their ranges.
    pub joint_fractions: Vec<f64>,
    pub joint_values: Vec<f64>,
    pub links: Vec<String>,
    pub adi: Vec<f64>,
    pub visible_points: Vec<usize>,
    pub iterations: usize,
    pub fully_visible: bool,
    pub failure: Option<String>,
    /// Wall-clock seconds; kept out of the files so reports stay
    /// reproducible.
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[m] } else { (sorted[m - 1] + sorted[m]) / 2.0 };
        Self {
            count: values.len(),
            mean,
            median,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub object: String,
    pub adi: Summary,
}

/// Per-link ADI over successful trials, overall, for fully visible objects
/// and per object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub failed: usize,
    pub all: Summary,
    pub fully_visible: Summary,
    pub objects: Vec<ObjectSummary>,
}

impl BenchReport {
    pub fn from_trials(seed: u64, trials: Vec<TrialRecord>) -> Self {
        let ok = |t: &&TrialRecord| t.failure.is_none();
        let values = |filter: &dyn Fn(&TrialRecord) -> bool| -> Vec<f64> {
            trials.iter().filter(ok).filter(|t| filter(t)).flat_map(|t| t.adi.iter().copied()).collect()
        };
        let mut names: Vec<String> = Vec::new();
        for t in &trials {
            if !names.contains(&t.object) {
                names.push(t.object.clone());
            }
        }
        let objects = names
            .iter()
            .map(|n| ObjectSummary {
                object: n.clone(),
                adi: Summary::of(&values(&|t| &t.object == n)),
            })
            .collect();
        Self {
            seed,
            failed: trials.iter().filter(|t| t.failure.is_some()).count(),
            all: Summary::of(&values(&|_| true)),
            fully_visible: Summary::of(&values(&|t| t.fully_visible)),
            objects,
            trials,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// One row per link: object, trial, link, joint fractions, ADI.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("object,trial,link,fully_visible,joint_fractions,visible_points,iterations,adi,failure\n");
        for t in &self.trials {
            let fractions = t.joint_fractions.iter().map(|f| format!("{f:.6}")).collect::<Vec<_>>().join(";");
            let failure = t.failure.as_deref().unwrap_or("").replace(',', ";");
            if t.links.is_empty() || t.failure.is_some() {
                let _ = writeln!(out, "{},{},,{},{},,{},,{}", t.object, t.trial, t.fully_visible, fractions, t.iterations, failure);
                continue;
            }
            for (k, link) in t.links.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{:.9},",
                    t.object, t.trial, link, t.fully_visible, fractions, t.visible_points[k], t.iterations, t.adi[k]
                );
            }
        }
        out
    }
}

fn trial_seed(seed: u64, object: usize, trial: usize) -> u64 {
    seed ^ (object as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (trial as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Pose offset by exactly `translation` along a random direction and
/// `rotation` rad about a random axis through the link origin.
pub fn perturb(pose: &Pose, translation: f64, rotation: f64, rng: &mut ChaCha8Rng) -> Pose {
    let dir = Vector3::from(UnitSphere.sample(rng));
    let axis = Vector3::from(UnitSphere.sample(rng));
    let turned = pose.compose(&Pose::from_axis_angle(&axis, rotation));
    Pose::new(turned.rotation, pose.translation + dir * translation)
}

/// Runs one trial: joint sample, render, per-link tracking, ADI.
pub fn run_trial(object: &BenchObject, object_index: usize, trial: usize, config: &BenchConfig, seed: u64) -> TrialRecord {
    let start = Instant::now();
    let mut record = TrialRecord {
        object: object.name.clone(),
        trial,
        joint_fractions: Vec::new(),
        joint_values: Vec::new(),
        links: object.scene.parts.iter().map(|p| p.name.clone()).collect(),
        adi: Vec::new(),
        visible_points: Vec::new(),
        iterations: 0,
        fully_visible: object.fully_visible,
        failure: None,
        runtime_s: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, object_index, trial));
    if let Err(e) = track_trial(object, config, &mut rng, &mut record) {
        record.failure = Some(e.to_string());
        record.adi.clear();
    }
    record.runtime_s = start.elapsed().as_secs_f64();
    record
}

fn track_trial(object: &BenchObject, config: &BenchConfig, rng: &mut ChaCha8Rng, record: &mut TrialRecord) -> Result<()> {
    let mut scene = object.scene.clone();
    for j in 0..scene.joints.len() {
        let u: f64 = rng.random();
        let [lo, hi] = scene.joints[j].limits;
        scene.set_joint_value(j, lo + u * (hi - lo))?;
        record.joint_fractions.push(u);
        record.joint_values.push(scene.joints[j].value);
    }
    let target = scene.parts.iter().map(|p| p.world_centroid()).sum::<Vector3<f64>>() / scene.parts.len() as f64;
    let camera = CameraModel::overhead(target, config.camera_distance, config.camera_elevation_deg).with_noise(config.noise_sigma, config.dropout, rng.random());
    let truth: Vec<Pose> = scene.parts.iter().map(|p| p.pose).collect();
    let mut trackers = scene
        .parts
        .iter()
        .enumerate()
        .map(|(k, part)| {
            let init = perturb(&part.pose, config.perturb_translation, config.perturb_rotation_deg.to_radians(), rng);
            ObjectTracker::new(part.cloud.clone(), init, &config.filter, rng.random::<u64>().wrapping_add(k as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut env = SimEnvironment::new(scene, camera);
    record.visible_points = vec![0; trackers.len()];
    for it in 0..config.max_iterations {
        let (cloud, labels) = env.observe_labeled()?;
        let mut converged = true;
        for (k, tracker) in trackers.iter_mut().enumerate() {
            // ground-truth labels: each link only sees its own points
            let own: Vec<Option<usize>> = labels.iter().map(|l| l.filter(|&i| i == k)).collect();
            let segments = SegmentSet::from_labels(&cloud, &own);
            if it == 0 {
                record.visible_points[k] = segments.segments.first().map_or(0, |s| s.len());
            }
            let before = tracker.pose();
            tracker.step(&segments, None)?;
            let delta = before.inverse().compose(&tracker.pose());
            if delta.translation.norm() > config.converged_translation || delta.angle() > config.converged_rotation {
                converged = false;
            }
        }
        record.iterations = it + 1;
        if converged {
            break;
        }
    }
    record.adi = trackers
        .iter()
        .zip(&env.scene.parts)
        .zip(&truth)
        .map(|((t, part), gt)| adi(&part.cloud, gt, &t.pose()))
        .collect::<Result<_>>()?;
    Ok(())
}

/// Runs every trial of every object, in parallel, and assembles the report
/// in object/trial order.
pub fn run_benchmark(objects: &[BenchObject], config: &BenchConfig, seed: u64) -> Result<BenchReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..objects.len()).flat_map(|o| (0..config.trials_per_object).map(move |t| (o, t))).collect();
    let trials = jobs.par_iter().map(|&(o, t)| run_trial(&objects[o], o, t, config, seed)).collect();
    Ok(BenchReport::from_trials(seed, trials))
}
