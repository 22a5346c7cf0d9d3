//! Correspondence measurement model and segment association.
//!
//! The measurement is the stacked list of observed scene points. For a
//! candidate object pose, the predicted measurement is, per scene point, the
//! closest point of the object model placed at that pose.

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{KdTree, PointCloud};
use crate::error::{Error, Result};
use crate::liegroup::Pose;
use crate::segmentation::SegmentSet;

/// Observed points for one object, `y = {p1 … pQ}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationBatch {
    pub scene_points: Vec<Vector3<f64>>,
    /// Number of trailing points that came from tactile contacts.
    pub tactile_points: usize,
}

impl ObservationBatch {
    pub fn new(scene_points: Vec<Vector3<f64>>) -> Self {
        Self {
            scene_points,
            tactile_points: 0,
        }
    }

    /// Takes at most `cap` points from `cloud`, uniformly without replacement.
    pub fn from_cloud(cloud: &PointCloud, cap: usize, rng: &mut ChaCha8Rng) -> Self {
        let points = if cloud.len() <= cap {
            cloud.points.clone()
        } else {
            let mut idx = rand::seq::index::sample(rng, cloud.len(), cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| cloud.points[i]).collect()
        };
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.scene_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene_points.is_empty()
    }
}

/// Object model `O` (body frame) with a spatial index and the observation cap.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    object_model: PointCloud,
    tree: KdTree,
    pub cap: usize,
    pub seed: u64,
}

/// Anything that can predict the measurement for a candidate pose.
pub trait MeasurementFunction {
    fn predict(&self, pose: &Pose, observation: &ObservationBatch) -> Result<Vec<Vector3<f64>>>;
}

impl MeasurementModel {
    pub fn new(object_model: PointCloud, cap: usize, seed: u64) -> Result<Self> {
        if object_model.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let tree = KdTree::build(&object_model.points);
        Ok(Self {
            object_model,
            tree,
            cap,
            seed,
        })
    }

    pub fn object_model(&self) -> &PointCloud {
        &self.object_model
    }

    /// Model centroid in the body frame.
    pub fn body_centroid(&self) -> Vector3<f64> {
        self.object_model.centroid().expect("non-empty model")
    }

    /// Index of the model point closest to `scene_point` when the model sits at
    /// `pose`. Distances are evaluated in the body frame, which the rigid
    /// transform preserves.
    pub fn closest_index(&self, pose_inv: &Pose, scene_point: &Vector3<f64>) -> usize {
        self.tree.nearest(&pose_inv.apply(scene_point)).expect("non-empty model").0
    }
}

impl MeasurementFunction for MeasurementModel {
    fn predict(&self, pose: &Pose, observation: &ObservationBatch) -> Result<Vec<Vector3<f64>>> {
        correspondences(self, pose, observation)
    }
}

/// `h(σ)`: for every scene point, the closest model point transformed by
/// `sigma_pose`. Output order follows the scene order; ties go to the lower
/// model index.
pub fn correspondences(model: &MeasurementModel, sigma_pose: &Pose, scene: &ObservationBatch) -> Result<Vec<Vector3<f64>>> {
    if scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let inv = sigma_pose.inverse();
    Ok(scene
        .scene_points
        .iter()
        .map(|p| sigma_pose.apply(&model.object_model.points[model.closest_index(&inv, p)]))
        .collect())
}

/// Picks the segment whose centroid is nearest to the model centroid placed at
/// `predicted_pose`. Ties go to the lower segment index.
pub fn associate_segment(predicted_pose: &Pose, object_model: &PointCloud, segments: &SegmentSet, gate: f64) -> Result<usize> {
    let predicted = predicted_pose.apply(&object_model.centroid()?);
    associate_point(&predicted, segments, gate)
}

pub(crate) fn associate_point(predicted: &Vector3<f64>, segments: &SegmentSet, gate: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, seg) in segments.segments.iter().enumerate() {
        let Ok(c) = seg.centroid() else { continue };
        let d = (c - predicted).norm();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, d)) if d <= gate => Ok(i),
        Some((_, d)) => Err(Error::NoSegmentAssociated { nearest: d }),
        None => Err(Error::NoSegmentAssociated { nearest: f64::INFINITY }),
    }
}

/// Appends tactile contacts to the observation and re-applies the cap.
/// Contacts are never dropped; scene points are subsampled to make room.
pub fn fuse_tactile(scene_obs: &ObservationBatch, contacts: &PointCloud, cap: usize, rng: &mut ChaCha8Rng) -> ObservationBatch {
    if contacts.is_empty() {
        return scene_obs.clone();
    }
    let room = cap.saturating_sub(contacts.len());
    let mut points = if scene_obs.len() <= room {
        scene_obs.scene_points.clone()
    } else {
        let mut idx = rand::seq::index::sample(rng, scene_obs.len(), room).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| scene_obs.scene_points[i]).collect()
    };
    points.extend_from_slice(&contacts.points);
    ObservationBatch {
        scene_points: points,
        tactile_points: contacts.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::subsample;
    use crate::segmentation::Label;
    use rand::{Rng, SeedableRng};

    fn plate(n: usize) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Vector3::new(i as f64 * 0.005, j as f64 * 0.005, 0.0));
            }
        }
        PointCloud::from_points(pts)
    }

    fn brute(model: &PointCloud, pose: &Pose, scene: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let placed: Vec<Vector3<f64>> = model.points.iter().map(|p| pose.apply(p)).collect();
        scene
            .iter()
            .map(|s| {
                let mut best = (0, f64::INFINITY);
                for (i, m) in placed.iter().enumerate() {
                    let d = (m - s).norm_squared();
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                placed[best.0]
            })
            .collect()
    }

    #[test]
    fn perfect_alignment_has_zero_residual() {
        let model = plate(20);
        let truth = Pose::planar(0.3, 0.1, 0.05, 0.4);
        let scene = subsample(&model, 60, 1).unwrap().transformed(&truth);
        let m = MeasurementModel::new(model, 100, 0).unwrap();
        let obs = ObservationBatch::new(scene.points.clone());
        let h = correspondences(&m, &truth, &obs).unwrap();
        for (a, b) in h.iter().zip(&scene.points) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn offset_pose_matches_brute_force() {
        let model = plate(20);
        let truth = Pose::planar(0.3, 0.1, 0.05, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scene: Vec<Vector3<f64>> = subsample(&model, 80, 2)
            .unwrap()
            .transformed(&truth)
            .points
            .into_iter()
            .map(|p| p + Vector3::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3)))
            .collect();
        let offset = Pose::from_translation(Vector3::new(0.01, 0.0, 0.0)).compose(&truth);
        let m = MeasurementModel::new(model.clone(), 100, 0).unwrap();
        let h = correspondences(&m, &offset, &ObservationBatch::new(scene.clone())).unwrap();
        let oracle = brute(&model, &offset, &scene);
        for (a, b) in h.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let model = PointCloud::from_points(vec![Vector3::new(2.0, 0.0, 0.0), Vector3::zeros()]);
        let m = MeasurementModel::new(model, 10, 0).unwrap();
        let h = correspondences(&m, &Pose::identity(), &ObservationBatch::new(vec![Vector3::new(1.0, 0.0, 0.0)])).unwrap();
        assert_eq!(h[0], Vector3::new(2.0, 0.0, 0.0));
    }

    fn segment_at(c: Vector3<f64>) -> PointCloud {
        PointCloud::from_points(vec![c + Vector3::x() * 0.01, c - Vector3::x() * 0.01])
    }

    #[test]
    fn association_gate() {
        let model = PointCloud::from_points(vec![Vector3::zeros()]);
        let segs = SegmentSet {
            segments: vec![segment_at(Vector3::new(0.5, 0.0, 0.0)), segment_at(Vector3::new(0.05, 0.0, 0.0))],
            labels: vec![Label::Discarded; 0],
        };
        assert_eq!(associate_segment(&Pose::identity(), &model, &segs, 0.3).unwrap(), 1);
        let one = SegmentSet {
            segments: vec![segment_at(Vector3::new(0.1, 0.0, 0.0))],
            labels: Vec::new(),
        };
        assert_eq!(associate_segment(&Pose::identity(), &model, &one, 0.3).unwrap(), 0);
        let far = SegmentSet {
            segments: vec![segment_at(Vector3::new(1.0, 0.0, 0.0))],
            labels: Vec::new(),
        };
        assert!(matches!(associate_segment(&Pose::identity(), &model, &far, 0.3), Err(Error::NoSegmentAssociated { .. })));
    }

    #[test]
    fn tactile_fusion_keeps_contacts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = ObservationBatch::new((0..100).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect());
        assert_eq!(fuse_tactile(&scene, &PointCloud::default(), 100, &mut rng), scene);

        let contacts = PointCloud::from_points((0..5).map(|i| Vector3::new(0.0, i as f64, 1.0)).collect());
        let fused = fuse_tactile(&scene, &contacts, 100, &mut rng);
        assert_eq!(fused.len(), 100);
        for c in &contacts.points {
            assert!(fused.scene_points.contains(c));
        }
        assert_eq!(fused.tactile_points, 5);

        let only = fuse_tactile(&ObservationBatch::default(), &contacts, 100, &mut rng);
        assert_eq!(only.scene_points, contacts.points);
    }
}
