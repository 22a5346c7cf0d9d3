//! Deterministic ground truth: articulated kinematic scenes, quasi-static push
//! and hold-pull responses, a z-buffered depth camera and tactile contacts.
//!
//! World frame: z up, the table is the plane `z = 0`. Joint axes and pivots are
//! expressed in the parent part's body frame. A child's world pose is
//! `parent · J(value) · rest`, where `rest` is the child pose relative to the
//! parent with every joint at zero.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{load_ply, sample_box_surface, PointCloud};
use crate::error::{Error, Result};
use crate::liegroup::{Pose, PoseRecord};

/// Pusher pad half width and the vertical band it covers around the contact.
const PAD_HALF_WIDTH: f64 = 0.01;
const PAD_HALF_HEIGHT: f64 = 0.03;
/// Contact surface layer thickness when collecting tactile points.
const CONTACT_LAYER: f64 = 0.003;
const MAX_CONTACTS: usize = 9;
pub const PUSH_FORCE: f64 = 8.0;
pub const GRASP_FORCE: f64 = 5.0;
pub const MIN_LEVER: f64 = 0.01;
pub const TABLE_COLOR: [f64; 3] = [0.5, 0.5, 0.5];
pub const DEFAULT_SPACING: f64 = 0.004;

const PALETTE: [[f64; 3]; 8] = [
    [0.85, 0.2, 0.2],
    [0.2, 0.45, 0.85],
    [0.2, 0.7, 0.3],
    [0.9, 0.75, 0.15],
    [0.6, 0.3, 0.75],
    [0.95, 0.5, 0.1],
    [0.15, 0.75, 0.75],
    [0.55, 0.35, 0.2],
];

pub fn palette_color(i: usize) -> [f64; 3] {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Rigid,
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDef {
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    /// Unit axis in the parent frame.
    pub axis: Vector3<f64>,
    /// Point on a revolute axis, parent frame.
    pub pivot: Vector3<f64>,
    pub limits: [f64; 2],
    pub value: f64,
    /// Child pose relative to the parent at value zero.
    pub rest: Pose,
}

impl JointDef {
    /// Joint motion in the parent frame for a given value.
    pub fn motion(&self, value: f64) -> Pose {
        match self.kind {
            JointKind::Rigid => Pose::identity(),
            JointKind::Revolute => Pose::rotation_about(&self.pivot, &self.axis, value),
            JointKind::Prismatic => Pose::from_translation(self.axis * value),
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.limits[0], self.limits[1])
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.parent == a && self.child == b) || (self.parent == b && self.child == a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub name: String,
    /// Body-frame points, colored.
    pub cloud: PointCloud,
    pub pose: Pose,
    /// Center-of-mass offset from the body-frame centroid.
    pub com_offset: Vector3<f64>,
    pub color: [f64; 3],
    /// Box dimensions when the part is a primitive.
    pub dims: Option<[f64; 3]>,
}

impl Part {
    pub fn world_cloud(&self) -> PointCloud {
        self.cloud.transformed(&self.pose)
    }

    pub fn world_centroid(&self) -> Vector3<f64> {
        self.pose.apply(&self.cloud.centroid().unwrap_or_else(|_| Vector3::zeros()))
    }
}

/// Axis-aligned table rectangle the parts must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [0.0, -0.275],
            max: [1.0, 0.275],
        }
    }
}

impl Workspace {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new((self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicScene {
    pub parts: Vec<Part>,
    pub joints: Vec<JointDef>,
    pub workspace: Workspace,
    /// Rotational slip gain for unattached parts, rad per m².
    pub kappa_com: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TactileReading {
    pub contacts: PointCloud,
    /// Normal force per contact, N.
    pub normal_force: Vec<f64>,
    pub in_contact: bool,
    /// Set when a grasped part resisted the pull.
    pub force_rising: bool,
}

impl TactileReading {
    fn new(contacts: Vec<Vector3<f64>>, force: f64) -> Self {
        let n = contacts.len();
        Self {
            contacts: PointCloud::from_points(contacts),
            normal_force: vec![force; n],
            in_contact: n > 0,
            force_rising: false,
        }
    }
}

/// Turn of an unattached part per metre of lever per metre of push, rad/m².
/// A 3 cm push 3 cm off the center turns a part by 0.4 rad, roughly what a
/// quasi-static box with a few cm friction radius does.
pub const DEFAULT_KAPPA_COM: f64 = 450.0;

impl KinematicScene {
    /// Builds a scene from part poses given with every joint at zero, then
    /// applies the joint values.
    pub fn new(parts: Vec<Part>, joints: Vec<JointDef>) -> Result<Self> {
        let mut scene = Self {
            parts,
            joints,
            workspace: Workspace::default(),
            kappa_com: DEFAULT_KAPPA_COM,
        };
        scene.check_structure()?;
        for j in 0..scene.joints.len() {
            let (p, c) = (scene.joints[j].parent, scene.joints[j].child);
            scene.joints[j].rest = scene.parts[p].pose.inverse().compose(&scene.parts[c].pose);
        }
        for j in &scene.joints {
            if j.value < j.limits[0] || j.value > j.limits[1] {
                return Err(Error::JointLimitViolation {
                    joint: scene.joints.iter().position(|k| k == j).unwrap_or(0),
                    value: j.value,
                    lo: j.limits[0],
                    hi: j.limits[1],
                });
            }
        }
        scene.refresh_poses();
        Ok(scene)
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.parts.len();
        let mut has_parent = vec![false; n];
        for (i, j) in self.joints.iter().enumerate() {
            if j.parent >= n || j.child >= n || j.parent == j.child {
                return Err(Error::InvalidArgument(format!("joint {i} references invalid parts")));
            }
            if has_parent[j.child] {
                return Err(Error::InvalidArgument(format!("part {} has two parent joints", j.child)));
            }
            has_parent[j.child] = true;
            if j.kind != JointKind::Rigid && ((j.axis.norm() - 1.0).abs() > 1e-9) {
                return Err(Error::InvalidArgument(format!("joint {i} axis is not unit length")));
            }
            if j.limits[0] > j.limits[1] {
                return Err(Error::InvalidArgument(format!("joint {i} limits are reversed")));
            }
        }
        if self.joint_order().len() != self.joints.len() {
            return Err(Error::InvalidArgument("joint graph has a cycle".into()));
        }
        Ok(())
    }

    /// Joints sorted so that every parent pose is known before its children.
    fn joint_order(&self) -> Vec<usize> {
        let mut known: Vec<bool> = (0..self.parts.len()).map(|p| self.parent_joint(p).is_none()).collect();
        let mut order = Vec::new();
        let mut progress = true;
        while progress {
            progress = false;
            for (i, j) in self.joints.iter().enumerate() {
                if !order.contains(&i) && known[j.parent] {
                    known[j.child] = true;
                    order.push(i);
                    progress = true;
                }
            }
        }
        order
    }

    pub fn parent_joint(&self, part: usize) -> Option<usize> {
        self.joints.iter().position(|j| j.child == part)
    }

    /// Root of the assembly containing `part`.
    pub fn root_of(&self, mut part: usize) -> usize {
        while let Some(j) = self.parent_joint(part) {
            part = self.joints[j].parent;
        }
        part
    }

    /// Parts reachable from `start` through joints, skipping `cut`.
    fn reachable(&self, start: usize, cut: Option<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for (i, j) in self.joints.iter().enumerate() {
                if Some(i) == cut {
                    continue;
                }
                let other = if j.parent == p {
                    j.child
                } else if j.child == p {
                    j.parent
                } else {
                    continue;
                };
                if seen.insert(other) {
                    queue.push_back(other);
                }
            }
        }
        seen
    }

    /// All parts rigidly or articulately connected to `part`.
    pub fn component(&self, part: usize) -> BTreeSet<usize> {
        self.reachable(part, None)
    }

    /// Recomputes child poses from root poses and joint values.
    pub fn refresh_poses(&mut self) {
        for j in self.joint_order() {
            let joint = &self.joints[j];
            let pose = self.parts[joint.parent]
                .pose
                .compose(&joint.motion(joint.value))
                .compose(&joint.rest);
            self.parts[joint.child].pose = pose;
        }
    }

    /// Sets a joint value, failing outside the limits.
    pub fn set_joint_value(&mut self, joint: usize, value: f64) -> Result<()> {
        let j = self.joints.get(joint).ok_or_else(|| Error::InvalidArgument(format!("no joint {joint}")))?;
        if value < j.limits[0] || value > j.limits[1] {
            return Err(Error::JointLimitViolation {
                joint,
                value,
                lo: j.limits[0],
                hi: j.limits[1],
            });
        }
        self.joints[joint].value = value;
        self.refresh_poses();
        Ok(())
    }

    /// Moves a whole assembly by a world-frame transform applied on the left.
    pub fn move_assembly(&mut self, part: usize, motion: &Pose) {
        let root = self.root_of(part);
        self.parts[root].pose = motion.compose(&self.parts[root].pose);
        self.refresh_poses();
    }

    pub fn world_axis(&self, joint: usize) -> (Vector3<f64>, Vector3<f64>) {
        let j = &self.joints[joint];
        let parent = &self.parts[j.parent].pose;
        (parent.apply(&j.pivot), parent.rotation * j.axis)
    }

    pub fn check_workspace(&self) -> Result<()> {
        for p in &self.parts {
            let c = p.world_centroid();
            if !self.workspace.contains(&c) {
                return Err(Error::WorkspaceExceeded(format!(
                    "part `{}` centroid at ({:.3}, {:.3}) left the workspace",
                    p.name, c.x, c.y
                )));
            }
        }
        Ok(())
    }

    /// Ground-truth world clouds for every part, concatenated, with labels.
    pub fn world_points(&self) -> (PointCloud, Vec<usize>) {
        let mut cloud = PointCloud::default();
        let mut labels = Vec::new();
        for (i, p) in self.parts.iter().enumerate() {
            cloud = cloud.concat(&p.world_cloud());
            labels.extend(std::iter::repeat_n(i, p.cloud.len()));
        }
        (cloud, labels)
    }
}

/// Part poses after applying joint values, checking limits.
pub fn forward_kinematics(scene: &KinematicScene) -> Result<Vec<Pose>> {
    for (i, j) in scene.joints.iter().enumerate() {
        if j.value < j.limits[0] || j.value > j.limits[1] {
            return Err(Error::JointLimitViolation {
                joint: i,
                value: j.value,
                lo: j.limits[0],
                hi: j.limits[1],
            });
        }
    }
    let mut s = scene.clone();
    s.refresh_poses();
    Ok(s.parts.iter().map(|p| p.pose).collect())
}

fn planar_unit(d: &Vector3<f64>) -> Result<Vector3<f64>> {
    let flat = Vector3::new(d.x, d.y, 0.0);
    let n = flat.norm();
    if !(n > 1e-9) || !d.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("push direction must have an in-plane component".into()));
    }
    Ok(flat / n)
}

/// Picks up to `MAX_CONTACTS` points ordered by lateral offset, then index.
fn pick_contacts(mut cands: Vec<(f64, usize, Vector3<f64>)>) -> Vec<Vector3<f64>> {
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.into_iter().take(MAX_CONTACTS).map(|c| c.2).collect()
}

/// Quasi-static push of `part` by a flat pusher moving from `contact_point`
/// along `direction` for `distance` meters.
///
/// The pusher first closes any gap to the part surface; the remaining travel
/// moves the part. Revolute assemblies swing the pushed side about the joint,
/// with rotation `d_t / r` for the tangential travel `d_t` at lever `r`; the
/// joint takes up the radial component and the other side stays. Rigid and prismatic
/// assemblies translate. A lone part translates and turns by
/// `κ_com · ℓ · travel`, where `ℓ` is the signed lever of the push line
/// about the center of mass.
pub fn push_step(
    scene: &KinematicScene,
    part_index: usize,
    contact_point: &Vector3<f64>,
    direction: &Vector3<f64>,
    distance: f64,
) -> Result<(KinematicScene, TactileReading)> {
    if part_index >= scene.parts.len() {
        return Err(Error::InvalidArgument(format!("no part {part_index}")));
    }
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!("push distance must be positive, got {distance}")));
    }
    let d = planar_unit(direction)?;
    let lateral = Vector3::z().cross(&d);
    let part = &scene.parts[part_index];
    let world = part.world_cloud();

    let mut front = f64::INFINITY;
    let mut swept = Vec::new();
    for (i, p) in world.points.iter().enumerate() {
        let rel = p - contact_point;
        let along = rel.dot(&d);
        let side = rel.dot(&lateral);
        if side.abs() <= PAD_HALF_WIDTH && rel.z.abs() <= PAD_HALF_HEIGHT && along >= -CONTACT_LAYER && along <= distance {
            front = front.min(along);
            swept.push((side.abs(), i, *p, along));
        }
    }
    if swept.is_empty() {
        return Ok((scene.clone(), TactileReading::default()));
    }
    let gap = front.max(0.0);
    let travel = distance - gap;
    let touch = contact_point + d * gap;
    let touched: Vec<(f64, usize, Vector3<f64>)> = swept
        .into_iter()
        .filter(|c| c.3 <= front + CONTACT_LAYER)
        .map(|c| (c.0, c.1, c.2))
        .collect();
    let contacts = pick_contacts(touched);
    if travel <= 0.0 {
        return Ok((scene.clone(), TactileReading::new(contacts, PUSH_FORCE)));
    }

    let before = part.pose;
    let mut next = scene.clone();
    let revolute: Vec<usize> = scene
        .joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.kind == JointKind::Revolute && (j.parent == part_index || j.child == part_index))
        .map(|(i, _)| i)
        .collect();
    let component = scene.component(part_index);

    if !revolute.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for &j in &revolute {
            let (w, a) = scene.world_axis(j);
            let arm = touch - w;
            let r = (arm - a * arm.dot(&a)).norm();
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((j, r));
            }
        }
        let (j, r) = best.expect("non-empty");
        if r < MIN_LEVER {
            return Err(Error::LeverTooSmall { lever: r });
        }
        let (w, a) = scene.world_axis(j);
        let tangent = a.cross(&(touch - w)) / r;
        let d_t = travel * d.dot(&tangent);
        let want = d_t / r;
        let moving = scene.reachable(part_index, Some(j));
        let joint = &scene.joints[j];
        if moving.contains(&joint.child) {
            let v = joint.clamp(joint.value + want);
            next.joints[j].value = v;
        } else {
            let v = joint.clamp(joint.value - want);
            let applied = joint.value - v;
            next.joints[j].value = v;
            let root = scene.root_of(part_index);
            next.parts[root].pose = Pose::rotation_about(&w, &a, applied).compose(&next.parts[root].pose);
        }
        next.refresh_poses();
    } else if component.len() == 1 {
        let com = part.pose.apply(&(part.cloud.centroid()? + part.com_offset));
        let lever = (touch - com).cross(&d).z;
        let dpsi = scene.kappa_com * lever * travel;
        let shift = d * travel;
        let motion = Pose::rotation_about(&(com + shift), &Vector3::z(), dpsi).compose(&Pose::from_translation(shift));
        next.move_assembly(part_index, &motion);
    } else {
        next.move_assembly(part_index, &Pose::from_translation(d * travel));
    }
    next.check_workspace()?;

    let delta = next.parts[part_index].pose.compose(&before.inverse());
    let moved: Vec<Vector3<f64>> = contacts.iter().map(|c| delta.apply(c)).collect();
    Ok((next, TactileReading::new(moved, PUSH_FORCE)))
}

/// Holds `hold_part` and pulls `pull_part` along `pull_direction`.
///
/// Only a prismatic joint between the two parts yields motion: its value
/// changes by the travel projected on the joint axis, clamped to the limits.
/// Any other connection resists and the reading reports a rising force.
pub fn hold_pull_step(
    scene: &KinematicScene,
    hold_part: usize,
    pull_part: usize,
    pull_direction: &Vector3<f64>,
    distance: f64,
) -> Result<(KinematicScene, TactileReading)> {
    let n = scene.parts.len();
    if hold_part >= n || pull_part >= n || hold_part == pull_part {
        return Err(Error::InvalidArgument(format!("invalid hold/pull parts {hold_part}/{pull_part}")));
    }
    if !(distance >= 0.0) {
        return Err(Error::InvalidArgument(format!("pull distance must be non-negative, got {distance}")));
    }
    let dn = pull_direction.norm();
    if !(dn > 1e-9) {
        return Err(Error::InvalidArgument("pull direction is zero".into()));
    }
    let dir = pull_direction / dn;

    let part = &scene.parts[pull_part];
    let world = part.world_cloud();
    let centroid = world.centroid()?;
    let far = world.points.iter().map(|p| (p - centroid).dot(&dir)).fold(f64::NEG_INFINITY, f64::max);
    let grasp = pick_contacts(
        world
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - centroid).dot(&dir) >= far - 0.01)
            .map(|(i, p)| {
                let rel = p - centroid;
                ((rel - dir * rel.dot(&dir)).norm(), i, *p)
            })
            .collect(),
    );

    let before = part.pose;
    let mut next = scene.clone();
    let mut moved_any = false;
    if let Some(j) = scene.joints.iter().position(|j| j.connects(hold_part, pull_part)) {
        let joint = &scene.joints[j];
        if joint.kind == JointKind::Prismatic {
            let (_, axis) = scene.world_axis(j);
            let want = distance * dir.dot(&axis);
            if joint.child == pull_part {
                next.joints[j].value = joint.clamp(joint.value + want);
            } else {
                let v = joint.clamp(joint.value - want);
                let applied = joint.value - v;
                next.joints[j].value = v;
                let root = scene.root_of(pull_part);
                next.parts[root].pose = Pose::from_translation(axis * applied).compose(&next.parts[root].pose);
            }
            next.refresh_poses();
            moved_any = next.joints[j].value != joint.value;
        }
    }
    let delta = next.parts[pull_part].pose.compose(&before.inverse());
    let contacts: Vec<Vector3<f64>> = grasp.iter().map(|c| delta.apply(c)).collect();
    for c in &contacts {
        if !next.workspace.contains(c) {
            return Err(Error::NoGraspableEdge(format!(
                "grasp point ({:.3}, {:.3}) of `{}` is outside the workspace",
                c.x, c.y, part.name
            )));
        }
    }
    let mut reading = TactileReading::new(contacts, GRASP_FORCE);
    reading.force_rising = !moved_any && distance > 0.0;
    Ok((next, reading))
}

/// Distance along `d` from `contact` to the first surface point of `part`
/// inside the pusher footprint, if any lies within `distance`.
fn pusher_front(part: &Part, contact: &Vector3<f64>, d: &Vector3<f64>, distance: f64) -> Option<f64> {
    let lateral = Vector3::z().cross(d);
    part.world_cloud()
        .points
        .iter()
        .filter_map(|p| {
            let rel = p - contact;
            let along = rel.dot(d);
            let inside = rel.dot(&lateral).abs() <= PAD_HALF_WIDTH
                && rel.z.abs() <= PAD_HALF_HEIGHT
                && along >= -CONTACT_LAYER
                && along <= distance;
            inside.then_some(along)
        })
        .min_by(f64::total_cmp)
}

/// Index of the part a pusher moving from `contact` along `direction` meets
/// first. Ties go to the lower index.
pub fn first_hit(scene: &KinematicScene, contact: &Vector3<f64>, direction: &Vector3<f64>, distance: f64) -> Result<Option<usize>> {
    let d = planar_unit(direction)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, part) in scene.parts.iter().enumerate() {
        if let Some(f) = pusher_front(part, contact, &d, distance) {
            if best.is_none_or(|(_, bf)| f < bf) {
                best = Some((i, f));
            }
        }
    }
    Ok(best.map(|b| b.0))
}

/// Part owning the world point nearest to `p`, with that distance.
pub fn nearest_part(scene: &KinematicScene, p: &Vector3<f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, part) in scene.parts.iter().enumerate() {
        let local = part.pose.inverse().apply(p);
        if let Some(d) = part.cloud.points.iter().map(|q| (q - local).norm()).min_by(f64::total_cmp) {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    best
}

/// What a manipulation loop can do with the world: look, push, hold and pull.
pub trait Environment {
    /// One depth frame of the current scene.
    fn observe(&mut self) -> Result<PointCloud>;
    /// Moves a pusher from `contact` along `direction` for `distance`.
    fn push(&mut self, contact: &Vector3<f64>, direction: &Vector3<f64>, distance: f64) -> Result<TactileReading>;
    /// Presses down at `hold` and pulls the part grasped at `grasp`.
    fn hold_pull(&mut self, hold: &Vector3<f64>, grasp: &Vector3<f64>, direction: &Vector3<f64>, distance: f64) -> Result<TactileReading>;
}

/// Grasp and hold points must lie this close to a part surface.
pub const GRASP_REACH: f64 = 0.03;

/// Simulated world: a kinematic scene seen through a depth camera. Every
/// observation draws fresh noise from a per-frame seed.
#[derive(Debug, Clone)]
pub struct SimEnvironment {
    pub scene: KinematicScene,
    pub camera: CameraModel,
    pub frame: u64,
    pub pushes: usize,
    pub pulls: usize,
}

impl SimEnvironment {
    pub fn new(scene: KinematicScene, camera: CameraModel) -> Self {
        Self {
            scene,
            camera,
            frame: 0,
            pushes: 0,
            pulls: 0,
        }
    }

    /// Observation with ground-truth part labels.
    pub fn observe_labeled(&mut self) -> Result<(PointCloud, Vec<Option<usize>>)> {
        let mut cam = self.camera.clone();
        cam.seed = self.camera.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(self.frame);
        self.frame += 1;
        depth_sample(&self.scene, &cam)
    }
}

impl Environment for SimEnvironment {
    fn observe(&mut self) -> Result<PointCloud> {
        self.observe_labeled().map(|(c, _)| c)
    }

    fn push(&mut self, contact: &Vector3<f64>, direction: &Vector3<f64>, distance: f64) -> Result<TactileReading> {
        self.pushes += 1;
        let Some(part) = first_hit(&self.scene, contact, direction, distance)? else {
            return Ok(TactileReading::default());
        };
        match push_step(&self.scene, part, contact, direction, distance) {
            Ok((next, reading)) => {
                self.scene = next;
                Ok(reading)
            }
            // a push through the hinge line only loads the joint
            Err(Error::LeverTooSmall { .. }) => {
                let d = planar_unit(direction)?;
                let front = pusher_front(&self.scene.parts[part], contact, &d, distance).unwrap_or(0.0).max(0.0);
                Ok(TactileReading::new(vec![contact + d * front], PUSH_FORCE))
            }
            Err(e) => Err(e),
        }
    }

    fn hold_pull(&mut self, hold: &Vector3<f64>, grasp: &Vector3<f64>, direction: &Vector3<f64>, distance: f64) -> Result<TactileReading> {
        self.pulls += 1;
        let reach = |p: &Vector3<f64>, what: &str| match nearest_part(&self.scene, p) {
            Some((i, d)) if d <= GRASP_REACH => Ok(i),
            _ => Err(Error::NoGraspableEdge(format!("no part surface within reach of the {what} point"))),
        };
        let hold_part = reach(hold, "hold")?;
        let pull_part = reach(grasp, "grasp")?;
        if hold_part == pull_part {
            // a single rigid body held and pulled at once does not move
            let mut reading = TactileReading::new(vec![*grasp], GRASP_FORCE);
            reading.force_rising = distance > 0.0;
            return Ok(reading);
        }
        let (next, reading) = hold_pull_step(&self.scene, hold_part, pull_part, direction, distance)?;
        self.scene = next;
        Ok(reading)
    }
}

/// Pinhole depth camera. The camera frame looks along +z with x to the right
/// and y down the image.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    /// Camera-to-world transform.
    pub pose: Pose,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    pub noise_sigma: f64,
    pub dropout_prob: f64,
    pub seed: u64,
    /// Points within this depth of the nearest one in a pixel stay visible.
    pub depth_tolerance: f64,
    /// Extra tolerance in pixel footprints, so steep surfaces that span
    /// several centimeters of depth inside one pixel are not culled.
    pub footprint_tolerance: f64,
}

impl CameraModel {
    pub fn looking_at(eye: Vector3<f64>, target: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let reference = if z.z.abs() > 0.99 { Vector3::x() } else { -Vector3::z() };
        let x = reference.cross(&z).normalize();
        let y = z.cross(&x);
        Self {
            pose: Pose::new(nalgebra::Matrix3::from_columns(&[x, y, z]), eye),
            width: 200,
            height: 150,
            fov_deg: 60.0,
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            seed: 0,
            depth_tolerance: 0.003,
            footprint_tolerance: 1.5,
        }
    }

    /// Camera on the −x side of `target`, `elevation_deg` above the table.
    pub fn overhead(target: Vector3<f64>, distance: f64, elevation_deg: f64) -> Self {
        let e = elevation_deg.to_radians();
        let eye = target + Vector3::new(-e.cos(), 0.0, e.sin()) * distance;
        Self::looking_at(eye, target)
    }

    pub fn with_noise(mut self, noise_sigma: f64, dropout_prob: f64, seed: u64) -> Self {
        self.noise_sigma = noise_sigma;
        self.dropout_prob = dropout_prob;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument("noise_sigma must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidArgument("dropout_prob must lie in [0, 1)".into()));
        }
        if self.width == 0 || self.height == 0 || !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidArgument("camera grid and field of view must be positive".into()));
        }
        Ok(())
    }

    fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Pixel index and depth of a world point, if it projects into the image.
    fn project(&self, inv: &Pose, p: &Vector3<f64>) -> Option<(usize, f64)> {
        let c = inv.apply(p);
        if c.z <= 0.05 {
            return None;
        }
        let f = self.focal();
        let u = f * c.x / c.z + self.width as f64 / 2.0;
        let v = f * c.y / c.z + self.height as f64 / 2.0;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((v as usize * self.width + u as usize, c.z))
    }

    /// World point where the ray through a pixel center meets the table,
    /// with its depth.
    fn table_hit(&self, pixel: usize, table: &Workspace) -> Option<(Vector3<f64>, f64)> {
        let f = self.focal();
        let (u, v) = ((pixel % self.width) as f64 + 0.5, (pixel / self.width) as f64 + 0.5);
        let ray = Vector3::new((u - self.width as f64 / 2.0) / f, (v - self.height as f64 / 2.0) / f, 1.0);
        let dir = self.pose.rotation * ray;
        if dir.z.abs() < 1e-12 {
            return None;
        }
        let t = -self.pose.translation.z / dir.z;
        if t <= 0.0 {
            return None;
        }
        let hit = self.pose.translation + dir * t;
        let margin = 0.25;
        let on_table = hit.x >= table.min[0] - margin
            && hit.x <= table.max[0] + margin
            && hit.y >= table.min[1] - margin
            && hit.y <= table.max[1] + margin;
        on_table.then_some((hit, t))
    }
}

/// Renders the visible surface: part points and a table plane are z-buffered
/// per pixel, survivors get seeded noise along the view ray and dropout.
/// Labels give the source part, `None` for the table.
pub fn depth_sample(scene: &KinematicScene, camera: &CameraModel) -> Result<(PointCloud, Vec<Option<usize>>)> {
    camera.validate()?;
    let inv = camera.pose.inverse();
    let cells = camera.width * camera.height;
    let mut zbuf = vec![f64::INFINITY; cells];
    let mut candidates: Vec<(usize, f64, Vector3<f64>, [f64; 3], Option<usize>)> = Vec::new();
    for (pi, part) in scene.parts.iter().enumerate() {
        let world = part.world_cloud();
        for (k, p) in world.points.iter().enumerate() {
            if let Some((cell, depth)) = camera.project(&inv, p) {
                zbuf[cell] = zbuf[cell].min(depth);
                let color = world.colors.as_ref().map_or(part.color, |c| c[k]);
                candidates.push((cell, depth, *p, color, Some(pi)));
            }
        }
    }
    for cell in 0..cells {
        if let Some((hit, depth)) = camera.table_hit(cell, &scene.workspace) {
            zbuf[cell] = zbuf[cell].min(depth);
            candidates.push((cell, depth, hit, TABLE_COLOR, None));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(camera.seed);
    let noise = (camera.noise_sigma > 0.0).then(|| Normal::new(0.0, camera.noise_sigma).expect("finite sigma"));
    let eye = camera.pose.translation;
    let focal = camera.focal();
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    for (cell, depth, p, color, label) in candidates {
        let front = zbuf[cell];
        if depth > front + camera.depth_tolerance + camera.footprint_tolerance * front / focal {
            continue;
        }
        if camera.dropout_prob > 0.0 && rng.random::<f64>() < camera.dropout_prob {
            continue;
        }
        let p = match &noise {
            Some(n) => p + (p - eye).normalize() * n.sample(&mut rng),
            None => p,
        };
        points.push(p);
        colors.push(color);
        labels.push(label);
    }
    Ok((PointCloud::from_points(points).with_colors(colors), labels))
}

/// Uniform points on a sphere by the golden-angle spiral.
pub fn sample_sphere(radius: f64, n: usize) -> PointCloud {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect();
    PointCloud::from_points(pts)
}

// ---------------------------------------------------------------------------
// Scene configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub kind: String,
    pub dims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ply_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<PrimitiveSpec>,
    pub pose: PoseRecord,
    #[serde(default)]
    pub com_offset: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
    #[serde(default)]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout_prob: f64,
}

fn default_width() -> usize {
    200
}
fn default_height() -> usize {
    150
}
fn default_fov() -> f64 {
    60.0
}

impl CameraSpec {
    pub fn to_camera(&self, seed: u64) -> CameraModel {
        let mut c = CameraModel::looking_at(Vector3::from(self.eye), Vector3::from(self.target));
        c.width = self.width;
        c.height = self.height;
        c.fov_deg = self.fov_deg;
        c.with_noise(self.noise_sigma, self.dropout_prob, seed)
    }

    pub fn from_camera(c: &CameraModel, target: Vector3<f64>) -> Self {
        Self {
            eye: c.pose.translation.into(),
            target: target.into(),
            width: c.width,
            height: c.height,
            fov_deg: c.fov_deg,
            noise_sigma: c.noise_sigma,
            dropout_prob: c.dropout_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub parts: Vec<PartSpec>,
    #[serde(default)]
    pub joints: Vec<JointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_com: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Workspace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_spacing: Option<f64>,
}

fn unit3(v: [f64; 3], path: &str) -> Result<Vector3<f64>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(Error::config(path, "must be a non-zero vector"));
    }
    Ok(v / n)
}

fn colored(cloud: PointCloud, color: [f64; 3]) -> PointCloud {
    let n = cloud.len();
    match cloud.colors {
        Some(_) => cloud,
        None => cloud.with_colors(vec![color; n]),
    }
}

/// Builds a part cloud for a primitive; boxes and spheres are supported.
pub fn primitive_cloud(spec: &PrimitiveSpec, spacing: f64, path: &str) -> Result<(PointCloud, Option<[f64; 3]>)> {
    match spec.kind.as_str() {
        "box" => {
            let [x, y, z] = <[f64; 3]>::try_from(spec.dims.as_slice())
                .map_err(|_| Error::config(format!("{path}.dims"), "box needs three dimensions"))?;
            if !(x > 0.0 && y > 0.0 && z > 0.0) {
                return Err(Error::config(format!("{path}.dims"), "dimensions must be positive"));
            }
            Ok((sample_box_surface([x, y, z], spacing), Some([x, y, z])))
        }
        "sphere" => {
            let [r] = <[f64; 1]>::try_from(spec.dims.as_slice())
                .map_err(|_| Error::config(format!("{path}.dims"), "sphere needs one radius"))?;
            if !(r > 0.0) {
                return Err(Error::config(format!("{path}.dims"), "radius must be positive"));
            }
            let n = ((4.0 * std::f64::consts::PI * r * r) / (spacing * spacing)).ceil() as usize;
            Ok((sample_sphere(r, n.max(8)), None))
        }
        other => Err(Error::config(format!("{path}.kind"), format!("unknown primitive `{other}`"))),
    }
}

/// Parses a scene description. Relative `ply_path`s resolve against `base`.
pub fn scene_from_config_in(json_text: &str, base: Option<&Path>) -> Result<(KinematicScene, SceneConfig)> {
    let cfg: SceneConfig = serde_json::from_str(json_text).map_err(|e| Error::config("<scene>", e.to_string()))?;
    let scene = build_scene(&cfg, base)?;
    Ok((scene, cfg))
}

pub fn scene_from_config(json_text: &str) -> Result<KinematicScene> {
    scene_from_config_in(json_text, None).map(|(s, _)| s)
}

pub fn build_scene(cfg: &SceneConfig, base: Option<&Path>) -> Result<KinematicScene> {
    if cfg.parts.is_empty() {
        return Err(Error::config("parts", "at least one part is required"));
    }
    let spacing = cfg.sample_spacing.unwrap_or(DEFAULT_SPACING);
    if !(spacing > 0.0) {
        return Err(Error::config("sample_spacing", "must be positive"));
    }
    let mut parts = Vec::new();
    for (i, p) in cfg.parts.iter().enumerate() {
        let path = format!("parts[{i}]");
        let color = p.color.unwrap_or_else(|| palette_color(i));
        let (cloud, dims) = match (&p.ply_path, &p.primitive) {
            (Some(ply), None) => {
                let full = match base {
                    Some(b) if Path::new(ply).is_relative() => b.join(ply),
                    _ => Path::new(ply).to_path_buf(),
                };
                if !full.exists() {
                    return Err(Error::config(format!("{path}.ply_path"), format!("file not found: {}", full.display())));
                }
                (load_ply(&full)?, None)
            }
            (None, Some(prim)) => primitive_cloud(prim, spacing, &format!("{path}.primitive"))?,
            _ => return Err(Error::config(&path, "exactly one of `ply_path` or `primitive` is required")),
        };
        if cloud.is_empty() {
            return Err(Error::config(&path, "part cloud is empty"));
        }
        let q = p.pose.q;
        let qn = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !(qn > 1e-12) {
            return Err(Error::config(format!("{path}.pose.q"), "quaternion must be non-zero"));
        }
        parts.push(Part {
            name: p.name.clone(),
            cloud: colored(cloud, color),
            pose: Pose::from(&p.pose),
            com_offset: Vector3::from(p.com_offset),
            color,
            dims,
        });
    }
    let mut joints = Vec::new();
    for (i, j) in cfg.joints.iter().enumerate() {
        let path = format!("joints[{i}]");
        for (field, idx) in [("parent", j.parent), ("child", j.child)] {
            if idx >= parts.len() {
                return Err(Error::config(format!("{path}.{field}"), format!("part index {idx} out of range")));
            }
        }
        if j.parent == j.child {
            return Err(Error::config(format!("{path}.child"), "child must differ from parent"));
        }
        let axis = match (j.kind, j.axis) {
            (JointKind::Rigid, a) => a.map_or(Ok(Vector3::z()), |a| unit3(a, &format!("{path}.axis")))?,
            (_, Some(a)) => unit3(a, &format!("{path}.axis"))?,
            (_, None) => return Err(Error::config(format!("{path}.axis"), "required for revolute and prismatic joints")),
        };
        let pivot = match (j.kind, j.pivot) {
            (JointKind::Revolute, None) => return Err(Error::config(format!("{path}.pivot"), "required for revolute joints")),
            (_, p) => Vector3::from(p.unwrap_or([0.0; 3])),
        };
        let limits = match (j.kind, j.limits) {
            (JointKind::Rigid, _) => [0.0, 0.0],
            (_, Some(l)) if l[0] <= l[1] => l,
            (_, Some(_)) => return Err(Error::config(format!("{path}.limits"), "lower limit exceeds upper limit")),
            (_, None) => return Err(Error::config(format!("{path}.limits"), "required for revolute and prismatic joints")),
        };
        let value = if j.kind == JointKind::Rigid { 0.0 } else { j.value };
        if value < limits[0] || value > limits[1] {
            return Err(Error::config(format!("{path}.value"), format!("{value} outside limits [{}, {}]", limits[0], limits[1])));
        }
        joints.push(JointDef {
            kind: j.kind,
            parent: j.parent,
            child: j.child,
            axis,
            pivot,
            limits,
            value,
            rest: Pose::identity(),
        });
    }
    let mut scene = KinematicScene::new(parts, joints).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::config("joints", m),
        other => other,
    })?;
    if let Some(k) = cfg.kappa_com {
        scene.kappa_com = k;
    }
    if let Some(w) = cfg.workspace {
        scene.workspace = w;
    }
    Ok(scene)
}

// ---------------------------------------------------------------------------
// Builtin scenes

/// Camera used for the builtin scenes: 0.9 m from the workspace center at
/// 60° elevation.
pub fn default_camera() -> CameraModel {
    CameraModel::overhead(Workspace::default().center(), 0.9, 60.0)
}

struct Builder {
    parts: Vec<PartSpec>,
    joints: Vec<JointSpec>,
}

impl Builder {
    fn new() -> Self {
        Self {
            parts: Vec::new(),
            joints: Vec::new(),
        }
    }

    fn boxed(&mut self, name: &str, dims: [f64; 3], center: [f64; 3]) -> usize {
        self.parts.push(PartSpec {
            name: name.into(),
            ply_path: None,
            primitive: Some(PrimitiveSpec {
                kind: "box".into(),
                dims: dims.to_vec(),
            }),
            pose: PoseRecord::from(&Pose::from_translation(Vector3::from(center))),
            com_offset: [0.0; 3],
            color: None,
        });
        self.parts.len() - 1
    }

    /// Adds a joint; `pivot` is given in world coordinates and converted to
    /// the parent frame (parents are axis aligned at rest).
    fn joint(&mut self, kind: JointKind, parent: usize, child: usize, axis: [f64; 3], pivot: [f64; 3], limits: [f64; 2]) {
        let t = self.parts[parent].pose.t;
        self.joints.push(JointSpec {
            kind,
            parent,
            child,
            axis: Some(axis),
            pivot: Some([pivot[0] - t[0], pivot[1] - t[1], pivot[2] - t[2]]),
            limits: Some(limits),
            value: 0.0,
        });
    }

    fn finish(self) -> SceneConfig {
        SceneConfig {
            parts: self.parts,
            joints: self.joints,
            camera: Some(CameraSpec::from_camera(&default_camera(), Workspace::default().center())),
            seed: None,
            kappa_com: None,
            workspace: None,
            sample_spacing: None,
        }
    }
}

/// Two-part fixtures used for joint-type detection.
pub const PAIR_SHAPES: [&str; 3] = ["side", "cube", "stack"];

pub const BUILTIN_SCENES: [&str; 15] = [
    "drawer-like",
    "glasses-like",
    "dishwasher-like",
    "blade-like",
    "box",
    "side-rigid",
    "side-revolute",
    "side-prismatic",
    "cube-rigid",
    "cube-revolute",
    "cube-prismatic",
    "stack-rigid",
    "stack-revolute",
    "stack-prismatic",
    "long-box",
];

fn pair_config(shape: &str, kind: JointKind) -> Option<SceneConfig> {
    let mut b = Builder::new();
    let (slide_axis, pivot) = match shape {
        // two cuboids side by side along y, 2 cm apart
        "side" => {
            b.boxed("left", [0.12, 0.06, 0.05], [0.5, -0.04, 0.025]);
            b.boxed("right", [0.12, 0.06, 0.05], [0.5, 0.04, 0.025]);
            ([1.0, 0.0, 0.0], [0.44, 0.0, 0.025])
        }
        // a cube followed by a longer cuboid along x
        "cube" => {
            b.boxed("cube", [0.07, 0.07, 0.07], [0.43, 0.0, 0.035]);
            b.boxed("cuboid", [0.14, 0.05, 0.04], [0.536, 0.0, 0.02]);
            ([1.0, 0.0, 0.0], [0.466, 0.0, 0.02])
        }
        // a plate resting on a block
        "stack" => {
            b.boxed("block", [0.14, 0.1, 0.05], [0.5, 0.0, 0.025]);
            b.boxed("plate", [0.12, 0.08, 0.012], [0.5, 0.0, 0.0565]);
            ([1.0, 0.0, 0.0], [0.5, 0.0, 0.05])
        }
        _ => return None,
    };
    let (axis, limits) = match kind {
        JointKind::Rigid => ([0.0, 0.0, 1.0], [0.0, 0.0]),
        JointKind::Revolute => ([0.0, 0.0, 1.0], [-std::f64::consts::PI, std::f64::consts::PI]),
        JointKind::Prismatic => (slide_axis, [-0.15, 0.15]),
    };
    b.joint(kind, 0, 1, axis, pivot, limits);
    Some(b.finish())
}

/// Scene description for a builtin name.
pub fn builtin_config(name: &str) -> Result<SceneConfig> {
    use std::f64::consts::FRAC_PI_2;
    let mut b = Builder::new();
    let cfg = match name {
        // front faces the builtin camera, like the dishwasher door
        "drawer-like" => {
            b.boxed("case", [0.2, 0.16, 0.1], [0.55, 0.0, 0.05]);
            b.boxed("drawer", [0.14, 0.1, 0.05], [0.379, 0.0, 0.025]);
            b.joint(JointKind::Prismatic, 0, 1, [-1.0, 0.0, 0.0], [0.45, 0.0, 0.025], [0.0, 0.15]);
            b.finish()
        }
        "glasses-like" => {
            b.boxed("frame", [0.012, 0.15, 0.05], [0.45, 0.0, 0.025]);
            b.boxed("temple-left", [0.12, 0.012, 0.02], [0.517, 0.069, 0.03]);
            b.boxed("temple-right", [0.12, 0.012, 0.02], [0.517, -0.069, 0.03]);
            b.joint(JointKind::Revolute, 0, 1, [0.0, 0.0, 1.0], [0.456, 0.069, 0.03], [0.0, FRAC_PI_2]);
            b.joint(JointKind::Revolute, 0, 2, [0.0, 0.0, 1.0], [0.456, -0.069, 0.03], [-FRAC_PI_2, 0.0]);
            b.finish()
        }
        "dishwasher-like" => {
            b.boxed("body", [0.24, 0.24, 0.24], [0.58, 0.0, 0.12]);
            b.boxed("door", [0.02, 0.24, 0.22], [0.45, 0.0, 0.13]);
            b.joint(JointKind::Revolute, 0, 1, [0.0, -1.0, 0.0], [0.45, 0.0, 0.02], [0.0, FRAC_PI_2]);
            b.finish()
        }
        "blade-like" => {
            b.boxed("handle", [0.1, 0.025, 0.02], [0.5, 0.0, 0.01]);
            b.boxed("blade", [0.08, 0.02, 0.006], [0.591, 0.0, 0.012]);
            b.joint(JointKind::Prismatic, 0, 1, [1.0, 0.0, 0.0], [0.55, 0.0, 0.012], [0.0, 0.08]);
            b.finish()
        }
        "box" => {
            b.boxed("box", [0.12, 0.08, 0.05], [0.5, 0.0, 0.025]);
            b.finish()
        }
        "long-box" => {
            b.boxed("box", [0.16, 0.06, 0.05], [0.5, 0.0, 0.025]);
            b.finish()
        }
        _ => {
            let (shape, kind) = name.split_once('-').ok_or_else(|| Error::UnknownScene(name.into()))?;
            let kind = match kind {
                "rigid" => JointKind::Rigid,
                "revolute" => JointKind::Revolute,
                "prismatic" => JointKind::Prismatic,
                _ => return Err(Error::UnknownScene(name.into())),
            };
            pair_config(shape, kind).ok_or_else(|| Error::UnknownScene(name.into()))?
        }
    };
    Ok(cfg)
}

pub fn builtin_scene(name: &str) -> Result<KinematicScene> {
    build_scene(&builtin_config(name)?, None)
}

/// Places an assembly so its root sits at a planar pose on the table.
pub fn place_root(scene: &mut KinematicScene, part: usize, x: f64, y: f64, yaw: f64) {
    let root = scene.root_of(part);
    let current = scene.parts[root].pose;
    let target = Pose::planar(x, y, current.translation.z, yaw);
    let motion = target.compose(&Pose::planar(current.translation.x, current.translation.y, current.translation.z, current.yaw()).inverse());
    scene.move_assembly(part, &motion);
}

// ---------------------------------------------------------------------------
// Trajectories

/// Scene state at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub poses: Vec<Pose>,
    pub joints: Vec<f64>,
}

impl TrajectoryFrame {
    pub fn capture(scene: &KinematicScene) -> Self {
        Self {
            poses: scene.parts.iter().map(|p| p.pose).collect(),
            joints: scene.joints.iter().map(|j| j.value).collect(),
        }
    }

    pub fn apply(&self, scene: &mut KinematicScene) -> Result<()> {
        if self.poses.len() != scene.parts.len() || self.joints.len() != scene.joints.len() {
            return Err(Error::PartCountMismatch {
                left: self.poses.len(),
                right: scene.parts.len(),
            });
        }
        for (part, pose) in scene.parts.iter_mut().zip(&self.poses) {
            part.pose = *pose;
        }
        for (joint, v) in scene.joints.iter_mut().zip(&self.joints) {
            joint.value = *v;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkParams {
    /// Largest planar step of an assembly per frame, m.
    pub max_step: f64,
    /// Largest yaw change per frame, rad.
    pub max_turn: f64,
    /// Largest joint change per frame as a fraction of the joint range.
    pub max_joint_fraction: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            max_step: 0.05,
            max_turn: 0.15,
            max_joint_fraction: 0.05,
        }
    }
}

/// Seeded planar random walk. Every frame each assembly steps between half
/// and all of `max_step` in a random direction and turns about its root
/// centroid; joints wander inside their limits. Steps that would leave the
/// workspace are drawn again. Returns `steps + 1` frames including the start.
pub fn random_walk(scene: &mut KinematicScene, steps: usize, params: &WalkParams, seed: u64) -> Result<Vec<TrajectoryFrame>> {
    scene.check_workspace()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = vec![TrajectoryFrame::capture(scene)];
    let roots: Vec<usize> = (0..scene.parts.len()).filter(|&p| scene.parent_joint(p).is_none()).collect();
    for _ in 0..steps {
        for j in 0..scene.joints.len() {
            let [lo, hi] = scene.joints[j].limits;
            let dv = rng.random_range(-1.0..=1.0) * params.max_joint_fraction * (hi - lo);
            let v = (scene.joints[j].value + dv).clamp(lo, hi);
            scene.set_joint_value(j, v)?;
        }
        for &root in &roots {
            let before: Vec<Pose> = scene.parts.iter().map(|p| p.pose).collect();
            let mut placed = false;
            for _ in 0..100 {
                let heading = rng.random_range(-PI..PI);
                let length = params.max_step * rng.random_range(0.5..=1.0);
                let turn = rng.random_range(-1.0..=1.0) * params.max_turn;
                let c = scene.parts[root].world_centroid();
                let pivot = Vector3::new(c.x, c.y, 0.0);
                let step = Vector3::new(heading.cos(), heading.sin(), 0.0) * length;
                let motion = Pose::from_translation(step).compose(&Pose::rotation_about(&pivot, &Vector3::z(), turn));
                scene.move_assembly(root, &motion);
                if scene.check_workspace().is_ok() {
                    placed = true;
                    break;
                }
                for (part, pose) in scene.parts.iter_mut().zip(&before) {
                    part.pose = *pose;
                }
            }
            if !placed {
                return Err(Error::WorkspaceExceeded("no step keeps the assembly inside the workspace".into()));
            }
        }
        frames.push(TrajectoryFrame::capture(scene));
    }
    Ok(frames)
}
