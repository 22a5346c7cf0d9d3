//! Goal-driven pushing and pulling. The bearing between the push line and
//! the goal is fed through a saturated PID whose output slides the push
//! contact along the part's face; the offset contact turns the part toward
//! the goal while the push direction stays on the part's short axis.

use std::fmt::Write as _;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::articulation::{footprint_obb, plan_hold_pull, ActionKind, ActionSpec, PartTracks};
use crate::error::{BestSoFar, Error, Result};
use crate::liegroup::Pose;
use crate::sim::{nearest_part, Environment, KinematicScene};

pub const PUSH_INCREMENT: f64 = 0.03;
pub const SATURATION: f64 = 0.03;
pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct GoalSpec {
    /// Target pose per tracked part; the planar translation is the goal.
    pub targets: Vec<Pose>,
    pub tolerance: f64,
}

impl GoalSpec {
    pub fn new(targets: Vec<Pose>, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(Self { targets, tolerance })
    }

    /// Goals for tracked parts from target poses of the simulated parts.
    /// Each tracked centroid is attached to the nearest simulated part, and
    /// its goal is where that body point ends up when the part sits at its
    /// target pose.
    pub fn from_part_targets(scene: &KinematicScene, tracked: &[Vector3<f64>], part_targets: &[Pose], tolerance: f64) -> Result<(Self, Vec<BodyPoint>)> {
        if part_targets.len() != scene.parts.len() {
            return Err(Error::PartCountMismatch {
                left: part_targets.len(),
                right: scene.parts.len(),
            });
        }
        let points = BodyPoint::attach(scene, tracked)?;
        let targets = points
            .iter()
            .map(|b| Pose::from_translation(part_targets[b.part].apply(&b.local)))
            .collect();
        Ok((Self::new(targets, tolerance)?, points))
    }
}

/// A point fixed in a simulated part, used to score tracked goals against
/// the true part motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPoint {
    pub part: usize,
    pub local: Vector3<f64>,
}

impl BodyPoint {
    pub fn attach(scene: &KinematicScene, world: &[Vector3<f64>]) -> Result<Vec<Self>> {
        world
            .iter()
            .map(|c| {
                let (part, _) = nearest_part(scene, c).ok_or_else(|| Error::DegenerateGeometry("scene has no parts".into()))?;
                Ok(Self {
                    part,
                    local: scene.parts[part].pose.inverse().apply(c),
                })
            })
            .collect()
    }

    pub fn world(&self, scene: &KinematicScene) -> Vector3<f64> {
        scene.parts[self.part].pose.apply(&self.local)
    }
}

/// True planar distance of each body point to its goal.
pub fn ground_truth_errors(scene: &KinematicScene, points: &[BodyPoint], goal: &GoalSpec) -> Vec<f64> {
    points
        .iter()
        .zip(&goal.targets)
        .map(|(b, t)| distance_to_goal(&planar(&b.world(scene)), &planar(&t.translation)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    pub integral: f64,
    pub previous_error: f64,
    pub saturation: f64,
}

impl Default for PidState {
    fn default() -> Self {
        Self {
            k_p: 0.05,
            k_i: 0.0,
            k_d: 0.03,
            integral: 0.0,
            previous_error: 0.0,
            saturation: SATURATION,
        }
    }
}

/// One PID step; the output is clipped to `±saturation`.
pub fn pid_step(state: &mut PidState, e: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    state.integral += e * dt;
    let derivative = (e - state.previous_error) / dt;
    state.previous_error = e;
    let c = state.k_p * e + state.k_i * state.integral + state.k_d * derivative;
    Ok(c.clamp(-state.saturation, state.saturation))
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed angle at `O` between the line `O→P` and the goal `T`, from the
/// foot `I` of the perpendicular from `T`: `θ = atan(|T−I| / |O−I|)`,
/// positive when `T` lies left of `O→P`.
pub fn bearing_theta(o: &Vector2<f64>, p: &Vector2<f64>, t: &Vector2<f64>) -> Result<f64> {
    let u = p - o;
    let len2 = u.norm_squared();
    if !(len2 > 0.0) {
        return Err(Error::DegenerateGeometry("bearing line needs O != P".into()));
    }
    let i = o + u * ((t - o).dot(&u) / len2);
    let side = cross2(&u, &(t - o));
    let sign = if side < 0.0 { -1.0 } else { 1.0 };
    let oi = (i - o).norm();
    let ti = (t - i).norm();
    if oi < 1e-9 {
        return Ok(if ti == 0.0 { 0.0 } else { sign * std::f64::consts::FRAC_PI_2 });
    }
    Ok(sign * (ti / oi).atan())
}

/// Moves the sensor frame by `c` along its own x axis.
pub fn shift_sensor(h_ws: &Pose, c: f64) -> Pose {
    h_ws.compose(&Pose::from_translation(Vector3::new(c, 0.0, 0.0)))
}

pub fn distance_to_goal(o: &Vector2<f64>, t: &Vector2<f64>) -> f64 {
    (t - o).norm()
}

fn planar(v: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(v.x, v.y)
}

/// Push geometry for one increment, before the PID shift is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PushGeometry {
    pub base: ActionSpec,
    /// Horizontal direction along the contacted face, right of the push.
    pub face_axis: Vector3<f64>,
    pub theta: f64,
    /// The goal is too far off the push line; this increment pushes away
    /// from it while turning, to open room for the approach.
    pub backing_off: bool,
}

/// Bearing above which a free part is pushed away from the goal instead of
/// toward it. A part can only turn so fast, and a goal close beside it lies
/// inside its turning circle where forward pushes only orbit it.
pub const BACKOFF_BEARING: f64 = 1.0;

/// Base push through the part center along `±V_y` and the bearing of the
/// goal from the `V_y` line. The sign of `V_y` points toward the goal unless
/// the bearing exceeds `backoff_bearing`.
pub fn push_geometry(part_cloud: &crate::cloud::PointCloud, tracked_pose: &Pose, target_pose: &Pose, backoff_bearing: f64) -> Result<PushGeometry> {
    let obb = footprint_obb(part_cloud)?;
    let o = tracked_pose.translation;
    let t = target_pose.translation;
    let vy = obb.middle();
    let toward = if (t - o).dot(&vy) < 0.0 { -vy } else { vy };
    let theta = bearing_theta(&planar(&o), &planar(&(o + toward)), &planar(&t))?;
    let backing_off = theta.abs() > backoff_bearing;
    let d = if backing_off { -toward } else { toward };
    let (zlo, zhi) = part_cloud
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let mut p = obb.center - d * obb.extents[1];
    p.z = (zlo + zhi) / 2.0;
    Ok(PushGeometry {
        base: ActionSpec {
            kind: ActionKind::Push,
            target_part: 0,
            p,
            d,
            distance: PUSH_INCREMENT,
        },
        face_axis: d.cross(&Vector3::z()),
        theta,
        backing_off,
    })
}

/// Push with the contact slid along the face by the PID output. A positive
/// shift turns the part counter-clockwise whichever face is pushed, so the
/// part always turns its push line toward the goal.
pub fn plan_goal_push(part_cloud: &crate::cloud::PointCloud, tracked_pose: &Pose, target_pose: &Pose, pid: &mut PidState) -> Result<(ActionSpec, f64, f64)> {
    plan_goal_push_with(part_cloud, tracked_pose, target_pose, pid, BACKOFF_BEARING)
}

/// [`plan_goal_push`] with an explicit back-off bearing; `f64::INFINITY`
/// always pushes toward the goal.
pub fn plan_goal_push_with(
    part_cloud: &crate::cloud::PointCloud,
    tracked_pose: &Pose,
    target_pose: &Pose,
    pid: &mut PidState,
    backoff_bearing: f64,
) -> Result<(ActionSpec, f64, f64)> {
    let g = push_geometry(part_cloud, tracked_pose, target_pose, backoff_bearing)?;
    let c = pid_step(pid, g.theta, 1.0)?;
    let mut spec = g.base;
    spec.p += g.face_axis * c;
    Ok((spec, g.theta, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushIteration {
    pub iteration: usize,
    pub part: usize,
    pub theta: f64,
    pub c: f64,
    /// Tracked distance to goal of every part before the push.
    pub distances: Vec<f64>,
    /// Push direction and base contact point of the increment.
    pub direction: [f64; 3],
    pub contact: [f64; 3],
    pub backing_off: bool,
    /// x, y, z and yaw of every tracked part after the push.
    pub tracked: Vec<[f64; 4]>,
    pub contact_lost: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PushReport {
    pub iterations: Vec<PushIteration>,
    pub increments: usize,
    /// Tracked per-part planar distance to goal at the end.
    pub final_errors: Vec<f64>,
    pub success: bool,
}

impl PushReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let parts = self.final_errors.len();
        let mut out = String::from("iteration,part,theta,c,contact_lost");
        for i in 0..parts {
            let _ = write!(out, ",d{i},x{i},y{i},yaw{i}");
        }
        out.push('\n');
        for it in &self.iterations {
            let _ = write!(out, "{},{},{:.9},{:.9},{}", it.iteration, it.part, it.theta, it.c, it.contact_lost);
            for i in 0..parts {
                let _ = write!(out, ",{:.9},{:.9},{:.9},{:.9}", it.distances[i], it.tracked[i][0], it.tracked[i][1], it.tracked[i][3]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Goal tolerance used when goals are built from a run config, m.
    pub tolerance: f64,
    pub increment: f64,
    /// Pusher travel between observations, m.
    pub substep: f64,
    pub standoff: f64,
    pub max_increments: usize,
    pub settle_frames: usize,
    /// See [`BACKOFF_BEARING`]. Only used for single-part objects: a part
    /// held by a joint moves along a fixed path, and backing off only takes
    /// it away from the goal.
    pub backoff_bearing: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k_p: 0.05,
            k_i: 0.0,
            k_d: 0.03,
            tolerance: DEFAULT_TOLERANCE,
            increment: PUSH_INCREMENT,
            substep: 0.01,
            standoff: 0.005,
            max_increments: 100,
            settle_frames: 1,
            backoff_bearing: BACKOFF_BEARING,
        }
    }
}

impl ControllerConfig {
    pub fn pid(&self) -> PidState {
        PidState {
            k_p: self.k_p,
            k_i: self.k_i,
            k_d: self.k_d,
            ..PidState::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_p, self.k_i, self.k_d];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("controller gains must be finite".into()));
        }
        if !(self.tolerance > 0.0 && self.increment > 0.0 && self.substep > 0.0 && self.standoff >= 0.0 && self.backoff_bearing > 0.0) {
            return Err(Error::InvalidArgument("controller distances must be positive".into()));
        }
        Ok(())
    }
}

fn distances(tracks: &PartTracks, goal: &GoalSpec) -> Vec<f64> {
    tracks
        .centroids()
        .iter()
        .zip(&goal.targets)
        .map(|(o, t)| distance_to_goal(&planar(o), &planar(&t.translation)))
        .collect()
}

/// Pushes parts in 3 cm increments until every tracked part is within
/// tolerance of its goal. Each iteration pushes the part farthest from its
/// goal; a sub-step without contact aborts the increment, and the increment
/// also stops early once every part is inside the tolerance.
pub fn push_to_goal<E: Environment + ?Sized>(env: &mut E, tracks: &mut PartTracks, goal: &GoalSpec, config: &ControllerConfig) -> Result<PushReport> {
    config.validate()?;
    if goal.targets.len() != tracks.len() {
        return Err(Error::PartCountMismatch {
            left: goal.targets.len(),
            right: tracks.len(),
        });
    }
    let mut pids = vec![config.pid(); tracks.len()];
    let mut report = PushReport::default();
    loop {
        let dist = distances(tracks, goal);
        if dist.iter().all(|&d| d <= goal.tolerance) {
            report.final_errors = dist;
            report.success = true;
            return Ok(report);
        }
        if report.increments >= config.max_increments {
            report.final_errors = dist;
            return Err(Error::BudgetExhausted(Box::new(BestSoFar::Push(report))));
        }
        let part = dist
            .iter()
            .enumerate()
            .fold(0, |best, (i, &d)| if d > dist[best] { i } else { best });
        let tracked = tracks.trackers[part].pose();
        let backoff = if tracks.len() == 1 { config.backoff_bearing } else { f64::INFINITY };
        let geometry = push_geometry(tracks.part_cloud(part), &tracked, &goal.targets[part], backoff)?;
        let (theta, backing_off) = (geometry.theta, geometry.backing_off);
        let c = pid_step(&mut pids[part], theta, 1.0)?;
        let mut spec = geometry.base;
        spec.p += geometry.face_axis * c;
        spec.target_part = part;
        spec.distance = config.increment;

        let start = spec.p - spec.d * config.standoff;
        let total = config.increment + config.standoff;
        let steps = (total / config.substep).ceil().max(1.0) as usize;
        let step = total / steps as f64;
        // The face estimate can be a few mm off, so a pusher still closing
        // in is not a loss; losing an established contact is.
        let mut touched = false;
        let mut contact_lost = false;
        for k in 0..steps {
            let reading = env.push(&(start + spec.d * (step * k as f64)), &spec.d, step)?;
            if !reading.in_contact {
                if touched {
                    contact_lost = true;
                    break;
                }
                continue;
            }
            touched = true;
            tracks.observe(env, Some((part, &reading)))?;
            if distances(tracks, goal).iter().all(|&d| d <= goal.tolerance) {
                break;
            }
        }
        contact_lost |= !touched;
        for _ in 0..config.settle_frames {
            tracks.observe(env, None)?;
        }
        report.increments += 1;
        report.iterations.push(PushIteration {
            iteration: report.iterations.len(),
            part,
            theta,
            c,
            distances: dist,
            direction: spec.d.into(),
            contact: spec.p.into(),
            backing_off,
            tracked: tracks
                .centroids()
                .iter()
                .zip(tracks.poses())
                .map(|(v, p)| [v.x, v.y, v.z, p.yaw()])
                .collect(),
            contact_lost,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullRecord {
    /// Signed pull length along the planned direction, m.
    pub distance: f64,
    /// Tracked remaining displacement along the pull axis afterwards, m.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PullReport {
    pub pulls: Vec<PullRecord>,
    pub hold_part: usize,
    pub pull_part: usize,
    /// Tracked planar distance of the pulled part to its goal.
    pub final_error: f64,
    pub success: bool,
}

impl PullReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pull,distance,residual\n");
        for (i, p) in self.pulls.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.9},{:.9}", p.distance, p.residual);
        }
        out
    }
}

/// Holds `hold_part` and pulls `pull_part` by the tracked displacement to
/// its target along the pull axis. A residual above tolerance gets one more
/// pull; anything left after that is reported as a partial result.
pub fn pull_to_goal<E: Environment + ?Sized>(
    env: &mut E,
    tracks: &mut PartTracks,
    hold_part: usize,
    pull_part: usize,
    goal: &GoalSpec,
    config: &ControllerConfig,
) -> Result<PullReport> {
    config.validate()?;
    if goal.targets.len() != tracks.len() {
        return Err(Error::PartCountMismatch {
            left: goal.targets.len(),
            right: tracks.len(),
        });
    }
    if hold_part >= tracks.len() || pull_part >= tracks.len() || hold_part == pull_part {
        return Err(Error::InvalidArgument(format!("invalid hold/pull parts {hold_part}/{pull_part}")));
    }
    let target = &goal.targets[pull_part];
    let (hold, pull) = plan_hold_pull(tracks.part_cloud(hold_part), tracks.part_cloud(pull_part))?;
    let axis = pull.d;
    let mut report = PullReport {
        hold_part,
        pull_part,
        ..PullReport::default()
    };
    let remaining = |tracks: &PartTracks| (target.translation - tracks.centroids()[pull_part]).dot(&axis);
    let mut grasp = pull.p;
    for attempt in 0..2 {
        let want = remaining(tracks);
        if attempt > 0 && want.abs() <= goal.tolerance {
            break;
        }
        let steps = (want.abs() / config.substep).ceil().max(1.0) as usize;
        let step = want / steps as f64;
        for _ in 0..steps {
            let reading = env.hold_pull(&hold.p, &grasp, &axis, step)?;
            if !reading.force_rising {
                grasp += axis * step;
            }
            tracks.observe(env, Some((pull_part, &reading)))?;
        }
        for _ in 0..config.settle_frames.max(2) {
            tracks.observe(env, None)?;
        }
        report.pulls.push(PullRecord {
            distance: want,
            residual: remaining(tracks),
        });
    }
    let o = tracks.centroids()[pull_part];
    report.final_error = distance_to_goal(&planar(&o), &planar(&target.translation));
    report.success = report.final_error <= goal.tolerance;
    if !report.success {
        return Err(Error::BudgetExhausted(Box::new(BestSoFar::Pull(report))));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn bearing_examples() {
        let th = bearing_theta(&v(0.0, 0.0), &v(1.0, 1.0), &v(2.0, 0.0)).unwrap();
        assert!((th.abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(th < 0.0);
        assert_eq!(bearing_theta(&v(0.0, 0.0), &v(1.0, 1.0), &v(3.0, 3.0)).unwrap(), 0.0);
        let th = bearing_theta(&v(0.0, 0.0), &v(1.0, 0.0), &v(1.0, 1.0)).unwrap();
        assert!((th - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(matches!(bearing_theta(&v(1.0, 1.0), &v(1.0, 1.0), &v(0.0, 0.0)), Err(Error::DegenerateGeometry(_))));
        // vertical line
        let th = bearing_theta(&v(0.0, 0.0), &v(0.0, 1.0), &v(-1.0, 1.0)).unwrap();
        assert!((th - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn bearing_invariant_under_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut pt = || v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (o, p, t) = (pt(), pt(), pt());
            let a: f64 = rng.random_range(-3.0..3.0);
            let r = nalgebra::Rotation2::new(a);
            let s = v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m = |q: Vector2<f64>| r * q + s;
            let x = bearing_theta(&o, &p, &t).unwrap();
            let y = bearing_theta(&m(o), &m(p), &m(t)).unwrap();
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pid_examples() {
        let mut s = PidState::default();
        assert_eq!(pid_step(&mut s, 0.0, 1.0).unwrap(), 0.0);
        let mut s = PidState::default();
        assert!((pid_step(&mut s, 0.4, 1.0).unwrap() - 0.03).abs() < 1e-15);
        assert!((pid_step(&mut s, 0.4, 1.0).unwrap() - 0.02).abs() < 1e-15);
        let mut s = PidState::default();
        for e in [10.0, -10.0, 3.0, -50.0] {
            assert!(pid_step(&mut s, e, 1.0).unwrap().abs() <= SATURATION);
        }
        assert!(pid_step(&mut s, 1.0, 0.0).is_err());
    }

    #[test]
    fn sensor_shift() {
        let h = Pose::planar(0.2, 0.1, 0.3, 0.7);
        assert_eq!(shift_sensor(&h, 0.0), h);
        assert!((shift_sensor(&Pose::identity(), 0.03).translation - Vector3::new(0.03, 0.0, 0.0)).norm() < 1e-15);
        let moved = shift_sensor(&h, 0.05).translation - h.translation;
        assert!((moved - h.rotation * Vector3::new(0.05, 0.0, 0.0)).norm() < 1e-15);
        let twice = shift_sensor(&shift_sensor(&h, 0.01), 0.02);
        assert!((twice.to_homogeneous() - shift_sensor(&h, 0.03).to_homogeneous()).amax() < 1e-12);
    }

    #[test]
    fn goal_distance() {
        assert_eq!(distance_to_goal(&v(0.0, 0.0), &v(3.0, 4.0)), 5.0);
        assert_eq!(distance_to_goal(&v(1.0, 2.0), &v(1.0, 2.0)), 0.0);
    }

    fn box_cloud() -> crate::cloud::PointCloud {
        crate::cloud::sample_box_surface([0.12, 0.06, 0.05], 0.005).transformed(&Pose::from_translation(Vector3::new(0.5, 0.0, 0.025)))
    }

    #[test]
    fn goal_push_shift_follows_bearing() {
        let cloud = box_cloud();
        let at = Pose::from_translation(Vector3::new(0.5, 0.0, 0.025));
        let ahead = Pose::from_translation(Vector3::new(0.5, 0.2, 0.0));
        let (s0, th0, c0) = plan_goal_push(&cloud, &at, &ahead, &mut PidState::default()).unwrap();
        assert_eq!(th0, 0.0);
        assert_eq!(c0, 0.0);
        let g = push_geometry(&cloud, &at, &ahead, BACKOFF_BEARING).unwrap();
        assert!((s0.p - g.base.p).norm() < 1e-15);
        assert!((s0.d - Vector3::y()).norm() < 1e-12);

        let left = Pose::from_translation(Vector3::new(0.4, 0.2, 0.0));
        let right = Pose::from_translation(Vector3::new(0.6, 0.2, 0.0));
        let (sl, thl, cl) = plan_goal_push(&cloud, &at, &left, &mut PidState::default()).unwrap();
        let (sr, thr, cr) = plan_goal_push(&cloud, &at, &right, &mut PidState::default()).unwrap();
        assert!(thl > 0.0 && thr < 0.0);
        assert!(cl > 0.0 && cr < 0.0 && cl.abs() <= SATURATION);
        assert!(((sl.p - s0.p).dot(&g.face_axis) - cl).abs() < 1e-12);
        assert!(((sr.p - s0.p).dot(&g.face_axis) - cr).abs() < 1e-12);
    }

    #[test]
    fn goal_mismatch_is_rejected() {
        let goal = GoalSpec::new(vec![Pose::identity(); 2], 0.02).unwrap();
        assert!(GoalSpec::new(Vec::new(), 0.0).is_err());
        assert_eq!(goal.targets.len(), 2);
    }
}
