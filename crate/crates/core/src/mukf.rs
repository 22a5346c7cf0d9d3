//! Unscented Kalman filter on SE(3).
//!
//! Sigma points are drawn in the tangent space at the mean and mapped to the
//! group with `retract(mean, ξ) = mean · exp(ξ)`. Covariances live in that
//! tangent space, ordered `[ω; v]`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{inv_retract, retract, Pose, Twist};
use crate::registration::{associate_segment, fuse_tactile, MeasurementFunction, MeasurementModel, ObservationBatch};
use crate::segmentation::{segment_scene, SegmentSet, SegmentationConfig};

pub const STATE_DIM: usize = 6;
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    pub fn lambda(&self) -> f64 {
        let m = STATE_DIM as f64;
        self.alpha * self.alpha * (m + self.kappa) - m
    }

    pub fn validate(&self) -> Result<()> {
        let spread = STATE_DIM as f64 + self.lambda();
        if !(spread > 0.0 && spread.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("M + lambda must be positive, got {spread}")));
        }
        Ok(())
    }

    /// Mean and covariance weights.
    pub fn weights(&self) -> ([f64; SIGMA_COUNT], [f64; SIGMA_COUNT]) {
        let m = STATE_DIM as f64;
        let lambda = self.lambda();
        let wi = 1.0 / (2.0 * (m + lambda));
        let mut wm = [wi; SIGMA_COUNT];
        let mut wc = [wi; SIGMA_COUNT];
        wm[0] = lambda / (m + lambda);
        wc[0] = wm[0] + (1.0 - self.alpha * self.alpha + self.beta);
        (wm, wc)
    }
}

/// Per-object filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: Pose,
    pub cov: Matrix6<f64>,
    pub q: Matrix6<f64>,
    pub r_scalar: f64,
}

impl TrackState {
    pub fn new(mean: Pose, cov: Matrix6<f64>, q: Matrix6<f64>, r_scalar: f64) -> Self {
        Self { mean, cov, q, r_scalar }
    }

    pub fn from_config(mean: Pose, config: &FilterConfig) -> Self {
        Self {
            mean,
            cov: Matrix6::from_diagonal(&Vector6::from(config.p0_diag)),
            q: Matrix6::from_diagonal(&Vector6::from(config.q_diag)),
            r_scalar: config.r_scalar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_valid(1e-6) {
            return Err(Error::InvalidArgument("mean is not a rigid transform".into()));
        }
        if !(self.r_scalar > 0.0) {
            return Err(Error::InvalidArgument(format!("R must be positive, got {}", self.r_scalar)));
        }
        if (self.cov - self.cov.transpose()).amax() > 1e-10 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        if self.q.iter().any(|v| !v.is_finite()) || self.q.diagonal().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("Q must have a non-negative diagonal".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SigmaSet {
    pub tangent_points: Vec<Twist>,
    pub manifold_points: Vec<Pose>,
    pub w_m: [f64; SIGMA_COUNT],
    pub w_c: [f64; SIGMA_COUNT],
}

/// Lower Cholesky factor of `m`, adding `jitter·I` (1e-12 up to 1e-6) when the
/// plain factorization fails.
pub fn cholesky_with_jitter(m: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::CholeskyFailure { jitter: 0.0 });
    }
    let sym = symmetrize(m);
    if let Some(c) = sym.cholesky() {
        return Ok(c.l());
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(c) = (sym + Matrix6::identity() * jitter).cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::CholeskyFailure { jitter: JITTER_MAX })
}

pub fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

fn spread_columns(cov: &Matrix6<f64>, params: &UkfParams) -> Result<Vec<Twist>> {
    let scale = STATE_DIM as f64 + params.lambda();
    let l = cholesky_with_jitter(&(cov * scale))?;
    let mut out = Vec::with_capacity(SIGMA_COUNT);
    out.push(Twist::zero());
    for sign in [1.0, -1.0] {
        for j in 0..STATE_DIM {
            out.push(Twist::from_vector(&(l.column(j) * sign).into_owned()));
        }
    }
    Ok(out)
}

pub fn sigma_points(state: &TrackState, params: &UkfParams) -> Result<SigmaSet> {
    params.validate()?;
    let tangent_points = spread_columns(&state.cov, params)?;
    let manifold_points = tangent_points.iter().map(|xi| retract(&state.mean, xi)).collect();
    let (w_m, w_c) = params.weights();
    Ok(SigmaSet {
        tangent_points,
        manifold_points,
        w_m,
        w_c,
    })
}

fn weighted_outer(devs: &[Vector6<f64>], w: &[f64; SIGMA_COUNT]) -> Matrix6<f64> {
    devs.iter().zip(w).fold(Matrix6::zeros(), |acc, (d, wi)| acc + d * d.transpose() * *wi)
}

/// Random-walk prediction. The mean is returned untouched; the covariance is
/// the sigma-point spread of the state plus that of the process noise.
pub fn predict(state: &TrackState, params: &UkfParams) -> Result<TrackState> {
    let sig = sigma_points(state, params)?;
    let state_devs: Vec<Vector6<f64>> = sig
        .manifold_points
        .iter()
        .map(|p| inv_retract(&state.mean, p).to_vector())
        .collect();
    let noise_devs: Vec<Vector6<f64>> = spread_columns(&state.q, params)?.iter().map(Twist::to_vector).collect();
    let cov = weighted_outer(&state_devs, &sig.w_c) + weighted_outer(&noise_devs, &sig.w_c);
    Ok(TrackState {
        mean: state.mean,
        cov: symmetrize(&cov),
        q: state.q,
        r_scalar: state.r_scalar,
    })
}

fn stack(points: &[Vector3<f64>]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

/// Measurement update. Returns the corrected state and the Frobenius norm of
/// the Kalman gain.
pub fn update<M: MeasurementFunction + ?Sized>(
    state: &TrackState,
    meas: &ObservationBatch,
    model: &M,
    params: &UkfParams,
) -> Result<(TrackState, f64)> {
    if meas.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sig = sigma_points(state, params)?;
    let y = stack(&meas.scene_points);
    let dim = y.len();

    let mut z = DMatrix::zeros(dim, SIGMA_COUNT);
    for (i, pose) in sig.manifold_points.iter().enumerate() {
        z.set_column(i, &stack(&model.predict(pose, meas)?));
    }
    let y_hat = (0..SIGMA_COUNT).fold(DVector::zeros(dim), |acc, i| acc + z.column(i) * sig.w_m[i]);

    let mut dz = z;
    for i in 0..SIGMA_COUNT {
        let mut c = dz.column_mut(i);
        c -= &y_hat;
    }
    let mut dx = DMatrix::zeros(STATE_DIM, SIGMA_COUNT);
    for (i, pose) in sig.manifold_points.iter().enumerate() {
        dx.set_column(i, &inv_retract(&state.mean, pose).to_vector());
    }
    let wc = DMatrix::from_diagonal(&DVector::from_column_slice(&sig.w_c));
    let mut p_yy = &dz * &wc * dz.transpose();
    for k in 0..dim {
        p_yy[(k, k)] += state.r_scalar;
    }
    p_yy = (&p_yy + p_yy.transpose()) * 0.5;
    let p_xy = &dx * &wc * dz.transpose();

    let chol = p_yy.clone().cholesky().ok_or(Error::SingularInnovation { condition: f64::INFINITY })?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = (dmax / dmin).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    // K = P_xy P_yy⁻¹, solved as P_yy Kᵀ = P_xyᵀ.
    let gain = chol.solve(&p_xy.transpose()).transpose();

    let innovation = y - y_hat;
    let correction = Vector6::from_iterator((&gain * innovation).iter().copied());
    let mean = retract(&state.mean, &Twist::from_vector(&correction));

    let reduction = &gain * &p_yy * gain.transpose();
    let mut cov = state.cov;
    for r in 0..STATE_DIM {
        for c in 0..STATE_DIM {
            cov[(r, c)] -= reduction[(r, c)];
        }
    }
    let next = TrackState {
        mean,
        cov: symmetrize(&cov),
        q: state.q,
        r_scalar: state.r_scalar,
    };
    Ok((next, gain.norm()))
}

/// Filter knobs shared by every tracked object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub q_diag: [f64; 6],
    pub r_scalar: f64,
    pub p0_diag: [f64; 6],
    pub max_correspondences: usize,
    pub association_gate: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
            q_diag: [1e-3; 6],
            r_scalar: 1e-4,
            p0_diag: [1e-4; 6],
            max_correspondences: 100,
            association_gate: 0.3,
        }
    }
}

impl FilterConfig {
    /// Preset for tracking parts while they are pushed or pulled in 1 cm
    /// steps: 1 cm translational and 0.2° rotational process noise per frame.
    /// Partially visible part models constrain rotation weakly, so a looser
    /// rotational noise lets static parts drift in yaw.
    pub fn interaction() -> Self {
        Self {
            q_diag: [1e-5, 1e-5, 1e-5, 1e-4, 1e-4, 1e-4],
            ..Self::default()
        }
    }

    /// Preset for goal-driven pushing, where an off-centre push turns a part
    /// by up to ~0.1 rad per frame: 0.1 rad rotational and 1 cm
    /// translational process noise.
    pub fn pushing() -> Self {
        Self {
            q_diag: [1e-2, 1e-2, 1e-2, 1e-4, 1e-4, 1e-4],
            ..Self::default()
        }
    }

    /// Preset for free-moving objects observed every few centimetres of
    /// travel. Sigma points drawn from the default noise spread wider than a
    /// desk-sized part, and the nearest-point measurement then saturates on
    /// the surface; 1 cm / 0.01 rad per frame keeps them on the object.
    pub fn tracking() -> Self {
        Self {
            q_diag: [1e-4; 6],
            ..Self::default()
        }
    }

    pub fn params(&self) -> UkfParams {
        UkfParams {
            alpha: self.alpha,
            beta: self.beta,
            kappa: self.kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.q_diag.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("q_diag entries must be non-negative".into()));
        }
        if self.p0_diag.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("p0_diag entries must be non-negative".into()));
        }
        if !(self.r_scalar > 0.0) {
            return Err(Error::InvalidArgument("r_scalar must be positive".into()));
        }
        if self.max_correspondences == 0 {
            return Err(Error::InvalidArgument("max_correspondences must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one tracking frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: TrackState,
    /// Index of the associated segment, `None` when nothing passed the gate.
    pub segment: Option<usize>,
    pub gain_norm: f64,
    /// Distance to the nearest segment when association failed.
    pub missed_by: Option<f64>,
}

/// Predict, associate, build the observation (with tactile points), update.
/// A frame without an acceptable segment returns the predicted state and the
/// miss is reported through `missed_by` rather than as an error.
pub fn track_step(
    state: &TrackState,
    scene_segments: &SegmentSet,
    model: &MeasurementModel,
    tactile: Option<&PointCloud>,
    params: &UkfParams,
    gate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let predicted = predict(state, params)?;
    let segment = match associate_segment(&predicted.mean, model.object_model(), scene_segments, gate) {
        Ok(i) => i,
        Err(Error::NoSegmentAssociated { nearest }) => {
            return Ok(StepOutcome {
                state: predicted,
                segment: None,
                gain_norm: 0.0,
                missed_by: Some(nearest),
            })
        }
        Err(e) => return Err(e),
    };
    correct(predicted, &scene_segments.segments[segment], segment, model, tactile, params, rng)
}

fn correct(
    predicted: TrackState,
    observed: &PointCloud,
    segment: usize,
    model: &MeasurementModel,
    tactile: Option<&PointCloud>,
    params: &UkfParams,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let obs = ObservationBatch::from_cloud(observed, model.cap, rng);
    let obs = match tactile {
        Some(contacts) => fuse_tactile(&obs, contacts, model.cap, rng),
        None => obs,
    };
    let (state, gain_norm) = update(&predicted, &obs, model, params)?;
    Ok(StepOutcome {
        state,
        segment: Some(segment),
        gain_norm,
        missed_by: None,
    })
}

/// One filter bound to one object model, with its own seeded sampler.
#[derive(Debug, Clone)]
pub struct ObjectTracker {
    pub state: TrackState,
    pub model: MeasurementModel,
    pub params: UkfParams,
    pub gate: f64,
    rng: ChaCha8Rng,
}

impl ObjectTracker {
    pub fn new(object_model: PointCloud, initial: Pose, config: &FilterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: TrackState::from_config(initial, config),
            model: MeasurementModel::new(object_model, config.max_correspondences, seed)?,
            params: config.params(),
            gate: config.association_gate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn pose(&self) -> Pose {
        self.state.mean
    }

    pub fn step(&mut self, segments: &SegmentSet, tactile: Option<&PointCloud>) -> Result<StepOutcome> {
        let out = track_step(&self.state, segments, &self.model, tactile, &self.params, self.gate, &mut self.rng)?;
        self.state = out.state.clone();
        Ok(out)
    }

    /// Step against segments chosen by the caller. The first index is
    /// reported as the associated segment; the rest are observed with it.
    pub fn step_assigned(&mut self, segments: &SegmentSet, assigned: &[usize], tactile: Option<&PointCloud>) -> Result<StepOutcome> {
        let Some(&first) = assigned.first() else {
            return Err(Error::InvalidArgument("no segment assigned".into()));
        };
        if let Some(&bad) = assigned.iter().find(|&&i| i >= segments.len()) {
            return Err(Error::InvalidArgument(format!("segment {bad} out of range")));
        }
        let mut observed = segments.segments[first].clone();
        for &i in &assigned[1..] {
            observed = observed.concat(&segments.segments[i]);
        }
        let predicted = predict(&self.state, &self.params)?;
        let out = correct(predicted, &observed, first, &self.model, tactile, &self.params, &mut self.rng)?;
        self.state = out.state.clone();
        Ok(out)
    }

    /// Update directly from an already associated cloud.
    pub fn step_with_cloud(&mut self, cloud: &PointCloud, tactile: Option<&PointCloud>) -> Result<f64> {
        let predicted = predict(&self.state, &self.params)?;
        let obs = ObservationBatch::from_cloud(cloud, self.model.cap, &mut self.rng);
        let obs = match tactile {
            Some(contacts) => fuse_tactile(&obs, contacts, self.model.cap, &mut self.rng),
            None => obs,
        };
        let (state, gain) = update(&predicted, &obs, &self.model, &self.params)?;
        self.state = state;
        Ok(gain)
    }

    /// Largest distance of a model point from the model centroid.
    pub fn model_radius(&self) -> f64 {
        let c = self.model.body_centroid();
        self.model.object_model().points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    /// World position of the model centroid at the current estimate.
    pub fn tracked_centroid(&self) -> Vector3<f64> {
        self.state.mean.apply(&self.model.body_centroid())
    }
}

/// Independent filters, one per object, fed from one segmentation of each
/// frame. Filters share no state; each one associates its own segment.
#[derive(Debug, Clone)]
pub struct MultiTracker {
    pub trackers: Vec<ObjectTracker>,
    pub segmentation: SegmentationConfig,
}

impl MultiTracker {
    /// Tracker `i` is seeded with `seed + i` so adding objects leaves the
    /// earlier samplers unchanged.
    pub fn new(
        models: Vec<PointCloud>,
        initial: &[Pose],
        config: &FilterConfig,
        segmentation: SegmentationConfig,
        seed: u64,
    ) -> Result<Self> {
        if models.len() != initial.len() {
            return Err(Error::PartCountMismatch {
                left: models.len(),
                right: initial.len(),
            });
        }
        let trackers = models
            .into_iter()
            .zip(initial)
            .enumerate()
            .map(|(i, (m, p))| ObjectTracker::new(m, *p, config, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trackers, segmentation })
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.trackers.iter().map(|t| t.pose()).collect()
    }

    /// Segment a raw frame, then step every filter.
    pub fn step(&mut self, cloud: &PointCloud) -> Result<Vec<StepOutcome>> {
        let segments = segment_scene(cloud, &self.segmentation, None)?;
        self.step_segments(&segments)
    }

    /// Trackers take distinct segments where possible, chosen to minimise
    /// the summed centroid distance. Segments left unassigned whose centroid
    /// falls inside the nearest tracker's predicted model extent are treated
    /// as fragments of that object (occlusion splits a part into several
    /// segments). Trackers left over when segments run out fall back to
    /// their nearest segment.
    pub fn step_segments(&mut self, segments: &SegmentSet) -> Result<Vec<StepOutcome>> {
        let predicted: Vec<_> = self.trackers.iter().map(|t| t.tracked_centroid()).collect();
        let gate = self.trackers.iter().map(|t| t.gate).fold(0.0, f64::max);
        let assignment = assign_segments(&predicted, segments, gate);
        let mut observed: Vec<Vec<usize>> = assignment.iter().map(|a| a.iter().copied().collect()).collect();
        for (j, seg) in segments.segments.iter().enumerate() {
            if assignment.contains(&Some(j)) {
                continue;
            }
            let Ok(c) = seg.centroid() else { continue };
            let nearest = predicted
                .iter()
                .enumerate()
                .map(|(k, p)| (k, (c - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((k, d)) = nearest {
                if !observed[k].is_empty() && d < self.trackers[k].model_radius() {
                    observed[k].push(j);
                }
            }
        }
        self.trackers
            .iter_mut()
            .zip(observed)
            .map(|(t, segs)| {
                if segs.is_empty() {
                    t.step(segments, None)
                } else {
                    t.step_assigned(segments, &segs, None)
                }
            })
            .collect()
    }
}

/// Candidate segments considered per tracker by [`assign_segments`].
const ASSIGN_CANDIDATES: usize = 4;

/// Exclusive tracker-to-segment assignment minimising summed centroid
/// distance. Each tracker considers its nearest few segments inside `gate`;
/// leaving a tracker unassigned costs `gate`.
pub fn assign_segments(predicted: &[Vector3<f64>], segments: &SegmentSet, gate: f64) -> Vec<Option<usize>> {
    let centroids: Vec<Option<Vector3<f64>>> = segments.segments.iter().map(|s| s.centroid().ok()).collect();
    let candidates: Vec<Vec<(usize, f64)>> = predicted
        .iter()
        .map(|p| {
            let mut c: Vec<(usize, f64)> = centroids
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|c| (i, (c - p).norm())))
                .filter(|&(_, d)| d <= gate)
                .collect();
            c.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            c.truncate(ASSIGN_CANDIDATES);
            c
        })
        .collect();

    struct Search<'a> {
        candidates: &'a [Vec<(usize, f64)>],
        gate: f64,
        used: Vec<bool>,
        current: Vec<Option<usize>>,
        best: Vec<Option<usize>>,
        best_cost: f64,
    }
    impl Search<'_> {
        fn run(&mut self, k: usize, cost: f64) {
            if cost >= self.best_cost {
                return;
            }
            if k == self.candidates.len() {
                self.best_cost = cost;
                self.best.clone_from(&self.current);
                return;
            }
            for &(seg, d) in &self.candidates[k] {
                if !self.used[seg] {
                    self.used[seg] = true;
                    self.current[k] = Some(seg);
                    self.run(k + 1, cost + d);
                    self.used[seg] = false;
                }
            }
            self.current[k] = None;
            self.run(k + 1, cost + self.gate);
        }
    }
    let n = predicted.len();
    let mut search = Search {
        candidates: &candidates,
        gate,
        used: vec![false; segments.len()],
        current: vec![None; n],
        best: vec![None; n],
        best_cost: f64::INFINITY,
    };
    search.run(0, 0.0);
    search.best
}
