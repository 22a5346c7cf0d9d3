//! Point clouds, neighbor queries, PCA boxes and PLY I/O.

mod kdtree;
mod ply;

pub use kdtree::KdTree;
pub use ply::{load_ply, parse_ply, save_ply, write_ply};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::liegroup::Pose;

/// Positions with optional per-point RGB color (in `[0, 1]`) and unit normal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[f64; 3]>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self {
            points,
            colors: None,
            normals: None,
        }
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Self {
        self.colors = Some(colors);
        self
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Self {
        self.normals = Some(normals);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks attribute lengths and normal lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::InvalidArgument(format!("{} colors for {n} points", c.len())));
            }
        }
        if let Some(nrm) = &self.normals {
            if nrm.len() != n {
                return Err(Error::InvalidArgument(format!("{} normals for {n} points", nrm.len())));
            }
            if let Some(bad) = nrm.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidArgument(format!("normal {bad} is not unit length")));
            }
        }
        Ok(())
    }

    /// Sub-cloud with the given indices, attributes carried along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            normals: self.normals.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Concatenates two clouds; an attribute survives only if both carry it.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let colors = match (&self.colors, &other.colors) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ if self.is_empty() => other.colors.clone(),
            _ if other.is_empty() => self.colors.clone(),
            _ => None,
        };
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ if self.is_empty() => other.normals.clone(),
            _ if other.is_empty() => self.normals.clone(),
            _ => None,
        };
        PointCloud { points, colors, normals }
    }

    pub fn centroid(&self) -> Result<Vector3<f64>> {
        centroid(self)
    }

    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        transform_cloud(self, pose)
    }

    pub fn kdtree(&self) -> KdTree {
        KdTree::build(&self.points)
    }
}

/// Arithmetic mean of the points.
pub fn centroid(cloud: &PointCloud) -> Result<Vector3<f64>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sum: Vector3<f64> = cloud.points.iter().sum();
    Ok(sum / cloud.len() as f64)
}

/// Applies `pose` to every point and rotates the normals.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| pose.apply(p)).collect(),
        colors: cloud.colors.clone(),
        normals: cloud
            .normals
            .as_ref()
            .map(|n| n.iter().map(|v| pose.rotation * v).collect()),
    }
}

/// Draws `n` points uniformly without replacement. Selected points keep their
/// original relative order.
pub fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subsample_with(cloud, n, &mut rng)
}

pub fn subsample_with(cloud: &PointCloud, n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if n >= cloud.len() {
        return Ok(cloud.clone());
    }
    let mut idx = rand::seq::index::sample(rng, cloud.len(), n).into_vec();
    idx.sort_unstable();
    Ok(cloud.select(&idx))
}

/// Nearest cloud point to `query` by exhaustive-equivalent kd search.
pub fn nearest_neighbor(query: &Vector3<f64>, cloud: &PointCloud) -> Result<(usize, f64)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(&cloud.points);
    Ok(tree.nearest(query).expect("non-empty tree"))
}

/// Sample covariance (divided by n) about the centroid.
pub fn covariance(points: &[Vector3<f64>]) -> (Vector3<f64>, Matrix3<f64>) {
    let n = points.len() as f64;
    let mean: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

/// PCA box: `axes[0]` is the major eigenvector, `axes[2]` the minor one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vector3<f64>,
    pub axes: [Vector3<f64>; 3],
    /// Half-lengths along each axis.
    pub extents: [f64; 3],
}

/// Relative eigenvalue gap under which two principal axes count as tied.
pub const OBB_TIE_TOL: f64 = 1e-6;

impl OrientedBox {
    pub fn major(&self) -> Vector3<f64> {
        self.axes[0]
    }

    pub fn middle(&self) -> Vector3<f64> {
        self.axes[1]
    }

    pub fn minor(&self) -> Vector3<f64> {
        self.axes[2]
    }

    /// Box-frame coordinates of a world point.
    pub fn local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        Vector3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }

    /// True when `p` lies inside the box inflated by `margin` on every side.
    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        let l = self.local(p);
        (0..3).all(|k| l[k].abs() <= self.extents[k] + margin)
    }

    /// Right-handed pose whose columns are the box axes (minor axis flipped
    /// when the eigenbasis is left-handed).
    pub fn pose(&self) -> Pose {
        let z = self.axes[0].cross(&self.axes[1]);
        Pose::new(
            Matrix3::from_columns(&[self.axes[0], self.axes[1], z]),
            self.center,
        )
    }
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

/// Oriented bounding box from the eigenvectors of the point covariance.
///
/// Axes are sorted by decreasing variance. Each axis is flipped so its
/// largest-magnitude component is positive. When eigenvalues tie (relative
/// gap below [`OBB_TIE_TOL`]) the tied subspace is re-spanned by projecting
/// the world x, y, z axes into it in that order, which makes square and
/// round parts deterministic.
pub fn compute_obb(cloud: &PointCloud) -> Result<OrientedBox> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (mean, cov) = covariance(&cloud.points);
    let scale = cov.abs().max();
    if scale <= 1e-18 {
        return Err(Error::DegenerateCloud("covariance has rank 0".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut axes: Vec<Vector3<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

    // group tied eigenvalues and re-span each group deterministically
    let tol = OBB_TIE_TOL * vals[0].abs().max(1e-300);
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && (vals[end - 1] - vals[end]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let group: Vec<Vector3<f64>> = axes[start..end].to_vec();
            let mut basis: Vec<Vector3<f64>> = Vec::new();
            for world in [Vector3::x(), Vector3::y(), Vector3::z()] {
                if basis.len() == group.len() {
                    break;
                }
                let mut v: Vector3<f64> = group.iter().map(|g| g * g.dot(&world)).sum();
                for b in &basis {
                    v -= b * b.dot(&v);
                }
                if v.norm() > 1e-6 {
                    basis.push(v.normalize());
                }
            }
            if basis.len() == group.len() {
                axes[start..end].copy_from_slice(&basis);
            }
        }
        start = end;
    }

    let axes: [Vector3<f64>; 3] = [
        canonical_sign(axes[0]),
        canonical_sign(axes[1]),
        canonical_sign(axes[2]),
    ];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        let d = p - mean;
        for k in 0..3 {
            let s = d.dot(&axes[k]);
            lo[k] = lo[k].min(s);
            hi[k] = hi[k].max(s);
        }
    }
    let mut center = mean;
    let mut extents = [0.0; 3];
    for k in 0..3 {
        center += axes[k] * (0.5 * (lo[k] + hi[k]));
        extents[k] = 0.5 * (hi[k] - lo[k]);
    }
    Ok(OrientedBox { center, axes, extents })
}

/// Per-point normals and surface variation from a k-neighborhood PCA.
///
/// Curvature is `λ_min / (λ0 + λ1 + λ2)`. Normals are oriented toward
/// `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Vector3<f64>) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let tree = cloud.kdtree();
    estimate_normals_with(cloud, &tree, k, viewpoint)
}

pub fn estimate_normals_with(
    cloud: &PointCloud,
    tree: &KdTree,
    k: usize,
    viewpoint: &Vector3<f64>,
) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let mut normals = Vec::with_capacity(cloud.len());
    let mut curvature = Vec::with_capacity(cloud.len());
    let mut nbrs: Vec<Vector3<f64>> = Vec::with_capacity(k);
    for p in &cloud.points {
        nbrs.clear();
        nbrs.extend(tree.knn(p, k.max(3)).into_iter().map(|(i, _)| cloud.points[i]));
        if nbrs.len() < 3 {
            normals.push(Vector3::z());
            curvature.push(0.0);
            continue;
        }
        let (_, cov) = covariance(&nbrs);
        let eig = SymmetricEigen::new(cov);
        let imin = eig.eigenvalues.imin();
        let mut n: Vector3<f64> = eig.eigenvectors.column(imin).into_owned();
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        let total = eig.eigenvalues.sum();
        normals.push(n.normalize());
        curvature.push(if total > 0.0 { eig.eigenvalues[imin].max(0.0) / total } else { 0.0 });
    }
    (normals, curvature)
}

/// Points on the six faces of an axis-aligned box centered at the origin,
/// placed at the centers of a regular grid with roughly `spacing` pitch.
pub fn sample_box_surface(dims: [f64; 3], spacing: f64) -> PointCloud {
    let h = [dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0];
    let mut pts = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let nu = ((dims[u] / spacing).round() as usize).max(1);
        let nv = ((dims[v] / spacing).round() as usize).max(1);
        for side in [-1.0, 1.0] {
            for i in 0..nu {
                for j in 0..nv {
                    let mut p = Vector3::zeros();
                    p[axis] = side * h[axis];
                    p[u] = -h[u] + (i as f64 + 0.5) * dims[u] / nu as f64;
                    p[v] = -h[v] + (j as f64 + 0.5) * dims[v] / nv as f64;
                    pts.push(p);
                }
            }
        }
    }
    PointCloud::from_points(pts)
}
