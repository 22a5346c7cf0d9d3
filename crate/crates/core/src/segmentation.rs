//! Scene-to-parts segmentation: support-plane removal, tool culling,
//! statistical outlier removal and color-aware region growing.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{estimate_normals_with, KdTree, OrientedBox, PointCloud};
use crate::error::{Error, Result};

/// Plane `a·x + b·y + c·z + d = 0` with unit normal `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PlaneModel {
    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (self.normal().dot(p) + self.d).abs()
    }

    /// Plane through three points, `None` when they are collinear.
    pub fn through(p0: &Vector3<f64>, p1: &Vector3<f64>, p2: &Vector3<f64>) -> Option<Self> {
        let n = (p1 - p0).cross(&(p2 - p0));
        let len = n.norm();
        let scale = (p1 - p0).norm() * (p2 - p0).norm();
        if len <= 1e-12 * scale.max(1e-300) || len == 0.0 {
            return None;
        }
        let mut n = n / len;
        // canonical orientation: largest-magnitude component positive
        if n[n.iamax()] < 0.0 {
            n = -n;
        }
        Some(PlaneModel {
            a: n.x,
            b: n.y,
            c: n.z,
            d: -n.dot(p0),
        })
    }
}

/// Per-point label in a [`SegmentSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Segment(usize),
    Discarded,
}

#[derive(Debug, Clone, Default)]
pub struct SegmentSet {
    pub segments: Vec<PointCloud>,
    /// One label per input point.
    pub labels: Vec<Label>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Builds segments from per-point labels; labels are compacted so
    /// segments appear in order of first occurrence.
    pub fn from_labels(cloud: &PointCloud, raw: &[Option<usize>]) -> SegmentSet {
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            match r {
                None => labels.push(Label::Discarded),
                Some(k) => {
                    if remap.len() <= *k {
                        remap.resize(k + 1, None);
                    }
                    let id = *remap[*k].get_or_insert_with(|| {
                        members.push(Vec::new());
                        members.len() - 1
                    });
                    members[id].push(i);
                    labels.push(Label::Segment(id));
                }
            }
        }
        SegmentSet {
            segments: members.iter().map(|m| cloud.select(m)).collect(),
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub plane_dist_thresh: f64,
    pub ransac_iterations: usize,
    pub k_neighbors: usize,
    pub std_ratio: f64,
    /// Radians.
    pub normal_angle_thresh: f64,
    pub color_thresh: f64,
    pub neighbor_radius: f64,
    pub min_segment_size: usize,
    /// Inflation applied to the simulated tool box before culling.
    pub tool_margin: f64,
    /// Neighborhood size for normal estimation when the cloud lacks normals.
    pub normal_k: usize,
    pub seed: u64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            plane_dist_thresh: 0.005,
            ransac_iterations: 200,
            k_neighbors: 16,
            std_ratio: 1.5,
            normal_angle_thresh: 8f64.to_radians(),
            color_thresh: 0.15,
            neighbor_radius: 0.015,
            min_segment_size: 30,
            tool_margin: 0.01,
            normal_k: 12,
            seed: 0,
        }
    }
}

/// RANSAC plane fit. Returns the plane with most inliers (ties broken by lower
/// mean inlier distance) and the inlier mask.
pub fn ransac_plane(cloud: &PointCloud, dist_thresh: f64, iterations: usize, seed: u64) -> Result<(PlaneModel, Vec<bool>)> {
    let n = cloud.len();
    if n < 3 {
        return Err(Error::DegenerateCloud(format!("{n} points, plane fit needs 3")));
    }
    if dist_thresh <= 0.0 {
        return Err(Error::InvalidArgument("dist_thresh must be positive".into()));
    }
    let pts = &cloud.points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(PlaneModel, usize, f64)> = None;
    let score = |plane: &PlaneModel| {
        let mut count = 0usize;
        let mut sum = 0.0;
        for p in pts {
            let d = plane.distance(p);
            if d <= dist_thresh {
                count += 1;
                sum += d;
            }
        }
        (count, if count > 0 { sum / count as f64 } else { f64::INFINITY })
    };
    let consider = |plane: PlaneModel, best: &mut Option<(PlaneModel, usize, f64)>| {
        let (count, mean) = score(&plane);
        let better = match best {
            None => true,
            Some((_, c, m)) => count > *c || (count == *c && mean < *m),
        };
        if better {
            *best = Some((plane, count, mean));
        }
    };

    if n == 3 {
        if let Some(plane) = PlaneModel::through(&pts[0], &pts[1], &pts[2]) {
            consider(plane, &mut best);
        }
    } else {
        let mut degenerate_draws = 0usize;
        let mut drawn = 0usize;
        while drawn < iterations && degenerate_draws < 10 * iterations.max(10) {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i == j || j == k || i == k {
                degenerate_draws += 1;
                continue;
            }
            match PlaneModel::through(&pts[i], &pts[j], &pts[k]) {
                Some(plane) => {
                    consider(plane, &mut best);
                    drawn += 1;
                }
                None => degenerate_draws += 1,
            }
        }
        if best.is_none() {
            // random draws only hit collinear triples; fall back to a scan
            let p0 = pts[0];
            if let Some(j) = (1..n).find(|&j| (pts[j] - p0).norm() > 0.0) {
                if let Some(k) = (1..n).find(|&k| PlaneModel::through(&p0, &pts[j], &pts[k]).is_some()) {
                    consider(PlaneModel::through(&p0, &pts[j], &pts[k]).unwrap(), &mut best);
                }
            }
        }
    }
    let (plane, _, _) = best.ok_or_else(|| Error::DegenerateCloud("all points are collinear".into()))?;
    let mask = pts.iter().map(|p| plane.distance(p) <= dist_thresh).collect();
    Ok((plane, mask))
}

/// Statistical outlier removal. Returns the kept indices in input order.
pub fn outlier_inliers(cloud: &PointCloud, k_neighbors: usize, std_ratio: f64) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.len() <= k_neighbors {
        return Ok((0..cloud.len()).collect());
    }
    let tree = cloud.kdtree();
    let mean_dist: Vec<f64> = cloud
        .points
        .iter()
        .map(|p| {
            // first neighbor is the point itself
            let nn = tree.knn(p, k_neighbors + 1);
            nn.iter().skip(1).map(|c| c.1).sum::<f64>() / k_neighbors as f64
        })
        .collect();
    let n = mean_dist.len() as f64;
    let mu = mean_dist.iter().sum::<f64>() / n;
    let var = mean_dist.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n;
    let limit = mu + std_ratio * var.sqrt();
    // relative slack keeps exactly-uniform clouds intact despite rounding
    let slack = 1e-9 * mu.abs();
    Ok((0..cloud.len()).filter(|&i| mean_dist[i] <= limit + slack).collect())
}

pub fn remove_outliers(cloud: &PointCloud, k_neighbors: usize, std_ratio: f64) -> Result<PointCloud> {
    Ok(cloud.select(&outlier_inliers(cloud, k_neighbors, std_ratio)?))
}

/// Drops points inside `tool_box` inflated by `margin`.
pub fn cull_tool_points(cloud: &PointCloud, tool_box: &OrientedBox, margin: f64) -> PointCloud {
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| !tool_box.contains(&cloud.points[i], margin)).collect();
    cloud.select(&keep)
}

fn color_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Region growing with a normal-smoothness and color criterion, followed by
/// a merge of adjacent regions with similar mean color.
///
/// Seeds are taken in ascending curvature order. A neighbor (within
/// `neighbor_radius`) joins when its normal is within `normal_angle_thresh`
/// of the region seed's normal (sign-agnostic) and its color is within
/// `color_thresh` of the seed color. Missing normals are estimated by local
/// PCA; missing colors are treated as identical.
pub fn region_grow(
    cloud: &PointCloud,
    normal_angle_thresh: f64,
    color_thresh: f64,
    neighbor_radius: f64,
    min_segment_size: usize,
) -> Result<SegmentSet> {
    region_grow_with(cloud, normal_angle_thresh, color_thresh, neighbor_radius, min_segment_size, 12)
}

pub fn region_grow_with(
    cloud: &PointCloud,
    normal_angle_thresh: f64,
    color_thresh: f64,
    neighbor_radius: f64,
    min_segment_size: usize,
    normal_k: usize,
) -> Result<SegmentSet> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len();
    let tree = KdTree::build(&cloud.points);
    let (normals, curvature) = match &cloud.normals {
        Some(nrm) => (nrm.clone(), vec![0.0; n]),
        None => {
            let centroid = cloud.centroid()?;
            let view = centroid + Vector3::new(0.0, 0.0, 10.0);
            estimate_normals_with(cloud, &tree, normal_k, &view)
        }
    };
    let colors: Vec<[f64; 3]> = cloud.colors.clone().unwrap_or_else(|| vec![[0.0; 3]; n]);
    let cos_thresh = normal_angle_thresh.cos();

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by(|&a, &b| curvature[a].total_cmp(&curvature[b]).then(a.cmp(&b)));

    let neighbors: Vec<Vec<usize>> = cloud.points.iter().map(|p| tree.within_radius(p, neighbor_radius)).collect();

    let mut region = vec![usize::MAX; n];
    let mut region_count = 0;
    let mut queue = Vec::new();
    for &seed in &seeds {
        if region[seed] != usize::MAX {
            continue;
        }
        let id = region_count;
        region_count += 1;
        region[seed] = id;
        let seed_normal = normals[seed];
        let seed_color = colors[seed];
        queue.clear();
        queue.push(seed);
        while let Some(cur) = queue.pop() {
            for &nb in &neighbors[cur] {
                if region[nb] != usize::MAX {
                    continue;
                }
                if normals[nb].dot(&seed_normal).abs() < cos_thresh {
                    continue;
                }
                if color_dist(&colors[nb], &seed_color) >= color_thresh {
                    continue;
                }
                region[nb] = id;
                queue.push(nb);
            }
        }
    }

    // merge adjacent regions of similar mean color
    let mut color_sum = vec![[0.0; 3]; region_count];
    let mut sizes = vec![0usize; region_count];
    for i in 0..n {
        let r = region[i];
        sizes[r] += 1;
        for c in 0..3 {
            color_sum[r][c] += colors[i][c];
        }
    }
    let mean_color: Vec<[f64; 3]> = (0..region_count)
        .map(|r| {
            let s = sizes[r] as f64;
            [color_sum[r][0] / s, color_sum[r][1] / s, color_sum[r][2] / s]
        })
        .collect();
    let mut adjacent = std::collections::BTreeSet::new();
    for i in 0..n {
        for &nb in &neighbors[i] {
            let (a, b) = (region[i], region[nb]);
            if a < b {
                adjacent.insert((a, b));
            } else if b < a {
                adjacent.insert((b, a));
            }
        }
    }
    let mut ds = DisjointSet::new(region_count);
    for &(a, b) in &adjacent {
        if color_dist(&mean_color[a], &mean_color[b]) < color_thresh {
            ds.union(a, b);
        }
    }
    let mut merged_size = vec![0usize; region_count];
    for r in 0..region_count {
        let root = ds.find(r);
        merged_size[root] += sizes[r];
    }
    let raw: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let root = ds.find(region[i]);
            (merged_size[root] >= min_segment_size).then_some(root)
        })
        .collect();
    Ok(SegmentSet::from_labels(cloud, &raw))
}

/// Full pipeline: plane removal, tool culling, outlier removal, region growing.
///
/// Labels refer to the input cloud.
pub fn segment_scene(cloud: &PointCloud, config: &SegmentationConfig, tool: Option<&OrientedBox>) -> Result<SegmentSet> {
    let n = cloud.len();
    let mut labels = vec![Label::Discarded; n];
    if n == 0 {
        return Ok(SegmentSet { segments: Vec::new(), labels });
    }
    let mut alive: Vec<usize> = if n >= 3 {
        let (_, mask) = ransac_plane(cloud, config.plane_dist_thresh, config.ransac_iterations, config.seed)?;
        (0..n).filter(|&i| !mask[i]).collect()
    } else {
        (0..n).collect()
    };
    if let Some(tool) = tool {
        alive.retain(|&i| !tool.contains(&cloud.points[i], config.tool_margin));
    }
    if alive.is_empty() {
        return Ok(SegmentSet { segments: Vec::new(), labels });
    }
    let remaining = cloud.select(&alive);
    let kept = outlier_inliers(&remaining, config.k_neighbors, config.std_ratio)?;
    let alive: Vec<usize> = kept.iter().map(|&k| alive[k]).collect();
    if alive.is_empty() {
        return Ok(SegmentSet { segments: Vec::new(), labels });
    }
    let objects = cloud.select(&alive);
    let grown = region_grow_with(
        &objects,
        config.normal_angle_thresh,
        config.color_thresh,
        config.neighbor_radius,
        config.min_segment_size,
        config.normal_k,
    )?;
    for (local, label) in grown.labels.iter().enumerate() {
        labels[alive[local]] = *label;
    }
    Ok(SegmentSet {
        segments: grown.segments,
        labels,
    })
}
