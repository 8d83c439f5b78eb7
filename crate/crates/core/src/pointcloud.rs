//! Euclidean cluster extraction over unorganised point clouds.

use std::collections::HashMap;

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<Vec3>> for PointCloud {
    fn from(points: Vec<Vec3>) -> Self {
        Self::new(points)
    }
}

/// A connected group of cloud points, indices sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub point_indices: Vec<usize>,
    pub centroid: Vec3,
}

/// Componentwise arithmetic mean of the indexed points.
pub fn centroid(indices: &[usize], cloud: &PointCloud) -> Result<Vec3> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("centroid of an empty cluster".into()));
    }
    let sum = indices
        .iter()
        .fold(Vec3::zeros(), |acc, &i| acc + cloud.points[i]);
    Ok(sum / indices.len() as f64)
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Vec3, inv: f64) -> Cell {
    (
        (p.x * inv).floor() as i64,
        (p.y * inv).floor() as i64,
        (p.z * inv).floor() as i64,
    )
}

/// Connected components of the graph joining points at distance `<= tolerance`,
/// discarding components with fewer than `min_cluster_size` points.
///
/// Neighbour search uses a voxel grid with cell size equal to the tolerance, so
/// only the 27 surrounding cells are visited. Clusters are ordered by their
/// smallest member index.
pub fn euclidean_cluster(
    cloud: &PointCloud,
    tolerance: f64,
    min_cluster_size: usize,
) -> Result<Vec<Cluster>> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cluster tolerance must be positive, got {tolerance}"
        )));
    }
    if min_cluster_size == 0 {
        return Err(Error::InvalidArgument("min_cluster_size must be >= 1".into()));
    }

    let inv = 1.0 / tolerance;
    let tol2 = tolerance * tolerance;
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        grid.entry(cell_of(p, inv)).or_default().push(i);
    }

    let mut visited = vec![false; cloud.len()];
    let mut clusters = Vec::new();
    let mut queue = Vec::new();
    for seed in 0..cloud.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.clear();
        queue.push(seed);
        let mut head = 0;
        while head < queue.len() {
            let p = cloud.points[queue[head]];
            head += 1;
            let (cx, cy, cz) = cell_of(&p, inv);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                            continue;
                        };
                        for &j in bucket {
                            if !visited[j] && (cloud.points[j] - p).norm_squared() <= tol2 {
                                visited[j] = true;
                                queue.push(j);
                            }
                        }
                    }
                }
            }
        }
        if queue.len() >= min_cluster_size {
            let mut point_indices = queue.clone();
            point_indices.sort_unstable();
            let centroid = centroid(&point_indices, cloud)?;
            clusters.push(Cluster {
                point_indices,
                centroid,
            });
        }
    }
    Ok(clusters)
}

/// A segmented scan: the cloud and its clusters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensedObstacles {
    pub cloud: PointCloud,
    pub clusters: Vec<Cluster>,
}

impl SensedObstacles {
    pub fn segment(cloud: PointCloud, tolerance: f64, min_cluster_size: usize) -> Result<Self> {
        let clusters = euclidean_cluster(&cloud, tolerance, min_cluster_size)?;
        Ok(Self { cloud, clusters })
    }

    /// One single-point cluster per position. Handy for synthetic obstacles.
    pub fn from_points(points: &[Vec3]) -> Self {
        let clusters = points
            .iter()
            .enumerate()
            .map(|(i, p)| Cluster {
                point_indices: vec![i],
                centroid: *p,
            })
            .collect();
        Self {
            cloud: PointCloud::new(points.to_vec()),
            clusters,
        }
    }

    /// Member point of `cluster` closest to `q`.
    pub fn nearest_point(&self, cluster: &Cluster, q: &Vec3) -> Vec3 {
        cluster
            .point_indices
            .iter()
            .map(|&i| self.cloud.points[i])
            .min_by(|a, b| (a - q).norm_squared().total_cmp(&(b - q).norm_squared()))
            .unwrap_or(cluster.centroid)
    }
}
