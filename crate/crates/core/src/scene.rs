//! Static obstacle scenes built from boxes and vertical cylinders, and a
//! ray-casting model of a spinning multi-channel LiDAR.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pointcloud::PointCloud;
use crate::{Vec2, Vec3};

/// Smallest ray parameter accepted as a hit, so a ray starting on a surface
/// does not report its own origin.
const RAY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// Signed distance: positive outside, negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let center = (self.min + self.max) * 0.5;
        let half = (self.max - self.min) * 0.5;
        let q = (p - center).abs() - half;
        let outside = q.map(|c| c.max(0.0)).norm();
        let inside = q.x.max(q.y).max(q.z).min(0.0);
        outside + inside
    }

    /// Slab test. Returns the nearest positive ray parameter.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut t0 = (self.min[i] - origin[i]) * inv;
            let mut t1 = (self.max[i] - origin[i]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
        if t_near > RAY_EPS {
            Some(t_near)
        } else if t_far > RAY_EPS {
            Some(t_far)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerticalCylinder {
    pub center_xy: Vec2,
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl VerticalCylinder {
    pub fn bounding_box(&self) -> Aabb {
        Aabb {
            min: Vec3::new(
                self.center_xy.x - self.radius,
                self.center_xy.y - self.radius,
                self.z_min,
            ),
            max: Vec3::new(
                self.center_xy.x + self.radius,
                self.center_xy.y + self.radius,
                self.z_max,
            ),
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let radial = (p.xy() - self.center_xy).norm() - self.radius;
        let mid = 0.5 * (self.z_min + self.z_max);
        let vertical = (p.z - mid).abs() - 0.5 * (self.z_max - self.z_min);
        let outside = Vec2::new(radial.max(0.0), vertical.max(0.0)).norm();
        outside + radial.max(vertical).min(0.0)
    }

    /// Side surface by the planar quadratic, caps by their planes.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t > RAY_EPS && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };

        let o = origin.xy() - self.center_xy;
        let d = dir.xy();
        let a = d.norm_squared();
        if a > 0.0 {
            let b = 2.0 * o.dot(&d);
            let c = o.norm_squared() - self.radius * self.radius;
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // numerically stable pair of roots
                let qv = -0.5 * (b + b.signum() * sq);
                let mut roots = if qv != 0.0 {
                    [qv / a, c / qv]
                } else {
                    [-b / (2.0 * a), -b / (2.0 * a)]
                };
                roots.sort_by(f64::total_cmp);
                for t in roots {
                    let z = origin.z + t * dir.z;
                    if z >= self.z_min && z <= self.z_max {
                        consider(t);
                    }
                }
            }
        }
        if dir.z != 0.0 {
            for cap in [self.z_min, self.z_max] {
                let t = (cap - origin.z) / dir.z;
                let p = origin.xy() + d * t;
                if (p - self.center_xy).norm_squared() <= self.radius * self.radius {
                    consider(t);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Box(Aabb),
    Cylinder(VerticalCylinder),
}

impl Primitive {
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Primitive::Box(b) => b.intersect(origin, dir),
            Primitive::Cylinder(c) => c.intersect(origin, dir),
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match self {
            Primitive::Box(b) => b.signed_distance(p),
            Primitive::Cylinder(c) => c.signed_distance(p),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Primitive::Box(b) => *b,
            Primitive::Cylinder(c) => c.bounding_box(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub obstacles: Vec<Primitive>,
    pub world_bounds: Aabb,
}

impl Scene {
    pub fn empty(world_bounds: Aabb) -> Self {
        Self {
            obstacles: Vec::new(),
            world_bounds,
        }
    }

    /// Distance from `p` to the nearest obstacle surface, zero inside an obstacle.
    /// Infinite for a scene without obstacles.
    pub fn clearance(&self, p: &Vec3) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Unsigned distance to the nearest obstacle surface (also from inside).
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest hit along a ray over all primitives.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        self.obstacles
            .iter()
            .filter_map(|o| o.intersect(origin, dir))
            .min_by(f64::total_cmp)
    }
}

fn default_scan_rate() -> f64 {
    10.0
}

/// Spinning LiDAR. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarModel {
    pub range_max: f64,
    pub fov_h: f64,
    pub fov_v: f64,
    /// Azimuth samples per full revolution.
    pub rays_h: usize,
    pub channels_v: usize,
    pub mount_offset: Vec3,
    pub scan_rate: f64,
    /// Standard deviation of additive range noise in metres; 0 disables noise.
    pub range_noise_std: f64,
}

impl Default for LidarModel {
    /// A 16-channel spinning sensor: 100 m range, 360 x 30 degrees, 16 channels, 1 degree azimuth step.
    fn default() -> Self {
        Self {
            range_max: 100.0,
            fov_h: 360.0,
            fov_v: 30.0,
            rays_h: 360,
            channels_v: 16,
            mount_offset: Vec3::zeros(),
            scan_rate: default_scan_rate(),
            range_noise_std: 0.0,
        }
    }
}

impl LidarModel {
    /// Azimuth offsets from the sensor yaw in radians, symmetric about zero.
    pub fn azimuth_offsets(&self) -> Vec<f64> {
        let step = 360.0 / self.rays_h as f64;
        let count = if self.fov_h >= 360.0 {
            self.rays_h
        } else {
            ((self.fov_h / step) + 1e-9).floor() as usize + 1
        };
        let center = (count as f64 - 1.0) * 0.5;
        (0..count)
            .map(|i| ((i as f64 - center) * step).to_radians())
            .collect()
    }

    /// Channel elevations in radians, uniform over the vertical FOV.
    pub fn elevations(&self) -> Vec<f64> {
        if self.channels_v == 1 {
            return vec![0.0];
        }
        let step = self.fov_v / (self.channels_v as f64 - 1.0);
        let center = (self.channels_v as f64 - 1.0) * 0.5;
        (0..self.channels_v)
            .map(|j| ((j as f64 - center) * step).to_radians())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl SensorPose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw }
    }

    fn origin(&self, lidar: &LidarModel) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let m = lidar.mount_offset;
        self.position + Vec3::new(c * m.x - s * m.y, s * m.x + c * m.y, m.z)
    }
}

/// Noise-free scan. Points are ordered elevation-major, then by azimuth.
pub fn raycast(scene: &Scene, pose: &SensorPose, lidar: &LidarModel) -> PointCloud {
    scan(scene, pose, lidar, |t| t)
}

/// Scan with additive Gaussian range noise of `lidar.range_noise_std`.
pub fn raycast_noisy<R: Rng>(
    scene: &Scene,
    pose: &SensorPose,
    lidar: &LidarModel,
    rng: &mut R,
) -> PointCloud {
    if lidar.range_noise_std <= 0.0 {
        return raycast(scene, pose, lidar);
    }
    let noise = Normal::new(0.0, lidar.range_noise_std).expect("finite noise std");
    scan(scene, pose, lidar, |t| t + noise.sample(rng))
}

fn scan(
    scene: &Scene,
    pose: &SensorPose,
    lidar: &LidarModel,
    mut perturb: impl FnMut(f64) -> f64,
) -> PointCloud {
    let origin = pose.origin(lidar);
    // primitives that cannot be reached within range are skipped up front
    let reachable: Vec<&Primitive> = scene
        .obstacles
        .iter()
        .filter(|o| o.bounding_box().signed_distance(&origin) <= lidar.range_max)
        .collect();
    let azimuths: Vec<(f64, f64)> = lidar
        .azimuth_offsets()
        .into_iter()
        .map(|a| (pose.yaw + a).sin_cos())
        .collect();

    let mut points = Vec::new();
    if reachable.is_empty() {
        return PointCloud::new(points);
    }
    for elevation in lidar.elevations() {
        let (se, ce) = elevation.sin_cos();
        for &(sa, ca) in &azimuths {
            let dir = Vec3::new(ce * ca, ce * sa, se);
            let hit = reachable
                .iter()
                .filter_map(|o| o.intersect(&origin, &dir))
                .min_by(f64::total_cmp);
            if let Some(t) = hit {
                if t <= lidar.range_max {
                    points.push(origin + dir * perturb(t));
                }
            }
        }
    }
    PointCloud::new(points)
}
