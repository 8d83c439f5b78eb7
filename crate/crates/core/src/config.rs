//! Scenario files.
//!
//! A scenario is one TOML document. Loading happens in three stages, each with
//! its own error class: TOML syntax ([`Error::Parse`]), structure and
//! single-field ranges ([`Error::Schema`]), and consistency between fields
//! ([`Error::Physical`]). Errors carry the dotted path of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apf::ApfParams;
use crate::mpc::MpcConfig;
use crate::scene::{Aabb, LidarModel, Primitive, Scene};
use crate::trajectory::DynamicLimits;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvoidanceMode {
    /// Translational repulsion only (`k_rr` forced to zero).
    Conventional,
    /// Translational plus rotational repulsion.
    #[default]
    Modified,
}

impl std::str::FromStr for AvoidanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "modified" => Ok(Self::Modified),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}`, expected `conventional` or `modified`"
            ))),
        }
    }
}

impl std::fmt::Display for AvoidanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Conventional => "conventional",
            Self::Modified => "modified",
        })
    }
}

/// A limit given either once for all axes or per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisLimit {
    Uniform(f64),
    PerAxis([f64; 3]),
}

impl AxisLimit {
    pub fn to_vec3(self) -> Vec3 {
        match self {
            Self::Uniform(v) => Vec3::repeat(v),
            Self::PerAxis(v) => Vec3::from(v),
        }
    }
}

fn default_a_max() -> AxisLimit {
    AxisLimit::Uniform(1.0)
}
fn default_yaw_rate_max() -> f64 {
    1.0
}
fn default_yaw_acc_max() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub v_max: AxisLimit,
    #[serde(default = "default_a_max")]
    pub a_max: AxisLimit,
    #[serde(default = "default_yaw_rate_max")]
    pub yaw_rate_max: f64,
    #[serde(default = "default_yaw_acc_max")]
    pub yaw_acc_max: f64,
}

impl LimitsConfig {
    pub fn resolve(&self) -> DynamicLimits {
        DynamicLimits {
            v_max: self.v_max.to_vec3(),
            a_max: self.a_max.to_vec3(),
            yaw_rate_max: self.yaw_rate_max,
            yaw_acc_max: self.yaw_acc_max,
        }
    }
}

fn default_min_size() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    pub c_tolerance: f64,
    #[serde(default = "default_min_size")]
    pub min_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantModel {
    /// The vehicle is exactly the tracker's virtual state.
    #[default]
    Ideal,
    /// Position and velocity lag the tracker output with a first-order response.
    FirstOrderLag,
}

fn default_sim_dt() -> f64 {
    0.01
}
fn default_goal_tolerance() -> f64 {
    0.5
}
fn default_lag() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_sim_dt")]
    pub dt: f64,
    pub time_budget: f64,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    #[serde(default = "default_sim_dt")]
    pub dt_knot: f64,
    #[serde(default)]
    pub plant: PlantModel,
    /// Time constant of [`PlantModel::FirstOrderLag`], seconds.
    #[serde(default = "default_lag")]
    pub lag_time_constant: f64,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub mode: AvoidanceMode,
    /// Seeds the range noise; irrelevant for noise-free sensors.
    #[serde(default)]
    pub seed: u64,
    pub waypoints: Vec<Vec3>,
    pub limits: LimitsConfig,
    pub apf: ApfParams,
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default)]
    pub mpc: MpcConfig,
    pub sim: SimConfig,
    pub scene: Scene,
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(table).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            // missing fields are reported against their parent; name the field itself
            let path = match (message.strip_prefix("missing field `"), path.as_str()) {
                (Some(rest), ".") => rest.trim_end_matches('`').to_string(),
                (Some(rest), parent) => format!("{parent}.{}", rest.trim_end_matches('`')),
                (None, _) => path,
            };
            Error::schema(path, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serialises to TOML")
    }

    /// SHA-256 of the canonical TOML serialisation, lowercase hex.
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn dynamic_limits(&self) -> DynamicLimits {
        self.limits.resolve()
    }

    /// Field parameters for the configured mode.
    pub fn effective_apf(&self) -> ApfParams {
        match self.mode {
            AvoidanceMode::Conventional => self.apf.conventional(),
            AvoidanceMode::Modified => self.apf,
        }
    }

    pub fn with_mode(mut self, mode: AvoidanceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Control ticks per LiDAR scan.
    pub fn scan_period_ticks(&self) -> usize {
        (1.0 / (self.lidar.scan_rate * self.sim.dt)).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_fields()?;
        self.validate_consistency()
    }

    fn validate_fields(&self) -> Result<()> {
        let positive = |path: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::schema(path, format!("must be positive and finite, got {v}")))
            }
        };
        let nonnegative = |path: &str, v: f64| -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::schema(path, format!("must be nonnegative and finite, got {v}")))
            }
        };
        let finite = |path: String, v: &Vec3| -> Result<()> {
            if v.iter().all(|c| c.is_finite()) {
                Ok(())
            } else {
                Err(Error::schema(path, "components must be finite"))
            }
        };

        if self.waypoints.len() < 2 {
            return Err(Error::schema(
                "waypoints",
                format!("at least 2 waypoints are required, got {}", self.waypoints.len()),
            ));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            finite(format!("waypoints[{i}]"), w)?;
        }

        let limits = self.limits.resolve();
        for i in 0..3 {
            positive("limits.v_max", limits.v_max[i])?;
            positive("limits.a_max", limits.a_max[i])?;
        }
        positive("limits.yaw_rate_max", limits.yaw_rate_max)?;
        positive("limits.yaw_acc_max", limits.yaw_acc_max)?;

        nonnegative("apf.k_rt", self.apf.k_rt)?;
        nonnegative("apf.k_rr", self.apf.k_rr)?;
        positive("apf.d_0", self.apf.d_0)?;
        positive("apf.F_threshold", self.apf.f_threshold)?;
        positive("apf.step_gain", self.apf.step_gain)?;
        positive("apf.d_min", self.apf.d_min)?;

        positive("clustering.c_tolerance", self.clustering.c_tolerance)?;
        if self.clustering.min_size == 0 {
            return Err(Error::schema("clustering.min_size", "must be at least 1"));
        }

        let l = &self.lidar;
        positive("lidar.range_max", l.range_max)?;
        for (path, fov) in [("lidar.fov_h", l.fov_h), ("lidar.fov_v", l.fov_v)] {
            if !(fov > 0.0 && fov <= 360.0) {
                return Err(Error::schema(path, format!("must be in (0, 360] degrees, got {fov}")));
            }
        }
        if l.rays_h == 0 {
            return Err(Error::schema("lidar.rays_h", "must be at least 1"));
        }
        if l.channels_v == 0 {
            return Err(Error::schema("lidar.channels_v", "must be at least 1"));
        }
        finite("lidar.mount_offset".into(), &l.mount_offset)?;
        positive("lidar.scan_rate", l.scan_rate)?;
        nonnegative("lidar.range_noise_std", l.range_noise_std)?;

        self.mpc
            .check()
            .map_err(|(field, msg)| Error::schema(format!("mpc.{field}"), msg))?;

        positive("sim.dt", self.sim.dt)?;
        positive("sim.time_budget", self.sim.time_budget)?;
        positive("sim.goal_tolerance", self.sim.goal_tolerance)?;
        positive("sim.dt_knot", self.sim.dt_knot)?;
        positive("sim.lag_time_constant", self.sim.lag_time_constant)?;

        check_box("scene.world_bounds", &self.scene.world_bounds)?;
        for (i, o) in self.scene.obstacles.iter().enumerate() {
            let path = format!("scene.obstacles[{i}]");
            match o {
                Primitive::Box(b) => check_box(&path, b)?,
                Primitive::Cylinder(c) => {
                    finite(format!("{path}.center_xy"), &Vec3::new(c.center_xy.x, c.center_xy.y, 0.0))?;
                    positive(&format!("{path}.radius"), c.radius)?;
                    if !(c.z_min < c.z_max && c.z_min.is_finite() && c.z_max.is_finite()) {
                        return Err(Error::schema(
                            format!("{path}.z_max"),
                            format!("must exceed z_min ({} >= {})", c.z_min, c.z_max),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_consistency(&self) -> Result<()> {
        if self.apf.d_min >= self.apf.d_0 {
            return Err(Error::physical(
                "apf.d_min",
                format!("must be below apf.d_0 ({} >= {})", self.apf.d_min, self.apf.d_0),
            ));
        }
        if (self.mpc.dt - self.sim.dt).abs() > 1e-12 {
            return Err(Error::physical(
                "mpc.dt",
                format!("must equal sim.dt ({} != {})", self.mpc.dt, self.sim.dt),
            ));
        }
        let ticks = 1.0 / (self.lidar.scan_rate * self.sim.dt);
        if ticks < 1.0 - 1e-9 || (ticks - ticks.round()).abs() > 1e-6 {
            return Err(Error::physical(
                "lidar.scan_rate",
                format!("scan period must be a whole number of sim.dt ticks, got {ticks}"),
            ));
        }
        if self.sim.time_budget < self.sim.dt {
            return Err(Error::physical("sim.time_budget", "shorter than one tick"));
        }

        let bounds = &self.scene.world_bounds;
        for (i, o) in self.scene.obstacles.iter().enumerate() {
            if !bounds.contains_box(&o.bounding_box()) {
                return Err(Error::physical(
                    format!("scene.obstacles[{i}]"),
                    "extends outside scene.world_bounds",
                ));
            }
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            let path = format!("waypoints[{i}]");
            if !bounds.contains(w) {
                return Err(Error::physical(path, "outside scene.world_bounds"));
            }
            if self.scene.clearance(w) <= 0.0 {
                return Err(Error::physical(path, "inside an obstacle"));
            }
            if i > 0 && (w - self.waypoints[i - 1]).norm() == 0.0 {
                return Err(Error::physical(path, "coincides with the previous waypoint"));
            }
        }
        Ok(())
    }
}

fn check_box(path: &str, b: &Aabb) -> Result<()> {
    let ok = (0..3).all(|i| b.min[i].is_finite() && b.max[i].is_finite() && b.min[i] < b.max[i]);
    if ok {
        Ok(())
    } else {
        Err(Error::schema(format!("{path}.max"), "must exceed min componentwise"))
    }
}
