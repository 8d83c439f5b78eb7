//! Repulsive potential field with a translational and a rotational component,
//! and the supervisor that switches between following the global trajectory
//! and avoiding obstacles.
//!
//! There is no attractive term: progress towards the goal comes from the
//! global trajectory, the field only corrects it near obstacles.

use serde::{Deserialize, Serialize};

use crate::pointcloud::SensedObstacles;
use crate::trajectory::{PlannedTrajectory, UavState};
use crate::{wrap_angle, Vec2, Vec3};

/// 2x2 matrix picking the circulation direction, row-major.
pub type RotationDirection = [[f64; 2]; 2];

/// Circulation for `theta >= 0`.
pub const ROTATE_FIRST: RotationDirection = [[0.0, 1.0], [-1.0, 0.0]];
/// Circulation for `theta < 0`.
pub const ROTATE_SECOND: RotationDirection = [[0.0, -1.0], [1.0, 0.0]];

/// Which point of a cluster the field is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleReference {
    #[default]
    Centroid,
    NearestPoint,
}

fn default_step_gain() -> f64 {
    1.0
}

fn default_d_min() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApfParams {
    pub k_rt: f64,
    pub k_rr: f64,
    pub d_0: f64,
    #[serde(rename = "F_threshold")]
    pub f_threshold: f64,
    /// Metres of reference offset per unit of force.
    #[serde(default = "default_step_gain")]
    pub step_gain: f64,
    /// Distances below this are evaluated at `d_min`.
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default)]
    pub obstacle_reference: ObstacleReference,
}

impl ApfParams {
    pub fn new(k_rt: f64, k_rr: f64, d_0: f64, f_threshold: f64) -> Self {
        Self {
            k_rt,
            k_rr,
            d_0,
            f_threshold,
            step_gain: default_step_gain(),
            d_min: default_d_min(),
            obstacle_reference: ObstacleReference::Centroid,
        }
    }

    /// Same parameters without the rotational component.
    pub fn conventional(mut self) -> Self {
        self.k_rr = 0.0;
        self
    }
}

/// Offset and the distance the formulas are evaluated at.
struct Offset {
    delta: Vec3,
    distance: f64,
}

fn offset(q: &Vec3, q_o: &Vec3, params: &ApfParams) -> Offset {
    let delta = q - q_o;
    let d = delta.norm();
    if d < params.d_min && d > 0.0 {
        // keep the direction, shrink to d_min
        Offset {
            delta: delta * (params.d_min / d),
            distance: params.d_min,
        }
    } else {
        Offset {
            delta,
            distance: d,
        }
    }
}

/// Common radial factor `(1/d - 1/d_0) / d^3`, zero outside the influence distance.
fn radial_factor(d: f64, d_0: f64) -> f64 {
    if d > d_0 || d == 0.0 {
        0.0
    } else {
        (1.0 / d - 1.0 / d_0) / (d * d * d)
    }
}

/// `0.5 k_rt (1/d - 1/d_0)^2` inside the influence distance, else 0.
pub fn repulsive_potential(q: &Vec3, q_o: &Vec3, params: &ApfParams) -> f64 {
    let d = offset(q, q_o, params).distance;
    if d > params.d_0 || d == 0.0 {
        return 0.0;
    }
    let s = 1.0 / d - 1.0 / params.d_0;
    0.5 * params.k_rt * s * s
}

/// Negative gradient of [`repulsive_potential`].
pub fn translational_force(q: &Vec3, q_o: &Vec3, params: &ApfParams) -> Vec3 {
    let o = offset(q, q_o, params);
    o.delta * (params.k_rt * radial_factor(o.distance, params.d_0))
}

/// Circulation matrix from the trajectory heading `phi` and the bearing `rho`
/// from the vehicle to the obstacle.
pub fn rotation_direction(phi: f64, rho: f64) -> RotationDirection {
    if wrap_angle(phi - rho) >= 0.0 {
        ROTATE_FIRST
    } else {
        ROTATE_SECOND
    }
}

fn apply(r: &RotationDirection, v: &Vec2) -> Vec2 {
    Vec2::new(r[0][0] * v.x + r[0][1] * v.y, r[1][0] * v.x + r[1][1] * v.y)
}

/// Planar force perpendicular to the planar offset, with the 3D distance in the
/// magnitude. The z component is always zero. Returns zero when the obstacle is
/// directly above or below the vehicle.
pub fn rotational_force(q: &Vec3, q_o: &Vec3, phi: f64, params: &ApfParams) -> Vec3 {
    rotational_force_with_theta(q, q_o, phi, params).0
}

fn rotational_force_with_theta(q: &Vec3, q_o: &Vec3, phi: f64, params: &ApfParams) -> (Vec3, f64) {
    let planar = (q - q_o).xy();
    let rho = (q_o.y - q.y).atan2(q_o.x - q.x);
    let theta = wrap_angle(phi - rho);
    if planar.norm_squared() == 0.0 {
        return (Vec3::zeros(), theta);
    }
    let o = offset(q, q_o, params);
    let factor = params.k_rr * radial_factor(o.distance, params.d_0);
    if factor == 0.0 {
        return (Vec3::zeros(), theta);
    }
    let r = rotation_direction(phi, rho);
    let f = apply(&r, &o.delta.xy()) * factor;
    (Vec3::new(f.x, f.y, 0.0), theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterForce {
    pub cluster_id: usize,
    pub f_rt: Vec3,
    pub f_rr: Vec3,
    pub f_r: Vec3,
    pub distance: f64,
    pub theta: f64,
    /// Distance was below `d_min` and the formulas were evaluated at `d_min`.
    pub clamped: bool,
    /// Obstacle directly above/below the vehicle inside the influence distance.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceField {
    pub per_cluster: Vec<ClusterForce>,
    pub f_total_translational: Vec3,
    pub f_total_modified: Vec3,
    /// Norm of the summed translational components; drives the supervisor.
    pub f_t_magnitude: f64,
}

impl ForceField {
    pub fn any_clamped(&self) -> bool {
        self.per_cluster.iter().any(|c| c.clamped)
    }

    pub fn any_degenerate(&self) -> bool {
        self.per_cluster.iter().any(|c| c.degenerate)
    }
}

/// Field at `q` from every sensed cluster.
pub fn total_force(q: &Vec3, obstacles: &SensedObstacles, phi: f64, params: &ApfParams) -> ForceField {
    let mut field = ForceField::default();
    for (cluster_id, cluster) in obstacles.clusters.iter().enumerate() {
        let q_o = match params.obstacle_reference {
            ObstacleReference::Centroid => cluster.centroid,
            ObstacleReference::NearestPoint => obstacles.nearest_point(cluster, q),
        };
        let distance = (q - q_o).norm();
        let f_rt = translational_force(q, &q_o, params);
        let (f_rr, theta) = rotational_force_with_theta(q, &q_o, phi, params);
        let inside = distance <= params.d_0;
        let f_r = f_rt + f_rr;
        field.f_total_translational += f_rt;
        field.f_total_modified += f_r;
        field.per_cluster.push(ClusterForce {
            cluster_id,
            f_rt,
            f_rr,
            f_r,
            distance,
            theta,
            clamped: inside && distance < params.d_min,
            degenerate: inside && params.k_rr > 0.0 && (q - q_o).xy().norm_squared() == 0.0,
        });
    }
    field.f_t_magnitude = field.f_total_translational.norm();
    field
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FollowTrajectory,
    ApfActive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisorState {
    pub mode: Mode,
    /// Time the current (or last) avoidance started.
    pub t_activation: f64,
    /// Time spent in the current avoidance, zero while following.
    pub t_in_apf: f64,
    pub last_heading: f64,
}

impl SupervisorState {
    pub fn new(initial_heading: f64) -> Self {
        Self {
            mode: Mode::FollowTrajectory,
            t_activation: 0.0,
            t_in_apf: 0.0,
            last_heading: initial_heading,
        }
    }
}

/// A finished avoidance: activation time and how long it lasted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub t_k: f64,
    pub t_o: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorOutput {
    pub reference: UavState,
    pub state: SupervisorState,
    pub field: ForceField,
    /// Set on the tick the field drops below threshold after an avoidance.
    pub deactivated: Option<Activation>,
}

/// Reference offset `eta * force`, scaled down uniformly until every
/// component is within `v_max * dt`. The direction of the force is kept.
pub fn reference_step(force: &Vec3, eta: f64, v_max: &Vec3, dt: f64) -> Vec3 {
    let raw = force * eta;
    let scale = (0..3)
        .filter(|&i| raw[i] != 0.0)
        .map(|i| v_max[i] * dt / raw[i].abs())
        .fold(1.0, f64::min);
    raw * scale
}

/// One supervisor tick.
///
/// Below the threshold the reference is the plan at `t_now`; the plan clock
/// keeps running during avoidance, so after an avoidance that started at `t_k`
/// and lasted `t_o` the plan is rejoined at `t_k + t_o`. At or above the
/// threshold the reference is the current position offset along the modified
/// force, shortened if needed so no axis moves faster than `v_max` allows.
pub fn supervisor_step(
    state: &UavState,
    traj: &PlannedTrajectory,
    obstacles: &SensedObstacles,
    t_now: f64,
    sup: &SupervisorState,
    params: &ApfParams,
    dt: f64,
) -> SupervisorOutput {
    assert!(dt > 0.0, "supervisor dt must be positive");
    let phi = traj.heading(t_now);
    let field = total_force(&state.position, obstacles, phi, params);
    let mut next = *sup;
    next.last_heading = phi;

    if field.f_t_magnitude < params.f_threshold {
        let deactivated = (sup.mode == Mode::ApfActive).then_some(Activation {
            t_k: sup.t_activation,
            t_o: sup.t_in_apf,
        });
        next.mode = Mode::FollowTrajectory;
        next.t_in_apf = 0.0;
        return SupervisorOutput {
            reference: traj.sample(t_now),
            state: next,
            field,
            deactivated,
        };
    }

    if sup.mode == Mode::FollowTrajectory {
        next.mode = Mode::ApfActive;
        next.t_activation = t_now;
        next.t_in_apf = dt;
    } else {
        next.t_in_apf += dt;
    }
    let step = reference_step(&field.f_total_modified, params.step_gain, &traj.limits.v_max, dt);
    let reference = UavState {
        position: state.position + step,
        velocity: step / dt,
        yaw: state.yaw,
        yaw_rate: 0.0,
    };
    SupervisorOutput {
        reference,
        state: next,
        field,
        deactivated: None,
    }
}
