//! Global trajectory through waypoints under per-axis velocity and
//! acceleration limits.
//!
//! The geometric path is the polyline through the waypoints. Each segment is
//! flown rest-to-rest with a trapezoidal (or triangular) speed profile whose
//! switching instants are aligned to the knot grid, so positions between knots
//! are exactly the trapezoidal integral of the knot velocities and every
//! waypoint lands on a knot.

use serde::{Deserialize, Serialize};

use crate::{wrap_angle, Error, Result, Vec3};

/// Planar speed below which the heading is considered undefined.
pub const HEADING_SPEED_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UavState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Yaw in `[-pi, pi)`.
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl UavState {
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            yaw: wrap_angle(yaw),
            yaw_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    pub v_max: Vec3,
    pub a_max: Vec3,
    pub yaw_rate_max: f64,
    pub yaw_acc_max: f64,
}

impl DynamicLimits {
    pub fn uniform(v_max: f64, a_max: f64) -> Self {
        Self {
            v_max: Vec3::repeat(v_max),
            a_max: Vec3::repeat(a_max),
            yaw_rate_max: 1.0,
            yaw_acc_max: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.v_max.iter().chain(self.a_max.iter()).all(|v| *v > 0.0 && v.is_finite())
            && self.yaw_rate_max > 0.0
            && self.yaw_acc_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("dynamic limits must be strictly positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub state: UavState,
    /// Acceleration held over `[t, t + dt_knot)`.
    pub acceleration: Vec3,
}

/// Piecewise-linear path through waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec3>) -> Self {
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        for (i, v) in vertices.iter().enumerate() {
            if i > 0 {
                acc += (v - vertices[i - 1]).norm();
            }
            cumulative.push(acc);
        }
        Self {
            vertices,
            cumulative,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Arc length of the closest point on the path and the distance to it.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        if self.vertices.len() == 1 {
            return (0.0, (p - self.vertices[0]).norm());
        }
        let mut best = (0.0, f64::INFINITY);
        for i in 0..self.vertices.len() - 1 {
            let a = self.vertices[i];
            let seg = self.vertices[i + 1] - a;
            let len2 = seg.norm_squared();
            let s = if len2 > 0.0 {
                ((p - a).dot(&seg) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = (p - (a + seg * s)).norm();
            if d < best.1 {
                best = (self.cumulative[i] + s * len2.sqrt(), d);
            }
        }
        best
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.project(p).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrajectory {
    pub dt_knot: f64,
    pub knots: Vec<Knot>,
    pub limits: DynamicLimits,
    path: Polyline,
    /// Knot index at which each waypoint is reached.
    waypoint_knots: Vec<usize>,
    /// Last well-defined planar heading at or before each knot.
    fallback_heading: Vec<f64>,
}

/// Rest-to-rest profile of one segment on the knot grid.
struct SegmentProfile {
    steps: usize,
    ramp_steps: usize,
    accel: f64,
    cruise: f64,
}

impl SegmentProfile {
    fn new(length: f64, v_lim: f64, a_lim: f64, dt: f64) -> Self {
        let t_opt = if length >= v_lim * v_lim / a_lim {
            v_lim / a_lim + length / v_lim
        } else {
            2.0 * (length / a_lim).sqrt()
        };
        let mut steps = ((t_opt / dt) - 1e-9).ceil().max(2.0) as usize;
        let need = length / (a_lim * dt * dt);
        loop {
            let n = steps as f64;
            let disc = n * n - 4.0 * need;
            if disc >= 0.0 {
                let mut m = (((n - disc.sqrt()) * 0.5) - 1e-9).ceil().max(1.0) as usize;
                while m <= steps / 2 && ((m * (steps - m)) as f64) < need * (1.0 - 1e-12) {
                    m += 1;
                }
                if m <= steps / 2 {
                    let cruise = length / ((steps - m) as f64 * dt);
                    if cruise <= v_lim * (1.0 + 1e-12) {
                        return Self {
                            steps,
                            ramp_steps: m,
                            accel: cruise / (m as f64 * dt),
                            cruise,
                        };
                    }
                }
            }
            steps += 1;
        }
    }

    /// Arc length, speed and acceleration over `[i, i+1)` at step `i`.
    fn at(&self, i: usize, length: f64, dt: f64) -> (f64, f64, f64) {
        let (n, m) = (self.steps, self.ramp_steps);
        if i <= m {
            let tau = i as f64 * dt;
            let acc = if i < m { self.accel } else if n - m > m { 0.0 } else { -self.accel };
            (0.5 * self.accel * tau * tau, self.accel * tau, acc)
        } else if i <= n - m {
            let s = 0.5 * self.cruise * m as f64 * dt + self.cruise * (i - m) as f64 * dt;
            let acc = if i < n - m { 0.0 } else { -self.accel };
            (s, self.cruise, acc)
        } else {
            let rem = (n - i) as f64 * dt;
            (length - 0.5 * self.accel * rem * rem, self.accel * rem, -self.accel)
        }
    }
}

/// Largest speed along `dir` (unit) that keeps every component within `bound`.
fn directional_limit(dir: &Vec3, bound: &Vec3) -> f64 {
    (0..3)
        .filter(|&i| dir[i].abs() > 0.0)
        .map(|i| bound[i] / dir[i].abs())
        .fold(f64::INFINITY, f64::min)
}

fn planar_heading(v: &Vec3) -> Option<f64> {
    (v.xy().norm() >= HEADING_SPEED_EPS).then(|| v.y.atan2(v.x))
}

/// Plans a rest-to-rest trajectory through `waypoints`.
pub fn plan(waypoints: &[Vec3], limits: &DynamicLimits, dt_knot: f64) -> Result<PlannedTrajectory> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 waypoints are required, got {}",
            waypoints.len()
        )));
    }
    if !(dt_knot > 0.0 && dt_knot.is_finite()) {
        return Err(Error::InvalidArgument("dt_knot must be positive".into()));
    }
    limits.validate()?;
    for (i, w) in waypoints.windows(2).enumerate() {
        if (w[1] - w[0]).norm() == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
    }

    let first_heading = waypoints
        .windows(2)
        .find_map(|w| planar_heading(&(w[1] - w[0])))
        .unwrap_or(0.0);

    // positions, velocities and accelerations at every knot
    let mut raw: Vec<(Vec3, Vec3, Vec3)> = Vec::new();
    let mut waypoint_knots = vec![0];
    for w in waypoints.windows(2) {
        let delta = w[1] - w[0];
        let length = delta.norm();
        let dir = delta / length;
        let profile = SegmentProfile::new(
            length,
            directional_limit(&dir, &limits.v_max),
            directional_limit(&dir, &limits.a_max),
            dt_knot,
        );
        let start = if raw.is_empty() { 0 } else { 1 };
        if start == 1 {
            // the shared waypoint knot starts the new segment from rest
            let last = raw.last_mut().expect("non-empty");
            last.2 = dir * profile.accel;
        }
        for i in start..=profile.steps {
            let (s, v, a) = profile.at(i, length, dt_knot);
            let p = if i == profile.steps { w[1] } else { w[0] + dir * s };
            raw.push((p, dir * v, dir * a));
        }
        waypoint_knots.push(raw.len() - 1);
    }
    if let Some(last) = raw.last_mut() {
        last.1 = Vec3::zeros();
        last.2 = Vec3::zeros();
    }

    let mut knots = Vec::with_capacity(raw.len());
    let mut fallback_heading = Vec::with_capacity(raw.len());
    let mut heading = first_heading;
    let mut yaw = first_heading;
    let max_turn = limits.yaw_rate_max * dt_knot;
    for (k, (p, v, a)) in raw.iter().enumerate() {
        if let Some(h) = planar_heading(v) {
            heading = h;
        }
        fallback_heading.push(heading);
        if k > 0 {
            yaw = wrap_angle(yaw + wrap_angle(heading - yaw).clamp(-max_turn, max_turn));
        }
        knots.push(Knot {
            t: k as f64 * dt_knot,
            state: UavState {
                position: *p,
                velocity: *v,
                yaw: wrap_angle(yaw),
                yaw_rate: 0.0,
            },
            acceleration: *a,
        });
    }
    for k in 0..knots.len() - 1 {
        knots[k].state.yaw_rate =
            wrap_angle(knots[k + 1].state.yaw - knots[k].state.yaw) / dt_knot;
    }

    Ok(PlannedTrajectory {
        dt_knot,
        knots,
        limits: *limits,
        path: Polyline::new(waypoints.to_vec()),
        waypoint_knots,
        fallback_heading,
    })
}

impl PlannedTrajectory {
    pub fn duration(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.t)
    }

    pub fn path(&self) -> &Polyline {
        &self.path
    }

    pub fn waypoints(&self) -> &[Vec3] {
        self.path.vertices()
    }

    pub fn waypoint_knots(&self) -> &[usize] {
        &self.waypoint_knots
    }

    pub fn goal(&self) -> Vec3 {
        *self.path.vertices().last().expect("at least two waypoints")
    }

    /// Bracketing knot index and interpolation weight; `None` past the end.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let t = t.max(0.0);
        let last = self.knots.len() - 1;
        let k = (t / self.dt_knot).floor();
        if k >= last as f64 {
            return None;
        }
        let k = k as usize;
        let w = ((t - self.knots[k].t) / self.dt_knot).clamp(0.0, 1.0);
        Some((k, w))
    }

    /// State at time `t`, linearly interpolated between knots and clamped to
    /// the final (hover) knot past the end.
    pub fn sample(&self, t: f64) -> UavState {
        match self.locate(t) {
            None => {
                let mut s = self.knots.last().expect("non-empty").state;
                s.velocity = Vec3::zeros();
                s.yaw_rate = 0.0;
                s
            }
            Some((k, w)) => {
                let (a, b) = (&self.knots[k].state, &self.knots[k + 1].state);
                UavState {
                    position: a.position + (b.position - a.position) * w,
                    velocity: a.velocity + (b.velocity - a.velocity) * w,
                    yaw: wrap_angle(a.yaw + wrap_angle(b.yaw - a.yaw) * w),
                    yaw_rate: a.yaw_rate + (b.yaw_rate - a.yaw_rate) * w,
                }
            }
        }
    }

    pub fn sample_acceleration(&self, t: f64) -> Vec3 {
        self.locate(t)
            .map_or_else(Vec3::zeros, |(k, _)| self.knots[k].acceleration)
    }

    /// Planar direction of travel of the plan at `t`. Falls back to the most
    /// recent well-defined heading where the plan is at rest.
    pub fn heading(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => *self.fallback_heading.last().expect("non-empty"),
            Some((k, w)) => {
                let (a, b) = (&self.knots[k].state, &self.knots[k + 1].state);
                let v = a.velocity + (b.velocity - a.velocity) * w;
                planar_heading(&v).unwrap_or(self.fallback_heading[k])
            }
        }
    }
}
