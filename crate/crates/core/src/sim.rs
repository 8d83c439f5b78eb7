//! Closed-loop simulation: sense, cluster, supervise, track, move.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apf::{supervisor_step, Activation, Mode, SupervisorState};
use crate::config::{AvoidanceMode, PlantModel, ScenarioConfig};
use crate::mpc::Tracker;
use crate::pointcloud::SensedObstacles;
use crate::scene::{raycast_noisy, SensorPose};
use crate::trajectory::{plan, PlannedTrajectory, UavState};
use crate::{Result, Vec3};

/// Trailing window over which lack of progress counts as a local minimum, seconds.
pub const STUCK_WINDOW: f64 = 30.0;
/// Progress along the plan below which the window counts as no progress, metres.
pub const STUCK_MIN_PROGRESS: f64 = 0.5;
/// Fraction of the window that must be spent avoiding.
pub const STUCK_ACTIVE_FRACTION: f64 = 0.5;

/// One control tick. Vehicle quantities are sampled at the start of the tick;
/// the rest are the decisions taken during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub mode: Mode,
    pub reference: UavState,
    pub force_translational: Vec3,
    pub force_modified: Vec3,
    /// Norm of the summed translational force.
    pub f_t: f64,
    pub clusters: usize,
    /// Snap applied during the tick; zero on the final record.
    pub snap: Vec3,
    /// The tracker fell back to softened state bounds.
    pub soft: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config_sha256: String,
    pub mode: AvoidanceMode,
    pub records: Vec<TickRecord>,
    /// Avoidance episodes in order. An episode still running when the
    /// simulation stops is included with its duration so far.
    pub activations: Vec<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub goal_reached: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_to_goal: Option<f64>,
    pub path_length: f64,
    pub min_clearance: f64,
    pub max_deviation_from_plan: f64,
    pub returned_to_plan: bool,
    pub oscillation_count: usize,
    pub stuck: bool,
    pub activations: usize,
    pub soft_ticks: usize,
}

/// Global plan for `config`.
pub fn plan_for(config: &ScenarioConfig) -> Result<PlannedTrajectory> {
    plan(&config.waypoints, &config.dynamic_limits(), config.sim.dt_knot)
}

/// Runs `config` until the goal is reached or the time budget is spent.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace> {
    config.validate()?;
    let traj = plan_for(config)?;
    let params = config.effective_apf();
    let dt = config.sim.dt;
    let scan_every = config.scan_period_ticks() as u64;
    let max_ticks = (config.sim.time_budget / dt).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let start = traj.sample(0.0);
    let mut tracker = Tracker::new(config.mpc, &config.dynamic_limits(), &start)?;
    let mut sup = SupervisorState::new(traj.heading(0.0));
    let mut plant = start;
    let mut obstacles = SensedObstacles::default();
    let mut records = Vec::new();
    let mut activations = Vec::new();

    for tick in 0..=max_ticks {
        let t = tick as f64 * dt;
        if tick % scan_every == 0 {
            let pose = SensorPose::new(plant.position, plant.yaw);
            let cloud = raycast_noisy(&config.scene, &pose, &config.lidar, &mut rng);
            obstacles = SensedObstacles::segment(cloud, config.clustering.c_tolerance, config.clustering.min_size)?;
        }
        let out = supervisor_step(&plant, &traj, &obstacles, t, &sup, &params, dt);
        if let Some(a) = out.deactivated {
            activations.push(a);
        }
        let mut record = TickRecord {
            tick,
            t,
            position: plant.position,
            velocity: plant.velocity,
            acceleration: tracker.acceleration(),
            jerk: Vec3::from_fn(|i, _| tracker.axes()[i].jerk),
            yaw: plant.yaw,
            yaw_rate: plant.yaw_rate,
            mode: out.state.mode,
            reference: out.reference,
            force_translational: out.field.f_total_translational,
            force_modified: out.field.f_total_modified,
            f_t: out.field.f_t_magnitude,
            clusters: out.field.per_cluster.len(),
            snap: Vec3::zeros(),
            soft: false,
        };
        sup = out.state;

        let done = arrived(&traj, t, &plant.position, config.sim.goal_tolerance) || tick == max_ticks;
        if done {
            records.push(record);
            break;
        }

        let point = tracker.track_step(&out.reference)?;
        record.snap = point.snap;
        record.soft = point.flags.soft;
        records.push(record);

        plant = match config.sim.plant {
            PlantModel::Ideal => point.uav_state(),
            PlantModel::FirstOrderLag => {
                let alpha = dt / (config.sim.lag_time_constant + dt);
                UavState {
                    position: plant.position + (point.position - plant.position) * alpha,
                    velocity: plant.velocity + (point.velocity - plant.velocity) * alpha,
                    yaw: point.yaw,
                    yaw_rate: point.yaw_rate,
                }
            }
        };
    }
    if sup.mode == Mode::ApfActive {
        activations.push(Activation {
            t_k: sup.t_activation,
            t_o: sup.t_in_apf,
        });
    }

    Ok(SimTrace {
        config_sha256: config.sha256(),
        mode: config.mode,
        records,
        activations,
    })
}

/// The plan has run its course and the vehicle is within `tol` of its end.
/// Requiring the former keeps a vehicle that is merely passing near the goal
/// early, or cutting the final approach short, from counting as arrived.
pub fn arrived(traj: &PlannedTrajectory, t: f64, position: &Vec3, tol: f64) -> bool {
    t >= traj.duration() - 1e-9 && (position - traj.goal()).norm() <= tol
}

/// Progress along the planned path: the largest arc-length projection reached
/// so far, per record.
pub fn plan_progress(records: &[TickRecord], traj: &PlannedTrajectory) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    records
        .iter()
        .map(|r| {
            best = best.max(traj.path().project(&r.position).0);
            best
        })
        .collect()
}

/// True if, over the trailing [`STUCK_WINDOW`] of `records`, progress along the
/// plan stayed below [`STUCK_MIN_PROGRESS`] while the supervisor was avoiding
/// for more than [`STUCK_ACTIVE_FRACTION`] of the window.
pub fn detect_local_minimum(records: &[TickRecord], traj: &PlannedTrajectory) -> bool {
    let Some(last) = records.last() else {
        return false;
    };
    let window_start = last.t - STUCK_WINDOW;
    if records[0].t > window_start + 1e-9 {
        return false;
    }
    let first = records.partition_point(|r| r.t < window_start - 1e-9);
    let progress = plan_progress(records, traj);
    let advanced = progress[progress.len() - 1] - progress[first];
    let window = &records[first..];
    let active = window.iter().filter(|r| r.mode == Mode::ApfActive).count();
    advanced < STUCK_MIN_PROGRESS && active as f64 > STUCK_ACTIVE_FRACTION * window.len() as f64
}

/// Avoidance episodes implied by the mode column, with durations counted in ticks.
pub fn activations_from_records(records: &[TickRecord]) -> Vec<(f64, usize)> {
    let mut episodes = Vec::new();
    let mut current: Option<(f64, usize)> = None;
    for r in records {
        match (r.mode, current.as_mut()) {
            (Mode::ApfActive, Some((_, n))) => *n += 1,
            (Mode::ApfActive, None) => current = Some((r.t, 1)),
            (Mode::FollowTrajectory, Some(_)) => episodes.extend(current.take()),
            (Mode::FollowTrajectory, None) => {}
        }
    }
    episodes.extend(current);
    episodes
}

/// Sign changes of the x force about its mean while avoiding.
///
/// With an obstacle straight ahead the x force never changes sign; what
/// changes is its size as the vehicle moves back and forth. The series is the
/// x component of the modified force on active ticks, centred on its mean; a
/// change is counted each time it crosses from above `+h` to below `-h` or
/// back, with `h` 5% of the largest centred magnitude.
pub fn oscillation_count(records: &[TickRecord]) -> usize {
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| r.mode == Mode::ApfActive)
        .map(|r| r.force_modified.x)
        .collect();
    if xs.is_empty() {
        return 0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let band = 0.05 * xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if band == 0.0 {
        return 0;
    }
    let mut sign = 0i8;
    let mut changes = 0;
    for x in xs {
        let c = x - mean;
        let s = if c > band {
            1
        } else if c < -band {
            -1
        } else {
            continue;
        };
        if sign != 0 && s != sign {
            changes += 1;
        }
        sign = s;
    }
    changes
}

pub fn compute_metrics(trace: &SimTrace, config: &ScenarioConfig) -> Result<Metrics> {
    let traj = plan_for(config)?;
    let records = &trace.records;
    let tol = config.sim.goal_tolerance;

    let last = records.last();
    let goal_reached = last.is_some_and(|r| arrived(&traj, r.t, &r.position, tol));
    let path_length = records
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum();
    let min_clearance = records
        .iter()
        .map(|r| config.scene.clearance(&r.position))
        .fold(f64::INFINITY, f64::min);
    let deviation: Vec<f64> = records.iter().map(|r| traj.path().distance(&r.position)).collect();
    let max_deviation_from_plan = deviation.iter().copied().fold(0.0, f64::max);

    let episodes = activations_from_records(records);
    let returned_to_plan = match records.iter().rposition(|r| r.mode == Mode::ApfActive) {
        None => true,
        Some(i) if i + 1 == records.len() => false,
        Some(i) => deviation[i + 1..].iter().any(|d| *d < tol),
    };

    Ok(Metrics {
        goal_reached,
        time_to_goal: if goal_reached { last.map(|r| r.t) } else { None },
        path_length,
        min_clearance,
        max_deviation_from_plan,
        returned_to_plan,
        oscillation_count: oscillation_count(records),
        stuck: detect_local_minimum(records, &traj),
        activations: episodes.len(),
        soft_ticks: records.iter().filter(|r| r.soft).count(),
    })
}
