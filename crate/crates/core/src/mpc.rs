//! Constant-snap MPC tracker.
//!
//! Each axis is an integrator chain `p -> v -> a -> j` driven by snap `u`.
//! The horizon problem is condensed onto the inputs and solved as a dense QP
//! with bounds on velocity, acceleration and jerk at every stage and on snap.
//! Yaw is not part of the chain and follows its reference through a
//! rate-limited first-order filter.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::qp::{DenseQp, QpStatus};
use crate::trajectory::{DynamicLimits, UavState};
use crate::{wrap_angle, Error, Result, Vec3};

/// Exact zero-order-hold discretisation of the snap-driven chain.
pub fn build_model(dt: f64) -> (Matrix4<f64>, Vector4<f64>) {
    let d2 = dt * dt / 2.0;
    let d3 = dt * dt * dt / 6.0;
    let d4 = dt * dt * dt * dt / 24.0;
    #[rustfmt::skip]
    let a = Matrix4::new(
        1.0, dt,  d2,  d3,
        0.0, 1.0, dt,  d2,
        0.0, 0.0, 1.0, dt,
        0.0, 0.0, 0.0, 1.0,
    );
    (a, Vector4::new(d4, d3, d2, dt))
}

/// Stabilising solution of the discrete algebraic Riccati equation for stage
/// weight `q` and input weight `r`, by fixed-point iteration of the recursion.
pub fn riccati(a: &Matrix4<f64>, b: &Vector4<f64>, q: &Matrix4<f64>, r: f64) -> Result<Matrix4<f64>> {
    let mut p = *q;
    for _ in 0..200_000 {
        let pb = p * b;
        let denom = r + (b.transpose() * pb)[0];
        let pa = p * a;
        let next = q + a.transpose() * pa - (a.transpose() * pb) * (pb.transpose() * a) / denom;
        let next = (next + next.transpose()) * 0.5;
        let change = (next - p).amax();
        p = next;
        if change <= 1e-13 * p.amax() {
            return Ok(p);
        }
    }
    Err(Error::InvalidArgument("Riccati iteration did not converge".into()))
}

/// One axis of the virtual vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisState {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

impl AxisState {
    pub fn new(position: f64, velocity: f64, acceleration: f64, jerk: f64) -> Self {
        Self {
            position,
            velocity,
            acceleration,
            jerk,
        }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.position, self.velocity, self.acceleration, self.jerk)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Symmetric caps `|v| <= v`, `|a| <= a`, `|j| <= j`, `|u| <= u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBounds {
    pub v: f64,
    pub a: f64,
    pub j: f64,
    pub u: f64,
}

impl AxisBounds {
    pub fn new(v: f64, a: f64, j: f64, u: f64) -> Self {
        Self { v, a, j, u }
    }

    /// True if velocity, acceleration and jerk are inside the caps (with `tol`).
    pub fn admits(&self, x: &AxisState, tol: f64) -> bool {
        x.velocity.abs() <= self.v + tol
            && x.acceleration.abs() <= self.a + tol
            && x.jerk.abs() <= self.j + tol
    }

    fn state_caps(&self) -> [f64; 3] {
        [self.v, self.a, self.j]
    }
}

/// How the single reference is stretched over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFill {
    /// Every stage gets the same reference state.
    #[default]
    Hold,
    /// Reference position advances with the reference velocity.
    ConstantVelocity,
}

/// Weight on the last predicted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalWeight {
    /// Same diagonal weight as every other stage.
    Stage,
    /// Infinite-horizon LQR cost-to-go for the stage weights.
    #[default]
    Riccati,
}

/// Extra condition on the last predicted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalConstraint {
    /// Only the ordinary caps.
    Free,
    /// Zero acceleration and jerk. Such states stay inside the caps with zero
    /// snap, so a problem that was solvable stays solvable next tick.
    #[default]
    Rest,
}

fn default_horizon() -> usize {
    40
}
fn default_dt() -> f64 {
    0.01
}
fn default_state_weights() -> [f64; 4] {
    [100.0, 1.0, 0.1, 0.01]
}
fn default_input_weight() -> f64 {
    0.001
}
fn default_j_max() -> f64 {
    10.0
}
fn default_u_max() -> f64 {
    200.0
}
fn default_yaw_gain() -> f64 {
    2.0
}
fn default_soft_penalty() -> f64 {
    1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Weights on position, velocity, acceleration and jerk error.
    #[serde(default = "default_state_weights")]
    pub state_weights: [f64; 4],
    /// Weight on squared snap.
    #[serde(default = "default_input_weight")]
    pub input_weight: f64,
    /// Jerk cap, m/s^3.
    #[serde(default = "default_j_max")]
    pub j_max: f64,
    /// Snap cap, m/s^4.
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default)]
    pub reference_fill: ReferenceFill,
    #[serde(default)]
    pub terminal_weight: TerminalWeight,
    #[serde(default)]
    pub terminal_constraint: TerminalConstraint,
    /// Yaw follower gain, 1/s.
    #[serde(default = "default_yaw_gain")]
    pub yaw_gain: f64,
    /// Quadratic penalty on the slack used when the hard problem has no solution.
    #[serde(default = "default_soft_penalty")]
    pub soft_penalty: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            dt: default_dt(),
            state_weights: default_state_weights(),
            input_weight: default_input_weight(),
            j_max: default_j_max(),
            u_max: default_u_max(),
            reference_fill: ReferenceFill::default(),
            terminal_weight: TerminalWeight::default(),
            terminal_constraint: TerminalConstraint::default(),
            yaw_gain: default_yaw_gain(),
            soft_penalty: default_soft_penalty(),
        }
    }
}

impl MpcConfig {
    /// Returns the offending field name and message on the first violation.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.horizon == 0 {
            return Err(("horizon", "must be at least 1".into()));
        }
        if !pos(self.dt) {
            return Err(("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.state_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(("state_weights", "must be finite and nonnegative".into()));
        }
        if !pos(self.input_weight) {
            return Err(("input_weight", format!("must be positive, got {}", self.input_weight)));
        }
        if !pos(self.j_max) {
            return Err(("j_max", format!("must be positive, got {}", self.j_max)));
        }
        if !pos(self.u_max) {
            return Err(("u_max", format!("must be positive, got {}", self.u_max)));
        }
        if !pos(self.yaw_gain) {
            return Err(("yaw_gain", format!("must be positive, got {}", self.yaw_gain)));
        }
        if !pos(self.soft_penalty) {
            return Err(("soft_penalty", format!("must be positive, got {}", self.soft_penalty)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|(field, msg)| Error::InvalidArgument(format!("mpc.{field}: {msg}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveFlags {
    /// State bounds were softened with a penalised slack.
    pub soft: bool,
    /// The solver stopped at its iteration cap.
    pub suboptimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisSolution {
    pub u0: f64,
    pub inputs: Vec<f64>,
    /// States `x_1 .. x_N`.
    pub predicted: Vec<Vector4<f64>>,
    /// `sum e' Q e + P u^2` over the horizon.
    pub cost: f64,
    pub kkt_residual: f64,
    /// Slack used by the soft problem, zero otherwise.
    pub slack: f64,
    pub flags: SolveFlags,
    /// Constraint rows active at the solution of the hard problem.
    pub active: Vec<usize>,
}

/// What one tick hands to the next; see [`AxisMpc::solve_warm`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub active: Vec<usize>,
    pub inputs: Vec<f64>,
}

/// Condensed single-axis horizon problem. The matrices depend only on the
/// configuration, so one instance serves every axis and every tick.
#[derive(Debug, Clone)]
pub struct AxisMpc {
    n: usize,
    a: Matrix4<f64>,
    b: Vector4<f64>,
    weights: [f64; 4],
    /// Weight on the error of the last stage.
    terminal: Matrix4<f64>,
    input_weight: f64,
    soft_penalty: f64,
    terminal_rest: bool,
    /// Stacked `x_k = phi_k x0 + gamma_k u`, `4N x 4` and `4N x N`.
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    hard: DenseQp,
    soft: DenseQp,
}

const STATE_ROWS_PER_STAGE: usize = 6;

impl AxisMpc {
    pub fn new(cfg: &MpcConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.horizon;
        let (a, b) = build_model(cfg.dt);

        let mut phi = DMatrix::zeros(4 * n, 4);
        let mut gamma = DMatrix::zeros(4 * n, n);
        let mut a_pow = Matrix4::identity();
        // impulse[k] = A^k B
        let mut impulse = Vec::with_capacity(n);
        let mut ab = b;
        for _ in 0..n {
            impulse.push(ab);
            ab = a * ab;
        }
        for k in 0..n {
            a_pow = a * a_pow;
            phi.view_mut((4 * k, 0), (4, 4)).copy_from(&a_pow);
            for i in 0..=k {
                gamma.view_mut((4 * k, i), (4, 1)).copy_from(&impulse[k - i]);
            }
        }

        let stage = Matrix4::from_diagonal(&Vector4::from(cfg.state_weights));
        let terminal = match cfg.terminal_weight {
            TerminalWeight::Stage => stage,
            TerminalWeight::Riccati => riccati(&a, &b, &stage, cfg.input_weight)?,
        };
        let mut hessian = DMatrix::from_diagonal_element(n, n, cfg.input_weight);
        for k in 0..n {
            let w = if k + 1 == n { terminal } else { stage };
            let g = gamma.rows(4 * k, 4);
            hessian += g.transpose() * w * g;
        }
        hessian *= 2.0;
        // symmetrise away rounding before the Cholesky factorisation
        hessian = (&hessian + hessian.transpose()) * 0.5;

        let state_rows = STATE_ROWS_PER_STAGE * n;
        let mut rows = DMatrix::zeros(state_rows + 2 * n, n);
        for k in 0..n {
            for c in 1..4 {
                let g = gamma.row(4 * k + c);
                let r = STATE_ROWS_PER_STAGE * k + 2 * (c - 1);
                rows.row_mut(r).copy_from(&g);
                rows.row_mut(r + 1).copy_from(&(-g));
            }
        }
        for i in 0..n {
            rows[(state_rows + 2 * i, i)] = 1.0;
            rows[(state_rows + 2 * i + 1, i)] = -1.0;
        }

        // soft problem: one extra variable s >= 0 added to every state row
        let mut soft_h = DMatrix::zeros(n + 1, n + 1);
        soft_h.view_mut((0, 0), (n, n)).copy_from(&hessian);
        soft_h[(n, n)] = 2.0 * cfg.soft_penalty;
        let mut soft_rows = DMatrix::zeros(rows.nrows() + 1, n + 1);
        soft_rows.view_mut((0, 0), (rows.nrows(), n)).copy_from(&rows);
        for r in 0..state_rows {
            soft_rows[(r, n)] = 1.0;
        }
        soft_rows[(rows.nrows(), n)] = 1.0;

        Ok(Self {
            n,
            a,
            b,
            weights: cfg.state_weights,
            terminal,
            input_weight: cfg.input_weight,
            soft_penalty: cfg.soft_penalty,
            terminal_rest: cfg.terminal_constraint == TerminalConstraint::Rest,
            phi,
            gamma,
            hard: DenseQp::new(&hessian, &rows)?,
            soft: DenseQp::new(&soft_h, &soft_rows)?,
        })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> (Matrix4<f64>, Vector4<f64>) {
        (self.a, self.b)
    }

    /// States `x_1 .. x_N` under `inputs` from `x0`.
    pub fn rollout(&self, x0: &Vector4<f64>, inputs: &[f64]) -> Vec<Vector4<f64>> {
        let mut x = *x0;
        inputs
            .iter()
            .map(|u| {
                x = self.a * x + self.b * *u;
                x
            })
            .collect()
    }

    /// Weight applied to the error at stage `k` (zero-based).
    pub fn stage_weight(&self, k: usize) -> Matrix4<f64> {
        if k + 1 == self.n {
            self.terminal
        } else {
            Matrix4::from_diagonal(&Vector4::from(self.weights))
        }
    }

    /// Horizon cost of `inputs` against `refs`.
    pub fn cost(&self, x0: &Vector4<f64>, refs: &[Vector4<f64>], inputs: &[f64]) -> f64 {
        let states = self.rollout(x0, inputs);
        let mut total = 0.0;
        for (k, (x, r)) in states.iter().zip(refs).enumerate() {
            let e = x - r;
            total += if k + 1 == self.n {
                (e.transpose() * self.terminal * e)[0]
            } else {
                (0..4).map(|c| self.weights[c] * e[c] * e[c]).sum::<f64>()
            };
        }
        total + inputs.iter().map(|u| self.input_weight * u * u).sum::<f64>()
    }

    /// Optimal snap sequence for one axis.
    ///
    /// `refs` holds the reference states for stages `1..=N`. If `x0` already
    /// violates the state caps, or the capped problem has no solution, the
    /// state caps are relaxed by a common penalised slack and the result is
    /// flagged as soft.
    pub fn solve(&self, x0: &AxisState, refs: &[Vector4<f64>], bounds: &AxisBounds) -> Result<AxisSolution> {
        self.solve_warm(x0, refs, bounds, None)
    }

    /// [`AxisMpc::solve`] seeded with the previous tick's solution.
    ///
    /// The active set of `warm` orders the solver's work. Its inputs are a
    /// fallback: if the solver reports the capped problem infeasible but those
    /// inputs satisfy every cap, they are returned flagged as suboptimal
    /// instead of softening the caps. Near-degenerate problems, where the
    /// feasible set is a sliver, are where this happens.
    pub fn solve_warm(
        &self,
        x0: &AxisState,
        refs: &[Vector4<f64>],
        bounds: &AxisBounds,
        warm: Option<&WarmStart>,
    ) -> Result<AxisSolution> {
        if refs.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "expected {} reference states, got {}",
                self.n,
                refs.len()
            )));
        }
        let n = self.n;
        let x0v = x0.to_vector();
        let free = &self.phi * x0v;

        let mut err = DVector::zeros(4 * n);
        for k in 0..n {
            let e = free.fixed_rows::<4>(4 * k) - refs[k];
            let we = if k + 1 == n {
                self.terminal * e
            } else {
                e.component_mul(&Vector4::from(self.weights))
            };
            err.fixed_rows_mut::<4>(4 * k).copy_from(&we);
        }
        let g: Vec<f64> = (self.gamma.tr_mul(&err) * 2.0).iter().copied().collect();

        let caps = bounds.state_caps();
        let state_rows = STATE_ROWS_PER_STAGE * n;
        let mut b = vec![0.0; state_rows + 2 * n];
        for k in 0..n {
            for c in 1..4 {
                let r = STATE_ROWS_PER_STAGE * k + 2 * (c - 1);
                let f = free[4 * k + c];
                let cap = if self.terminal_rest && k + 1 == n && c > 1 { 0.0 } else { caps[c - 1] };
                b[r] = -cap - f;
                b[r + 1] = -cap + f;
            }
        }
        for i in 0..n {
            b[state_rows + 2 * i] = -bounds.u;
            b[state_rows + 2 * i + 1] = -bounds.u;
        }

        let mut flags = SolveFlags::default();
        let mut slack = 0.0;
        let mut active = Vec::new();
        let (inputs, kkt_residual) = if bounds.admits(x0, 1e-9) {
            let hints = warm.map_or(&[][..], |w| &w.active[..]);
            let sol = self.hard.solve_with_hints(&g, &b, hints);
            match sol.status {
                QpStatus::Optimal | QpStatus::IterationLimit => {
                    flags.suboptimal = sol.status == QpStatus::IterationLimit;
                    let res = self.hard.kkt_residual(&g, &b, &sol);
                    active = sol.active;
                    (sol.x, res)
                }
                QpStatus::Infeasible => match warm {
                    Some(w) if w.inputs.len() == n && self.hard.max_violation(&w.inputs, &b) <= 1e-9 => {
                        flags.suboptimal = true;
                        let res = self.hard.kkt_residual(&g, &b, &self.hard.point(w.inputs.clone()));
                        (w.inputs.clone(), res)
                    }
                    _ => self.solve_soft(&g, &b, &mut flags, &mut slack),
                },
            }
        } else {
            self.solve_soft(&g, &b, &mut flags, &mut slack)
        };

        let predicted = self.rollout(&x0v, &inputs);
        let cost = self.cost(&x0v, refs, &inputs);
        Ok(AxisSolution {
            u0: inputs[0],
            inputs,
            predicted,
            cost: cost + if flags.soft { self.soft_penalty * slack * slack } else { 0.0 },
            kkt_residual,
            slack,
            flags,
            active,
        })
    }

    /// Carries `sol` one tick forward: active rows move one stage earlier and
    /// the inputs drop their first entry and end with zero snap.
    pub fn shift(&self, sol: &AxisSolution) -> WarmStart {
        let state_rows = STATE_ROWS_PER_STAGE * self.n;
        let active = sol
            .active
            .iter()
            .filter_map(|&r| {
                if r < state_rows {
                    r.checked_sub(STATE_ROWS_PER_STAGE)
                } else {
                    (r >= state_rows + 2).then(|| r - 2)
                }
            })
            .collect();
        let mut inputs = sol.inputs[1..].to_vec();
        inputs.push(0.0);
        WarmStart { active, inputs }
    }

    fn solve_soft(&self, g: &[f64], b: &[f64], flags: &mut SolveFlags, slack: &mut f64) -> (Vec<f64>, f64) {
        let mut gs = g.to_vec();
        gs.push(0.0);
        let mut bs = b.to_vec();
        bs.push(0.0);
        let sol = self.soft.solve(&gs, &bs);
        flags.soft = true;
        flags.suboptimal = sol.status != QpStatus::Optimal;
        let res = self.soft.kkt_residual(&gs, &bs, &sol);
        *slack = sol.x[self.n];
        let mut x = sol.x;
        x.truncate(self.n);
        (x, res)
    }
}

/// One emitted reference for the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    /// Snap applied over the step that produced this point.
    pub snap: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub stamp: f64,
    pub flags: SolveFlags,
}

impl TrajectoryPoint {
    pub fn uav_state(&self) -> UavState {
        UavState {
            position: self.position,
            velocity: self.velocity,
            yaw: self.yaw,
            yaw_rate: self.yaw_rate,
        }
    }
}

/// Three decoupled axis controllers plus the yaw follower.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: MpcConfig,
    mpc: AxisMpc,
    bounds: [AxisBounds; 3],
    yaw_rate_max: f64,
    axes: [AxisState; 3],
    /// Previous solutions carried forward, per axis.
    warm: [Option<WarmStart>; 3],
    yaw: f64,
    yaw_rate: f64,
    ticks: u64,
}

impl Tracker {
    /// Starts at `initial` with zero acceleration and jerk. Velocity and
    /// acceleration caps come from `limits`, jerk and snap caps from `cfg`.
    pub fn new(cfg: MpcConfig, limits: &DynamicLimits, initial: &UavState) -> Result<Self> {
        limits.validate()?;
        let mpc = AxisMpc::new(&cfg)?;
        let bounds = [0, 1, 2].map(|i| AxisBounds::new(limits.v_max[i], limits.a_max[i], cfg.j_max, cfg.u_max));
        let axes = [0, 1, 2].map(|i| AxisState::new(initial.position[i], initial.velocity[i], 0.0, 0.0));
        Ok(Self {
            cfg,
            mpc,
            bounds,
            yaw_rate_max: limits.yaw_rate_max,
            axes,
            warm: Default::default(),
            yaw: wrap_angle(initial.yaw),
            yaw_rate: 0.0,
            ticks: 0,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &[AxisBounds; 3] {
        &self.bounds
    }

    pub fn axes(&self) -> &[AxisState; 3] {
        &self.axes
    }

    pub fn state(&self) -> UavState {
        UavState {
            position: Vec3::from_fn(|i, _| self.axes[i].position),
            velocity: Vec3::from_fn(|i, _| self.axes[i].velocity),
            yaw: self.yaw,
            yaw_rate: self.yaw_rate,
        }
    }

    pub fn acceleration(&self) -> Vec3 {
        Vec3::from_fn(|i, _| self.axes[i].acceleration)
    }

    fn horizon_refs(&self, reference: &UavState, axis: usize) -> Vec<Vector4<f64>> {
        let p = reference.position[axis];
        let v = reference.velocity[axis];
        (1..=self.mpc.horizon())
            .map(|k| match self.cfg.reference_fill {
                ReferenceFill::Hold => Vector4::new(p, v, 0.0, 0.0),
                ReferenceFill::ConstantVelocity => Vector4::new(p + v * k as f64 * self.cfg.dt, v, 0.0, 0.0),
            })
            .collect()
    }

    /// Solves the three axis problems for `reference`, advances the virtual
    /// vehicle one step with the first snap and returns the new state.
    pub fn track_step(&mut self, reference: &UavState) -> Result<TrajectoryPoint> {
        let dt = self.cfg.dt;
        let mut flags = SolveFlags::default();
        let mut snap = Vec3::zeros();
        for i in 0..3 {
            let refs = self.horizon_refs(reference, i);
            let sol = self.mpc.solve_warm(&self.axes[i], &refs, &self.bounds[i], self.warm[i].as_ref())?;
            self.warm[i] = Some(self.mpc.shift(&sol));
            flags.soft |= sol.flags.soft;
            flags.suboptimal |= sol.flags.suboptimal;
            snap[i] = sol.u0;
            self.axes[i] = AxisState::from_vector(&sol.predicted[0]);
        }

        let max_rate = self.yaw_rate_max;
        self.yaw_rate = (self.cfg.yaw_gain * wrap_angle(reference.yaw - self.yaw)).clamp(-max_rate, max_rate);
        self.yaw = wrap_angle(self.yaw + self.yaw_rate * dt);
        self.ticks += 1;

        Ok(TrajectoryPoint {
            position: Vec3::from_fn(|i, _| self.axes[i].position),
            velocity: Vec3::from_fn(|i, _| self.axes[i].velocity),
            acceleration: Vec3::from_fn(|i, _| self.axes[i].acceleration),
            jerk: Vec3::from_fn(|i, _| self.axes[i].jerk),
            snap,
            yaw: self.yaw,
            yaw_rate: self.yaw_rate,
            stamp: self.ticks as f64 * dt,
            flags,
        })
    }
}
