//! Global plan and potential-field invariants.

use std::f64::consts::PI;

use proptest::prelude::*;
use rapf_core::apf::{
    repulsive_potential, rotation_direction, rotational_force, supervisor_step, translational_force, ApfParams, Mode,
    SupervisorState,
};
use rapf_core::pointcloud::SensedObstacles;
use rapf_core::trajectory::{plan, DynamicLimits, PlannedTrajectory, UavState};
use rapf_core::Vec3;

fn arb_vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_limits() -> impl Strategy<Value = DynamicLimits> {
    (arb_vec3(1.0), arb_vec3(1.0)).prop_map(|(v, a)| DynamicLimits {
        v_max: v.map(|c| 0.5 + 2.5 * c.abs()),
        a_max: a.map(|c| 0.3 + 1.7 * c.abs()),
        ..DynamicLimits::uniform(1.0, 1.0)
    })
}

fn arb_plan() -> impl Strategy<Value = (Vec<Vec3>, DynamicLimits, PlannedTrajectory)> {
    (prop::collection::vec(arb_vec3(15.0), 2..5), arb_limits()).prop_filter_map("degenerate segment", |(w, l)| {
        if w.windows(2).any(|s| (s[1] - s[0]).norm() < 1e-3) {
            return None;
        }
        let traj = plan(&w, &l, 0.01).ok()?;
        Some((w, l, traj))
    })
}

#[test]
fn trapezoid_duration_by_integrating_sampled_speed() {
    let traj = plan(
        &[Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0)],
        &DynamicLimits::uniform(2.0, 1.0),
        0.01,
    )
    .unwrap();
    // 2 v/a + (L - v^2/a)/v
    assert!((traj.duration() - 7.0).abs() < 1e-9);
    // trapezoidal rule over a fine grid recovers the segment length
    let steps = 70_000;
    let h = traj.duration() / steps as f64;
    let distance: f64 = (0..steps)
        .map(|i| 0.5 * h * (traj.sample(i as f64 * h).velocity.x + traj.sample((i + 1) as f64 * h).velocity.x))
        .sum();
    assert!((distance - 10.0).abs() < 1e-3, "{distance}");
}

#[test]
fn scenario_one_gains_fade_at_the_influence_boundary() {
    let params = ApfParams::new(153.0, 1720.0, 15.0, 0.2);
    let q_o = Vec3::zeros();
    for dir in [Vec3::x(), Vec3::new(1.0, 1.0, 0.0).normalize(), Vec3::new(-0.3, 0.8, 0.2).normalize()] {
        let q = dir * (params.d_0 * (1.0 - 1e-8));
        assert!(translational_force(&q, &q_o, &params).norm() < 1e-5);
        assert!(rotational_force(&q, &q_o, 0.3, &params).norm() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stored_velocity_matches_finite_differences((_w, l, traj) in arb_plan()) {
        for k in traj.knots.windows(3) {
            let dt = k[2].t - k[1].t;
            let fd = (k[2].state.position - k[0].state.position) / (k[2].t - k[0].t);
            for i in 0..3 {
                let err = (fd[i] - k[1].state.velocity[i]).abs();
                let a = [k[0].acceleration[i], k[1].acceleration[i], k[2].acceleration[i]];
                if a[0] == a[1] && a[1] == a[2] {
                    prop_assert!(err < 1e-3, "err {} under constant acceleration", err);
                } else {
                    // a central difference across an acceleration step of size s
                    // is off by at most s dt / 4; here s <= 2 a_max
                    prop_assert!(err <= 2.0 * l.a_max[i] * dt / 4.0 + 1e-9, "err {} at a switch", err);
                }
            }
        }
    }

    #[test]
    fn knots_respect_the_limits((_w, l, traj) in arb_plan()) {
        for k in &traj.knots {
            for i in 0..3 {
                prop_assert!(k.state.velocity[i].abs() <= l.v_max[i] + 1e-9);
                prop_assert!(k.acceleration[i].abs() <= l.a_max[i] + 1e-9);
            }
        }
    }

    #[test]
    fn path_length_is_the_sum_of_segments((w, _l, traj) in arb_plan()) {
        let sum: f64 = w.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
        prop_assert!((traj.path().length() - sum).abs() < 1e-6);
    }

    #[test]
    fn translational_force_repels(q in arb_vec3(20.0), q_o in arb_vec3(20.0), k in 0.1..1000.0f64, d0 in 0.5..20.0f64) {
        let params = ApfParams::new(k, 0.0, d0, 1.0);
        prop_assert!(translational_force(&q, &q_o, &params).dot(&(q - q_o)) >= 0.0);
    }

    #[test]
    fn rotational_force_is_planar_and_perpendicular(
        q in arb_vec3(20.0),
        off in arb_vec3(10.0),
        phi in -PI..PI,
        k in 0.1..2000.0f64,
    ) {
        let q_o = q + off;
        let params = ApfParams::new(1.0, k, 15.0, 1.0);
        let f = rotational_force(&q, &q_o, phi, &params);
        prop_assert_eq!(f.z, 0.0);
        let planar = (q - q_o).xy();
        prop_assert!(f.xy().dot(&planar).abs() <= 4.0 * f64::EPSILON * f.xy().norm() * planar.norm());
    }

    #[test]
    fn translational_magnitude_falls_with_distance(
        dir in arb_vec3(1.0),
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
        d0 in 1.0..20.0f64,
    ) {
        prop_assume!(dir.norm() > 1e-3 && (a - b).abs() > 1e-6);
        let params = ApfParams::new(10.0, 0.0, d0, 1.0);
        let span = d0 - params.d_min;
        let (near, far) = (params.d_min + span * a.min(b), params.d_min + span * a.max(b));
        let u = dir.normalize();
        let f = |d: f64| translational_force(&(u * d), &Vec3::zeros(), &params).norm();
        prop_assert!(f(near) > f(far));
    }

    #[test]
    fn forces_scale_linearly_with_gains(q in arb_vec3(10.0), c in 0.5..4.0f64, phi in -PI..PI) {
        let q_o = Vec3::new(1.0, -2.0, 0.5);
        let base = ApfParams::new(3.0, 5.0, 15.0, 1.0);
        let scaled = ApfParams { k_rt: base.k_rt * c, k_rr: base.k_rr * c, ..base };
        let (t0, t1) = (translational_force(&q, &q_o, &base), translational_force(&q, &q_o, &scaled));
        let (r0, r1) = (rotational_force(&q, &q_o, phi, &base), rotational_force(&q, &q_o, phi, &scaled));
        prop_assert!((t1 - t0 * c).amax() <= 1e-12 * t1.amax().max(1e-300));
        prop_assert!((r1 - r0 * c).amax() <= 1e-12 * r1.amax().max(1e-300));
    }

    #[test]
    fn potential_is_the_force_antiderivative(dir in arb_vec3(1.0), d in 0.2..14.0f64) {
        prop_assume!(dir.norm() > 1e-3);
        let params = ApfParams::new(153.0, 0.0, 15.0, 1.0);
        let q = dir.normalize() * d;
        let h = 1e-5;
        let grad = Vec3::from_fn(|i, _| {
            let mut e = Vec3::zeros();
            e[i] = h;
            (repulsive_potential(&(q + e), &Vec3::zeros(), &params) - repulsive_potential(&(q - e), &Vec3::zeros(), &params)) / (2.0 * h)
        });
        let f = translational_force(&q, &Vec3::zeros(), &params);
        prop_assert!((f + grad).norm() <= 1e-5 * f.norm());
    }

    #[test]
    fn rotation_direction_ignores_full_turns(phi in -10.0..10.0f64, rho in -10.0..10.0f64, turns in -3i32..3) {
        let shift = 2.0 * PI * f64::from(turns);
        let theta = rapf_core::wrap_angle(phi - rho);
        // at the wrap boundary a full turn can change the last bit
        prop_assume!((theta.abs() - PI).abs() > 1e-9 && theta.abs() > 1e-9);
        prop_assert_eq!(rotation_direction(phi, rho), rotation_direction(phi + shift, rho + shift));
    }

    #[test]
    fn supervisor_mode_follows_the_threshold_alone(
        x in 0.5..14.0f64,
        y in -5.0..5.0f64,
        threshold in 0.01..5.0f64,
        previous_active in any::<bool>(),
    ) {
        let traj = plan(&[Vec3::new(0.0, 0.0, 1.0), Vec3::new(40.0, 0.0, 1.0)], &DynamicLimits::uniform(2.0, 1.0), 0.01).unwrap();
        let obstacles = SensedObstacles::from_points(&[Vec3::new(20.0, y, 1.0)]);
        let params = ApfParams::new(153.0, 1720.0, 15.0, threshold);
        let state = UavState::at_rest(Vec3::new(20.0 - x, 0.0, 1.0), 0.0);
        let mut sup = SupervisorState::new(0.0);
        if previous_active {
            sup.mode = Mode::ApfActive;
        }
        let out = supervisor_step(&state, &traj, &obstacles, 1.0, &sup, &params, 0.01);
        let expected = if out.field.f_t_magnitude >= threshold { Mode::ApfActive } else { Mode::FollowTrajectory };
        prop_assert_eq!(out.state.mode, expected);
    }
}
