//! Brute-force oracles shared by the integration tests. Each one is written
//! from scratch rather than calling the code it checks.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rapf_core::config::ScenarioConfig;
use rapf_core::mpc::{AxisBounds, AxisMpc, AxisState};
use rapf_core::scene::{LidarModel, Primitive, Scene, SensorPose};
use rapf_core::Vec3;

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load_scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

// ---------------------------------------------------------------- clustering

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the `distance <= tol` graph over all pairs.
pub fn union_find_partition(points: &[Vec3], tol: f64) -> BTreeSet<BTreeSet<usize>> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm_squared() <= tol * tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups = std::collections::BTreeMap::<usize, BTreeSet<usize>>::new();
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(i);
    }
    groups.into_values().collect()
}

// ------------------------------------------------------------------ raycast

const HIT_EPS: f64 = 1e-9;

/// Nearest hit of a ray with a box, found by testing each of the six faces.
fn box_faces(min: &Vec3, max: &Vec3, o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        if d[axis] == 0.0 {
            continue;
        }
        for plane in [min[axis], max[axis]] {
            let t = (plane - o[axis]) / d[axis];
            if t <= HIT_EPS {
                continue;
            }
            let p = o + d * t;
            let inside = (0..3)
                .filter(|&k| k != axis)
                .all(|k| p[k] >= min[k] - 1e-12 && p[k] <= max[k] + 1e-12);
            if inside && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Nearest hit with a vertical cylinder by the textbook quadratic plus caps.
fn cylinder_faces(c: &rapf_core::scene::VerticalCylinder, o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > HIT_EPS && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let (ox, oy) = (o.x - c.center_xy.x, o.y - c.center_xy.y);
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = 2.0 * (ox * d.x + oy * d.y);
        let cc = ox * ox + oy * oy - c.radius * c.radius;
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            for t in [(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)] {
                let z = o.z + t * d.z;
                if z >= c.z_min - 1e-12 && z <= c.z_max + 1e-12 {
                    take(t);
                }
            }
        }
    }
    if d.z != 0.0 {
        for z in [c.z_min, c.z_max] {
            let t = (z - o.z) / d.z;
            let (x, y) = (ox + t * d.x, oy + t * d.y);
            if x * x + y * y <= c.radius * c.radius + 1e-12 {
                take(t);
            }
        }
    }
    best
}

pub fn brute_cast(scene: &Scene, o: &Vec3, d: &Vec3) -> Option<f64> {
    scene
        .obstacles
        .iter()
        .filter_map(|p| match p {
            Primitive::Box(b) => box_faces(&b.min, &b.max, o, d),
            Primitive::Cylinder(c) => cylinder_faces(c, o, d),
        })
        .min_by(f64::total_cmp)
}

/// Expected scan, ray by ray, elevation-major then azimuth.
pub fn brute_scan(scene: &Scene, pose: &SensorPose, lidar: &LidarModel) -> Vec<Vec3> {
    let (s, c) = pose.yaw.sin_cos();
    let m = lidar.mount_offset;
    let origin = pose.position + Vec3::new(c * m.x - s * m.y, s * m.x + c * m.y, m.z);
    let mut out = Vec::new();
    for el in lidar.elevations() {
        for az in lidar.azimuth_offsets() {
            let a = pose.yaw + az;
            let d = Vec3::new(el.cos() * a.cos(), el.cos() * a.sin(), el.sin());
            if let Some(t) = brute_cast(scene, &origin, &d) {
                if t <= lidar.range_max {
                    out.push(origin + d * t);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------- MPC

/// Stage-wise affine map from the input sequence: `x_k = f[k] + g[k] * u`.
pub struct Condensed {
    pub f: Vec<Vector4<f64>>,
    pub g: Vec<DMatrix<f64>>,
}

pub fn condense(mpc: &AxisMpc, x0: &Vector4<f64>) -> Condensed {
    let (a, b) = mpc.model();
    let n = mpc.horizon();
    let mut f = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut fx = *x0;
    let mut gx = DMatrix::<f64>::zeros(4, n);
    for k in 0..n {
        fx = a * fx;
        let a_dyn = DMatrix::from_iterator(4, 4, a.iter().copied());
        gx = &a_dyn * gx;
        for r in 0..4 {
            gx[(r, k)] += b[r];
        }
        f.push(fx);
        g.push(gx.clone());
    }
    Condensed { f, g }
}

/// `0.5 u'Hu + c'u + const` form of the horizon cost.
pub fn quadratic(mpc: &AxisMpc, x0: &Vector4<f64>, refs: &[Vector4<f64>], input_weight: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = mpc.horizon();
    let cd = condense(mpc, x0);
    let mut h = DMatrix::<f64>::identity(n, n) * (2.0 * input_weight);
    let mut c = DVector::<f64>::zeros(n);
    for k in 0..n {
        let w4: Matrix4<f64> = mpc.stage_weight(k);
        let w = DMatrix::from_iterator(4, 4, w4.iter().copied());
        let e = DVector::from_iterator(4, (cd.f[k] - refs[k]).iter().copied());
        h += cd.g[k].transpose() * &w * &cd.g[k] * 2.0;
        c += cd.g[k].transpose() * &w * e * 2.0;
    }
    (h, c)
}

/// Inequality rows `a u <= b` for the state caps (velocity, acceleration,
/// jerk, with the last stage's acceleration and jerk pinned to zero when
/// `rest`) and the snap cap.
pub fn inequality_rows(mpc: &AxisMpc, x0: &Vector4<f64>, bounds: &AxisBounds, rest: bool) -> (DMatrix<f64>, DVector<f64>) {
    let n = mpc.horizon();
    let cd = condense(mpc, x0);
    let caps = [bounds.v, bounds.a, bounds.j];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..n {
        for s in 1..4 {
            let cap = if rest && k + 1 == n && s > 1 { 0.0 } else { caps[s - 1] };
            let row = cd.g[k].row(s).into_owned();
            rows.push(row.clone());
            rhs.push(cap - cd.f[k][s]);
            rows.push(-row);
            rhs.push(cap + cd.f[k][s]);
        }
    }
    for i in 0..n {
        let mut e = nalgebra::RowDVector::<f64>::zeros(n);
        e[i] = 1.0;
        rows.push(e.clone());
        rhs.push(bounds.u);
        rows.push(-e);
        rhs.push(bounds.u);
    }
    (DMatrix::from_rows(&rows), DVector::from_vec(rhs))
}

/// Minimises `0.5 u'Hu + c'u` subject to `a u <= b` by trying every
/// combination of at most `n` constraints held with equality (never both
/// sides of one bound pair), smallest combinations first, until one gives a
/// feasible point with nonnegative multipliers. For a strictly convex problem
/// that point is the optimum. Returns `None` when no combination qualifies.
pub fn enumerate_qp(h: &DMatrix<f64>, c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let pairs = a.nrows() / 2;
    // unit rows keep the tolerances meaningful
    let mut a = a.clone();
    let mut b = b.clone();
    for i in 0..a.nrows() {
        let norm = a.row(i).norm();
        if norm > 0.0 {
            a.row_mut(i).unscale_mut(norm);
            b[i] /= norm;
        }
    }

    let try_set = |set: &[usize]| -> Option<DVector<f64>> {
        let k = set.len();
        let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
        let mut rhs = DVector::<f64>::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        rhs.rows_mut(0, n).copy_from(&(-c));
        for (j, &row) in set.iter().enumerate() {
            for col in 0..n {
                kkt[(n + j, col)] = a[(row, col)];
                kkt[(col, n + j)] = a[(row, col)];
            }
            rhs[n + j] = b[row];
        }
        let lu = kkt.clone().full_piv_lu();
        if !lu.is_invertible() {
            return None;
        }
        let sol = lu.solve(&rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        // a rank-deficient system can return a point off its own equations
        for r in 0..n + k {
            let terms: f64 = (0..n + k).map(|j| (kkt[(r, j)] * sol[j]).abs()).sum();
            if ((kkt.row(r) * &sol)[0] - rhs[r]).abs() > 1e-9 * (1.0 + rhs[r].abs() + terms) {
                return None;
            }
        }
        let u = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, k);
        let lambda_scale = 1.0 + lambda.amax();
        if lambda.iter().any(|l| *l < -1e-9 * lambda_scale) {
            return None;
        }
        if (0..a.nrows()).any(|i| (a.row(i) * &u)[0] - b[i] > 1e-9 * (1.0 + b[i].abs())) {
            return None;
        }
        Some(u)
    };

    fn subsets(
        start: usize,
        pairs: usize,
        size: usize,
        chosen: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if chosen.len() == size {
            return f(chosen);
        }
        for p in start..pairs {
            for side in 0..2 {
                chosen.push(2 * p + side);
                if subsets(p + 1, pairs, size, chosen, f) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }

    let mut found = None;
    for size in 0..=n.min(pairs) {
        let mut chosen = Vec::new();
        if subsets(0, pairs, size, &mut chosen, &mut |set| {
            found = try_set(set);
            found.is_some()
        }) {
            break;
        }
    }
    found
}

/// Oracle optimum of one axis problem, or `None` if the caps admit no input.
pub fn mpc_oracle(
    mpc: &AxisMpc,
    input_weight: f64,
    x0: &AxisState,
    refs: &[Vector4<f64>],
    bounds: &AxisBounds,
    rest: bool,
) -> Option<Vec<f64>> {
    let x = x0.to_vector();
    let (h, c) = quadratic(mpc, &x, refs, input_weight);
    let (a, b) = inequality_rows(mpc, &x, bounds, rest);
    enumerate_qp(&h, &c, &a, &b).map(|u| u.iter().copied().collect())
}

/// Unconstrained optimum as a stacked least-squares problem
/// `min sum |L_k'(x_k - r_k)|^2 + p |u|^2`, with `W_k = L_k L_k'`.
pub fn batch_least_squares(mpc: &AxisMpc, input_weight: f64, x0: &AxisState, refs: &[Vector4<f64>]) -> Vec<f64> {
    let n = mpc.horizon();
    let cd = condense(mpc, &x0.to_vector());
    let mut m = DMatrix::<f64>::zeros(4 * n + n, n);
    let mut y = DVector::<f64>::zeros(4 * n + n);
    for k in 0..n {
        let w = mpc.stage_weight(k);
        let l = w.cholesky().expect("stage weight is positive definite").l();
        let lt = DMatrix::from_iterator(4, 4, l.transpose().iter().copied());
        m.view_mut((4 * k, 0), (4, n)).copy_from(&(&lt * &cd.g[k]));
        let e = DVector::from_iterator(4, (refs[k] - cd.f[k]).iter().copied());
        y.rows_mut(4 * k, 4).copy_from(&(&lt * e));
    }
    for i in 0..n {
        m[(4 * n + i, i)] = input_weight.sqrt();
    }
    let svd = m.svd(true, true);
    svd.solve(&y, 1e-14).expect("SVD solve").iter().copied().collect()
}
