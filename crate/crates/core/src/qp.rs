//! Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' H x + g' x
//!     subject to  a_j' x >= b_j,   j = 1..m
//! ```
//!
//! The Hessian and the constraint rows are fixed at construction, so the
//! Cholesky factor is computed once and only `g` and `b` change per solve.
//! This is the shape of an MPC problem whose weights and horizon are fixed
//! while the initial state and references move.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit; the returned point is the last iterate.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DenseQp {
    n: usize,
    m: usize,
    hessian: Vec<f64>,
    /// Unit-norm constraint rows, row-major.
    rows: Vec<f64>,
    norms: Vec<f64>,
    /// Half-open column range holding each row's nonzeros.
    spans: Vec<(usize, usize)>,
    /// `L^{-T}` with `H = L L'`, column-major.
    j0: Vec<f64>,
    max_iterations: usize,
}

const FEAS_TOL: f64 = 1e-12;
/// A constraint that depends linearly on the active set and is violated by
/// less than this is rounding, not infeasibility, and is left out.
const DEPENDENT_TOL: f64 = 1e-9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DenseQp {
    /// `hessian` is `n x n` symmetric positive definite; `rows` is `m x n`.
    pub fn new(hessian: &DMatrix<f64>, rows: &DMatrix<f64>) -> Result<Self> {
        let n = hessian.nrows();
        if hessian.ncols() != n || (rows.nrows() > 0 && rows.ncols() != n) {
            return Err(Error::InvalidArgument("QP dimensions do not match".into()));
        }
        let chol = hessian
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("QP Hessian is not positive definite".into()))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
        let j0 = l_inv.transpose();

        let m = rows.nrows();
        let mut norms = Vec::with_capacity(m);
        let mut spans = Vec::with_capacity(m);
        let mut flat = Vec::with_capacity(m * n);
        for r in 0..m {
            let row = rows.row(r);
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!("constraint row {r} is zero")));
            }
            norms.push(norm);
            let lo = row.iter().position(|v| *v != 0.0).unwrap_or(0);
            let hi = n - row.iter().rev().position(|v| *v != 0.0).unwrap_or(0);
            spans.push((lo, hi));
            flat.extend(row.iter().map(|v| v / norm));
        }

        Ok(Self {
            n,
            m,
            hessian: hessian.as_slice().to_vec(),
            rows: flat,
            norms,
            spans,
            j0: j0.as_slice().to_vec(),
            max_iterations: 10 * (n + m) + 50,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.m
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.n..(j + 1) * self.n]
    }

    /// `a_j' x` over the nonzero span of row `j`.
    fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        let (lo, hi) = self.spans[j];
        dot(&self.rows[j * self.n + lo..j * self.n + hi], &x[lo..hi])
    }

    pub fn objective(&self, g: &[f64], x: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for c in 0..n {
            let hx: f64 = (0..n).map(|r| self.hessian[c * n + r] * x[r]).sum();
            quad += x[c] * hx;
        }
        0.5 * quad + dot(g, x)
    }

    /// Largest amount by which `x` violates a constraint, zero if feasible.
    pub fn max_violation(&self, x: &[f64], b: &[f64]) -> f64 {
        (0..self.m)
            .map(|j| b[j] - self.row_dot(j, x) * self.norms[j])
            .fold(0.0, f64::max)
    }

    /// `x` as a solution with no active constraints, for residual checks.
    pub fn point(&self, x: Vec<f64>) -> QpSolution {
        QpSolution {
            x,
            multipliers: vec![0.0; self.m],
            active: Vec::new(),
            status: QpStatus::Optimal,
            iterations: 0,
        }
    }

    /// Largest violation of optimality conditions at `sol` for data `g`, `b`:
    /// stationarity, primal feasibility, dual feasibility and complementarity.
    pub fn kkt_residual(&self, g: &[f64], b: &[f64], sol: &QpSolution) -> f64 {
        let n = self.n;
        let mut grad: Vec<f64> = (0..n)
            .map(|c| (0..n).map(|r| self.hessian[c * n + r] * sol.x[r]).sum::<f64>() + g[c])
            .collect();
        let mut worst: f64 = 0.0;
        for j in 0..self.m {
            let lambda = sol.multipliers[j];
            let row = self.row(j);
            for (gi, a) in grad.iter_mut().zip(row) {
                *gi -= lambda * a * self.norms[j];
            }
            let slack = self.row_dot(j, &sol.x) * self.norms[j] - b[j];
            worst = worst.max(-slack).max(-lambda).max((lambda * slack).abs());
        }
        grad.iter().fold(worst, |w, v| w.max(v.abs()))
    }

    pub fn solve(&self, g: &[f64], b: &[f64]) -> QpSolution {
        self.solve_with_hints(g, b, &[])
    }

    /// Like [`DenseQp::solve`], but rows listed in `hints` are tried first
    /// when picking the next violated constraint. Hints only change the order
    /// in which constraints enter, not the solution; the active set of a
    /// similar earlier problem makes a good hint.
    pub fn solve_with_hints(&self, g: &[f64], b: &[f64], hints: &[usize]) -> QpSolution {
        let n = self.n;
        assert_eq!(g.len(), n, "gradient length");
        assert_eq!(b.len(), self.m, "bound length");
        let bn: Vec<f64> = b.iter().zip(&self.norms).map(|(v, s)| v / s).collect();

        let mut j = self.j0.clone();
        // R is q x q upper triangular, stored column-major with stride n
        let mut r = vec![0.0; n * n];
        let mut active: Vec<usize> = Vec::with_capacity(n);
        let mut u: Vec<f64> = Vec::with_capacity(n);
        let mut is_active = vec![false; self.m];
        let mut skipped = vec![false; self.m];

        // unconstrained minimum x = -J J' g
        let jtg: Vec<f64> = (0..n).map(|c| dot(&j[c * n..(c + 1) * n], g)).collect();
        let mut x = vec![0.0; n];
        for c in 0..n {
            let col = &j[c * n..(c + 1) * n];
            for (xi, v) in x.iter_mut().zip(col) {
                *xi -= v * jtg[c];
            }
        }

        let mut d = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut rv = vec![0.0; n];
        let mut iterations = 0;

        let finish = |x: Vec<f64>, active: &[usize], u: &[f64], status, iterations| {
            let mut multipliers = vec![0.0; self.m];
            for (&c, &ui) in active.iter().zip(u) {
                multipliers[c] = ui / self.norms[c];
            }
            QpSolution {
                x,
                multipliers,
                active: active.to_vec(),
                status,
                iterations,
            }
        };

        loop {
            // first violated hint, else the most violated inactive constraint
            let mut p = hints
                .iter()
                .copied()
                .find(|&c| c < self.m && !is_active[c] && !skipped[c] && self.row_dot(c, &x) - bn[c] < -FEAS_TOL);
            if p.is_none() {
                let mut worst = -FEAS_TOL;
                for c in 0..self.m {
                    if is_active[c] || skipped[c] {
                        continue;
                    }
                    let s = self.row_dot(c, &x) - bn[c];
                    if s < worst {
                        worst = s;
                        p = Some(c);
                    }
                }
            }
            let Some(p) = p else {
                return finish(x, &active, &u, QpStatus::Optimal, iterations);
            };
            let np = self.row(p).to_vec();
            let (lo, hi) = self.spans[p];
            let mut u_plus = 0.0;

            loop {
                iterations += 1;
                if iterations > self.max_iterations {
                    return finish(x, &active, &u, QpStatus::IterationLimit, iterations);
                }
                let q = active.len();
                for c in 0..n {
                    d[c] = dot(&j[c * n + lo..c * n + hi], &np[lo..hi]);
                }
                z.iter_mut().for_each(|v| *v = 0.0);
                for c in q..n {
                    let col = &j[c * n..(c + 1) * n];
                    for (zi, v) in z.iter_mut().zip(col) {
                        *zi += v * d[c];
                    }
                }
                // r = R^{-1} d[..q]
                for i in (0..q).rev() {
                    let mut s = d[i];
                    for k in i + 1..q {
                        s -= r[k * n + i] * rv[k];
                    }
                    rv[i] = s / r[i * n + i];
                }

                // partial step: largest dual step keeping active multipliers >= 0
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for i in 0..q {
                    if rv[i] > 0.0 {
                        let t = u[i] / rv[i];
                        if t < t1 {
                            t1 = t;
                            drop = Some(i);
                        }
                    }
                }
                let d_scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
                let d2 = d[q..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let zn = dot(&z[lo..hi], &np[lo..hi]);
                let t2 = if d2 > 1e-12 * d_scale && zn > 0.0 {
                    let s = self.row_dot(p, &x) - bn[p];
                    (-s / zn).max(0.0)
                } else {
                    f64::INFINITY
                };

                if t1.is_infinite() && t2.is_infinite() {
                    if u_plus == 0.0 && self.row_dot(p, &x) - bn[p] > -DEPENDENT_TOL {
                        skipped[p] = true;
                        break;
                    }
                    return finish(x, &active, &u, QpStatus::Infeasible, iterations);
                }

                if t2.is_infinite() {
                    // pure dual step, then drop the blocking constraint
                    for i in 0..q {
                        u[i] -= t1 * rv[i];
                    }
                    u_plus += t1;
                    let k = drop.expect("finite t1 has a blocking index");
                    self.remove(k, &mut j, &mut r, &mut active, &mut u, &mut is_active);
                    continue;
                }

                let t = t1.min(t2);
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
                if t > 0.0 {
                    // x moved, so earlier rounding-level verdicts no longer hold
                    skipped.iter_mut().for_each(|s| *s = false);
                }
                for i in 0..q {
                    u[i] -= t * rv[i];
                }
                u_plus += t;

                if t2 <= t1 {
                    self.add(q, &mut d, &mut j, &mut r);
                    active.push(p);
                    u.push(u_plus);
                    is_active[p] = true;
                    break;
                }
                let k = drop.expect("finite t1 has a blocking index");
                self.remove(k, &mut j, &mut r, &mut active, &mut u, &mut is_active);
            }
        }
    }

    /// Rotates `d[q..]` onto `d[q]` and stores `d[..=q]` as the new column of R.
    fn add(&self, q: usize, d: &mut [f64], j: &mut [f64], r: &mut [f64]) {
        let n = self.n;
        for i in (q + 1..n).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let h = d[i - 1].hypot(d[i]);
            let (c, s) = (d[i - 1] / h, d[i] / h);
            d[i - 1] = h;
            d[i] = 0.0;
            let (left, right) = j.split_at_mut(i * n);
            let a = &mut left[(i - 1) * n..];
            let b = &mut right[..n];
            for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
                let (va, vb) = (*ai, *bi);
                *ai = c * va + s * vb;
                *bi = -s * va + c * vb;
            }
        }
        r[q * n..q * n + q + 1].copy_from_slice(&d[..=q]);
    }

    fn remove(
        &self,
        k: usize,
        j: &mut [f64],
        r: &mut [f64],
        active: &mut Vec<usize>,
        u: &mut Vec<f64>,
        is_active: &mut [bool],
    ) {
        let n = self.n;
        let q = active.len();
        is_active[active[k]] = false;
        active.remove(k);
        u.remove(k);
        // shift R columns left; the result is upper Hessenberg from column k
        for c in k..q - 1 {
            let (dst, src) = r.split_at_mut((c + 1) * n);
            dst[c * n..c * n + c + 2].copy_from_slice(&src[..c + 2]);
        }
        for c in k..q - 1 {
            let (a, b) = (r[c * n + c], r[c * n + c + 1]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (cs, sn) = (a / h, b / h);
            for l in c..q - 1 {
                let (va, vb) = (r[l * n + c], r[l * n + c + 1]);
                r[l * n + c] = cs * va + sn * vb;
                r[l * n + c + 1] = -sn * va + cs * vb;
            }
            let (left, right) = j.split_at_mut((c + 1) * n);
            let ja = &mut left[c * n..];
            let jb = &mut right[..n];
            for (ai, bi) in ja.iter_mut().zip(jb.iter_mut()) {
                let (va, vb) = (*ai, *bi);
                *ai = cs * va + sn * vb;
                *bi = -sn * va + cs * vb;
            }
        }
        // clear the stale last column
        r[(q - 1) * n..q * n].iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Convenience for one-off problems.
pub fn solve_dense(
    hessian: &DMatrix<f64>,
    g: &DVector<f64>,
    rows: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<QpSolution> {
    let qp = DenseQp::new(hessian, rows)?;
    Ok(qp.solve(g.as_slice(), b.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn unconstrained_minimum() {
        let h = dmatrix![2.0, 0.0; 0.0, 4.0];
        let rows = DMatrix::<f64>::zeros(0, 2);
        let sol = solve_dense(&h, &DVector::from_vec(vec![-2.0, -4.0]), &rows, &DVector::zeros(0)).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_halfplane() {
        // min 1/2 x^2 + 1/2 y^2 + x  s.t. x + 2y >= 1  ->  (-0.6, 0.8)
        let h = DMatrix::identity(2, 2);
        let rows = dmatrix![1.0, 2.0];
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0]);
        let sol = solve_dense(&h, &g, &rows, &b).unwrap();
        assert!((sol.x[0] + 0.6).abs() < 1e-12 && (sol.x[1] - 0.8).abs() < 1e-12);
        let qp = DenseQp::new(&h, &rows).unwrap();
        assert!(qp.kkt_residual(g.as_slice(), b.as_slice(), &sol) < 1e-12);
        assert!((sol.multipliers[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn box_with_drop() {
        // min (x-3)^2 + (y-3)^2 with x <= 1, y <= 1, x + y >= 0
        let h = DMatrix::identity(2, 2) * 2.0;
        let rows = dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0];
        let g = DVector::from_vec(vec![-6.0, -6.0]);
        let b = DVector::from_vec(vec![-1.0, -1.0, 0.0]);
        let sol = solve_dense(&h, &g, &rows, &b).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let h = DMatrix::identity(1, 1);
        let rows = dmatrix![1.0; -1.0];
        let sol = solve_dense(&h, &DVector::zeros(1), &rows, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let h = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(DenseQp::new(&h, &DMatrix::zeros(0, 2)).is_err());
    }
}
