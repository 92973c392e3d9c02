//! Dense two-phase simplex, used only for Chebyshev-center feasibility
//! checks of selection polytopes.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Maximizes `c'v` subject to `A v <= b`, `v >= 0`.
pub fn maximize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> (LpStatus, Vec<f64>, f64) {
    let (m, nv) = a.shape();
    let n_art = b.iter().filter(|&&bi| bi < 0.0).count();
    // columns: decision vars, slacks, artificials, rhs
    let cols = nv + m + n_art + 1;
    let rhs = cols - 1;
    let mut t = vec![0.0; (m + 1) * cols];
    let at = |i: usize, j: usize| i * cols + j;
    let mut basis = vec![0usize; m];
    let mut art = nv + m;
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            t[at(i, j)] = flip * a[(i, j)];
        }
        t[at(i, nv + i)] = flip;
        t[at(i, rhs)] = flip * b[i];
        if b[i] < 0.0 {
            t[at(i, art)] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = nv + i;
        }
    }
    let obj = m;

    if n_art > 0 {
        // phase 1: maximize -sum(artificials), written as reduced costs
        for j in 0..cols {
            t[at(obj, j)] = 0.0;
        }
        for i in 0..m {
            if basis[i] >= nv + m {
                for j in 0..cols {
                    if j < nv + m || j == rhs {
                        t[at(obj, j)] -= t[at(i, j)];
                    }
                }
            }
        }
        match run_simplex(&mut t, &mut basis, m, cols, cols - 1) {
            LpStatus::Optimal => {}
            s => return (s, vec![0.0; nv], 0.0),
        }
        if -t[at(obj, rhs)] > 1e-9 * (1.0 + b.iter().fold(0.0f64, |s, v| s.max(libm::fabs(*v)))) {
            return (LpStatus::Infeasible, vec![0.0; nv], 0.0);
        }
        // drive any zero-level artificials out of the basis
        for i in 0..m {
            if basis[i] >= nv + m {
                if let Some(j) = (0..nv + m).find(|&j| libm::fabs(t[at(i, j)]) > PIVOT_TOL) {
                    pivot(&mut t, &mut basis, m, cols, i, j);
                }
            }
        }
        // forbid artificials from re-entering
        for i in 0..=m {
            for j in nv + m..rhs {
                t[at(i, j)] = 0.0;
            }
        }
    }

    for j in 0..cols {
        t[at(obj, j)] = 0.0;
    }
    for j in 0..nv {
        t[at(obj, j)] = -c[j];
    }
    for i in 0..m {
        let bj = basis[i];
        if bj < nv && c[bj] != 0.0 {
            let cb = c[bj];
            for j in 0..cols {
                t[at(obj, j)] += cb * t[at(i, j)];
            }
        }
    }
    let status = run_simplex(&mut t, &mut basis, m, cols, nv + m);
    let mut v = vec![0.0; nv];
    for i in 0..m {
        if basis[i] < nv {
            v[basis[i]] = t[at(i, rhs)];
        }
    }
    let value = t[at(obj, rhs)];
    (status, v, value)
}

fn pivot(t: &mut [f64], basis: &mut [usize], m: usize, cols: usize, r: usize, c: usize) {
    let pv = t[r * cols + c];
    for j in 0..cols {
        t[r * cols + j] /= pv;
    }
    for i in 0..=m {
        if i == r {
            continue;
        }
        let f = t[i * cols + c];
        if f != 0.0 {
            for j in 0..cols {
                t[i * cols + j] -= f * t[r * cols + j];
            }
        }
    }
    basis[r] = c;
}

/// Bland's rule on the tableau; entering columns restricted to `0..limit`.
fn run_simplex(t: &mut [f64], basis: &mut [usize], m: usize, cols: usize, limit: usize) -> LpStatus {
    let rhs = cols - 1;
    for _ in 0..MAX_PIVOTS {
        let Some(enter) = (0..limit).find(|&j| t[m * cols + j] < -PIVOT_TOL) else {
            return LpStatus::Optimal;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * cols + enter];
            if aij > PIVOT_TOL {
                let ratio = t[i * cols + rhs] / aij;
                let better = ratio < best - 1e-12 || (ratio <= best + 1e-12 && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else { return LpStatus::Unbounded };
        pivot(t, basis, m, cols, r, enter);
    }
    LpStatus::IterationLimit
}

/// Center and radius of the largest ball (radius capped at `cap`) inside
/// `{x : A x <= b}`. `None` when the polytope is empty.
pub fn chebyshev_center(a: &DMatrix<f64>, b: &DVector<f64>, cap: f64) -> Option<(DVector<f64>, f64)> {
    let (m, n) = a.shape();
    let mut keep = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    for i in 0..m {
        let nr = a.row(i).norm();
        if nr == 0.0 {
            if b[i] < -1e-12 {
                return None;
            }
        } else {
            keep.push(i);
            norms.push(nr);
        }
    }
    let rows = keep.len() + 1;
    let nv = 2 * n + 1;
    let mut lp_a = DMatrix::zeros(rows, nv);
    let mut lp_b = vec![0.0; rows];
    for (k, &i) in keep.iter().enumerate() {
        // scale each row to unit norm so the radius is a true distance
        let s = 1.0 / norms[k];
        for j in 0..n {
            lp_a[(k, j)] = a[(i, j)] * s;
            lp_a[(k, n + j)] = -a[(i, j)] * s;
        }
        lp_a[(k, 2 * n)] = 1.0;
        lp_b[k] = b[i] * s;
    }
    lp_a[(rows - 1, 2 * n)] = 1.0;
    lp_b[rows - 1] = cap;
    let mut c = vec![0.0; nv];
    c[2 * n] = 1.0;
    let (status, v, value) = maximize(&c, &lp_a, &lp_b);
    if status != LpStatus::Optimal {
        return None;
    }
    let x = DVector::from_fn(n, |j, _| v[j] - v[n + j]);
    Some((x, value))
}
