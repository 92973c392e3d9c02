//! Deterministic fits whose outcomes define the selection events.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::linalg::{complement, max_abs, select_columns, sign, DampedLs};
use crate::{Error, Result, ACTIVE_MARGIN};

/// KKT tolerance checked on every returned lasso / elastic-net fit.
pub const KKT_TOL: f64 = 1e-8;

const CD_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;
const MAX_REFITS: usize = 200;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    /// Equicorrelation set, ascending.
    pub active: Vec<usize>,
    /// `z_M`, aligned with `active`.
    pub signs: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    /// Exact active-block solution `U`.
    pub u: DVector<f64>,
    /// Inactive subgradient `W`, aligned with the complement of `active`.
    pub w: DVector<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

impl LassoFit {
    pub fn inactive(&self) -> Vec<usize> {
        complement(self.beta.len(), &self.active)
    }

    /// Full subgradient `z` of the l1 term.
    pub fn subgradient(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.beta.len());
        for (k, &j) in self.active.iter().enumerate() {
            z[j] = self.signs[k];
        }
        for (k, j) in self.inactive().into_iter().enumerate() {
            z[j] = self.w[k];
        }
        z
    }

    /// Same active set and signs.
    pub fn same_outcome(&self, other: &LassoFit) -> bool {
        self.active == other.active && self.signs == other.signs
    }
}

/// Lasso: minimizes `1/2 ||y - X b||^2 + lambda ||b||_1`.
pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    elastic_net(x, y, lambda, 0.0)
}

/// Elastic net: adds `gamma/2 ||b||^2` to the lasso objective.
pub fn elastic_net(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64) -> Result<LassoFit> {
    elastic_net_warm(x, y, lambda, gamma, None)
}

/// Elastic net started from `warm` (typically the fit at a larger lambda).
pub fn elastic_net_warm(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64, warm: Option<&DVector<f64>>) -> Result<LassoFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(alloc::format!("lambda must be positive, got {lambda}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(alloc::format!("gamma must be >= 0, got {gamma}")));
    }
    let mut beta = match warm {
        Some(b) if b.len() == p => b.clone(),
        _ => DVector::zeros(p),
    };
    let (sweeps, converged) = coordinate_descent(x, y, lambda, gamma, &mut beta);
    if !converged {
        log::warn!("coordinate descent hit {MAX_SWEEPS} sweeps; attempting exact refit");
    }

    let grad = x.tr_mul(&(y - x * &beta)) - &beta * gamma;
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    for j in 0..p {
        let zj = grad[j] / lambda;
        if libm::fabs(zj) >= 1.0 - ACTIVE_MARGIN {
            active.push(j);
            signs.push(if beta[j] != 0.0 { sign(beta[j]) } else { sign(zj) });
        }
    }

    let xty = x.tr_mul(y);
    for _ in 0..MAX_REFITS {
        let ls = DampedLs::new(select_columns(x, &active), gamma)?;
        let zm = DVector::from_vec(signs.clone());
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&j| xty[j])) - &zm * lambda;
        let u = ls.solve_gram(&rhs);

        let wrong: Vec<usize> = (0..active.len()).filter(|&k| u[k] * signs[k] <= 0.0).collect();
        if !wrong.is_empty() {
            for &k in wrong.iter().rev() {
                active.remove(k);
                signs.remove(k);
            }
            continue;
        }

        let inactive = complement(p, &active);
        let resid = y - ls.design() * &u;
        let w = DVector::from_iterator(inactive.len(), inactive.iter().map(|&j| x.column(j).dot(&resid) / lambda));
        let worst =
            (0..inactive.len()).filter(|&k| libm::fabs(w[k]) > 1.0 + 1e-12).max_by(|&a, &b| libm::fabs(w[a]).total_cmp(&libm::fabs(w[b])));
        if let Some(k) = worst {
            let j = inactive[k];
            let pos = active.partition_point(|&a| a < j);
            active.insert(pos, j);
            signs.insert(pos, sign(w[k]));
            continue;
        }

        let mut beta = DVector::zeros(p);
        for (k, &j) in active.iter().enumerate() {
            beta[j] = u[k];
        }
        let mut z = DVector::zeros(p);
        for (k, &j) in active.iter().enumerate() {
            z[j] = signs[k];
        }
        for (k, &j) in inactive.iter().enumerate() {
            z[j] = w[k];
        }
        let kkt = x.tr_mul(&(x * &beta - y)) + &beta * gamma + z * lambda;
        let kkt_residual = max_abs(&kkt);
        let scale = lambda.max(1.0);
        if kkt_residual > KKT_TOL * scale || max_abs(&w) > 1.0 + KKT_TOL {
            return Err(Error::NotConverged { iterations: sweeps, residual: kkt_residual });
        }
        return Ok(LassoFit { beta, active, signs, lambda, gamma, u, w, sweeps, kkt_residual });
    }
    Err(Error::NotConverged { iterations: sweeps, residual: f64::NAN })
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent; full sweeps alternate with sweeps over the
/// current support until a full sweep moves no coefficient by more than
/// `CD_TOL` (relative to the coefficient scale).
fn coordinate_descent(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64, beta: &mut DVector<f64>) -> (usize, bool) {
    let p = x.ncols();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    let mut sweeps = 0;
    let update = |j: usize, beta: &mut DVector<f64>, r: &mut DVector<f64>| -> f64 {
        let xj = x.column(j);
        let rho = xj.dot(r) + col_sq[j] * beta[j];
        let new = soft(rho, lambda) / (col_sq[j] + gamma);
        let delta = new - beta[j];
        if delta != 0.0 {
            r.axpy(-delta, &xj, 1.0);
            beta[j] = new;
        }
        libm::fabs(delta)
    };
    while sweeps < MAX_SWEEPS {
        let mut r = y - x * &*beta;
        let mut max_change = 0.0f64;
        for j in 0..p {
            max_change = max_change.max(update(j, beta, &mut r));
        }
        sweeps += 1;
        if max_change < CD_TOL * max_abs(beta).max(1.0) {
            return (sweeps, true);
        }
        let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        while sweeps < MAX_SWEEPS {
            let mut inner = 0.0f64;
            for &j in &support {
                inner = inner.max(update(j, beta, &mut r));
            }
            sweeps += 1;
            if inner < CD_TOL * max_abs(beta).max(1.0) {
                break;
            }
        }
    }
    (sweeps, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenFit {
    /// Selected indices, ascending.
    pub active: Vec<usize>,
    pub signs: Vec<f64>,
}

/// Keeps the `k` columns with the largest `|x_j' y|`.
pub fn marginal_screen(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<ScreenFit> {
    let p = x.ncols();
    if k == 0 || k > p {
        return Err(Error::InvalidInput(alloc::format!("screening size k = {k} must lie in 1..={p}")));
    }
    let c = x.tr_mul(y);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| libm::fabs(c[b]).total_cmp(&libm::fabs(c[a])));
    if k < p {
        let (a, b) = (order[k - 1], order[k]);
        if libm::fabs(c[a]) - libm::fabs(c[b]) <= TIE_TOL * libm::fabs(c[a]) {
            return Err(Error::Tie(a.min(b), a.max(b)));
        }
    }
    let mut active = order[..k].to_vec();
    active.sort_unstable();
    let signs = active.iter().map(|&j| sign(c[j])).collect();
    Ok(ScreenFit { active, signs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwisePath {
    /// `(index, sign)` in selection order.
    pub steps: Vec<(usize, f64)>,
    /// Residual after each step, `(I - P_{S_i}) y`.
    pub residuals: Vec<DVector<f64>>,
}

impl StepwisePath {
    pub fn indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.0).collect()
    }
}

/// Orthogonal matching pursuit for `k` steps.
pub fn omp(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<StepwisePath> {
    let (n, p) = x.shape();
    if k == 0 || k > n.min(p) {
        return Err(Error::InvalidInput(alloc::format!("OMP steps k = {k} must lie in 1..={}", n.min(p))));
    }
    let mut steps: Vec<(usize, f64)> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut chosen = vec![false; p];
    let mut r = y.clone();
    for _ in 0..k {
        let c = x.tr_mul(&r);
        let mut best: Option<usize> = None;
        let mut second: Option<usize> = None;
        for j in (0..p).filter(|&j| !chosen[j]) {
            match best {
                Some(b) if libm::fabs(c[j]) <= libm::fabs(c[b]) => {
                    if second.is_none_or(|s| libm::fabs(c[j]) > libm::fabs(c[s])) {
                        second = Some(j);
                    }
                }
                _ => {
                    second = best;
                    best = Some(j);
                }
            }
        }
        let b = best.expect("k <= p leaves a candidate");
        if let Some(s) = second {
            if libm::fabs(c[b]) - libm::fabs(c[s]) <= TIE_TOL * libm::fabs(c[b]) {
                return Err(Error::Tie(b.min(s), b.max(s)));
            }
        }
        chosen[b] = true;
        steps.push((b, sign(c[b])));
        let idx: Vec<usize> = steps.iter().map(|s| s.0).collect();
        let ls = DampedLs::new(select_columns(x, &idx), 0.0)?;
        r = ls.residual(y);
        residuals.push(r.clone());
    }
    Ok(StepwisePath { steps, residuals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsFit {
    pub beta: DVector<f64>,
    /// Positive coordinates, ascending.
    pub active: Vec<usize>,
    /// `-X'(y - X beta)`, nonnegative at the solution.
    pub dual: DVector<f64>,
    pub iterations: usize,
}

/// Non-negative least squares by the Lawson-Hanson active-set method.
pub fn nnls(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<NnlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let max_iter = 10 * p;
    let tol = 1e-12 * max_abs(&x.tr_mul(y)).max(1.0);
    let mut passive = vec![false; p];
    let mut beta = DVector::zeros(p);
    let mut iterations = 0;
    loop {
        let w = x.tr_mul(&(y - x * &beta));
        let cand = (0..p).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = cand else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::NotConverged { iterations, residual: w[j] });
        }
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            let s = DampedLs::new(select_columns(x, &idx), 0.0)?.fit(y);
            if s.iter().all(|v| *v > 0.0) {
                beta.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    beta[i] = s[k];
                }
                break;
            }
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::NotConverged { iterations, residual: f64::NAN });
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = idx[0];
            for (k, &i) in idx.iter().enumerate() {
                if s[k] <= 0.0 {
                    let a = beta[i] / (beta[i] - s[k]);
                    if a < alpha {
                        alpha = a;
                        blocking = i;
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                beta[i] += alpha * (s[k] - beta[i]);
                if beta[i] <= 0.0 || i == blocking {
                    beta[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    let active: Vec<usize> = (0..p).filter(|&i| beta[i] > 0.0).collect();
    let dual = -x.tr_mul(&(y - x * &beta));
    Ok(NnlsFit { beta, active, dual, iterations })
}

/// Marginal screening to `k` variables followed by a lasso on the
/// screened columns. Lasso indices in `lasso_active` refer to the
/// original design.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenLassoFit {
    pub screen: ScreenFit,
    pub lasso: LassoFit,
    pub lasso_active: Vec<usize>,
}

pub fn screen_then_lasso(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, lambda: f64) -> Result<ScreenLassoFit> {
    let screen = marginal_screen(x, y, k)?;
    let xs = select_columns(x, &screen.active);
    let lasso = lasso(&xs, y, lambda)?;
    let lasso_active = lasso.active.iter().map(|&j| screen.active[j]).collect();
    Ok(ScreenLassoFit { screen, lasso, lasso_active })
}
