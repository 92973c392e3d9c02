//! Equi-correlated knockoffs, knockoff FDP estimates along a lasso path,
//! and selective intervals for the knockoff-selected variables.
//!
//! Path indices run with the lambda grid: `lambdas[0]` is the largest
//! lambda, `models[l]` is the union of the active sets at
//! `lambdas[0..=l]`, so the models grow with `l`. The stopping rule picks
//! the largest model whose FDP estimate is at most `alpha`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::blackbox::{ci_on_grid, scan_line, GridSpec};
use crate::data::Noise;
use crate::events::{lasso_event, union_over_signs, SelectionEvent};
use crate::inference::{ci_on_region, coef_contrast, truncation_interval_all, SelectiveInterval};
use crate::solvers::elastic_net_warm;
use crate::{Error, Result, SIGN_UNION_CAP};

/// Smallest admissible eigenvalue of the normalized Gram matrix.
pub const LAMBDA_MIN_FLOOR: f64 = 1e-10;

/// `s = min(2 lambda_min (1 - EQUI_MARGIN), 1)`: the margin keeps
/// `[X, X_tilde]` of full column rank, which the lasso refits need.
pub const EQUI_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Knockoffs {
    pub x_tilde: DMatrix<f64>,
    /// `X'X - X'X_tilde = s diag(|x_j|^2)`.
    pub s: f64,
}

/// `X_tilde = X (I - S G^{-1}) + U C` with `C'C = 2S - S G^{-1} S`,
/// `S = s I` on the column-normalized design and `U` orthonormal and
/// orthogonal to `col(X)`.
pub fn equi_knockoffs(x: &DMatrix<f64>) -> Result<Knockoffs> {
    let (n, p) = x.shape();
    if n < 2 * p {
        return Err(Error::InvalidInput(format!("knockoffs need n >= 2p (n = {n}, p = {p})")));
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("zero column".into()));
    }
    let mut xn = x.clone();
    for (j, &v) in norms.iter().enumerate() {
        xn.column_mut(j).unscale_mut(v);
    }
    let gram = xn.tr_mul(&xn);
    let eig = gram.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.min();
    if !(lambda_min > LAMBDA_MIN_FLOOR) {
        return Err(Error::NotPositiveDefinite);
    }
    let s = (2.0 * lambda_min * (1.0 - EQUI_MARGIN)).min(1.0);
    let inv_eigs = eig.eigenvalues.map(|l| 1.0 / l);
    let gram_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_eigs) * eig.eigenvectors.transpose();
    // C = sqrt(2 s I - s^2 G^{-1}), sharing eigenvectors with G
    let c_eigs = eig.eigenvalues.map(|l| libm::sqrt((2.0 * s - s * s / l).max(0.0)));
    let c = &eig.eigenvectors * DMatrix::from_diagonal(&c_eigs) * eig.eigenvectors.transpose();
    let mut aug = DMatrix::zeros(n, p + n);
    aug.columns_mut(0, p).copy_from(&xn);
    aug.columns_mut(p, n).copy_from(&DMatrix::identity(n, n));
    let q = aug.qr().q();
    let u = q.columns(p, p).into_owned();
    let shrink = DMatrix::identity(p, p) - &gram_inv * s;
    let mut x_tilde = &xn * shrink + u * c;
    for (j, &v) in norms.iter().enumerate() {
        x_tilde.column_mut(j).scale_mut(v);
    }
    Ok(Knockoffs { x_tilde, s })
}

/// `(|M & knockoffs| / max(|M & real|, 1), |M & knockoffs| / (max(|M & real|, 1) + 1))`;
/// indices below `p` are real variables, the rest knockoffs.
pub fn fdp_estimates(model: &[usize], p: usize) -> (f64, f64) {
    let real = model.iter().filter(|&&j| j < p).count();
    let fake = model.len() - real;
    let denom = real.max(1) as f64;
    (fake as f64 / denom, fake as f64 / (denom + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffState {
    pub x_tilde: DMatrix<f64>,
    pub s: f64,
    pub lambdas: Vec<f64>,
    /// Lasso active sets on `[X, X_tilde]`, one per lambda.
    pub active_sets: Vec<Vec<usize>>,
    pub signs: Vec<Vec<f64>>,
    /// Cumulative unions of the active sets (sorted).
    pub models: Vec<Vec<usize>>,
    /// First path index at which `x_j` (resp. its knockoff) enters.
    pub entry: Vec<Option<usize>>,
    pub entry_tilde: Vec<Option<usize>>,
    /// `k - entry` with the sign of whichever of the pair entered first;
    /// 0 for pairs that never enter or enter together.
    pub w: Vec<f64>,
    pub fdp_curve: Vec<f64>,
    pub fdp_plus_curve: Vec<f64>,
    pub t: Option<usize>,
    pub t_plus: Option<usize>,
    pub plus: bool,
    pub alpha: f64,
    /// Real variables in the chosen model, ascending.
    pub selected: Vec<usize>,
}

impl KnockoffState {
    pub fn stop(&self) -> Option<usize> {
        if self.plus {
            self.t_plus
        } else {
            self.t
        }
    }

    /// FDP estimate read off the `W` statistics at path index `l`.
    pub fn fdp_w(&self, l: usize) -> f64 {
        let t = (self.lambdas.len() - l) as f64;
        let neg = self.w.iter().filter(|&&w| w <= -t).count();
        let pos = self.w.iter().filter(|&&w| w >= t).count();
        neg as f64 / pos.max(1) as f64
    }

    /// `models[l]` with each pair reduced to the member that entered
    /// first, and pairs that entered together removed.
    pub fn collapsed_model(&self, l: usize) -> Vec<usize> {
        let p = self.entry.len();
        let mut out = Vec::new();
        for j in 0..p {
            match (self.entry[j], self.entry_tilde[j]) {
                (Some(a), b) if a <= l && b.is_none_or(|b| a < b) => out.push(j),
                (a, Some(b)) if b <= l && a.is_none_or(|a| b < a) => out.push(p + j),
                _ => {}
            }
        }
        out
    }
}

fn last_satisfying(curve: &[f64], alpha: f64) -> Option<usize> {
    (0..curve.len()).rev().find(|&l| curve[l] <= alpha)
}

fn check_path(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty lambda path".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("lambdas must be positive".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("lambdas must be strictly decreasing".into()));
    }
    Ok(())
}

fn run_path(aug: &DMatrix<f64>, ko: &Knockoffs, y: &DVector<f64>, lambdas: &[f64], alpha: f64, plus: bool) -> Result<KnockoffState> {
    let p = aug.ncols() / 2;
    let k = lambdas.len();
    let mut active_sets = Vec::with_capacity(k);
    let mut signs = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    let mut entry_all: Vec<Option<usize>> = vec![None; 2 * p];
    let mut warm: Option<DVector<f64>> = None;
    let mut current: Vec<usize> = Vec::new();
    for (l, &lambda) in lambdas.iter().enumerate() {
        let fit = elastic_net_warm(aug, y, lambda, 0.0, warm.as_ref())?;
        for &j in &fit.active {
            if entry_all[j].is_none() {
                entry_all[j] = Some(l);
                current.push(j);
            }
        }
        current.sort_unstable();
        models.push(current.clone());
        warm = Some(fit.beta);
        active_sets.push(fit.active);
        signs.push(fit.signs);
    }
    let entry: Vec<Option<usize>> = entry_all[..p].to_vec();
    let entry_tilde: Vec<Option<usize>> = entry_all[p..].to_vec();
    let w = (0..p)
        .map(|j| match (entry[j], entry_tilde[j]) {
            (Some(a), b) if b.is_none_or(|b| a < b) => (k - a) as f64,
            (a, Some(b)) if a.is_none_or(|a| b < a) => -((k - b) as f64),
            _ => 0.0,
        })
        .collect();
    let (fdp_curve, fdp_plus_curve): (Vec<f64>, Vec<f64>) = models.iter().map(|m| fdp_estimates(m, p)).unzip();
    let t = last_satisfying(&fdp_curve, alpha);
    let t_plus = last_satisfying(&fdp_plus_curve, alpha);
    let stop = if plus { t_plus } else { t };
    let selected = stop.map(|l| models[l].iter().copied().filter(|&j| j < p).collect()).unwrap_or_default();
    Ok(KnockoffState {
        x_tilde: ko.x_tilde.clone(),
        s: ko.s,
        lambdas: lambdas.to_vec(),
        active_sets,
        signs,
        models,
        entry,
        entry_tilde,
        w,
        fdp_curve,
        fdp_plus_curve,
        t,
        t_plus,
        plus,
        alpha,
        selected,
    })
}

fn augmented(x: &DMatrix<f64>, x_tilde: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut aug = DMatrix::zeros(n, 2 * p);
    aug.columns_mut(0, p).copy_from(x);
    aug.columns_mut(p, p).copy_from(x_tilde);
    aug
}

/// Lasso on `[X, X_tilde]` over `lambdas` (decreasing) followed by the
/// knockoff stopping rule (`FDP+` when `plus`).
pub fn knockoff_select(x: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64], alpha: f64, plus: bool) -> Result<KnockoffState> {
    check_path(lambdas)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    let ko = equi_knockoffs(x)?;
    let aug = augmented(x, &ko.x_tilde);
    run_path(&aug, &ko, y, lambdas, alpha, plus)
}

/// The path event: for every lambda, the set of responses giving the same
/// lasso active set on the augmented design (a union over sign patterns,
/// or the observed signs alone when the active set exceeds the cap).
pub fn path_events(x: &DMatrix<f64>, state: &KnockoffState) -> Result<Vec<SelectionEvent>> {
    let aug = augmented(x, &state.x_tilde);
    state
        .lambdas
        .iter()
        .zip(state.active_sets.iter().zip(&state.signs))
        .map(|(&lambda, (active, signs))| {
            if active.len() <= SIGN_UNION_CAP {
                union_over_signs(&aug, active, lambda, false)
            } else {
                log::warn!("active set of size {} exceeds the sign-union cap; conditioning on signs too", active.len());
                Ok(SelectionEvent::Single(lasso_event(&aug, active, signs, lambda)?))
            }
        })
        .collect()
}

/// Selective intervals for the submodel coefficients of the selected
/// variables, conditioning on the active sets along the whole path.
pub fn knockoff_ci(x: &DMatrix<f64>, y: &DVector<f64>, noise: &Noise, state: &KnockoffState, alpha: f64) -> Result<Vec<SelectiveInterval>> {
    if state.selected.is_empty() {
        return Ok(Vec::new());
    }
    let events = path_events(x, state)?;
    state
        .selected
        .iter()
        .map(|&j| {
            let c = coef_contrast(x, &state.selected, j, noise)?;
            let t = truncation_interval_all(&events, &c, y)?;
            ci_on_region(&t.region, &c, y, alpha)
        })
        .collect()
}

/// Grid-approximated intervals conditioning only on `j` being selected.
pub fn knockoff_ci_blackbox(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    noise: &Noise,
    state: &KnockoffState,
    alpha: f64,
    grid: GridSpec,
) -> Result<Vec<SelectiveInterval>> {
    let aug = augmented(x, &state.x_tilde);
    let ko = Knockoffs { x_tilde: state.x_tilde.clone(), s: state.s };
    state
        .selected
        .iter()
        .map(|&j| {
            let c = coef_contrast(x, &state.selected, j, noise)?;
            let selector =
                |v: &DVector<f64>| run_path(&aug, &ko, v, &state.lambdas, state.alpha, state.plus).ok().map(|s| s.selected.contains(&j));
            let ev = scan_line(selector, |a, b| a == b, y, &c, grid)?;
            ci_on_grid(&ev, &c, alpha)
        })
        .collect()
}
