//! Maximum-likelihood estimation of the noise variance from the residual,
//! treating it as a Gaussian truncated to the selection event.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::events::Polytope;
use crate::linalg::{select_columns, select_rows, DampedLs};
use crate::lp::chebyshev_center;
use crate::normal::truncated_standard_draw;
use crate::{Error, Result, FEAS_TOL};

/// Uniform in the open interval (0, 1).
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Coordinate-wise Gibbs sampler for `N(mean, sigma2 I)` restricted to
/// `{z : A z <= b}`. The chain starts at the Chebyshev center.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    start: DVector<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(poly: &'a Polytope) -> Result<Self> {
        Self::from_parts(&poly.a, &poly.b)
    }

    pub fn from_parts(a: &'a DMatrix<f64>, b: &'a DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        let start = if a.nrows() == 0 {
            DVector::zeros(n)
        } else {
            let (center, radius) = chebyshev_center(a, b, 1.0).ok_or(Error::Infeasible)?;
            if !(radius > 0.0) {
                return Err(Error::Infeasible);
            }
            center
        };
        Ok(Self { a, b, start })
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    /// Runs `burn_in + n_samples` sweeps and calls `visit` on every state
    /// after burn-in. The same seed reproduces the same uniforms, so runs
    /// at different `sigma2` share their random numbers.
    pub fn run(
        &self,
        mean: &DVector<f64>,
        sigma2: f64,
        n_samples: usize,
        burn_in: usize,
        seed: u64,
        mut visit: impl FnMut(&DVector<f64>),
    ) -> Result<()> {
        let n = self.start.len();
        if mean.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mean.len() });
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma2 = {sigma2} must be positive")));
        }
        let sd = libm::sqrt(sigma2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = self.start.clone();
        let mut slack = self.b - self.a * &z;
        let m = self.a.nrows();
        for sweep in 0..burn_in + n_samples {
            if sweep % 64 == 63 {
                slack = self.b - self.a * &z;
            }
            for i in 0..n {
                let u = open_uniform(&mut rng);
                let col = self.a.column(i);
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for j in 0..m {
                    let aji = col[j];
                    if aji > 1e-14 {
                        hi = hi.min(z[i] + slack[j].max(0.0) / aji);
                    } else if aji < -1e-14 {
                        lo = lo.max(z[i] + slack[j].max(0.0) / aji);
                    }
                }
                if !(lo < hi) {
                    continue;
                }
                let std_lo = (lo - mean[i]) / sd;
                let std_hi = (hi - mean[i]) / sd;
                let new = (mean[i] + sd * truncated_standard_draw(std_lo, std_hi, u)).clamp(lo, hi);
                let delta = new - z[i];
                if delta != 0.0 {
                    for j in 0..m {
                        slack[j] -= col[j] * delta;
                    }
                    z[i] = new;
                }
            }
            if sweep >= burn_in {
                visit(&z);
            }
        }
        Ok(())
    }
}

/// `n_samples x n` matrix of Gibbs draws.
pub fn gibbs_tmvn(poly: &Polytope, mean: &DVector<f64>, sigma2: f64, n_samples: usize, burn_in: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = GibbsSampler::new(poly)?;
    let mut out = DMatrix::zeros(n_samples, poly.dim());
    let mut row = 0;
    sampler.run(mean, sigma2, n_samples, burn_in, seed, |z| {
        out.row_mut(row).copy_from(&z.transpose());
        row += 1;
    })?;
    Ok(out)
}

/// Mean and batch-means standard error of a sequence.
fn batch_mean(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let size = n / batches;
    if size == 0 || batches < 2 {
        return (mean, f64::INFINITY);
    }
    let means: Vec<f64> = (0..batches).map(|k| values[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - mm) * (v - mm)).sum::<f64>() / (batches - 1) as f64;
    (mean, libm::sqrt(var / batches as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Draw `Z` in the orthogonal complement of `col(X_M)` rather than in
    /// all of `R^n`.
    pub project_residual: bool,
    pub max_iterations: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self { n_samples: 5000, burn_in: 1000, seed: 0, project_residual: false, max_iterations: 80 }
    }
}

pub const SCREENING_ASSUMPTION: &str = "assumes the selected model contains the true support, so the residual has mean zero";

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub sigma2_hat: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    /// `|E[|Z|^2] - RSS|` at the returned value.
    pub score_residual: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Constraint rows that involve only the residual.
    pub rows_used: usize,
    pub rss: f64,
    pub iterations: usize,
    pub note: &'static str,
}

/// Solves `E_{C, s}[|Z|^2] = |(I - P_M) y|^2` for `s`, where `Z ~ N(0, s I)`
/// is restricted to the rows of `event` that depend on `y` only through
/// the residual `(I - P_M) y`. The expectation is estimated by Gibbs
/// sampling with common random numbers, and the root by bisection in
/// `log s`.
pub fn estimate_sigma(
    event: &Polytope,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    active: &[usize],
    config: &VarianceConfig,
) -> Result<VarianceEstimate> {
    let n = x.nrows();
    if y.len() != n || event.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len().min(event.dim()) });
    }
    let ls = DampedLs::new(select_columns(x, active), 0.0)?;
    let resid = ls.residual(y);
    let rss = resid.norm_squared();
    if !(rss > 0.0) {
        return Err(Error::InvalidInput("residual is zero".into()));
    }
    let xm = ls.design();
    let xm_norm = xm.norm().max(1.0);
    let rows: Vec<usize> = (0..event.n_constraints())
        .filter(|&j| {
            let r = event.a.row(j);
            active.is_empty() || (r * xm).norm() <= 1e-9 * r.norm() * xm_norm
        })
        .collect();
    let mut a = select_rows(&event.a, &rows);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&j| event.b[j]));
    let dim = if config.project_residual {
        let basis = complement_basis(xm)?;
        a = &a * &basis;
        basis.ncols()
    } else {
        n
    };
    let base = VarianceEstimate {
        sigma2_hat: rss / dim as f64,
        n_samples: config.n_samples,
        burn_in: config.burn_in,
        score_residual: 0.0,
        tolerance: 0.0,
        seed: config.seed,
        rows_used: rows.len(),
        rss,
        iterations: 0,
        note: SCREENING_ASSUMPTION,
    };
    if rows.is_empty() {
        return Ok(base);
    }
    if config.n_samples < 20 {
        return Err(Error::InvalidInput("at least 20 samples are needed".into()));
    }
    let sampler = GibbsSampler::from_parts(&a, &b)?;
    let mean = DVector::zeros(dim);
    let mut buf = Vec::with_capacity(config.n_samples);
    let mut score = |s: f64| -> Result<(f64, f64)> {
        buf.clear();
        sampler.run(&mean, s, config.n_samples, config.burn_in, config.seed, |z| buf.push(z.norm_squared()))?;
        let (m, se) = batch_mean(&buf, 20);
        Ok((m - rss, se))
    };

    let mut iterations = 0;
    let (mut lo, mut hi) = (libm::log(base.sigma2_hat), libm::log(base.sigma2_hat));
    let (mut g_lo, se0) = score(libm::exp(lo))?;
    iterations += 1;
    if libm::fabs(g_lo) <= 2.0 * se0 {
        return Ok(VarianceEstimate { score_residual: libm::fabs(g_lo), tolerance: 2.0 * se0, iterations, ..base });
    }
    let mut g_hi = g_lo;
    // expand until the score changes sign
    while !(g_lo < 0.0 && g_hi > 0.0) {
        if iterations >= config.max_iterations {
            return Err(Error::BracketFailed { doublings: iterations });
        }
        if g_hi <= 0.0 {
            lo = hi;
            g_lo = g_hi;
            hi += core::f64::consts::LN_2;
            g_hi = score(libm::exp(hi))?.0;
        } else {
            hi = lo;
            g_hi = g_lo;
            lo -= core::f64::consts::LN_2;
            g_lo = score(libm::exp(lo))?.0;
        }
        iterations += 1;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let (g, se) = score(libm::exp(mid))?;
        iterations += 1;
        let tol = 2.0 * se;
        if libm::fabs(g) <= tol || hi - lo < 1e-10 {
            return Ok(VarianceEstimate { sigma2_hat: libm::exp(mid), score_residual: libm::fabs(g), tolerance: tol, iterations, ..base });
        }
        if iterations >= config.max_iterations {
            return Err(Error::NotConverged { iterations, residual: libm::fabs(g) });
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `col(xm)`.
fn complement_basis(xm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = xm.shape();
    if k == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut aug = DMatrix::zeros(n, k + n);
    aug.columns_mut(0, k).copy_from(xm);
    aug.columns_mut(k, n).copy_from(&DMatrix::identity(n, n));
    let q = aug.qr().q();
    if q.ncols() < n {
        return Err(Error::RankDeficient("complement basis".into()));
    }
    Ok(q.columns(k, n - k).into_owned())
}

/// Whether every row of `samples` lies in the polytope up to `FEAS_TOL`.
pub fn all_feasible(poly: &Polytope, samples: &DMatrix<f64>) -> bool {
    (0..samples.nrows()).all(|i| {
        let z = samples.row(i).transpose();
        poly.max_violation(&z) <= FEAS_TOL
    })
}
