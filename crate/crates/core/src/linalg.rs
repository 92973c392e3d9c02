//! Small dense linear-algebra helpers built on `nalgebra`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative threshold on `|R_ii|` below which a factor is declared singular.
pub const RANK_TOL: f64 = 1e-10;

/// Least squares on `X_M` with an optional ridge term, factored once as
/// the QR decomposition of `[X_M; sqrt(gamma) I]`.
///
/// With `G = X_M'X_M + gamma I = R'R`, every quantity in the selection
/// events (`G^{-1}`, the damped projector `X_M G^{-1} X_M'`, the damped
/// pseudo-inverse `(X_M')^+ = X_M G^{-1}`) is applied through triangular
/// solves, never by forming `G^{-1}`.
#[derive(Debug, Clone)]
pub struct DampedLs {
    xm: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl DampedLs {
    pub fn new(xm: DMatrix<f64>, gamma: f64) -> Result<Self> {
        let (n, k) = xm.shape();
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("ridge parameter {gamma} must be >= 0")));
        }
        if k == 0 {
            return Ok(Self { xm, r: DMatrix::zeros(0, 0) });
        }
        let mut aug = DMatrix::zeros(n + k, k);
        aug.view_mut((0, 0), (n, k)).copy_from(&xm);
        if gamma > 0.0 {
            let g = libm::sqrt(gamma);
            for i in 0..k {
                aug[(n + i, i)] = g;
            }
        }
        let r = aug.qr().r();
        if r.nrows() < k {
            return Err(Error::RankDeficient(format!("{k} columns but only {n} rows")));
        }
        let mut max_diag = 0.0f64;
        for i in 0..k {
            max_diag = max_diag.max(libm::fabs(r[(i, i)]));
        }
        for i in 0..k {
            if libm::fabs(r[(i, i)]) <= RANK_TOL * max_diag {
                return Err(Error::RankDeficient(format!("column {i} of the selected block is (numerically) a combination of the others")));
            }
        }
        Ok(Self { xm, r })
    }

    pub fn ncols(&self) -> usize {
        self.xm.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.xm
    }

    /// `G^{-1} v`.
    pub fn solve_gram(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return DVector::zeros(0);
        }
        let w = self.r.tr_solve_upper_triangular(v).expect("nonsingular factor");
        self.r.solve_upper_triangular(&w).expect("nonsingular factor")
    }

    /// `G^{-1} B` column by column.
    pub fn solve_gram_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if self.ncols() == 0 {
            return DMatrix::zeros(0, b.ncols());
        }
        let w = self.r.tr_solve_upper_triangular(b).expect("nonsingular factor");
        self.r.solve_upper_triangular(&w).expect("nonsingular factor")
    }

    /// `G^{-1} X_M'`, the k x n map from `y` to the (damped) refit.
    pub fn coef_map(&self) -> DMatrix<f64> {
        self.solve_gram_mat(&self.xm.transpose())
    }

    /// `X_M G^{-1} v`, i.e. `(X_M')^+ v` in the undamped case.
    pub fn pinv_t(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return DVector::zeros(self.xm.nrows());
        }
        &self.xm * self.solve_gram(v)
    }

    /// `G^{-1} X_M' y`.
    pub fn fit(&self, y: &DVector<f64>) -> DVector<f64> {
        self.solve_gram(&(self.xm.tr_mul(y)))
    }

    /// `(I - X_M G^{-1} X_M') v`.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return v.clone();
        }
        v - &self.xm * self.fit(v)
    }

    /// `(I - X_M G^{-1} X_M') B`.
    pub fn residual_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if self.ncols() == 0 {
            return b.clone();
        }
        let coef = self.solve_gram_mat(&self.xm.tr_mul(b));
        b - &self.xm * coef
    }
}

pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &x.column(j));
    }
    out
}

pub fn select_rows(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(idx.len(), a.ncols());
    for (k, &i) in idx.iter().enumerate() {
        out.set_row(k, &a.row(i));
    }
    out
}

/// Indices of `0..p` not in the sorted-or-not set `m`.
pub fn complement(p: usize, m: &[usize]) -> Vec<usize> {
    let mut mask = alloc::vec![false; p];
    for &j in m {
        mask[j] = true;
    }
    (0..p).filter(|&j| !mask[j]).collect()
}

pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut at = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((at, 0), (b.nrows(), ncols)).copy_from(*b);
        }
        at += b.nrows();
    }
    out
}

pub fn vconcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len: usize = parts.iter().map(|v| v.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for v in parts {
        out.rows_mut(at, v.len()).copy_from(*v);
        at += v.len();
    }
    out
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)))
}

#[inline]
pub fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 0.0, 1.0, 2.0, -1.0, 1.0, 1.0])
    }

    #[test]
    fn gram_solve_matches_normal_equations() {
        let x = sample();
        let ls = DampedLs::new(x.clone(), 0.7).unwrap();
        let g = x.tr_mul(&x) + DMatrix::identity(2, 2) * 0.7;
        let v = DVector::from_vec(alloc::vec![1.0, -2.0]);
        let direct = g.clone().lu().solve(&v).unwrap();
        assert_relative_eq!(ls.solve_gram(&v), direct, epsilon = 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_without_ridge() {
        let x = sample();
        let ls = DampedLs::new(x.clone(), 0.0).unwrap();
        let y = DVector::from_vec(alloc::vec![1.0, 2.0, 3.0, -1.0]);
        let r = ls.residual(&y);
        assert!(max_abs(&x.tr_mul(&r)) < 1e-12);
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let mut x = sample();
        let c = x.column(0).clone_owned();
        x.set_column(1, &c);
        assert!(matches!(DampedLs::new(x.clone(), 0.0), Err(Error::RankDeficient(_))));
        assert!(DampedLs::new(x, 0.5).is_ok());
    }

    #[test]
    fn complement_and_stack() {
        assert_eq!(complement(5, &[3, 0]), alloc::vec![1, 2, 4]);
        let a = DMatrix::from_element(1, 2, 1.0);
        let b = DMatrix::from_element(2, 2, 2.0);
        let s = vstack(&[&a, &b], 2);
        assert_eq!(s.nrows(), 3);
        assert_eq!(s[(2, 1)], 2.0);
    }
}
