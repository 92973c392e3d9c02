//! Regression data, noise models and linear contrasts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Noise covariance of `y`: either `sigma2 * I` or a general SPD matrix,
/// the latter kept alongside its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Isotropic { sigma2: f64 },
    Full { sigma: DMatrix<f64>, chol: DMatrix<f64> },
}

impl Noise {
    pub fn isotropic(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Noise::Isotropic { sigma2 })
    }

    pub fn full(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidInput("covariance must be a non-empty square matrix".into()));
        }
        let scale = sigma.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        let n = sigma.nrows();
        for i in 0..n {
            for j in 0..i {
                if libm::fabs(sigma[(i, j)] - sigma[(j, i)]) > 1e-10 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let chol = chol.l();
        Ok(Noise::Full { sigma, chol })
    }

    /// Dimension for a full covariance; `None` for the isotropic case.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Noise::Isotropic { .. } => None,
            Noise::Full { sigma, .. } => Some(sigma.nrows()),
        }
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self {
            Noise::Isotropic { sigma2 } => Some(*sigma2),
            Noise::Full { .. } => None,
        }
    }

    /// `Sigma v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Noise::Isotropic { sigma2 } => v * *sigma2,
            Noise::Full { sigma, .. } => sigma * v,
        }
    }

    /// `v' Sigma v`.
    pub fn quad(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v))
    }

    /// `L z` with `L L' = Sigma`; maps standard normals to noise draws.
    pub fn factor_apply(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Noise::Isotropic { sigma2 } => z * libm::sqrt(*sigma2),
            Noise::Full { chol, .. } => chol * z,
        }
    }

    pub fn to_matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            Noise::Isotropic { sigma2 } => DMatrix::identity(n, n) * *sigma2,
            Noise::Full { sigma, .. } => sigma.clone(),
        }
    }
}

/// Column centering and scaling applied by [`RegressionData::standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_mean: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    noise: Option<Noise>,
    names: Option<Vec<String>>,
    standardization: Option<Standardization>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!("design must be non-empty, got {n}x{p}")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design and response must be finite".into()));
        }
        for j in 0..p {
            if x.column(j).iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidInput(format!("column {j} of the design is identically zero")));
            }
        }
        warn_general_position(&x);
        Ok(Self { x, y, noise: None, names: None, standardization: None })
    }

    pub fn with_noise(mut self, noise: Noise) -> Result<Self> {
        if let Some(d) = noise.dim() {
            if d != self.n() {
                return Err(Error::DimensionMismatch { expected: self.n(), got: d });
            }
        }
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn with_sigma2(self, sigma2: f64) -> Result<Self> {
        self.with_noise(Noise::isotropic(sigma2)?)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: names.len() });
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Same design and noise, new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.len() });
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn noise(&self) -> Option<&Noise> {
        self.noise.as_ref()
    }

    /// The noise model, or an error when none was supplied.
    pub fn require_noise(&self) -> Result<&Noise> {
        self.noise.as_ref().ok_or_else(|| Error::InvalidInput("noise level not set: supply sigma or estimate it".into()))
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(n) => n[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Centers every column and rescales it to norm `sqrt(n)` (unit
    /// variance with divisor `n`); centers `y`.
    pub fn standardize(&self) -> Result<Self> {
        let (n, p) = self.x.shape();
        let nf = n as f64;
        let mut x = self.x.clone();
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let mut col = x.column_mut(j);
            let mean = col.sum() / nf;
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            let raw_scale = self.x.column(j).amax().max(libm::fabs(mean));
            if !(norm > 1e-12 * raw_scale.max(f64::MIN_POSITIVE)) || norm == 0.0 {
                return Err(Error::InvalidInput(format!("column '{}' is constant", self.name(j))));
            }
            let scale = norm / libm::sqrt(nf);
            col /= scale;
            means.push(mean);
            scales.push(scale);
        }
        let y_mean = self.y.sum() / nf;
        let y = self.y.add_scalar(-y_mean);
        Ok(Self {
            x,
            y,
            noise: self.noise.clone(),
            names: self.names.clone(),
            standardization: Some(Standardization { x_means: means, x_scales: scales, y_mean }),
        })
    }
}

fn warn_general_position(x: &DMatrix<f64>) {
    let p = x.ncols();
    if p < 2 {
        return;
    }
    let cols: Vec<DVector<f64>> = (0..p).map(|j| x.column(j).normalize()).collect();
    for i in 0..p {
        for j in (i + 1)..p {
            for s in [1.0, -1.0] {
                if cols[i].iter().zip(cols[j].iter()).all(|(a, b)| libm::fabs(a - s * b) <= 1e-10) {
                    log::warn!("columns {i} and {j} are equal up to sign; X is not in general position");
                }
            }
        }
    }
}

/// A linear functional `eta' mu` of the mean, with `eta' Sigma eta` and
/// `Sigma eta` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub eta: DVector<f64>,
    pub label: String,
    pub scale: f64,
    pub sigma_eta: DVector<f64>,
}

impl Contrast {
    pub fn new(eta: DVector<f64>, label: impl Into<String>, noise: &Noise) -> Result<Self> {
        if let Some(d) = noise.dim() {
            if d != eta.len() {
                return Err(Error::DimensionMismatch { expected: d, got: eta.len() });
            }
        }
        if eta.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput("contrast vector is identically zero".into()));
        }
        let sigma_eta = noise.apply(&eta);
        let scale = eta.dot(&sigma_eta);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidInput(format!("contrast variance must be positive, got {scale}")));
        }
        Ok(Self { eta, label: label.into(), scale, sigma_eta })
    }

    /// `Sigma eta / (eta' Sigma eta)`, the direction along which `eta' y`
    /// moves with the orthogonal part of `y` held fixed.
    pub fn direction(&self) -> DVector<f64> {
        &self.sigma_eta / self.scale
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn sd(&self) -> f64 {
        libm::sqrt(self.scale)
    }

    pub fn dot(&self, y: &DVector<f64>) -> f64 {
        self.eta.dot(y)
    }
}
