//! Named simulation settings, stored as TOML files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use selinf_core::{DMatrix, DVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    PivotUniformity,
    Intervals,
    GofPaths,
    PathFwer,
    FullModelFdr,
    KnockoffFdr,
    Blackbox,
    Sigma,
    EventOracle,
}

/// How `amplitude` maps to a coefficient on the unit-norm columns of
/// the generated design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeScale {
    /// Coefficient on columns with unit-variance entries (norm `sqrt(n)`).
    #[default]
    UnitVariance,
    UnitNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub description: String,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub signals: usize,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub amplitude_scale: AmplitudeScale,
    #[serde(default = "one")]
    pub sigma2: f64,
    pub lambda: Option<f64>,
    /// `[largest, smallest]`, filled log-uniformly with `n_lambdas` values.
    pub lambda_range: Option<[f64; 2]>,
    #[serde(default = "ten")]
    pub n_lambdas: usize,
    /// Read `lambda_range` as fractions of `max_j |x_j'y|` for a pilot
    /// response drawn independently of the analysed one.
    #[serde(default)]
    pub relative_lambdas: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draw a fresh design for every replication instead of one per scenario.
    #[serde(default)]
    pub fresh_design: bool,
    #[serde(default)]
    pub plus: bool,
    #[serde(default)]
    pub minimal: bool,
    #[serde(default)]
    pub grid_points: Vec<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub negatives: usize,
    #[serde(default)]
    pub sigma_samples: Option<usize>,
    #[serde(default)]
    pub sigma_burn_in: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.reps == 0 {
            return Err(Error::InvalidInput(format!("{}: n, p and reps must be positive", self.name)));
        }
        if self.signals > self.p {
            return Err(Error::InvalidInput(format!("{}: more signals than columns", self.name)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!("{}: sigma2 must be positive", self.name)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("{}: alpha must lie in (0, 1)", self.name)));
        }
        if let Some([hi, lo]) = self.lambda_range {
            if !(hi > lo && lo > 0.0) || self.n_lambdas < 1 || (self.relative_lambdas && hi > 1.0) {
                return Err(Error::InvalidInput(format!("{}: lambda_range must be [largest, smallest] > 0", self.name)));
            }
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Result<Vec<f64>> {
        match (self.lambda_range, self.lambda) {
            (Some([hi, lo]), _) => {
                let m = self.n_lambdas;
                if m == 1 {
                    return Ok(vec![hi]);
                }
                let step = (lo / hi).ln() / (m - 1) as f64;
                Ok((0..m).map(|i| hi * (step * i as f64).exp()).collect())
            }
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => Err(Error::InvalidInput(format!("{}: no lambda given", self.name))),
        }
    }

    /// The lambda path for design `x`; `pilot` scales a relative range.
    pub fn path_for(&self, x: &DMatrix<f64>, pilot: &DVector<f64>) -> Result<Vec<f64>> {
        let l = self.lambdas()?;
        if !self.relative_lambdas {
            return Ok(l);
        }
        let top = x.tr_mul(pilot).amax();
        Ok(l.into_iter().map(|f| f * top).collect())
    }

    pub fn lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::InvalidInput(format!("{}: no lambda given", self.name)))
    }

    /// Coefficient vector: the first `signals` entries carry the amplitude.
    pub fn beta(&self) -> DVector<f64> {
        let scale = match self.amplitude_scale {
            AmplitudeScale::UnitVariance => (self.n as f64).sqrt(),
            AmplitudeScale::UnitNorm => 1.0,
        };
        DVector::from_fn(self.p, |j, _| if j < self.signals { self.amplitude * scale } else { 0.0 })
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.signals).collect()
    }

    pub fn mean(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * self.beta()
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("pivot-uniformity", include_str!("../scenarios/pivot-uniformity.toml")),
    ("intervals-coverage", include_str!("../scenarios/intervals-coverage.toml")),
    ("intervals-coverage-wide", include_str!("../scenarios/intervals-coverage-wide.toml")),
    ("fcr", include_str!("../scenarios/fcr.toml")),
    ("gof-uncorrelated", include_str!("../scenarios/gof-uncorrelated.toml")),
    ("gof-correlated", include_str!("../scenarios/gof-correlated.toml")),
    ("path-fwer-null", include_str!("../scenarios/path-fwer-null.toml")),
    ("full-model-fdr", include_str!("../scenarios/full-model-fdr.toml")),
    ("knockoff-fdr", include_str!("../scenarios/knockoff-fdr.toml")),
    ("blackbox-ladder", include_str!("../scenarios/blackbox-ladder.toml")),
    ("sigma-truncated", include_str!("../scenarios/sigma-truncated.toml")),
    ("event-oracle", include_str!("../scenarios/event-oracle.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|b| b.0).collect()
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTIN
        .iter()
        .find(|b| b.0 == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown scenario {name:?}; built-in: {}", builtin_names().join(", "))))?;
    Scenario::from_toml(text)
}
