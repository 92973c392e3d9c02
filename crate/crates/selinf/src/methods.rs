//! A uniform front over the selection procedures and their events.

use std::fmt;
use std::str::FromStr;

use selinf_core::events::{enet_event, lasso_event, ms_event, nnls_event, omp_event, screen_lasso_event, union_over_signs};
use selinf_core::linalg::{select_columns, DampedLs};
use selinf_core::solvers::{
    elastic_net, lasso, marginal_screen, nnls, omp, screen_then_lasso, LassoFit, NnlsFit, ScreenFit, ScreenLassoFit, StepwisePath,
};
use selinf_core::{DMatrix, DVector, Error, Polytope, Result, SelectionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Lasso,
    Enet,
    Screen,
    Omp,
    Nnls,
    ScreenLasso,
}

impl MethodName {
    pub const ALL: [MethodName; 6] = [Self::Lasso, Self::Enet, Self::Screen, Self::Omp, Self::Nnls, Self::ScreenLasso];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::Enet => "enet",
            Self::Screen => "screen",
            Self::Omp => "omp",
            Self::Nnls => "nnls",
            Self::ScreenLasso => "screen+lasso",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected one of lasso, enet, screen, omp, nnls, screen+lasso"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub name: MethodName,
    pub lambda: Option<f64>,
    pub gamma: f64,
    pub k: Option<usize>,
}

impl MethodSpec {
    pub fn new(name: MethodName) -> Self {
        Self { name, lambda: None, gamma: 0.0, k: None }
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    fn need_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::InvalidInput(format!("{} needs --lambda", self.name)))
    }

    fn need_k(&self) -> Result<usize> {
        self.k.ok_or_else(|| Error::InvalidInput(format!("{} needs --k", self.name)))
    }

    pub fn fit(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Fitted> {
        Ok(match self.name {
            MethodName::Lasso => Fitted::Lasso(lasso(x, y, self.need_lambda()?)?),
            MethodName::Enet => Fitted::Lasso(elastic_net(x, y, self.need_lambda()?, self.gamma)?),
            MethodName::Screen => Fitted::Screen(marginal_screen(x, y, self.need_k()?)?),
            MethodName::Omp => Fitted::Omp(omp(x, y, self.need_k()?)?),
            MethodName::Nnls => Fitted::Nnls(nnls(x, y)?),
            MethodName::ScreenLasso => Fitted::ScreenLasso(screen_then_lasso(x, y, self.need_k()?, self.need_lambda()?)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Lasso(LassoFit),
    Screen(ScreenFit),
    Omp(StepwisePath),
    Nnls(NnlsFit),
    ScreenLasso(ScreenLassoFit),
}

impl Fitted {
    /// Selected columns, ascending.
    pub fn active(&self) -> Vec<usize> {
        match self {
            Fitted::Lasso(f) => f.active.clone(),
            Fitted::Screen(f) => f.active.clone(),
            Fitted::Omp(f) => {
                let mut a = f.indices();
                a.sort_unstable();
                a
            }
            Fitted::Nnls(f) => f.active.clone(),
            Fitted::ScreenLasso(f) => f.lasso_active.clone(),
        }
    }

    pub fn signs(&self) -> Vec<f64> {
        match self {
            Fitted::Lasso(f) => f.signs.clone(),
            Fitted::Screen(f) => f.signs.clone(),
            Fitted::Omp(f) => {
                let mut s = f.steps.clone();
                s.sort_by_key(|t| t.0);
                s.into_iter().map(|t| t.1).collect()
            }
            Fitted::Nnls(f) => vec![1.0; f.active.len()],
            Fitted::ScreenLasso(f) => f.lasso.signs.clone(),
        }
    }

    /// The method's own coefficient for each selected column (least
    /// squares on the selected set for screening and OMP).
    pub fn coefs(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
        let active = self.active();
        Ok(match self {
            Fitted::Lasso(f) => active.iter().map(|&j| f.beta[j]).collect(),
            Fitted::Nnls(f) => active.iter().map(|&j| f.beta[j]).collect(),
            Fitted::ScreenLasso(f) => f.lasso.active.iter().map(|&k| f.lasso.beta[k]).collect(),
            Fitted::Screen(_) | Fitted::Omp(_) => {
                if active.is_empty() {
                    Vec::new()
                } else {
                    let ls = DampedLs::new(select_columns(x, &active), 0.0)?;
                    ls.solve_gram(&ls.design().tr_mul(y)).iter().copied().collect()
                }
            }
        })
    }

    /// Whether two fits define the same selection event.
    pub fn same_outcome(&self, other: &Fitted) -> bool {
        match (self, other) {
            (Fitted::Lasso(a), Fitted::Lasso(b)) => a.active == b.active && a.signs == b.signs,
            (Fitted::Screen(a), Fitted::Screen(b)) => a == b,
            (Fitted::Omp(a), Fitted::Omp(b)) => a.steps == b.steps,
            (Fitted::Nnls(a), Fitted::Nnls(b)) => a.active == b.active,
            (Fitted::ScreenLasso(a), Fitted::ScreenLasso(b)) => {
                a.screen == b.screen && a.lasso.active == b.lasso.active && a.lasso.signs == b.lasso.signs
            }
            _ => false,
        }
    }

    pub fn event(&self, x: &DMatrix<f64>) -> Result<Polytope> {
        match self {
            Fitted::Lasso(f) if f.gamma == 0.0 => lasso_event(x, &f.active, &f.signs, f.lambda),
            Fitted::Lasso(f) => enet_event(x, &f.active, &f.signs, f.lambda, f.gamma),
            Fitted::Screen(f) => ms_event(x, &f.active, &f.signs),
            Fitted::Omp(f) => omp_event(x, f),
            Fitted::Nnls(f) => nnls_event(x, &f.active),
            Fitted::ScreenLasso(f) => screen_lasso_event(x, f),
        }
    }

    /// Conditioning on the active set only (lasso), or the signed event.
    pub fn conditioning(&self, x: &DMatrix<f64>, minimal: bool) -> Result<SelectionEvent> {
        match self {
            Fitted::Lasso(f) if minimal && f.gamma == 0.0 => union_over_signs(x, &f.active, f.lambda, true),
            _ if minimal => Err(Error::Unsupported("sign-union conditioning is available for the lasso only".into())),
            _ => Ok(SelectionEvent::Single(self.event(x)?)),
        }
    }
}
