//! Grid approximation of selective p-values for selectors that are only
//! available as a function `y -> outcome`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::data::Contrast;
use crate::inference::{PivotResult, SelectiveInterval, Side};
use crate::normal::log_sum_exp;
use crate::truncnorm::TruncationRegion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Half-width of the grid around `eta'y`, in units of `sd(eta'y)`.
    pub half_width_sd: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 2000, half_width_sd: 10.0 }
    }
}

/// The points of the line `y0 + t c` (`c = Sigma eta / eta'Sigma eta`)
/// where the selector reproduces the observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEvent {
    /// Accepted values of `t`, ascending; always contains the observed value.
    pub accepted: Vec<f64>,
    pub observed: f64,
    pub step: f64,
    pub evaluated: usize,
}

impl GridEvent {
    /// Accepted points widened to cells of the grid spacing and merged.
    pub fn region(&self) -> TruncationRegion {
        let h = self.step / 2.0;
        TruncationRegion::new(self.accepted.iter().map(|&t| (t - h, t + h)).collect())
    }

    /// Discrete analogue of the truncated normal CDF at the observed value.
    pub fn cdf(&self, mu: f64, sd: f64) -> f64 {
        let logw: Vec<f64> = self.accepted.iter().map(|&t| -0.5 * ((t - mu) / sd).powi(2)).collect();
        let total = log_sum_exp(logw.iter().copied());
        let below = log_sum_exp(self.accepted.iter().zip(&logw).filter(|(t, _)| **t <= self.observed).map(|(_, w)| *w));
        libm::exp(below - total).clamp(0.0, 1.0)
    }
}

/// Evaluates the selector along the line through `y` in direction
/// `Sigma eta` and keeps the grid points whose outcome is equivalent to
/// the observed one.
pub fn scan_line<O, S, E>(selector: S, equivalent: E, y: &DVector<f64>, contrast: &Contrast, grid: GridSpec) -> Result<GridEvent>
where
    S: Fn(&DVector<f64>) -> Option<O>,
    E: Fn(&O, &O) -> bool,
{
    if grid.points < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {}", grid.points)));
    }
    if !(grid.half_width_sd > 0.0) {
        return Err(Error::InvalidInput("grid half-width must be positive".into()));
    }
    let reference = selector(y).ok_or_else(|| Error::InvalidInput("selector fails at the observed response".into()))?;
    let observed = contrast.dot(y);
    let dir = contrast.direction();
    let base = y - &dir * observed;
    let half = grid.half_width_sd * contrast.sd();
    let step = 2.0 * half / (grid.points - 1) as f64;
    let mut accepted = Vec::with_capacity(grid.points + 1);
    let mut inserted = false;
    for i in 0..grid.points {
        let t = observed - half + step * i as f64;
        if !inserted && t >= observed {
            accepted.push(observed);
            inserted = true;
            if t == observed {
                continue;
            }
        }
        let point = &base + &dir * t;
        if selector(&point).is_some_and(|o| equivalent(&o, &reference)) {
            accepted.push(t);
        }
    }
    if !inserted {
        accepted.push(observed);
    }
    if accepted.len() < 2 {
        return Err(Error::InvalidInput("selector reproduces the observed outcome at no grid point besides the observed one".into()));
    }
    Ok(GridEvent { accepted, observed, step, evaluated: grid.points })
}

fn pivot_to_p(pivot: f64, side: Side) -> f64 {
    match side {
        Side::Lower => pivot,
        Side::Upper => 1.0 - pivot,
        Side::TwoSided => (2.0 * pivot.min(1.0 - pivot)).min(1.0),
    }
}

pub fn approx_pvalue<O, S, E>(
    selector: S,
    equivalent: E,
    y: &DVector<f64>,
    contrast: &Contrast,
    null_value: f64,
    grid: GridSpec,
    side: Side,
) -> Result<PivotResult>
where
    S: Fn(&DVector<f64>) -> Option<O>,
    E: Fn(&O, &O) -> bool,
{
    let ev = scan_line(selector, equivalent, y, contrast, grid)?;
    Ok(pvalue_on_grid(&ev, contrast, null_value, side))
}

pub fn pvalue_on_grid(ev: &GridEvent, contrast: &Contrast, null_value: f64, side: Side) -> PivotResult {
    let pivot = ev.cdf(null_value, contrast.sd());
    PivotResult {
        pivot,
        p_value: pivot_to_p(pivot, side),
        side,
        null_value,
        eta: contrast.clone(),
        observed: ev.observed,
        region: ev.region(),
    }
}

/// Solves `cdf(mu) = target` for the grid distribution; `cdf` decreases in `mu`.
fn invert_grid(ev: &GridEvent, sd: f64, target: f64) -> Option<f64> {
    let f = |mu: f64| ev.cdf(mu, sd) - target;
    let mut width = sd;
    let (mut lo, mut hi) = (ev.observed - width, ev.observed + width);
    let mut tries = 0;
    while !(f(lo) > 0.0 && f(hi) < 0.0) {
        width *= 2.0;
        lo = ev.observed - width;
        hi = ev.observed + width;
        tries += 1;
        if tries > 60 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn ci_on_grid(ev: &GridEvent, contrast: &Contrast, alpha: f64) -> Result<SelectiveInterval> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 0.5)")));
    }
    let sd = contrast.sd();
    let mut warning: Option<String> = None;
    let lower = invert_grid(ev, sd, 1.0 - alpha / 2.0).unwrap_or_else(|| {
        warning = Some("lower endpoint not bracketed".into());
        f64::NEG_INFINITY
    });
    let upper = invert_grid(ev, sd, alpha / 2.0).unwrap_or_else(|| {
        warning = Some("upper endpoint not bracketed".into());
        f64::INFINITY
    });
    Ok(SelectiveInterval {
        lower,
        upper,
        level: 1.0 - alpha,
        label: contrast.label.clone(),
        observed: ev.observed,
        region: ev.region(),
        warning,
    })
}

pub fn approx_ci<O, S, E>(
    selector: S,
    equivalent: E,
    y: &DVector<f64>,
    contrast: &Contrast,
    alpha: f64,
    grid: GridSpec,
) -> Result<SelectiveInterval>
where
    S: Fn(&DVector<f64>) -> Option<O>,
    E: Fn(&O, &O) -> bool,
{
    let ev = scan_line(selector, equivalent, y, contrast, grid)?;
    ci_on_grid(&ev, contrast, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Noise;
    use crate::events::lasso_event;
    use crate::inference::selective_pvalue;
    use crate::normal;
    use crate::solvers::lasso;
    use crate::SelectionEvent;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::vec::Vec;

    fn unit() -> Noise {
        Noise::isotropic(1.0).unwrap()
    }

    type Outcome = (Vec<usize>, Vec<f64>);

    fn lasso_selector(x: DMatrix<f64>, lambda: f64) -> impl Fn(&DVector<f64>) -> Option<Outcome> {
        move |y| lasso(&x, y, lambda).ok().map(|f| (f.active, f.signs))
    }

    #[test]
    fn matches_exact_pivot_on_identity_design() {
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_column_slice(&[3.0, 0.5]);
        let c = Contrast::new(DVector::from_column_slice(&[1.0, 0.0]), "e1", &unit()).unwrap();
        let exact =
            selective_pvalue(&SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap()), &c, &y, 0.0, Side::Upper).unwrap();
        let approx = approx_pvalue(lasso_selector(x, 1.0), |a, b| a == b, &y, &c, 0.0, GridSpec::default(), Side::Upper).unwrap();
        assert!((approx.p_value - exact.p_value).abs() <= 0.01, "{} vs {}", approx.p_value, exact.p_value);
    }

    #[test]
    fn accept_all_gives_discrete_normal_cdf() {
        let y = DVector::from_column_slice(&[1.2]);
        let c = Contrast::new(DVector::from_column_slice(&[1.0]), "z", &unit()).unwrap();
        let coarse =
            approx_pvalue(|_| Some(()), |_, _| true, &y, &c, 0.0, GridSpec { points: 200, half_width_sd: 10.0 }, Side::Lower).unwrap();
        let fine =
            approx_pvalue(|_| Some(()), |_, _| true, &y, &c, 0.0, GridSpec { points: 20000, half_width_sd: 10.0 }, Side::Lower).unwrap();
        let phi = normal::cdf(1.2);
        assert!((fine.pivot - phi).abs() < (coarse.pivot - phi).abs());
        assert!((fine.pivot - phi).abs() < 1e-3);
    }

    #[test]
    fn monotone_in_null_value() {
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_column_slice(&[1.7, 0.2]);
        let c = Contrast::new(DVector::from_column_slice(&[1.0, 0.0]), "e1", &unit()).unwrap();
        let ev = scan_line(lasso_selector(x, 1.0), |a, b| a == b, &y, &c, GridSpec::default()).unwrap();
        let mut last = 1.0;
        for i in 0..50 {
            let mu = -5.0 + 0.2 * i as f64;
            let r = pvalue_on_grid(&ev, &c, mu, Side::Lower);
            assert!((0.0..=1.0).contains(&r.p_value));
            assert!(r.pivot <= last + 1e-15);
            last = r.pivot;
        }
        // observed 1.7, region roughly [1, inf)
        assert!(ev.region().lower() > 0.9 && ev.region().lower() < 1.1);
    }

    #[test]
    fn inconsistent_selector_is_an_error() {
        let y = DVector::from_column_slice(&[0.0]);
        let c = Contrast::new(DVector::from_column_slice(&[1.0]), "z", &unit()).unwrap();
        let sel = |v: &DVector<f64>| Some(v[0] == 0.0);
        let r = approx_pvalue(sel, |a, b| a == b, &y, &c, 0.0, GridSpec { points: 10, half_width_sd: 1.0 }, Side::Lower);
        assert!(r.is_err());
    }

    #[test]
    fn interval_on_whole_line_is_near_z_interval() {
        let y = DVector::from_column_slice(&[2.0]);
        let c = Contrast::new(DVector::from_column_slice(&[1.0]), "z", &unit()).unwrap();
        let ci = approx_ci(|_| Some(()), |_, _| true, &y, &c, 0.1, GridSpec { points: 20001, half_width_sd: 10.0 }).unwrap();
        assert_relative_eq!(ci.lower, 2.0 - 1.644_853_626_951_472_2, epsilon = 1e-3);
        assert_relative_eq!(ci.upper, 2.0 + 1.644_853_626_951_472_2, epsilon = 1e-3);
    }
}
