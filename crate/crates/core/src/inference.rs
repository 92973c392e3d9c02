//! Truncation bounds, selective pivots, p-values and confidence intervals.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::data::{Contrast, Noise, RegressionData};
use crate::events::{gof_event, gof_refine, intersect, lasso_event, Polytope, SelectionEvent};
use crate::linalg::{select_columns, DampedLs};
use crate::solvers::{elastic_net_warm, lasso};
use crate::truncnorm::{invert_mu, log_masses, tn_cdf, tn_sf, TruncationRegion, LOG_MASS_FLOOR};
use crate::{Error, Result, FEAS_TOL};

/// Largest tolerated `V- - V+` before the bounds are declared inconsistent.
pub const BOUND_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationResult {
    pub v_minus: f64,
    pub v_plus: f64,
    pub v_zero: f64,
    /// `A Sigma eta / (eta' Sigma eta)`, stacked over member polytopes.
    pub alpha_vec: DVector<f64>,
    pub region: TruncationRegion,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotResult {
    pub pivot: f64,
    pub p_value: f64,
    pub side: Side,
    pub null_value: f64,
    pub eta: Contrast,
    pub observed: f64,
    pub region: TruncationRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub label: String,
    pub observed: f64,
    pub region: TruncationRegion,
    /// Set when an endpoint could not be bracketed and was made infinite.
    pub warning: Option<String>,
}

impl SelectiveInterval {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

struct LineBounds {
    v_minus: f64,
    v_plus: f64,
    v_zero: f64,
    alpha: DVector<f64>,
    violation: f64,
}

/// Bounds of `{t : y + (t - eta'y) c in P}` with `c = Sigma eta / eta'Sigma eta`.
fn line_bounds(poly: &Polytope, contrast: &Contrast, y: &DVector<f64>) -> LineBounds {
    let c = contrast.direction();
    let z = contrast.dot(y);
    let m = poly.n_constraints();
    if m == 0 {
        return LineBounds {
            v_minus: f64::NEG_INFINITY,
            v_plus: f64::INFINITY,
            v_zero: f64::INFINITY,
            alpha: DVector::zeros(0),
            violation: f64::NEG_INFINITY,
        };
    }
    let alpha = &poly.a * &c;
    let slack = &poly.b - &poly.a * y;
    let c_norm = c.norm();
    let (mut lo, mut hi, mut zero) = (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
    let mut violation = f64::NEG_INFINITY;
    for j in 0..m {
        violation = violation.max(-slack[j]);
        let aj = alpha[j];
        if libm::fabs(aj) <= 1e-12 * poly.a.row(j).norm() * c_norm {
            zero = zero.min(slack[j]);
        } else if aj > 0.0 {
            hi = hi.min(z + slack[j] / aj);
        } else {
            lo = lo.max(z + slack[j] / aj);
        }
    }
    LineBounds { v_minus: lo, v_plus: hi, v_zero: zero, alpha, violation }
}

/// The truncation set of `eta'y` given the event and the part of `y`
/// orthogonal to `eta` (in the `Sigma` geometry).
pub fn truncation_interval(event: &SelectionEvent, contrast: &Contrast, y: &DVector<f64>) -> Result<TruncationResult> {
    let observed = contrast.dot(y);
    match event {
        SelectionEvent::Single(poly) => {
            let lb = line_bounds(poly, contrast, y);
            if lb.violation > FEAS_TOL {
                return Err(Error::NotInEvent { violation: lb.violation });
            }
            if lb.v_zero < -FEAS_TOL {
                return Err(Error::NotInEvent { violation: -lb.v_zero });
            }
            if lb.v_plus < lb.v_minus - BOUND_TOL {
                return Err(Error::InconsistentBounds { v_minus: lb.v_minus, v_plus: lb.v_plus });
            }
            Ok(TruncationResult {
                v_minus: lb.v_minus,
                v_plus: lb.v_plus,
                v_zero: lb.v_zero,
                alpha_vec: lb.alpha,
                region: TruncationRegion::interval(lb.v_minus, lb.v_plus),
                observed,
            })
        }
        SelectionEvent::Union(members) => {
            let mut pieces = Vec::with_capacity(members.len());
            let mut alphas: Vec<f64> = Vec::new();
            let mut own: Option<LineBounds> = None;
            for poly in members {
                let lb = line_bounds(poly, contrast, y);
                alphas.extend(lb.alpha.iter());
                let inside = lb.violation <= FEAS_TOL;
                if lb.v_zero >= -FEAS_TOL && lb.v_minus < lb.v_plus {
                    pieces.push((lb.v_minus, lb.v_plus));
                }
                if inside && own.is_none() {
                    own = Some(lb);
                }
            }
            let Some(lb) = own else {
                let v = members.iter().map(|p| p.max_violation(y)).fold(f64::INFINITY, f64::min);
                return Err(Error::NotInEvent { violation: v });
            };
            if lb.v_plus < lb.v_minus - BOUND_TOL {
                return Err(Error::InconsistentBounds { v_minus: lb.v_minus, v_plus: lb.v_plus });
            }
            Ok(TruncationResult {
                v_minus: lb.v_minus,
                v_plus: lb.v_plus,
                v_zero: lb.v_zero,
                alpha_vec: DVector::from_vec(alphas),
                region: TruncationRegion::new(pieces),
                observed,
            })
        }
        SelectionEvent::Blackbox(_) => {
            Err(Error::Unsupported("selector-defined events have no closed form; use the grid approximation".into()))
        }
    }
}

/// Truncation set for the intersection of several events: the
/// intersection of their individual truncation sets.
pub fn truncation_interval_all(events: &[SelectionEvent], contrast: &Contrast, y: &DVector<f64>) -> Result<TruncationResult> {
    let mut iter = events.iter();
    let first = iter.next().ok_or_else(|| Error::InvalidInput("no events".into()))?;
    let mut acc = truncation_interval(first, contrast, y)?;
    for e in iter {
        let t = truncation_interval(e, contrast, y)?;
        acc.region = acc.region.intersect(&t.region);
        acc.v_minus = acc.v_minus.max(t.v_minus);
        acc.v_plus = acc.v_plus.min(t.v_plus);
        acc.v_zero = acc.v_zero.min(t.v_zero);
        acc.alpha_vec = crate::linalg::vconcat(&[&acc.alpha_vec, &t.alpha_vec]);
    }
    Ok(acc)
}

/// Pivot and p-value of `eta'y` on a known truncation region.
pub fn pivot_on_region(
    region: &TruncationRegion,
    contrast: &Contrast,
    y: &DVector<f64>,
    null_value: f64,
    side: Side,
) -> Result<PivotResult> {
    let observed = contrast.dot(y);
    let pivot = tn_cdf(observed, null_value, contrast.scale, region)?;
    let upper = tn_sf(observed, null_value, contrast.scale, region)?;
    let p_value = match side {
        Side::Lower => pivot,
        Side::Upper => upper,
        Side::TwoSided => (2.0 * pivot.min(upper)).min(1.0),
    };
    Ok(PivotResult { pivot, p_value, side, null_value, eta: contrast.clone(), observed, region: region.clone() })
}

pub fn selective_pvalue(event: &SelectionEvent, contrast: &Contrast, y: &DVector<f64>, null_value: f64, side: Side) -> Result<PivotResult> {
    let t = truncation_interval(event, contrast, y)?;
    pivot_on_region(&t.region, contrast, y, null_value, side)
}

/// `eta_j = (X_M')^+ e_j`, so that `eta_j' y` is the OLS coefficient of
/// column `j` in the regression of `y` on `X_M`.
pub fn coef_contrast(x: &DMatrix<f64>, active: &[usize], j: usize, noise: &Noise) -> Result<Contrast> {
    let k = active.iter().position(|&a| a == j).ok_or_else(|| Error::InvalidInput(format!("column {j} is not in the model")))?;
    let ls = DampedLs::new(select_columns(x, active), 0.0)?;
    let mut e = DVector::zeros(active.len());
    e[k] = 1.0;
    Contrast::new(ls.pinv_t(&e), format!("coef {j} in M"), noise)
}

/// Equal-tailed interval on a known truncation region.
pub fn ci_on_region(region: &TruncationRegion, contrast: &Contrast, y: &DVector<f64>, alpha: f64) -> Result<SelectiveInterval> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 0.5)")));
    }
    let observed = contrast.dot(y);
    if region.is_empty() {
        return Err(Error::DegenerateRegion { log_mass: f64::NEG_INFINITY });
    }
    let mut warning = None;
    let lower = match invert_mu(observed, contrast.scale, region, 1.0 - alpha / 2.0) {
        Ok(v) => v,
        Err(Error::BracketFailed { doublings }) => {
            warning = Some(format!("lower endpoint not bracketed after {doublings} doublings"));
            f64::NEG_INFINITY
        }
        Err(e) => return Err(e),
    };
    let upper = match invert_mu(observed, contrast.scale, region, alpha / 2.0) {
        Ok(v) => v,
        Err(Error::BracketFailed { doublings }) => {
            warning = Some(format!("upper endpoint not bracketed after {doublings} doublings"));
            f64::INFINITY
        }
        Err(e) => return Err(e),
    };
    Ok(SelectiveInterval { lower, upper, level: 1.0 - alpha, label: contrast.label.clone(), observed, region: region.clone(), warning })
}

pub fn selective_ci(event: &SelectionEvent, contrast: &Contrast, y: &DVector<f64>, alpha: f64) -> Result<SelectiveInterval> {
    let t = truncation_interval(event, contrast, y)?;
    ci_on_region(&t.region, contrast, y, alpha)
}

/// One interval per selected coefficient, all on the same event.
pub fn fcr_batch(event: &SelectionEvent, x: &DMatrix<f64>, y: &DVector<f64>, noise: &Noise, alpha: f64) -> Result<Vec<SelectiveInterval>> {
    let meta = event.meta().ok_or_else(|| Error::InvalidInput("event carries no model".into()))?;
    let active = meta.active.clone();
    active
        .iter()
        .map(|&j| {
            let c = coef_contrast(x, &active, j, noise)?;
            selective_ci(event, &c, y, alpha)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofTest {
    pub result: PivotResult,
    /// Column of `X` with the largest partial correlation.
    pub j_star: usize,
    pub s_star: f64,
    pub reject: bool,
    pub n_constraints: usize,
}

/// Goodness-of-fit test of `X_{-M}'(I - P_M) mu = 0`: upper-tail pivot of
/// the largest signed partial correlation on the refined lasso event.
pub fn gof_test(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    active: &[usize],
    signs: &[f64],
    lambda: f64,
    noise: &Noise,
    alpha: f64,
) -> Result<GofTest> {
    let g = gof_event(x, active, signs, lambda, y)?;
    finish_gof(g, y, noise, alpha)
}

fn finish_gof(g: crate::events::GofEvent, y: &DVector<f64>, noise: &Noise, alpha: f64) -> Result<GofTest> {
    let contrast = Contrast::new(g.eta.clone(), format!("gof column {}", g.signed_max.column), noise)?;
    let n_constraints = g.polytope.n_constraints();
    let event = SelectionEvent::Single(g.polytope);
    let result = selective_pvalue(&event, &contrast, y, 0.0, Side::Upper)?;
    let reject = result.pivot > 1.0 - alpha;
    Ok(GofTest { result, j_star: g.signed_max.column, s_star: g.signed_max.s_star, reject, n_constraints })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTest {
    pub result: PivotResult,
    pub reject: bool,
}

/// One-sided test of `|eta'mu| <= delta0`, evaluated at the boundary
/// `eta'mu = delta0`.
pub fn composite_test(event: &SelectionEvent, contrast: &Contrast, y: &DVector<f64>, delta0: f64, alpha: f64) -> Result<CompositeTest> {
    if !(delta0 >= 0.0) {
        return Err(Error::InvalidInput(format!("delta0 = {delta0} must be >= 0")));
    }
    let t = truncation_interval(event, contrast, y)?;
    let observed = contrast.dot(y);
    let (lower, upper, total) = log_masses(observed, delta0, contrast.scale, &t.region);
    if total < LOG_MASS_FLOOR {
        // the boundary mean sits far from the region; the pivot is 0 or 1
        let pivot = if lower >= upper { 1.0 } else { 0.0 };
        let result = PivotResult {
            pivot,
            p_value: 1.0 - pivot,
            side: Side::Upper,
            null_value: delta0,
            eta: contrast.clone(),
            observed,
            region: t.region,
        };
        return Ok(CompositeTest { reject: pivot > 1.0 - alpha, result });
    }
    let result = pivot_on_region(&t.region, contrast, y, delta0, Side::Upper)?;
    Ok(CompositeTest { reject: result.pivot > 1.0 - alpha, result })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub lambda: f64,
    pub active: Vec<usize>,
    pub signs: Vec<f64>,
    /// `None` when the test was skipped (empty or full active set).
    pub test: Option<GofTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub steps: Vec<PathStep>,
    /// Lasso events stacked over all visited lambdas.
    pub polytope: Polytope,
    /// Index of the first non-rejected test; `None` if every test rejected.
    pub stop: Option<usize>,
}

impl PathState {
    pub fn any_rejection(&self) -> bool {
        self.steps.iter().any(|s| s.test.as_ref().is_some_and(|t| t.reject))
    }

    /// Active set at the stop index (the last model before it if the test
    /// at `stop` accepted, so the chosen model is the one that fit).
    pub fn selected_model(&self) -> Option<&[usize]> {
        let stop = self.stop?;
        Some(&self.steps[stop].active)
    }
}

/// Sequential goodness-of-fit tests along a decreasing lambda path,
/// conditioning each on all lasso events visited so far; stops at the
/// first non-rejection.
pub fn path_fwer(data: &RegressionData, lambdas: &[f64], alpha: f64) -> Result<PathState> {
    let noise = data.require_noise()?;
    let (x, y) = (data.x(), data.y());
    let (n, p) = x.shape();
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty lambda path".into()));
    }
    for w in lambdas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidInput("lambdas must be strictly decreasing".into()));
        }
    }
    let mut steps = Vec::with_capacity(lambdas.len());
    let mut events: Vec<Polytope> = Vec::with_capacity(lambdas.len());
    let mut warm: Option<DVector<f64>> = None;
    let mut stop = None;
    for (i, &lambda) in lambdas.iter().enumerate() {
        let fit = elastic_net_warm(x, y, lambda, 0.0, warm.as_ref())?;
        warm = Some(fit.beta.clone());
        events.push(lasso_event(x, &fit.active, &fit.signs, lambda)?);
        let cumulative = intersect(&events)?;
        let test = if fit.active.is_empty() || fit.active.len() >= p {
            None
        } else {
            let g = gof_refine(x, &fit.active, cumulative, y, n, p)?;
            Some(finish_gof(g, y, noise, alpha)?)
        };
        let accepted = test.as_ref().is_some_and(|t| !t.reject);
        steps.push(PathStep { lambda, active: fit.active, signs: fit.signs, test });
        if accepted {
            stop = Some(i);
            break;
        }
    }
    let polytope = intersect(&events)?;
    Ok(PathState { steps, polytope, stop })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrResult {
    pub active: Vec<usize>,
    pub p_values: Vec<f64>,
    /// Rejected columns of `X`, ascending.
    pub rejected: Vec<usize>,
}

/// Benjamini-Yekutieli step-up: the number of smallest p-values rejected.
pub fn by_threshold(p_values: &[f64], alpha: f64) -> usize {
    let m = p_values.len();
    if m == 0 {
        return 0;
    }
    let h: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..=m).rev().find(|&k| sorted[k - 1] <= k as f64 * alpha / (m as f64 * h)).unwrap_or(0)
}

/// Lasso selection followed by selective two-sided tests of the
/// full-model coefficients `beta_j = 0`, `j` selected, combined with the
/// Benjamini-Yekutieli rule.
pub fn full_model_fdr(data: &RegressionData, lambda: f64, alpha: f64) -> Result<FdrResult> {
    let noise = data.require_noise()?;
    let (x, y) = (data.x(), data.y());
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::Unsupported(format!(
            "full-model inference needs n >= p (got n = {n}, p = {p}); the debiased estimator for n < p is not provided"
        )));
    }
    let all: Vec<usize> = (0..p).collect();
    let full = DampedLs::new(x.clone(), 0.0)?;
    let fit = lasso(x, y, lambda)?;
    if fit.active.is_empty() {
        return Ok(FdrResult { active: Vec::new(), p_values: Vec::new(), rejected: Vec::new() });
    }
    let event = SelectionEvent::Single(lasso_event(x, &fit.active, &fit.signs, lambda)?);
    let mut p_values = Vec::with_capacity(fit.active.len());
    for &j in &fit.active {
        let mut e = DVector::zeros(p);
        e[all[j]] = 1.0;
        let c = Contrast::new(full.pinv_t(&e), format!("full-model coef {j}"), noise)?;
        p_values.push(selective_pvalue(&event, &c, y, 0.0, Side::TwoSided)?.p_value);
    }
    let k = by_threshold(&p_values, alpha);
    let mut order: Vec<usize> = (0..p_values.len()).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut rejected: Vec<usize> = order[..k].iter().map(|&i| fit.active[i]).collect();
    rejected.sort_unstable();
    Ok(FdrResult { active: fit.active, p_values, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{union_over_signs, EventMeta, Method};
    use crate::normal;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::vec;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn unit() -> Noise {
        Noise::isotropic(1.0).unwrap()
    }

    fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn unit_box_bounds() {
        let poly = Polytope::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), v(&[1.0, 1.0]), EventMeta::new(Method::Custom)).unwrap();
        let c = Contrast::new(v(&[1.0]), "e1", &unit()).unwrap();
        let t = truncation_interval(&SelectionEvent::Single(poly), &c, &v(&[0.0])).unwrap();
        assert_eq!(t.alpha_vec, v(&[1.0, -1.0]));
        assert_eq!((t.v_minus, t.v_plus), (-1.0, 1.0));
    }

    #[test]
    fn lasso_bounds_by_hand() {
        let x = DMatrix::identity(2, 2);
        let e = SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap());
        let c = Contrast::new(v(&[1.0, 0.0]), "e1", &unit()).unwrap();
        let y = v(&[3.0, 0.5]);
        let t = truncation_interval(&e, &c, &y).unwrap();
        assert_relative_eq!(t.v_minus, 1.0, epsilon = 1e-14);
        assert_eq!(t.v_plus, f64::INFINITY);
        assert_relative_eq!(t.v_zero, 0.5, epsilon = 1e-14);
        let r = selective_pvalue(&e, &c, &y, 0.0, Side::Upper).unwrap();
        assert_relative_eq!(r.pivot, 0.991_491_627_297_679_8, max_relative = 1e-12);
        assert_relative_eq!(r.p_value, 1.0 - 0.991_491_627_297_679_8, max_relative = 1e-9);
    }

    #[test]
    fn outside_event_is_an_error() {
        let x = DMatrix::identity(2, 2);
        let e = SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap());
        let c = Contrast::new(v(&[1.0, 0.0]), "e1", &unit()).unwrap();
        assert!(matches!(truncation_interval(&e, &c, &v(&[0.5, 0.5])), Err(Error::NotInEvent { .. })));
    }

    #[test]
    fn classical_z_reductions() {
        let whole = SelectionEvent::Single(Polytope::whole_space(1));
        let c = Contrast::new(v(&[1.0]), "z", &unit()).unwrap();
        let r = selective_pvalue(&whole, &c, &v(&[1.96]), 0.0, Side::TwoSided).unwrap();
        assert_relative_eq!(r.p_value, 0.05, epsilon = 1e-4);
        let ci = selective_ci(&whole, &c, &v(&[2.0]), 0.10).unwrap();
        let q = normal::quantile(0.95);
        assert_relative_eq!(ci.lower, 2.0 - q, epsilon = 1e-7);
        assert_relative_eq!(ci.upper, 2.0 + q, epsilon = 1e-7);
        assert_relative_eq!(ci.lower, 0.355, epsilon = 1e-3);
    }

    #[test]
    fn interval_endpoints_hit_tail_targets() {
        let x = DMatrix::identity(2, 2);
        let e = SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap());
        let c = Contrast::new(v(&[1.0, 0.0]), "e1", &unit()).unwrap();
        let y = v(&[1.4, 0.2]);
        let ci = selective_ci(&e, &c, &y, 0.1).unwrap();
        assert!(ci.lower < ci.upper);
        let region = TruncationRegion::interval(1.0, f64::INFINITY);
        assert_relative_eq!(tn_cdf(1.4, ci.lower, 1.0, &region).unwrap(), 0.95, epsilon = 1e-7);
        assert_relative_eq!(tn_cdf(1.4, ci.upper, 1.0, &region).unwrap(), 0.05, epsilon = 1e-7);
    }

    #[test]
    fn invariance_along_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = gaussian(12, 5, &mut rng);
        let y = DVector::from_fn(12, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let fit = lasso(&x, &y, 1.0).unwrap();
        let e = SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, 1.0).unwrap());
        let c = coef_contrast(&x, &fit.active, fit.active[0], &unit()).unwrap();
        let base = truncation_interval(&e, &c, &y).unwrap();
        let dir = c.direction();
        let (lo, hi) = (base.v_minus - base.observed, base.v_plus - base.observed);
        let mut tried = 0;
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-3.0..3.0);
            if t <= lo || t >= hi {
                continue;
            }
            let moved = &y + &dir * t;
            let r = truncation_interval(&e, &c, &moved).unwrap();
            assert!((r.v_minus - base.v_minus).abs() <= 1e-9 * (1.0 + base.v_minus.abs()));
            assert!(r.v_plus == base.v_plus || (r.v_plus - base.v_plus).abs() <= 1e-9 * (1.0 + base.v_plus.abs()));
            tried += 1;
        }
        assert!(tried > 0);
    }

    #[test]
    fn coef_contrast_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..200 {
            let mut x = gaussian(15, 4, &mut rng);
            let c0 = x.column(0).clone_owned();
            let c2 = x.column(2).clone_owned();
            x.set_column(2, &(c2 * 0.5 + c0 * 0.8));
            let y = DVector::from_fn(15, |_, _| rng.sample::<f64, _>(StandardNormal));
            let m = [0usize, 2, 3];
            let xm = select_columns(&x, &m);
            let beta = (xm.tr_mul(&xm)).lu().solve(&xm.tr_mul(&y)).unwrap();
            for (k, &j) in m.iter().enumerate() {
                let c = coef_contrast(&x, &m, j, &unit()).unwrap();
                assert_relative_eq!(c.dot(&y), beta[k], epsilon = 1e-10);
            }
        }
        let c = coef_contrast(&DMatrix::identity(2, 2), &[0], 0, &unit()).unwrap();
        assert_relative_eq!(c.eta, v(&[1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn ci_pvalue_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x = gaussian(20, 6, &mut rng);
        let y = DVector::from_fn(20, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let fit = lasso(&x, &y, 2.0).unwrap();
        let e = SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, 2.0).unwrap());
        for &j in &fit.active {
            let c = coef_contrast(&x, &fit.active, j, &unit()).unwrap();
            let ci = selective_ci(&e, &c, &y, 0.1).unwrap();
            for t in [ci.lower - 1e-4, ci.lower + 1e-4, ci.upper - 1e-4, ci.upper + 1e-4] {
                if !t.is_finite() {
                    continue;
                }
                let p = selective_pvalue(&e, &c, &y, t, Side::TwoSided).unwrap().p_value;
                assert_eq!(ci.covers(t), p >= 0.1, "t = {t}, p = {p}");
            }
        }
    }

    #[test]
    fn union_region_contains_signed_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let x = gaussian(15, 5, &mut rng);
        let y = DVector::from_fn(15, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let fit = lasso(&x, &y, 1.0).unwrap();
        let signed = SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, 1.0).unwrap());
        let union = union_over_signs(&x, &fit.active, 1.0, false).unwrap();
        let c = coef_contrast(&x, &fit.active, fit.active[0], &unit()).unwrap();
        let a = truncation_interval(&signed, &c, &y).unwrap();
        let b = truncation_interval(&union, &c, &y).unwrap();
        assert_eq!((a.v_minus, a.v_plus), (b.v_minus, b.v_plus));
        let (lo, hi) = (a.v_minus, a.v_plus);
        assert!(b.region.intervals().iter().any(|&(l, h)| l <= lo + 1e-12 && h >= hi - 1e-12));
    }

    #[test]
    fn composite_reduces_and_saturates() {
        let x = DMatrix::identity(2, 2);
        let e = SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap());
        let c = Contrast::new(v(&[1.0, 0.0]), "e1", &unit()).unwrap();
        let y = v(&[3.0, 0.5]);
        let a = composite_test(&e, &c, &y, 0.0, 0.1).unwrap();
        let b = selective_pvalue(&e, &c, &y, 0.0, Side::Upper).unwrap();
        assert_eq!(a.result.p_value, b.p_value);
        let far = composite_test(&e, &c, &y, 1e6, 0.1).unwrap();
        assert!(far.result.p_value > 1.0 - 1e-12);
        assert!(!far.reject);
    }

    #[test]
    fn gof_single_inactive_column_by_hand() {
        // X = I_2, M = {1}: eta = s e2 and the event along e2 is |y2| < 1 with s y2 > 0
        let x = DMatrix::identity(2, 2);
        let y = v(&[3.0, 0.6]);
        let t = gof_test(&x, &y, &[0], &[1.0], 1.0, &unit(), 0.1).unwrap();
        assert_eq!(t.j_star, 1);
        let n = |a: f64| normal::cdf(a);
        let expected = (n(1.0) - n(0.6)) / (n(1.0) - n(0.0));
        assert_relative_eq!(t.result.p_value, expected, max_relative = 1e-12);
    }

    #[test]
    fn by_rule() {
        assert_eq!(by_threshold(&[0.09], 0.1), 1);
        assert_eq!(by_threshold(&[0.11], 0.1), 0);
        assert_eq!(by_threshold(&[1.0, 1.0, 1.0], 0.1), 0);
        // m = 3, h = 11/6: thresholds k * 0.1 / 5.5
        assert_eq!(by_threshold(&[0.001, 0.03, 0.05], 0.1), 3);
        assert_eq!(by_threshold(&[0.001, 0.03, 0.06], 0.1), 2);
    }

    #[test]
    fn path_with_single_lambda_is_gof() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let x = gaussian(20, 6, &mut rng);
        let y = DVector::from_fn(20, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let data = RegressionData::new(x.clone(), y.clone()).unwrap().with_sigma2(4.0).unwrap();
        let lambda = 3.0;
        let fit = lasso(&x, &y, lambda).unwrap();
        assert!(!fit.active.is_empty());
        let state = path_fwer(&data, &[lambda], 0.1).unwrap();
        let direct = gof_test(&x, &y, &fit.active, &fit.signs, lambda, data.noise().unwrap(), 0.1).unwrap();
        let t = state.steps[0].test.as_ref().unwrap();
        assert_relative_eq!(t.result.p_value, direct.result.p_value, epsilon = 1e-12);
        assert!(state.polytope.contains(&y));
        assert!(vec![lambda].len() == state.steps.len());
    }
}
