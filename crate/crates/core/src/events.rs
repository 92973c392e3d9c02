//! Selection events as polytopes `{y : A y <= b}` and unions of them.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::{DMatrix, DVector};

use crate::linalg::{complement, select_columns, sign, vconcat, vstack, DampedLs};
use crate::lp::chebyshev_center;
use crate::solvers::{ScreenLassoFit, StepwisePath};
use crate::{Error, Result, FEAS_TOL, SIGN_UNION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    WholeSpace,
    Lasso,
    ElasticNet,
    MarginalScreen,
    Omp,
    Nnls,
    ScreenLasso,
    GoodnessOfFit,
    Intersection,
    Custom,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::WholeSpace => "whole-space",
            Method::Lasso => "lasso",
            Method::ElasticNet => "enet",
            Method::MarginalScreen => "screen",
            Method::Omp => "omp",
            Method::Nnls => "nnls",
            Method::ScreenLasso => "screen+lasso",
            Method::GoodnessOfFit => "gof",
            Method::Intersection => "intersection",
            Method::Custom => "custom",
        }
    }
}

/// Where a polytope came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMeta {
    pub method: Method,
    pub active: Vec<usize>,
    pub signs: Vec<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    /// Selection order, for order-aware events (OMP).
    pub order: Vec<usize>,
    /// Constituents of an intersection, in stacking order.
    pub components: Vec<EventMeta>,
}

impl EventMeta {
    pub fn new(method: Method) -> Self {
        Self { method, active: Vec::new(), signs: Vec::new(), lambda: None, gamma: None, order: Vec::new(), components: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub meta: EventMeta,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, meta: EventMeta) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        Ok(Self { a, b, meta })
    }

    /// Zero constraints: all of `R^n`.
    pub fn whole_space(n: usize) -> Self {
        Self { a: DMatrix::zeros(0, n), b: DVector::zeros(0), meta: EventMeta::new(Method::WholeSpace) }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    /// `max_j (A y - b)_j`, or `-inf` with no rows.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        if self.a.nrows() == 0 {
            return f64::NEG_INFINITY;
        }
        (&self.a * y - &self.b).max()
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        contains(self, y)
    }

    /// True when some ball of radius `tol` fits inside.
    pub fn has_interior(&self, tol: f64) -> bool {
        if self.a.nrows() == 0 {
            return true;
        }
        matches!(chebyshev_center(&self.a, &self.b, 1.0), Some((_, r)) if r > tol)
    }
}

pub fn contains(poly: &Polytope, y: &DVector<f64>) -> bool {
    if y.len() != poly.dim() {
        return false;
    }
    poly.a.nrows() == 0 || poly.max_violation(y) <= FEAS_TOL
}

/// Membership test for a selector-defined event: `true` when the selector
/// reproduces the observed outcome at `y`.
#[derive(Clone)]
pub struct Membership(pub Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>);

impl fmt::Debug for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Membership(..)")
    }
}

#[derive(Debug, Clone)]
pub enum SelectionEvent {
    Single(Polytope),
    Union(Vec<Polytope>),
    Blackbox(Membership),
}

impl SelectionEvent {
    pub fn contains(&self, y: &DVector<f64>) -> bool {
        match self {
            SelectionEvent::Single(p) => p.contains(y),
            SelectionEvent::Union(ps) => ps.iter().any(|p| p.contains(y)),
            SelectionEvent::Blackbox(m) => (m.0)(y),
        }
    }

    pub fn n_constraints(&self) -> usize {
        match self {
            SelectionEvent::Single(p) => p.n_constraints(),
            SelectionEvent::Union(ps) => ps.iter().map(|p| p.n_constraints()).sum(),
            SelectionEvent::Blackbox(_) => 0,
        }
    }

    pub fn polytopes(&self) -> &[Polytope] {
        match self {
            SelectionEvent::Single(p) => core::slice::from_ref(p),
            SelectionEvent::Union(ps) => ps,
            SelectionEvent::Blackbox(_) => &[],
        }
    }

    /// Metadata of the (first) member polytope.
    pub fn meta(&self) -> Option<&EventMeta> {
        self.polytopes().first().map(|p| &p.meta)
    }
}

/// The sign-independent pieces of the (damped) lasso event for a fixed
/// active set, reused across sign patterns.
struct LassoParts {
    inactive_rows: DMatrix<f64>,
    cross: DMatrix<f64>,
    coef_map: DMatrix<f64>,
    ls: DampedLs,
    n: usize,
}

impl LassoParts {
    fn new(x: &DMatrix<f64>, active: &[usize], lambda: f64, gamma: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        check_indices(active, p)?;
        let inactive = complement(p, active);
        let ls = DampedLs::new(select_columns(x, active), gamma)?;
        let x_out = select_columns(x, &inactive);
        // X_{-M}'(I - P) / lambda, written as the transpose of (I - P) X_{-M}
        let inactive_rows = ls.residual_mat(&x_out).transpose() / lambda;
        // X_{-M}' X_M G^{-1}
        let cross =
            if active.is_empty() { DMatrix::zeros(inactive.len(), 0) } else { ls.solve_gram_mat(&ls.design().tr_mul(&x_out)).transpose() };
        let coef_map = ls.coef_map();
        Ok(Self { inactive_rows, cross, coef_map, ls, n })
    }

    fn polytope(&self, signs: &[f64], lambda: f64, meta: EventMeta) -> Polytope {
        let k = signs.len();
        let q = self.inactive_rows.nrows();
        let z = DVector::from_column_slice(signs);
        let shift = &self.cross * &z;
        let neg = -&self.inactive_rows;
        let b0_upper = shift.map(|s| 1.0 - s);
        let b0_lower = shift.map(|s| 1.0 + s);
        let mut a1 = -self.coef_map.clone();
        let ginv_z = self.ls.solve_gram(&z);
        let mut b1 = DVector::zeros(k);
        for i in 0..k {
            a1.row_mut(i).scale_mut(signs[i]);
            b1[i] = -lambda * signs[i] * ginv_z[i];
        }
        let a = vstack(&[&self.inactive_rows, &neg, &a1], self.n);
        let b = vconcat(&[&b0_upper, &b0_lower, &b1]);
        debug_assert_eq!(a.nrows(), 2 * q + k);
        Polytope { a, b, meta }
    }
}

fn check_indices(idx: &[usize], p: usize) -> Result<()> {
    for (k, &j) in idx.iter().enumerate() {
        if j >= p {
            return Err(Error::InvalidInput(format!("index {j} out of range for {p} columns")));
        }
        if idx[..k].contains(&j) {
            return Err(Error::InvalidInput(format!("index {j} repeated")));
        }
    }
    Ok(())
}

fn check_signs(signs: &[f64], k: usize) -> Result<()> {
    if signs.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: signs.len() });
    }
    if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
        return Err(Error::InvalidInput("signs must be +1 or -1".into()));
    }
    Ok(())
}

/// The lasso event `{(M_hat, z_hat) = (M, z)}`: rows `A0` (inactive
/// subgradient inside `[-1, 1]`) followed by rows `A1` (sign of the active
/// block). An empty `active` gives `|X'y| <= lambda`.
pub fn lasso_event(x: &DMatrix<f64>, active: &[usize], signs: &[f64], lambda: f64) -> Result<Polytope> {
    let mut p = enet_event(x, active, signs, lambda, 0.0)?;
    p.meta.method = Method::Lasso;
    p.meta.gamma = None;
    Ok(p)
}

/// Elastic-net event: the lasso event with `X_M'X_M + gamma I` in place of
/// the Gram matrix.
pub fn enet_event(x: &DMatrix<f64>, active: &[usize], signs: &[f64], lambda: f64, gamma: f64) -> Result<Polytope> {
    check_signs(signs, active.len())?;
    let parts = LassoParts::new(x, active, lambda, gamma)?;
    let mut meta = EventMeta::new(Method::ElasticNet);
    meta.active = active.to_vec();
    meta.signs = signs.to_vec();
    meta.lambda = Some(lambda);
    meta.gamma = Some(gamma);
    Ok(parts.polytope(signs, lambda, meta))
}

/// Marginal screening: each selected `s_i x_i'y` dominates `+-x_j'y` for
/// every unselected `j`, and is nonnegative.
pub fn ms_event(x: &DMatrix<f64>, active: &[usize], signs: &[f64]) -> Result<Polytope> {
    let (n, p) = x.shape();
    check_indices(active, p)?;
    check_signs(signs, active.len())?;
    if active.is_empty() {
        return Err(Error::InvalidInput("screening event needs at least one selected variable".into()));
    }
    let inactive = complement(p, active);
    let rows = active.len() * (2 * inactive.len() + 1);
    let mut a = DMatrix::zeros(rows, n);
    let mut r = 0;
    for (k, &i) in active.iter().enumerate() {
        let xi = x.column(i) * signs[k];
        for &j in &inactive {
            let xj = x.column(j);
            a.row_mut(r).copy_from(&(xj - &xi).transpose());
            a.row_mut(r + 1).copy_from(&(-&xj - &xi).transpose());
            r += 2;
        }
        a.row_mut(r).copy_from(&(-&xi).transpose());
        r += 1;
    }
    let mut meta = EventMeta::new(Method::MarginalScreen);
    meta.active = active.to_vec();
    meta.signs = signs.to_vec();
    Ok(Polytope { a, b: DVector::zeros(rows), meta })
}

/// OMP: at step `i` the signed projected correlation of the chosen column
/// beats every column not yet chosen, and is nonnegative.
pub fn omp_event(x: &DMatrix<f64>, path: &StepwisePath) -> Result<Polytope> {
    let (n, p) = x.shape();
    let order: Vec<usize> = path.indices();
    check_indices(&order, p)?;
    if order.is_empty() {
        return Err(Error::InvalidInput("OMP path is empty".into()));
    }
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(order.len());
    for (i, &(pi, si)) in path.steps.iter().enumerate() {
        let before = &order[..i];
        let chosen = &order[..=i];
        let ls = DampedLs::new(select_columns(x, before), 0.0)?;
        let rest = complement(p, chosen);
        let mut cols = vec![pi];
        cols.extend_from_slice(&rest);
        let proj = ls.residual_mat(&select_columns(x, &cols));
        let lead = proj.column(0) * si;
        let mut blk = DMatrix::zeros(2 * rest.len() + 1, n);
        for (k, _) in rest.iter().enumerate() {
            let xj = proj.column(k + 1);
            blk.row_mut(2 * k).copy_from(&(xj - &lead).transpose());
            blk.row_mut(2 * k + 1).copy_from(&(-&xj - &lead).transpose());
        }
        blk.row_mut(2 * rest.len()).copy_from(&(-&lead).transpose());
        blocks.push(blk);
    }
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    let a = vstack(&refs, n);
    let m = a.nrows();
    let mut meta = EventMeta::new(Method::Omp);
    let mut sorted: Vec<(usize, f64)> = path.steps.clone();
    sorted.sort_by_key(|s| s.0);
    meta.active = sorted.iter().map(|s| s.0).collect();
    meta.signs = sorted.iter().map(|s| s.1).collect();
    meta.order = order;
    Ok(Polytope { a, b: DVector::zeros(m), meta })
}

/// NNLS with positive support `M`: the unconstrained refit on `M` is
/// positive (`-X_M^+ y <= 0`) and the dual on the complement is positive
/// (`X_{-M}'(I - P_M) y <= 0`).
pub fn nnls_event(x: &DMatrix<f64>, active: &[usize]) -> Result<Polytope> {
    let (n, p) = x.shape();
    check_indices(active, p)?;
    let inactive = complement(p, active);
    let ls = DampedLs::new(select_columns(x, active), 0.0)?;
    let pos = -ls.coef_map();
    let dual = ls.residual_mat(&select_columns(x, &inactive)).transpose();
    let a = vstack(&[&pos, &dual], n);
    let m = a.nrows();
    let mut meta = EventMeta::new(Method::Nnls);
    meta.active = active.to_vec();
    meta.signs = vec![1.0; active.len()];
    Ok(Polytope { a, b: DVector::zeros(m), meta })
}

/// Screening to `k` variables, then the lasso on the screened block.
pub fn screen_lasso_event(x: &DMatrix<f64>, fit: &ScreenLassoFit) -> Result<Polytope> {
    let screen = ms_event(x, &fit.screen.active, &fit.screen.signs)?;
    let xs = select_columns(x, &fit.screen.active);
    let lasso = lasso_event(&xs, &fit.lasso.active, &fit.lasso.signs, fit.lasso.lambda)?;
    let mut out = intersect(&[screen, lasso])?;
    out.meta.method = Method::ScreenLasso;
    out.meta.active = fit.lasso_active.clone();
    out.meta.signs = fit.lasso.signs.clone();
    out.meta.lambda = Some(fit.lasso.lambda);
    Ok(out)
}

/// The argmax block of the goodness-of-fit test.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMaxEvent {
    /// Position of the maximizer within the inactive set.
    pub j_star: usize,
    /// The maximizer as a column of `X`.
    pub column: usize,
    pub s_star: f64,
    /// Difference and sum rows, `2 (|-M| - 1)` of them; right side is zero.
    pub a2: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct GofEvent {
    pub polytope: Polytope,
    pub signed_max: SignedMaxEvent,
    /// `s (I - P_M) x_{j*}`.
    pub eta: DVector<f64>,
}

/// Lasso event refined by the identity and sign of the largest inactive
/// partial correlation. With a single inactive column the sign row
/// `s r >= 0` is added so that `eta` is fixed on the whole event.
pub fn gof_event(x: &DMatrix<f64>, active: &[usize], signs: &[f64], lambda: f64, y: &DVector<f64>) -> Result<GofEvent> {
    let (n, p) = x.shape();
    if active.is_empty() || active.len() >= p {
        return Err(Error::InvalidInput("goodness-of-fit needs a non-empty proper active set".into()));
    }
    let lasso = lasso_event(x, active, signs, lambda)?;
    gof_refine(x, active, lasso, y, n, p)
}

/// As [`gof_event`], refining an arbitrary conditioning polytope (used
/// along a lambda path).
pub fn gof_refine(x: &DMatrix<f64>, active: &[usize], base: Polytope, y: &DVector<f64>, n: usize, p: usize) -> Result<GofEvent> {
    let inactive = complement(p, active);
    let ls = DampedLs::new(select_columns(x, active), 0.0)?;
    let proj = ls.residual_mat(&select_columns(x, &inactive));
    let r = proj.tr_mul(y);
    let q = inactive.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| libm::fabs(r[b]).total_cmp(&libm::fabs(r[a])));
    let j_star = order[0];
    if q > 1 {
        let (a, b) = (libm::fabs(r[order[0]]), libm::fabs(r[order[1]]));
        if a - b <= 1e-12 * a {
            let (u, v) = (inactive[order[0]], inactive[order[1]]);
            return Err(Error::Tie(u.min(v), u.max(v)));
        }
    }
    let s = sign(r[j_star]);
    let lead = proj.column(j_star) * s;
    let mut a2 = DMatrix::zeros(2 * (q - 1), n);
    let mut row = 0;
    for j in (0..q).filter(|&j| j != j_star) {
        let other = proj.column(j);
        a2.row_mut(row).copy_from(&(other - &lead).transpose());
        a2.row_mut(row + 1).copy_from(&(-&other - &lead).transpose());
        row += 2;
    }
    let extra: DMatrix<f64> = if q == 1 { DMatrix::from_row_slice(1, n, (-&lead).as_slice()) } else { DMatrix::zeros(0, n) };
    let mut meta = base.meta.clone();
    let a = vstack(&[&base.a, &a2, &extra], n);
    let b = vconcat(&[&base.b, &DVector::zeros(a2.nrows() + extra.nrows())]);
    meta.method = Method::GoodnessOfFit;
    meta.components = vec![base.meta];
    let polytope = Polytope { a, b, meta };
    let eta = lead.clone_owned();
    Ok(GofEvent { polytope, signed_max: SignedMaxEvent { j_star, column: inactive[j_star], s_star: s, a2 }, eta })
}

/// Row-stacks the constraints of several polytopes.
pub fn intersect(events: &[Polytope]) -> Result<Polytope> {
    let Some(first) = events.first() else {
        return Err(Error::InvalidInput("nothing to intersect".into()));
    };
    if events.len() == 1 {
        return Ok(first.clone());
    }
    let n = first.dim();
    for e in events {
        if e.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.dim() });
        }
    }
    let a_refs: Vec<&DMatrix<f64>> = events.iter().map(|e| &e.a).collect();
    let b_refs: Vec<&DVector<f64>> = events.iter().map(|e| &e.b).collect();
    let mut meta = EventMeta::new(Method::Intersection);
    let last = &events[events.len() - 1].meta;
    meta.active = last.active.clone();
    meta.signs = last.signs.clone();
    meta.lambda = last.lambda;
    meta.components = events.iter().map(|e| e.meta.clone()).collect();
    Ok(Polytope { a: vstack(&a_refs, n), b: vconcat(&b_refs), meta })
}

/// `{M_hat = M}` as the union of the lasso events over all sign vectors.
/// With `prune`, sign patterns whose polytope has no interior are dropped.
pub fn union_over_signs(x: &DMatrix<f64>, active: &[usize], lambda: f64, prune: bool) -> Result<SelectionEvent> {
    let k = active.len();
    if k > SIGN_UNION_CAP {
        return Err(Error::SignUnionCap { size: k, cap: SIGN_UNION_CAP });
    }
    let parts = LassoParts::new(x, active, lambda, 0.0)?;
    let mut members = Vec::with_capacity(1 << k);
    for mask in 0u32..(1u32 << k) {
        let signs: Vec<f64> = (0..k).map(|i| if mask & (1 << i) != 0 { -1.0 } else { 1.0 }).collect();
        let mut meta = EventMeta::new(Method::Lasso);
        meta.active = active.to_vec();
        meta.signs = signs.clone();
        meta.lambda = Some(lambda);
        let poly = parts.polytope(&signs, lambda, meta);
        if prune && !poly.has_interior(1e-10) {
            continue;
        }
        members.push(poly);
    }
    if members.is_empty() {
        return Err(Error::Infeasible);
    }
    Ok(SelectionEvent::Union(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{elastic_net, lasso, marginal_screen, nnls, omp, screen_then_lasso};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn lasso_event_identity_design() {
        let x = DMatrix::identity(2, 2);
        let e = lasso_event(&x, &[0], &[1.0], 1.0).unwrap();
        // rows: y2 <= 1, -y2 <= 1, -y1 <= -1
        let a = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, -1.0, -1.0, 0.0]);
        assert_relative_eq!(e.a, a, epsilon = 1e-14);
        assert_relative_eq!(e.b, v(&[1.0, 1.0, -1.0]), epsilon = 1e-14);
        let fit = lasso(&x, &v(&[3.0, 0.5]), 1.0).unwrap();
        assert_eq!((fit.active, fit.signs), (vec![0], vec![1.0]));
        assert!(e.contains(&v(&[3.0, 0.5])));
        assert!(!e.contains(&v(&[0.5, 0.5])));
    }

    #[test]
    fn full_active_set_has_only_sign_rows() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 0.2, 1.0, 0.5, 0.5]);
        let e = lasso_event(&x, &[0, 1], &[1.0, -1.0], 0.7).unwrap();
        assert_eq!(e.n_constraints(), 2);
    }

    #[test]
    fn enet_event_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(8, 5, &mut rng);
        let a = lasso_event(&x, &[1, 3], &[1.0, -1.0], 0.9).unwrap();
        let b = enet_event(&x, &[1, 3], &[1.0, -1.0], 0.9, 0.0).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.b, b.b);
        let e = enet_event(&DMatrix::identity(2, 2), &[0], &[1.0], 1.0, 1.0).unwrap();
        assert_relative_eq!(e.a[(2, 0)], -0.5, epsilon = 1e-14);
        assert_relative_eq!(e.b[2], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn screening_event_identity_design() {
        let e = ms_event(&DMatrix::identity(2, 2), &[0], &[1.0]).unwrap();
        let a = DMatrix::from_row_slice(3, 2, &[-1.0, 1.0, -1.0, -1.0, -1.0, 0.0]);
        assert_eq!(e.a, a);
        let all = ms_event(&DMatrix::identity(2, 2), &[0, 1], &[1.0, -1.0]).unwrap();
        assert_eq!(all.n_constraints(), 2);
    }

    #[test]
    fn omp_event_identity_design() {
        let x = DMatrix::identity(2, 2);
        let path = omp(&x, &v(&[3.0, 1.0]), 2).unwrap();
        let e = omp_event(&x, &path).unwrap();
        let a = DMatrix::from_row_slice(4, 2, &[-1.0, 1.0, -1.0, -1.0, -1.0, 0.0, 0.0, -1.0]);
        assert_relative_eq!(e.a, a, epsilon = 1e-14);
        assert_eq!(e.meta.order, vec![0, 1]);
    }

    #[test]
    fn omp_single_step_equals_screening() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian(10, 4, &mut rng);
        let y = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let path = omp(&x, &y, 1).unwrap();
        let ms = marginal_screen(&x, &y, 1).unwrap();
        let a = omp_event(&x, &path).unwrap();
        let b = ms_event(&x, &ms.active, &ms.signs).unwrap();
        assert_relative_eq!(a.a, b.a, epsilon = 1e-12);
    }

    #[test]
    fn nnls_event_identity_design() {
        let x = DMatrix::identity(2, 2);
        let fit = nnls(&x, &v(&[2.0, -1.0])).unwrap();
        let e = nnls_event(&x, &fit.active).unwrap();
        // beta_1 > 0 and the dual of column 2 is positive: y1 >= 0, y2 <= 0
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(e.a, a, epsilon = 1e-14);
        assert!(e.contains(&v(&[2.0, -1.0])));
        let all = nnls_event(&x, &[0, 1]).unwrap();
        assert_eq!(all.n_constraints(), 2);
    }

    #[test]
    fn gof_row_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = gaussian(12, 5, &mut rng);
        let y = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g = gof_event(&x, &[0, 3], &[1.0, 1.0], 0.5, &y).unwrap();
        assert_eq!(g.signed_max.a2.nrows(), 4);
        assert_eq!(g.polytope.n_constraints(), 6 + 2 + 4);
        let fit = lasso(&x, &y, 0.5).unwrap();
        let g = gof_event(&x, &fit.active, &fit.signs, 0.5, &y).unwrap();
        assert!(g.polytope.contains(&y));
        let q = 5 - fit.active.len();
        assert_eq!(g.signed_max.a2.nrows(), 2 * (q - 1));
        let g1 = gof_event(&x, &[0, 1, 2, 3], &[1.0, 1.0, -1.0, 1.0], 0.5, &y).unwrap();
        assert_eq!(g1.signed_max.a2.nrows(), 0);
        assert_eq!(g1.polytope.n_constraints(), 2 + 4 + 1);
    }

    #[test]
    fn intersect_stacks_rows() {
        let h1 = Polytope::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[1.0]), EventMeta::new(Method::Custom)).unwrap();
        let h2 = Polytope::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[0.0]), EventMeta::new(Method::Custom)).unwrap();
        assert_eq!(intersect(core::slice::from_ref(&h1)).unwrap(), h1);
        let both = intersect(&[h1, h2]).unwrap();
        assert_eq!(both.n_constraints(), 2);
        assert!(both.contains(&v(&[-0.5, 3.0])));
        assert!(!both.contains(&v(&[0.5, 3.0])));
        let h3 = Polytope::whole_space(3);
        assert!(intersect(&[both, h3]).is_err());
    }

    #[test]
    fn sign_union_counts_and_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(10, 4, &mut rng);
        let u1 = union_over_signs(&x, &[2], 1.0, false).unwrap();
        assert_eq!(u1.polytopes().len(), 2);
        let u3 = union_over_signs(&x, &[0, 1, 3], 1.0, true).unwrap();
        assert!(u3.polytopes().len() <= 8);
        let big = gaussian(20, 14, &mut rng);
        let all: Vec<usize> = (0..13).collect();
        assert!(matches!(union_over_signs(&big, &all, 1.0, false), Err(Error::SignUnionCap { .. })));
    }

    #[test]
    fn lasso_membership_agrees_with_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..60 {
            let x = gaussian(15, 6, &mut rng);
            let y = DVector::from_fn(15, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let fit = lasso(&x, &y, 2.0).unwrap();
            let e = lasso_event(&x, &fit.active, &fit.signs, 2.0).unwrap();
            assert!(e.contains(&y));
            for _ in 0..5 {
                let y2 = DVector::from_fn(15, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
                let other = lasso(&x, &y2, 2.0).unwrap();
                assert_eq!(e.contains(&y2), other.same_outcome(&fit));
            }
        }
    }

    #[test]
    fn enet_and_screen_lasso_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let x = gaussian(15, 6, &mut rng);
            let y = DVector::from_fn(15, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let fit = elastic_net(&x, &y, 1.5, 0.8).unwrap();
            let e = enet_event(&x, &fit.active, &fit.signs, 1.5, 0.8).unwrap();
            assert!(e.contains(&y));
            let sl = screen_then_lasso(&x, &y, 4, 1.5).unwrap();
            assert!(screen_lasso_event(&x, &sl).unwrap().contains(&y));
        }
    }

    #[test]
    fn union_members_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = gaussian(12, 5, &mut rng);
        let mut checked = 0;
        for _ in 0..200 {
            let y = DVector::from_fn(12, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let fit = lasso(&x, &y, 1.5).unwrap();
            if fit.active.is_empty() {
                continue;
            }
            let u = union_over_signs(&x, &fit.active, 1.5, false).unwrap();
            let hits = u.polytopes().iter().filter(|p| p.contains(&y)).count();
            assert_eq!(hits, 1);
            checked += 1;
        }
        assert!(checked > 50);
    }
}
