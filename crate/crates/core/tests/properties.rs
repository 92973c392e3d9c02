//! Randomized invariants across the public API.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use selinf_core::blackbox::{approx_pvalue, GridSpec};
use selinf_core::events::{gof_event, lasso_event, union_over_signs};
use selinf_core::inference::{coef_contrast, selective_ci, selective_pvalue, truncation_interval};
use selinf_core::knockoff::{equi_knockoffs, fdp_estimates, knockoff_select};
use selinf_core::linalg::{select_columns, DampedLs};
use selinf_core::solvers::lasso;
use selinf_core::truncnorm::log_masses;
use selinf_core::variance::{all_feasible, gibbs_tmvn};
use selinf_core::{DMatrix, DVector, Error, Noise, RegressionData, SelectionEvent, Side};

fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

fn response(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// A random lasso instance with a non-empty active set.
fn instance(seed: u64, n: usize, p: usize, lambda: f64) -> Option<(DMatrix<f64>, DVector<f64>, Vec<usize>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, p, &mut rng);
    let y = response(n, 3.0, &mut rng);
    let fit = lasso(&x, &y, lambda).ok()?;
    (!fit.active.is_empty()).then_some((x, y, fit.active, fit.signs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_bounds_do_not_move_along_the_contrast(seed in 0u64..100_000, frac in 0.05f64..0.95) {
        let Some((x, y, active, signs)) = instance(seed, 15, 6, 2.0) else { return Ok(()) };
        let event = SelectionEvent::Single(lasso_event(&x, &active, &signs, 2.0).unwrap());
        let c = coef_contrast(&x, &active, active[0], &Noise::isotropic(1.0).unwrap()).unwrap();
        let base = truncation_interval(&event, &c, &y).unwrap();
        let lo = base.v_minus.max(base.observed - 5.0);
        let hi = base.v_plus.min(base.observed + 5.0);
        let target = lo + (hi - lo) * frac;
        let moved = &y + c.direction() * (target - base.observed);
        let r = truncation_interval(&event, &c, &moved).unwrap();
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs());
        prop_assert!(close(r.v_minus, base.v_minus) && close(r.v_plus, base.v_plus));
    }

    #[test]
    fn interval_contains_exactly_the_accepted_nulls(seed in 0u64..100_000, u in 0.0f64..1.0) {
        let Some((x, y, active, signs)) = instance(seed, 15, 6, 2.0) else { return Ok(()) };
        let event = SelectionEvent::Single(lasso_event(&x, &active, &signs, 2.0).unwrap());
        let c = coef_contrast(&x, &active, *active.last().unwrap(), &Noise::isotropic(1.0).unwrap()).unwrap();
        let alpha = 0.1;
        let ci = selective_ci(&event, &c, &y, alpha).unwrap();
        prop_assume!(ci.lower.is_finite() && ci.upper.is_finite());
        let span = ci.upper - ci.lower;
        let null = ci.lower - 0.5 * span + 2.0 * span * u;
        let margin = 1e-6 * (1.0 + span);
        prop_assume!((null - ci.lower).abs() > margin && (null - ci.upper).abs() > margin);
        match selective_pvalue(&event, &c, &y, null, Side::TwoSided) {
            Ok(p) => prop_assert_eq!(ci.covers(null), p.p_value >= alpha),
            // below the mass floor: compare against the unfloored pivot
            Err(Error::DegenerateRegion { .. }) => {
                let (lower, upper, total) = log_masses(c.dot(&y), null, c.scale, &ci.region);
                let p = 2.0 * (lower - total).min(upper - total).exp();
                prop_assert_eq!(ci.covers(null), p >= alpha);
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn gof_polytope_fixes_the_whole_outcome(seed in 0u64..100_000) {
        let Some((x, y, active, signs)) = instance(seed, 12, 5, 1.5) else { return Ok(()) };
        prop_assume!(active.len() < 5);
        let g = gof_event(&x, &active, &signs, 1.5, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut inside = 0;
        for _ in 0..200 {
            let y2 = &y + response(12, 0.4, &mut rng);
            if !g.polytope.contains(&y2) {
                continue;
            }
            inside += 1;
            let fit = lasso(&x, &y2, 1.5).unwrap();
            prop_assert_eq!(&fit.active, &active);
            prop_assert_eq!(&fit.signs, &signs);
            let g2 = gof_event(&x, &fit.active, &fit.signs, 1.5, &y2).unwrap();
            prop_assert_eq!(g2.signed_max.column, g.signed_max.column);
            prop_assert_eq!(g2.signed_max.s_star, g.signed_max.s_star);
        }
        prop_assert!(inside > 0);
    }

    #[test]
    fn sign_union_members_are_disjoint(seed in 0u64..100_000) {
        let Some((x, y, active, _)) = instance(seed, 12, 5, 1.5) else { return Ok(()) };
        let event = union_over_signs(&x, &active, 1.5, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let y2 = &y + response(12, 2.0, &mut rng);
            let hits = event.polytopes().iter().filter(|p| p.max_violation(&y2) < -1e-7).count();
            prop_assert!(hits <= 1);
        }
    }

    #[test]
    fn grid_pvalue_is_a_probability_and_monotone(seed in 0u64..100_000, a in -3.0f64..3.0, d in 0.1f64..2.0) {
        let Some((x, y, active, signs)) = instance(seed, 10, 4, 1.5) else { return Ok(()) };
        let c = coef_contrast(&x, &active, active[0], &Noise::isotropic(1.0).unwrap()).unwrap();
        let sel = |v: &DVector<f64>| lasso(&x, v, 1.5).ok().map(|f| (f.active, f.signs));
        let reference = (active, signs);
        let grid = GridSpec { points: 400, ..Default::default() };
        let eq = |o: &(Vec<usize>, Vec<f64>), r: &(Vec<usize>, Vec<f64>)| o == r;
        prop_assert!(sel(&y).as_ref() == Some(&reference));
        let p0 = approx_pvalue(sel, eq, &y, &c, a, grid, Side::Lower).unwrap().pivot;
        let p1 = approx_pvalue(sel, eq, &y, &c, a + d, grid, Side::Lower).unwrap().pivot;
        prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
        prop_assert!(p1 <= p0 + 1e-12);
    }

    #[test]
    fn gibbs_draws_stay_in_the_lasso_polytope(seed in 0u64..100_000, s2 in 0.2f64..5.0) {
        let Some((x, y, active, signs)) = instance(seed, 10, 4, 1.0) else { return Ok(()) };
        let poly = lasso_event(&x, &active, &signs, 1.0).unwrap();
        let samples = gibbs_tmvn(&poly, &y, s2, 200, 20, seed).unwrap();
        prop_assert!(all_feasible(&poly, &samples));
    }

    #[test]
    fn standardize_is_idempotent(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(9, 3, &mut rng).map(|v| 4.0 * v + 1.5);
        let d = RegressionData::new(x, response(9, 2.0, &mut rng)).unwrap().standardize().unwrap();
        let d2 = d.standardize().unwrap();
        prop_assert!((d.x() - d2.x()).amax() <= 1e-12);
        prop_assert!((d.y() - d2.y()).amax() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn knockoff_gram_identities_and_w_fdp(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p) = (30, 6);
        let x = gaussian(n, p, &mut rng);
        let ko = equi_knockoffs(&x).unwrap();
        let g = x.tr_mul(&x);
        let d = DMatrix::from_diagonal(&DVector::from_fn(p, |j, _| ko.s * g[(j, j)]));
        prop_assert!((ko.x_tilde.tr_mul(&ko.x_tilde) - &g).amax() <= 1e-8 * g.amax());
        prop_assert!((x.tr_mul(&ko.x_tilde) - (&g - &d)).amax() <= 1e-8 * g.amax());

        let mut beta = DVector::zeros(p);
        beta[0] = 3.0;
        beta[1] = -2.0;
        let y = &x * beta + response(n, 1.0, &mut rng);
        let top = x.tr_mul(&y).amax();
        let lambdas: Vec<f64> = (0..12).map(|i| top * 0.9 * 0.75f64.powi(i)).collect();
        let st = knockoff_select(&x, &y, &lambdas, 0.3, true).unwrap();
        for l in 0..lambdas.len() {
            let (fdp, _) = fdp_estimates(&st.collapsed_model(l), p);
            prop_assert!((st.fdp_w(l) - fdp).abs() < 1e-12);
        }
        let again = knockoff_select(&x, &y, &lambdas, 0.3, true).unwrap();
        prop_assert_eq!(again.selected, st.selected);
    }
}

#[test]
fn whole_line_interval_is_the_z_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = gaussian(20, 3, &mut rng);
    let y = response(20, 1.0, &mut rng);
    let noise = Noise::isotropic(1.7).unwrap();
    let event = SelectionEvent::Single(selinf_core::Polytope::whole_space(20));
    for j in 0..3 {
        let c = coef_contrast(&x, &[0, 1, 2], j, &noise).unwrap();
        let ci = selective_ci(&event, &c, &y, 0.1).unwrap();
        let z = 1.644_853_626_951_472_2 * c.sd();
        assert!((ci.lower - (c.dot(&y) - z)).abs() < 1e-7);
        assert!((ci.upper - (c.dot(&y) + z)).abs() < 1e-7);
    }
}

#[test]
fn coefficient_contrast_reproduces_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gaussian(25, 6, &mut rng);
    let y = response(25, 1.0, &mut rng);
    let m = [1, 3, 4];
    let xm = select_columns(&x, &m);
    let ls = DampedLs::new(xm.clone(), 0.0).unwrap();
    let beta = ls.solve_gram(&xm.tr_mul(&y));
    let oracle = xm.svd(true, true).solve(&y, 1e-14).unwrap();
    for (k, &j) in m.iter().enumerate() {
        let c = coef_contrast(&x, &m, j, &Noise::isotropic(1.0).unwrap()).unwrap();
        assert!((c.dot(&y) - oracle[k]).abs() < 1e-10);
        assert!((beta[k] - oracle[k]).abs() < 1e-10);
    }
}
