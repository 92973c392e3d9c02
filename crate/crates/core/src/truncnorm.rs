//! Normal distributions truncated to a finite union of intervals.

use alloc::vec::Vec;

use crate::normal::{log_interval_mass, log_sum_exp, truncated_standard_draw};
use crate::{Error, Result};

/// Total log-mass below which a region is treated as degenerate.
pub const LOG_MASS_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Intervals whose mass is below this fraction of the largest are ignored.
const LOG_REL_DROP: f64 = -36.841_361_487_904_734; // ln(1e-16)

const MAX_DOUBLINGS: usize = 200;

/// Sorted, pairwise disjoint open intervals; endpoints may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRegion {
    intervals: Vec<(f64, f64)>,
}

impl TruncationRegion {
    /// Normalizes arbitrary intervals: empty ones are dropped, the rest
    /// sorted and merged where they overlap or touch.
    pub fn new(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|(lo, hi)| lo < hi);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match intervals.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        Self { intervals }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::new(alloc::vec![(lo, hi)])
    }

    pub fn whole_line() -> Self {
        Self::interval(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.intervals.first().map_or(f64::NAN, |i| i.0)
    }

    pub fn upper(&self) -> f64 {
        self.intervals.last().map_or(f64::NAN, |i| i.1)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::new(all)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::new(out)
    }

    /// Total length, possibly infinite.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }
}

/// Log-masses of `(-inf, x] & C`, `[x, inf) & C` and `C` under
/// `N(mu, sigma2)`, without any floor.
pub fn log_masses(x: f64, mu: f64, sigma2: f64, region: &TruncationRegion) -> (f64, f64, f64) {
    let sd = libm::sqrt(sigma2);
    let z = (x - mu) / sd;
    let parts: Vec<(f64, f64, f64)> = region
        .intervals
        .iter()
        .map(|&(lo, hi)| {
            let a = (lo - mu) / sd;
            let b = (hi - mu) / sd;
            let m = log_interval_mass(a, b);
            if hi <= x {
                (m, m, f64::NEG_INFINITY)
            } else if lo >= x {
                (m, f64::NEG_INFINITY, m)
            } else {
                (m, log_interval_mass(a, z), log_interval_mass(z, b))
            }
        })
        .collect();
    let max = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let cut = max + LOG_REL_DROP;
    let kept = || parts.iter().filter(move |p| p.0 >= cut);
    (log_sum_exp(kept().map(|p| p.1)), log_sum_exp(kept().map(|p| p.2)), log_sum_exp(kept().map(|p| p.0)))
}

fn check_region(sigma2: f64, region: &TruncationRegion) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(alloc::format!("variance must be positive, got {sigma2}")));
    }
    if region.is_empty() {
        return Err(Error::DegenerateRegion { log_mass: f64::NEG_INFINITY });
    }
    Ok(())
}

/// `P(X <= x | X in C)` for `X ~ N(mu, sigma2)`.
pub fn tn_cdf(x: f64, mu: f64, sigma2: f64, region: &TruncationRegion) -> Result<f64> {
    check_region(sigma2, region)?;
    let (lower, _, total) = log_masses(x, mu, sigma2, region);
    if total < LOG_MASS_FLOOR {
        return Err(Error::DegenerateRegion { log_mass: total });
    }
    Ok(libm::exp(lower - total).clamp(0.0, 1.0))
}

/// `P(X >= x | X in C)`, computed from the upper masses directly so small
/// values keep full relative precision.
pub fn tn_sf(x: f64, mu: f64, sigma2: f64, region: &TruncationRegion) -> Result<f64> {
    check_region(sigma2, region)?;
    let (_, upper, total) = log_masses(x, mu, sigma2, region);
    if total < LOG_MASS_FLOOR {
        return Err(Error::DegenerateRegion { log_mass: total });
    }
    Ok(libm::exp(upper - total).clamp(0.0, 1.0))
}

/// Monotone transform of the CDF, comparable across `mu` without
/// underflow: `log F` below the median target, `-log(1 - F)` above.
fn score(x: f64, mu: f64, sigma2: f64, region: &TruncationRegion, upper_side: bool) -> f64 {
    let (lower, upper, total) = log_masses(x, mu, sigma2, region);
    if upper_side {
        -(upper - total)
    } else {
        lower - total
    }
}

/// Solves `tn_cdf(x, mu, sigma2, region) = target` for `mu`.
pub fn invert_mu(x: f64, sigma2: f64, region: &TruncationRegion, target: f64) -> Result<f64> {
    check_region(sigma2, region)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("target {target} must lie in (0, 1)")));
    }
    let upper_side = target > 0.5;
    let goal = if upper_side { -libm::log1p(-target) } else { libm::log(target) };
    // h(mu) = score - goal is decreasing in mu
    let h = |mu: f64| score(x, mu, sigma2, region, upper_side) - goal;
    let sd = libm::sqrt(sigma2);

    let mut lo = x;
    let mut hi = x;
    let mut step = sd;
    let mut doublings = 0;
    let h0 = h(x);
    if h0.is_nan() {
        return Err(Error::BracketFailed { doublings: 0 });
    }
    if h0 > 0.0 {
        loop {
            lo = hi;
            hi = x + step;
            let v = h(hi);
            if v <= 0.0 {
                break;
            }
            step *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || !v.is_finite() {
                return Err(Error::BracketFailed { doublings });
            }
        }
    } else {
        loop {
            hi = lo;
            lo = x - step;
            let v = h(lo);
            if v >= 0.0 {
                break;
            }
            step *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || !v.is_finite() {
                return Err(Error::BracketFailed { doublings });
            }
        }
    }

    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + libm::fabs(mid)) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverse-CDF draw from `N(mu, sigma2)` restricted to `region`, driven by
/// `u` in `(0, 1)`.
pub fn tn_draw(mu: f64, sigma2: f64, region: &TruncationRegion, u: f64) -> Result<f64> {
    check_region(sigma2, region)?;
    let sd = libm::sqrt(sigma2);
    let masses: Vec<f64> = region.intervals.iter().map(|&(lo, hi)| log_interval_mass((lo - mu) / sd, (hi - mu) / sd)).collect();
    let total = log_sum_exp(masses.iter().cloned());
    if total == f64::NEG_INFINITY || total.is_nan() {
        return Err(Error::DegenerateRegion { log_mass: total });
    }
    let mut acc = 0.0;
    let last = region.intervals.len() - 1;
    for (k, &(lo, hi)) in region.intervals.iter().enumerate() {
        let w = libm::exp(masses[k] - total);
        if u <= acc + w || k == last {
            let local = if w > 0.0 { ((u - acc) / w).clamp(1e-300, 1.0 - 1e-16) } else { 0.5 };
            let z = truncated_standard_draw((lo - mu) / sd, (hi - mu) / sd, local);
            return Ok(mu + sd * z);
        }
        acc += w;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::vec;

    fn region(iv: &[(f64, f64)]) -> TruncationRegion {
        TruncationRegion::new(iv.to_vec())
    }

    #[test]
    fn normalization_merges_and_sorts() {
        let r = region(&[(3.0, 4.0), (0.0, 1.0), (0.5, 2.0), (5.0, 5.0)]);
        assert_eq!(r.intervals(), &[(0.0, 2.0), (3.0, 4.0)]);
        let s = region(&[(1.5, 3.5)]);
        assert_eq!(r.intersect(&s).intervals(), &[(1.5, 2.0), (3.0, 3.5)]);
        assert_eq!(r.union(&s).intervals(), &[(0.0, 4.0)]);
    }

    #[test]
    fn reduces_to_phi_and_boundaries() {
        let whole = TruncationRegion::whole_line();
        assert_relative_eq!(tn_cdf(0.0, 0.0, 1.0, &whole).unwrap(), 0.5, epsilon = 1e-15);
        let box_ = region(&[(-1.0, 1.0)]);
        assert_eq!(tn_cdf(-1.0, 0.0, 1.0, &box_).unwrap(), 0.0);
        assert_eq!(tn_cdf(1.0, 0.0, 1.0, &box_).unwrap(), 1.0);
        assert_relative_eq!(tn_cdf(0.0, 0.0, 1.0, &box_).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(tn_cdf(-5.0, 0.0, 1.0, &box_).unwrap(), 0.0);
        assert_eq!(tn_cdf(5.0, 0.0, 1.0, &box_).unwrap(), 1.0);
    }

    #[test]
    fn half_line_reference_value() {
        let r = region(&[(1.0, f64::INFINITY)]);
        // (Phi(3) - Phi(1)) / (1 - Phi(1)) to 30 digits
        let expected = 0.991_491_627_297_679_8;
        let got = tn_cdf(3.0, 0.0, 1.0, &r).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-13);
        let n = Normal::new(0.0, 1.0).unwrap();
        let coarse = (n.cdf(3.0) - n.cdf(1.0)) / (1.0 - n.cdf(1.0));
        assert_relative_eq!(got, coarse, max_relative = 1e-9);
        assert_relative_eq!(got, 0.991_49, epsilon = 1e-5);
        assert_relative_eq!(tn_sf(3.0, 0.0, 1.0, &r).unwrap(), 1.0 - expected, max_relative = 1e-10);
    }

    // Simpson's rule on the density, relative to the density at 8.
    fn far_tail_oracle(a: f64, x: f64, b: f64) -> f64 {
        let integrate = |lo: f64, hi: f64| {
            let m = 2000;
            let h = (hi - lo) / m as f64;
            let f = |t: f64| (-(t * t - a * a) / 2.0).exp();
            let mut s = f(lo) + f(hi);
            for i in 1..m {
                let t = lo + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
            }
            s * h / 3.0
        };
        integrate(a, x) / integrate(a, b)
    }

    #[test]
    fn far_tail_is_stable() {
        let r = region(&[(8.0, 9.0)]);
        let got = tn_cdf(8.5, 0.0, 1.0, &r).unwrap();
        assert!(got > 0.0 && got < 1.0 && got.is_finite());
        assert_relative_eq!(got, far_tail_oracle(8.0, 8.5, 9.0), max_relative = 1e-10);
        let r = region(&[(30.0, 31.0)]);
        let f = tn_cdf(30.01, 0.0, 1.0, &r).unwrap();
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn degenerate_mass_is_an_error() {
        let r = region(&[(60.0, 61.0)]);
        assert!(matches!(tn_cdf(60.5, 0.0, 1.0, &r), Err(Error::DegenerateRegion { .. })));
        // inversion has no floor
        let mu = invert_mu(60.5, 1.0, &r, 0.5).unwrap();
        assert_relative_eq!(tn_cdf(60.5, mu, 1.0, &r).unwrap(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn invert_simple_cases() {
        let whole = TruncationRegion::whole_line();
        assert_relative_eq!(invert_mu(1.3, 1.0, &whole, 0.5).unwrap(), 1.3, epsilon = 1e-10);
        let r = region(&[(1.0, f64::INFINITY)]);
        let a = invert_mu(2.0, 1.0, &r, 0.95).unwrap();
        let b = invert_mu(2.0, 1.0, &r, 0.05).unwrap();
        assert!(a < b);
        let q = normal::quantile(0.95);
        assert_relative_eq!(invert_mu(2.0, 1.0, &whole, 0.95).unwrap(), 2.0 - q, epsilon = 1e-9);
    }

    #[test]
    fn draws_follow_the_cdf() {
        let r = region(&[(-3.0, -1.0), (0.5, 2.0)]);
        for i in 1..50 {
            let u = i as f64 / 50.0;
            let d = tn_draw(0.3, 1.5, &r, u).unwrap();
            assert!(r.contains(d));
            assert_relative_eq!(tn_cdf(d, 0.3, 1.5, &r).unwrap(), u, epsilon = 1e-9);
        }
    }

    fn arb_region() -> impl Strategy<Value = TruncationRegion> {
        proptest::collection::vec((-6.0f64..6.0, 0.05f64..3.0), 1..4).prop_map(|v| {
            let mut iv = vec![];
            for (lo, w) in v {
                iv.push((lo, lo + w));
            }
            TruncationRegion::new(iv)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decreasing_in_mu(r in arb_region(), t in 0.02f64..0.98, mu0 in -4.0f64..4.0, d in 0.05f64..2.0, s2 in 0.3f64..3.0) {
            let (lo, hi) = r.intervals()[0];
            let x = lo + t * (hi - lo);
            let f0 = tn_cdf(x, mu0, s2, &r).unwrap();
            let f1 = tn_cdf(x, mu0 + d, s2, &r).unwrap();
            prop_assert!(f1 <= f0);
            // strict away from the saturated ends (negligible intervals are dropped)
            if f0 > 1e-12 && f0 < 1.0 - 1e-12 {
                prop_assert!(f1 < f0);
            }
        }

        #[test]
        fn invert_round_trips(r in arb_region(), t in 0.02f64..0.98, target in 0.01f64..0.99, s2 in 0.3f64..3.0) {
            let (lo, hi) = r.intervals()[0];
            let x = lo + t * (hi - lo);
            let mu = invert_mu(x, s2, &r, target).unwrap();
            let (lower, upper, total) = log_masses(x, mu, s2, &r);
            let f = (lower - total).exp();
            prop_assert!((f - target).abs() <= 1e-7, "F = {f}, target = {target}, upper {upper}");
        }

        #[test]
        fn nondecreasing_in_x(r in arb_region(), a in -8.0f64..8.0, b in -8.0f64..8.0, mu in -3.0f64..3.0) {
            let (x0, x1) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(tn_cdf(x0, mu, 1.0, &r).unwrap() <= tn_cdf(x1, mu, 1.0, &r).unwrap());
        }
    }
}
