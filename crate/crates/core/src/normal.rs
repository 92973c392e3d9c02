//! Standard normal distribution functions evaluated in log space.
//!
//! Everything downstream (pivots, interval inversion, truncated draws)
//! works with log-masses, so these routines are accurate far into the
//! tails where `Phi` itself underflows.

use core::f64::consts::{FRAC_1_SQRT_2, LN_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `log_ndtr` switches to the asymptotic expansion.
const ASYMPTOTIC_CUTOFF: f64 = -30.0;

#[inline]
pub fn pdf(x: f64) -> f64 {
    libm::exp(log_pdf(x))
}

#[inline]
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Phi(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - Phi(x)` without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// `log Phi(x)`, finite for every finite `x`.
pub fn log_ndtr(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        libm::log1p(-0.5 * libm::erfc(x * FRAC_1_SQRT_2))
    } else if x > ASYMPTOTIC_CUTOFF {
        libm::log(0.5 * libm::erfc(-x * FRAC_1_SQRT_2))
    } else {
        // Mills ratio series: Phi(x) ~ phi(x)/|x| * sum_k (-1)^k (2k-1)!! / x^{2k}
        let inv2 = 1.0 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        log_pdf(x) - libm::log(-x) + libm::log(sum)
    }
}

/// `log(1 - Phi(x))`.
#[inline]
pub fn log_sf(x: f64) -> f64 {
    log_ndtr(-x)
}

/// `log(1 - exp(a))` for `a <= 0`.
pub fn log1mexp(a: f64) -> f64 {
    if a > 0.0 {
        return f64::NAN;
    }
    if a > -LN_2 {
        libm::log(-libm::expm1(a))
    } else {
        libm::log1p(-libm::exp(a))
    }
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + libm::log1p(libm::exp(lo - hi))
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}

/// `log(Phi(b) - Phi(a))` for `a < b`, using whichever tail keeps the
/// subtraction well conditioned.
pub fn log_interval_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let upper_a = log_sf(a);
        let upper_b = log_sf(b);
        upper_a + log1mexp(upper_b - upper_a)
    } else if b <= 0.0 {
        let lower_a = log_ndtr(a);
        let lower_b = log_ndtr(b);
        lower_b + log1mexp(lower_a - lower_b)
    } else {
        libm::log1p(-(cdf(a) + sf(b)))
    }
}

// Acklam's rational approximation, refined by Newton steps on log Phi.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] =
    [-5.447_609_879_822_406e1, 1.615_858_368_580_409e2, -1.556_989_798_598_866e2, 6.680_131_188_771_972e1, -1.328_068_155_288_572e1];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
const P_LOW: f64 = 0.02425;

fn acklam_lower(log_p: f64) -> f64 {
    let p = libm::exp(log_p);
    if p >= P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * log_p);
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Solves `log Phi(x) = log_p`.
pub fn quantile_from_log_cdf(log_p: f64) -> f64 {
    if log_p.is_nan() || log_p > 0.0 {
        return f64::NAN;
    }
    if log_p == 0.0 {
        return f64::INFINITY;
    }
    if log_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_p > -LN_2 {
        return -quantile_from_log_cdf(log1mexp(log_p));
    }
    let mut x = acklam_lower(log_p);
    for _ in 0..4 {
        let lc = log_ndtr(x);
        let step = (lc - log_p) * libm::exp(lc - log_pdf(x));
        x -= step;
        if libm::fabs(step) <= 1e-15 * libm::fabs(x).max(1.0) {
            break;
        }
    }
    x
}

/// Inverse standard normal CDF.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    if p > 0.5 {
        -quantile_from_log_cdf(libm::log1p(-p))
    } else {
        quantile_from_log_cdf(libm::log(p))
    }
}

/// Inverse-CDF draw from the standard normal truncated to `[a, b]`,
/// driven by a uniform `u` in `(0, 1)`. Works on whichever side of zero
/// keeps the tail masses representable.
pub fn truncated_standard_draw(a: f64, b: f64, u: f64) -> f64 {
    let x = if a >= 0.0 {
        // upper tail: log Q(x) = log(Q(a) - u (Q(a) - Q(b)))
        let qa = log_sf(a);
        let qb = log_sf(b);
        let target = qa + libm::log1p(-u * (-libm::expm1(qb - qa)));
        -quantile_from_log_cdf(target)
    } else if b <= 0.0 {
        let pa = log_ndtr(a);
        let pb = log_ndtr(b);
        let target = pb + libm::log1p(-(1.0 - u) * (-libm::expm1(pa - pb)));
        quantile_from_log_cdf(target)
    } else {
        let pa = cdf(a);
        let pb = cdf(b);
        quantile(pa + u * (pb - pa))
    };
    x.clamp(a, b)
}
