//! Random designs, conditional sampling and uniformity checks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use selinf_core::variance::GibbsSampler;
use selinf_core::{DMatrix, DVector, Error, Noise, Result, SelectionEvent};

/// Random stream keyed by `(seed, scenario, rep)`; independent of the order
/// in which replications run.
pub fn rng_for(seed: u64, scenario: &str, rep: u64) -> ChaCha8Rng {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scenario.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h);
    rng.set_stream(rep);
    rng
}

pub fn standard_normal_vec(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Rows i.i.d. `N(0, Sigma_rho)` with equicorrelation `rho`, columns scaled
/// to unit Euclidean norm.
pub fn gen_design(n: usize, p: usize, rho: f64, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("design needs n, p >= 1".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho = {rho} must lie in [0, 1)")));
    }
    let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let shared: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, j)] = a * e + b * shared;
        }
    }
    for mut c in x.column_iter_mut() {
        let norm = c.norm();
        c.unscale_mut(norm);
    }
    Ok(x)
}

pub fn gen_design_seeded(n: usize, p: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    gen_design(n, p, rho, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Below this acceptance rate rejection sampling gives way to Gibbs.
    pub min_acceptance: f64,
    /// Proposals tried before the acceptance rate is judged.
    pub pilot: usize,
    pub gibbs_burn_in: usize,
    pub gibbs_thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { min_acceptance: 1e-3, pilot: 20_000, gibbs_burn_in: 500, gibbs_thin: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample {
    pub draws: Vec<DVector<f64>>,
    pub proposals: usize,
    pub acceptance: f64,
    pub used_gibbs: bool,
}

/// Draws from `N(mu, Sigma)` conditioned on the event: rejection sampling,
/// falling back to a thinned Gibbs chain when acceptance is too low.
pub fn sample_conditional(
    event: &SelectionEvent,
    mu: &DVector<f64>,
    noise: &Noise,
    n_draws: usize,
    rng: &mut ChaCha8Rng,
    config: &SamplerConfig,
) -> Result<ConditionalSample> {
    let n = mu.len();
    let mut draws = Vec::with_capacity(n_draws);
    let mut proposals = 0usize;
    while draws.len() < n_draws {
        let y = mu + noise.factor_apply(&standard_normal_vec(n, rng));
        proposals += 1;
        if event.contains(&y) {
            draws.push(y);
        }
        if proposals == config.pilot && (draws.len() as f64) < config.min_acceptance * proposals as f64 {
            let acceptance = draws.len() as f64 / proposals as f64;
            if acceptance < 1e-6 && matches!(event, SelectionEvent::Union(_) | SelectionEvent::Blackbox(_)) {
                return Err(Error::Unsupported("acceptance below 1e-6 and no Gibbs fallback for this event".into()));
            }
            let draws = gibbs_draws(event, mu, noise, n_draws, rng, config)?;
            return Ok(ConditionalSample { draws, proposals, acceptance, used_gibbs: true });
        }
    }
    Ok(ConditionalSample { draws, proposals, acceptance: n_draws as f64 / proposals as f64, used_gibbs: false })
}

fn gibbs_draws(
    event: &SelectionEvent,
    mu: &DVector<f64>,
    noise: &Noise,
    n_draws: usize,
    rng: &mut ChaCha8Rng,
    config: &SamplerConfig,
) -> Result<Vec<DVector<f64>>> {
    let SelectionEvent::Single(poly) = event else {
        return Err(Error::Unsupported("Gibbs fallback needs a single polytope".into()));
    };
    // y = mu + L w with w standard normal: A L w <= b - A mu
    let n = mu.len();
    let l = match noise {
        Noise::Isotropic { sigma2 } => DMatrix::identity(n, n) * sigma2.sqrt(),
        Noise::Full { chol, .. } => chol.clone(),
    };
    let a = &poly.a * &l;
    let b = &poly.b - &poly.a * mu;
    let sampler = GibbsSampler::from_parts(&a, &b)?;
    let thin = config.gibbs_thin.max(1);
    let mut out = Vec::with_capacity(n_draws);
    let mut count = 0usize;
    let seed: u64 = rng.gen();
    sampler.run(&DVector::zeros(n), 1.0, n_draws * thin, config.gibbs_burn_in, seed, |w| {
        count += 1;
        if count.is_multiple_of(thin) {
            out.push(mu + &l * w);
        }
    })?;
    Ok(out)
}

/// Kolmogorov distribution tail `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against `Unif(0, 1)`: statistic and
/// asymptotic p-value (with the usual small-sample scaling).
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = v.iter().enumerate().map(|(i, &u)| ((i + 1) as f64 / nf - u).max(u - i as f64 / nf)).fold(0.0f64, f64::max);
    let sn = nf.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use selinf_core::events::{lasso_event, EventMeta, Method};
    use selinf_core::solvers::lasso;
    use selinf_core::Polytope;

    #[test]
    fn design_is_reproducible_and_normalized() {
        let a = gen_design_seeded(20, 4, 0.3, 5).unwrap();
        let b = gen_design_seeded(20, 4, 0.3, 5).unwrap();
        assert_eq!(a, b);
        for c in a.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn correlation(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        let n = x.nrows() as f64;
        let (a, b) = (x.column(i), x.column(j));
        let (ma, mb) = (a.sum() / n, b.sum() / n);
        let cov: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum();
        let va: f64 = a.iter().map(|u| (u - ma) * (u - ma)).sum();
        let vb: f64 = b.iter().map(|v| (v - mb) * (v - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn design_correlations() {
        let x = gen_design_seeded(5000, 4, 0.7, 1).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((correlation(&x, i, j) - 0.7).abs() < 0.03);
            }
        }
        let x = gen_design_seeded(2000, 3, 0.0, 2).unwrap();
        // sd of a sample correlation is about 1/sqrt(n)
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(correlation(&x, i, j).abs() < 3.0 / (2000f64).sqrt());
            }
        }
    }

    #[test]
    fn streams_do_not_depend_on_order() {
        let a: u64 = rng_for(7, "s", 3).gen();
        let _ = rng_for(7, "s", 2).gen::<u64>();
        let b: u64 = rng_for(7, "s", 3).gen();
        assert_eq!(a, b);
        assert_ne!(a, rng_for(7, "t", 3).gen::<u64>());
        assert_ne!(a, rng_for(7, "s", 4).gen::<u64>());
    }

    #[test]
    fn ks_examples() {
        let n = 200;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let (d, p) = ks_uniform(&grid);
        assert!((d - 0.5 / n as f64).abs() < 1e-15);
        assert!(p > 0.99);
        let (_, p) = ks_uniform(&vec![0.5; 100]);
        assert!(p < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pass = 0;
        for _ in 0..200 {
            let u: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
            if ks_uniform(&u).1 > 0.01 {
                pass += 1;
            }
        }
        assert!(pass >= 195, "{pass}");
    }

    #[test]
    fn kolmogorov_reference_values() {
        // P(K > 1.36) ~ 0.0494, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_sf(1.36) - 0.04945).abs() < 2e-4);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 2e-4);
    }

    #[test]
    fn whole_space_and_half_space_acceptance() {
        let noise = Noise::isotropic(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let whole = SelectionEvent::Single(Polytope::whole_space(3));
        let s = sample_conditional(&whole, &DVector::zeros(3), &noise, 100, &mut rng, &SamplerConfig::default()).unwrap();
        assert_eq!(s.acceptance, 1.0);
        let half = Polytope::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::zeros(1), EventMeta::new(Method::Custom)).unwrap();
        let s = sample_conditional(&SelectionEvent::Single(half), &DVector::zeros(2), &noise, 5000, &mut rng, &SamplerConfig::default())
            .unwrap();
        assert!((s.acceptance - 0.5).abs() < 0.02);
    }

    #[test]
    fn lasso_draws_reproduce_the_outcome() {
        let x = DMatrix::identity(2, 2);
        let ev = SelectionEvent::Single(lasso_event(&x, &[0], &[1.0], 1.0).unwrap());
        let noise = Noise::isotropic(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s =
            sample_conditional(&ev, &DVector::from_column_slice(&[1.0, 0.0]), &noise, 300, &mut rng, &SamplerConfig::default()).unwrap();
        for y in &s.draws {
            let fit = lasso(&x, y, 1.0).unwrap();
            assert_eq!(fit.active, vec![0]);
            assert_eq!(fit.signs, vec![1.0]);
        }
    }

    #[test]
    fn gibbs_fallback_stays_in_event() {
        // y1 >= 6 under N(0, 1): acceptance ~ 1e-9
        let poly =
            Polytope::new(DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]), DVector::from_column_slice(&[-6.0]), EventMeta::new(Method::Custom))
                .unwrap();
        let ev = SelectionEvent::Single(poly);
        let noise = Noise::isotropic(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = SamplerConfig { pilot: 2000, ..Default::default() };
        let s = sample_conditional(&ev, &DVector::zeros(2), &noise, 500, &mut rng, &cfg).unwrap();
        assert!(s.used_gibbs);
        assert_eq!(s.draws.len(), 500);
        assert!(s.draws.iter().all(|y| ev.contains(y)));
        let mean = s.draws.iter().map(|y| y[0]).sum::<f64>() / 500.0;
        // E[Z | Z > 6] = phi(6) / Q(6) ~ 6.158
        assert!((mean - 6.158).abs() < 0.05, "{mean}");
    }
}
