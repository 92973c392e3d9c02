//! Monte Carlo runners for the scenario kinds.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use selinf_core::blackbox::{pvalue_on_grid, scan_line, GridSpec};
use selinf_core::events::lasso_event;
use selinf_core::inference::{coef_contrast, full_model_fdr, gof_test, path_fwer, pivot_on_region, selective_ci, truncation_interval};
use selinf_core::knockoff::knockoff_select;
use selinf_core::solvers::lasso;
use selinf_core::variance::{estimate_sigma, VarianceConfig};
use selinf_core::{DMatrix, DVector, Error, Noise, Polytope, RegressionData, Result, SelectionEvent, Side};

use crate::harness::{gen_design, ks_uniform, median, rng_for, sample_conditional, standard_normal_vec, SamplerConfig};
use crate::methods::{MethodName, MethodSpec};
use crate::scenario::{Kind, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub rep: usize,
    pub key: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub kind: Kind,
    pub reps: usize,
    pub seed: u64,
    pub failures: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl SimReport {
    fn new(sc: &Scenario) -> Self {
        Self {
            scenario: sc.name.clone(),
            kind: sc.kind,
            reps: sc.reps,
            seed: sc.seed,
            failures: 0,
            metrics: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_owned(), value);
    }

    fn record(&mut self, rep: usize, key: impl Into<String>, value: f64) {
        self.records.push(Record { rep, key: key.into(), value });
    }

    /// Long-format CSV: `scenario,rep,key,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
        w.write_record(["scenario", "rep", "key", "value"]).map_err(io)?;
        for r in &self.records {
            w.write_record([self.scenario.as_str(), &r.rep.to_string(), &r.key, &r.value.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))
    }
}

/// Design used by replication `rep`.
pub fn design_for(sc: &Scenario, rep: usize) -> Result<DMatrix<f64>> {
    let stream = if sc.fresh_design { rep as u64 } else { u64::MAX };
    gen_design(sc.n, sc.p, sc.rho, &mut rng_for(sc.seed, &format!("{}/design", sc.name), stream))
}

fn response(sc: &Scenario, mu: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    mu + standard_normal_vec(sc.n, rng) * sc.sigma2.sqrt()
}

/// Runs replications in parallel, in a thread-count independent way.
fn replicate<T: Send>(sc: &Scenario, f: impl Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync) -> Vec<Result<T>> {
    (0..sc.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(sc.seed, &sc.name, rep as u64);
            f(rep, &mut rng)
        })
        .collect()
}

fn split<T>(report: &mut SimReport, results: Vec<Result<T>>) -> Vec<(usize, T)> {
    let mut ok = Vec::with_capacity(results.len());
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((rep, v)),
            Err(e) => {
                log::debug!("rep {rep}: {e}");
                report.failures += 1;
            }
        }
    }
    ok
}

pub fn run(sc: &Scenario) -> Result<SimReport> {
    sc.validate()?;
    match sc.kind {
        Kind::PivotUniformity => pivot_uniformity(sc),
        Kind::Intervals => intervals(sc),
        Kind::GofPaths => gof_paths(sc),
        Kind::PathFwer => path_fwer_sim(sc),
        Kind::FullModelFdr => full_model_fdr_sim(sc),
        Kind::KnockoffFdr => knockoff_fdr_sim(sc),
        Kind::Blackbox => blackbox_ladder(sc),
        Kind::Sigma => sigma_sim(sc),
        Kind::EventOracle => event_oracle(sc),
    }
}

/// The lasso event of replication 0 (for `--dump-event`).
pub fn first_event(sc: &Scenario) -> Result<Polytope> {
    let x = design_for(sc, 0)?;
    let mu = sc.mean(&x);
    let y = response(sc, &mu, &mut rng_for(sc.seed, &sc.name, 0));
    let lambda = sc.lambdas()?[0];
    let fit = lasso(&x, &y, lambda)?;
    lasso_event(&x, &fit.active, &fit.signs, lambda)
}

fn pivot_uniformity(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambda = sc.lambda()?;
    let noise = Noise::isotropic(sc.sigma2)?;
    let x = design_for(sc, 0)?;
    let mu = sc.mean(&x);
    // first realized response with a non-empty selection defines the event
    let mut setup = None;
    for attempt in 0..100u64 {
        let y0 = response(sc, &mu, &mut rng_for(sc.seed, &format!("{}/setup", sc.name), attempt));
        if let Ok(fit) = lasso(&x, &y0, lambda) {
            if !fit.active.is_empty() {
                setup = Some(fit);
                break;
            }
        }
    }
    let fit = setup.ok_or_else(|| Error::InvalidInput("no non-empty selection in 100 attempts".into()))?;
    let event = if sc.minimal {
        selinf_core::events::union_over_signs(&x, &fit.active, lambda, true)?
    } else {
        SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, lambda)?)
    };
    let contrast = coef_contrast(&x, &fit.active, fit.active[0], &noise)?;
    let null = contrast.dot(&mu);
    let mut rng = rng_for(sc.seed, &sc.name, 0);
    let sample = sample_conditional(&event, &mu, &noise, sc.reps, &mut rng, &SamplerConfig::default())?;
    let pivots: Vec<Result<f64>> = sample
        .draws
        .par_iter()
        .map(|y| {
            let t = truncation_interval(&event, &contrast, y)?;
            Ok(pivot_on_region(&t.region, &contrast, y, null, Side::Lower)?.pivot)
        })
        .collect();
    let pivots: Vec<f64> = split(&mut report, pivots)
        .into_iter()
        .map(|(rep, v)| {
            report.records.push(Record { rep, key: "pivot".into(), value: v });
            v
        })
        .collect();
    let (d, p) = ks_uniform(&pivots);
    report.set("ks_stat", d);
    report.set("ks_p", p);
    report.set("acceptance", sample.acceptance);
    report.set("used_gibbs", sample.used_gibbs as u8 as f64);
    report.set("active_size", fit.active.len() as f64);
    report.set("draws", pivots.len() as f64);
    Ok(report)
}

struct IntervalRep {
    rows: Vec<(usize, f64, f64, f64, bool)>,
}

fn intervals(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambda = sc.lambda()?;
    let noise = Noise::isotropic(sc.sigma2)?;
    let fixed = if sc.fresh_design { None } else { Some(design_for(sc, 0)?) };
    let results = replicate(sc, |rep, rng| {
        let x = match &fixed {
            Some(x) => x.clone(),
            None => design_for(sc, rep)?,
        };
        let mu = sc.mean(&x);
        let y = response(sc, &mu, rng);
        let fit = lasso(&x, &y, lambda)?;
        if fit.active.is_empty() {
            return Ok(IntervalRep { rows: Vec::new() });
        }
        let event = if sc.minimal {
            selinf_core::events::union_over_signs(&x, &fit.active, lambda, true)?
        } else {
            SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, lambda)?)
        };
        let mut rows = Vec::with_capacity(fit.active.len());
        for &j in &fit.active {
            let c = coef_contrast(&x, &fit.active, j, &noise)?;
            let ci = selective_ci(&event, &c, &y, sc.alpha)?;
            let target = c.dot(&mu);
            rows.push((j, ci.lower, ci.upper, target, ci.covers(target)));
        }
        Ok(IntervalRep { rows })
    });
    let ok = split(&mut report, results);
    let (mut covered, mut total, mut fcr_sum) = (0usize, 0usize, 0.0);
    let mut lengths = Vec::new();
    for (rep, r) in &ok {
        let misses = r.rows.iter().filter(|row| !row.4).count();
        covered += r.rows.len() - misses;
        total += r.rows.len();
        fcr_sum += misses as f64 / r.rows.len().max(1) as f64;
        for &(j, lo, hi, target, cov) in &r.rows {
            lengths.push(hi - lo);
            report.record(*rep, format!("lower[{j}]"), lo);
            report.record(*rep, format!("upper[{j}]"), hi);
            report.record(*rep, format!("target[{j}]"), target);
            report.record(*rep, format!("covered[{j}]"), cov as u8 as f64);
        }
    }
    report.set("coverage", covered as f64 / total.max(1) as f64);
    report.set("intervals", total as f64);
    report.set("fcr", fcr_sum / ok.len().max(1) as f64);
    report.set("median_length", median(&lengths));
    Ok(report)
}

struct GofRep {
    tests: Vec<(usize, f64, bool)>,
    pick: usize,
}

fn contains_all(active: &[usize], support: &[usize]) -> bool {
    support.iter().all(|j| active.contains(j))
}

/// Null p-values are taken at one lambda index per replication, chosen
/// independently of the data; omitted-signal p-values are pooled over
/// every index whose model misses a signal.
fn gof_paths(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let noise = Noise::isotropic(sc.sigma2)?;
    let support = sc.support();
    let fixed = if sc.fresh_design { None } else { Some(design_for(sc, 0)?) };
    let results = replicate(sc, |rep, rng| {
        let x = match &fixed {
            Some(x) => x.clone(),
            None => design_for(sc, rep)?,
        };
        let mu = sc.mean(&x);
        let lambdas = sc.path_for(&x, &response(sc, &mu, &mut rng_for(sc.seed, &format!("{}/pilot", sc.name), rep as u64)))?;
        let y = response(sc, &mu, rng);
        let pick = rng.gen_range(0..lambdas.len());
        let mut tests = Vec::new();
        let mut warm: Option<DVector<f64>> = None;
        for (i, &lambda) in lambdas.iter().enumerate() {
            let fit = selinf_core::solvers::elastic_net_warm(&x, &y, lambda, 0.0, warm.as_ref())?;
            warm = Some(fit.beta.clone());
            if fit.active.is_empty() || fit.active.len() >= sc.p {
                continue;
            }
            let t = gof_test(&x, &y, &fit.active, &fit.signs, lambda, &noise, sc.alpha)?;
            tests.push((i, t.result.p_value, contains_all(&fit.active, &support)));
        }
        Ok(GofRep { tests, pick })
    });
    let ok = split(&mut report, results);
    let (mut null_p, mut omitted_p) = (Vec::new(), Vec::new());
    for (rep, r) in &ok {
        for &(i, p, null) in &r.tests {
            report.record(*rep, format!("{}[{i}]", if null { "null_p" } else { "omitted_p" }), p);
            if null && i == r.pick {
                null_p.push(p);
            }
        }
        omitted_p.extend(r.tests.iter().filter(|t| !t.2).map(|t| t.1));
    }
    let (d, p) = ks_uniform(&null_p);
    report.set("null_count", null_p.len() as f64);
    report.set("null_ks_stat", d);
    report.set("null_ks_p", p);
    report.set("omitted_count", omitted_p.len() as f64);
    report.set("omitted_median", median(&omitted_p));
    Ok(report)
}

fn path_fwer_sim(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambdas = sc.lambdas()?;
    let support = sc.support();
    let results = replicate(sc, |rep, rng| {
        let x = design_for(sc, rep)?;
        let mu = sc.mean(&x);
        let y = response(sc, &mu, rng);
        let data = RegressionData::new(x, y)?.with_sigma2(sc.sigma2)?;
        let state = path_fwer(&data, &lambdas, sc.alpha)?;
        let false_reject = state.steps.iter().any(|s| s.test.as_ref().is_some_and(|t| t.reject) && contains_all(&s.active, &support));
        let tested = state.steps.iter().filter(|s| s.test.is_some()).count();
        Ok((false_reject, tested, state.stop))
    });
    let ok = split(&mut report, results);
    let mut errors = 0;
    for (rep, (fr, tested, stop)) in &ok {
        errors += *fr as usize;
        report.record(*rep, "false_rejection", *fr as u8 as f64);
        report.record(*rep, "tests", *tested as f64);
        report.record(*rep, "stop", stop.map_or(-1.0, |s| s as f64));
    }
    report.set("fwer", errors as f64 / ok.len().max(1) as f64);
    Ok(report)
}

fn fdp(selected: &[usize], support: &[usize]) -> (f64, f64) {
    let true_pos = selected.iter().filter(|j| support.contains(j)).count();
    let false_pos = selected.len() - true_pos;
    let power = if support.is_empty() { 0.0 } else { true_pos as f64 / support.len() as f64 };
    (false_pos as f64 / selected.len().max(1) as f64, power)
}

fn summarize_fdp(report: &mut SimReport, ok: &[(usize, (Vec<usize>, f64, f64))]) {
    let m = ok.len().max(1) as f64;
    let mut sizes = 0.0;
    for (rep, (sel, f, pw)) in ok {
        sizes += sel.len() as f64;
        report.record(*rep, "fdp", *f);
        report.record(*rep, "power", *pw);
        report.record(*rep, "selected", sel.len() as f64);
    }
    report.set("fdr", ok.iter().map(|r| r.1 .1).sum::<f64>() / m);
    report.set("power", ok.iter().map(|r| r.1 .2).sum::<f64>() / m);
    report.set("mean_selected", sizes / m);
}

fn full_model_fdr_sim(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambda = sc.lambda()?;
    let support = sc.support();
    let results = replicate(sc, |rep, rng| {
        let x = design_for(sc, rep)?;
        let mu = sc.mean(&x);
        let y = response(sc, &mu, rng);
        let data = RegressionData::new(x, y)?.with_sigma2(sc.sigma2)?;
        let r = full_model_fdr(&data, lambda, sc.alpha)?;
        let (f, pw) = fdp(&r.rejected, &support);
        Ok((r.rejected, f, pw))
    });
    let ok = split(&mut report, results);
    summarize_fdp(&mut report, &ok);
    Ok(report)
}

fn knockoff_fdr_sim(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambdas = sc.lambdas()?;
    let support = sc.support();
    let results = replicate(sc, |rep, rng| {
        let x = design_for(sc, rep)?;
        let mu = sc.mean(&x);
        let y = response(sc, &mu, rng);
        let st = knockoff_select(&x, &y, &lambdas, sc.alpha, sc.plus)?;
        let (f, pw) = fdp(&st.selected, &support);
        Ok((st.selected, f, pw))
    });
    let ok = split(&mut report, results);
    summarize_fdp(&mut report, &ok);
    Ok(report)
}

fn blackbox_ladder(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambda = sc.lambda()?;
    let noise = Noise::isotropic(sc.sigma2)?;
    let ladder = if sc.grid_points.is_empty() { vec![250, 1000, 4000] } else { sc.grid_points.clone() };
    let results = replicate(sc, |rep, rng| {
        let x = design_for(sc, rep)?;
        let mu = sc.mean(&x);
        // redraw until the lasso selects something
        let (y, fit) = loop {
            let y = response(sc, &mu, rng);
            let fit = lasso(&x, &y, lambda)?;
            if !fit.active.is_empty() {
                break (y, fit);
            }
        };
        let event = SelectionEvent::Single(lasso_event(&x, &fit.active, &fit.signs, lambda)?);
        let c = coef_contrast(&x, &fit.active, fit.active[0], &noise)?;
        let null = c.dot(&mu);
        let exact = truncation_interval(&event, &c, &y).and_then(|t| pivot_on_region(&t.region, &c, &y, null, Side::Lower))?.pivot;
        let selector = |v: &DVector<f64>| lasso(&x, v, lambda).ok().map(|f| (f.active, f.signs));
        let mut errs = Vec::with_capacity(ladder.len());
        for &m in &ladder {
            let ev = scan_line(selector, |a, b| a == b, &y, &c, GridSpec { points: m, half_width_sd: 10.0 })?;
            errs.push((pvalue_on_grid(&ev, &c, null, Side::Lower).pivot - exact).abs());
        }
        Ok(errs)
    });
    let ok = split(&mut report, results);
    let mut monotone = 0;
    for (rep, errs) in &ok {
        if errs.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
        for (m, e) in ladder.iter().zip(errs) {
            report.record(*rep, format!("abs_err[{m}]"), *e);
        }
    }
    for (i, m) in ladder.iter().enumerate() {
        let col: Vec<f64> = ok.iter().map(|r| r.1[i]).collect();
        report.set(&format!("max_err_{m}"), col.iter().copied().fold(0.0, f64::max));
        report.set(&format!("mean_err_{m}"), col.iter().sum::<f64>() / col.len().max(1) as f64);
    }
    report.set("monotone_fraction", monotone as f64 / ok.len().max(1) as f64);
    report.set("instances", ok.len() as f64);
    Ok(report)
}

fn sigma_sim(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let lambda = sc.lambda()?;
    let results = replicate(sc, |rep, rng| {
        let x = design_for(sc, rep)?;
        let mu = sc.mean(&x);
        let y = response(sc, &mu, rng);
        let fit = lasso(&x, &y, lambda)?;
        let event = lasso_event(&x, &fit.active, &fit.signs, lambda)?;
        let cfg = VarianceConfig {
            n_samples: sc.sigma_samples.unwrap_or(5000),
            burn_in: sc.sigma_burn_in.unwrap_or(1000),
            seed: rng.gen(),
            ..Default::default()
        };
        let est = estimate_sigma(&event, &x, &y, &fit.active, &cfg)?;
        Ok((est.sigma2_hat, est.rows_used, fit.active.len()))
    });
    let ok = split(&mut report, results);
    let m = ok.len().max(1) as f64;
    for (rep, (s2, rows, k)) in &ok {
        report.record(*rep, "sigma2_hat", *s2);
        report.record(*rep, "rows_used", *rows as f64);
        report.record(*rep, "active", *k as f64);
    }
    let mean = ok.iter().map(|r| r.1 .0).sum::<f64>() / m;
    report.set("mean_sigma2_hat", mean);
    report.set("mean_ratio", mean / sc.sigma2);
    report.set("mean_active", ok.iter().map(|r| r.1 .2 as f64).sum::<f64>() / m);
    Ok(report)
}

#[derive(Default)]
struct OracleTally {
    positives: usize,
    positive_ok: usize,
    negatives: usize,
    negative_ok: usize,
    same: usize,
    same_ok: usize,
    skipped: usize,
}

fn event_oracle(sc: &Scenario) -> Result<SimReport> {
    let mut report = SimReport::new(sc);
    let names: Vec<MethodName> = if sc.methods.is_empty() {
        MethodName::ALL.to_vec()
    } else {
        sc.methods.iter().map(|m| m.parse().map_err(Error::InvalidInput)).collect::<Result<_>>()?
    };
    for name in names {
        let mut spec = MethodSpec::new(name);
        spec.lambda = sc.lambda;
        spec.k = sc.k;
        spec.gamma = sc.gamma.unwrap_or(0.0);
        let results = replicate(sc, |rep, rng| {
            let x = design_for(sc, rep)?;
            let mu = sc.mean(&x);
            let y = response(sc, &mu, rng);
            let fit = spec.fit(&x, &y)?;
            let event = fit.event(&x)?;
            let positive = event.contains(&y);
            // an independent response: membership must match re-running the selector
            let other = response(sc, &mu, rng);
            let verdict = spec.fit(&x, &other).ok().map(|f2| (f2.same_outcome(&fit), event.contains(&other)));
            Ok((positive, verdict))
        });
        let mut t = OracleTally::default();
        for r in results {
            let Ok((positive, verdict)) = r else {
                t.skipped += 1;
                continue;
            };
            t.positives += 1;
            t.positive_ok += positive as usize;
            match verdict {
                Some((true, inside)) => {
                    t.same += 1;
                    t.same_ok += inside as usize;
                }
                Some((false, inside)) => {
                    t.negatives += 1;
                    t.negative_ok += (!inside) as usize;
                }
                None => t.skipped += 1,
            }
        }
        let m = name.as_str();
        let checks = t.positives + t.negatives + t.same;
        let agree = t.positive_ok + t.negative_ok + t.same_ok;
        report.set(&format!("{m}.agreement"), agree as f64 / checks.max(1) as f64);
        report.set(&format!("{m}.positives"), t.positives as f64);
        report.set(&format!("{m}.negatives"), t.negatives as f64);
        report.set(&format!("{m}.skipped"), t.skipped as f64);
        report.failures += t.skipped;
    }
    Ok(report)
}
