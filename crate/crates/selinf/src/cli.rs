//! Command-line front end. Every command prints one JSON document on
//! stdout; failures print a single-line JSON object on stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use selinf_core::blackbox::{approx_pvalue, GridSpec};
use selinf_core::events::gof_event;
use selinf_core::inference::{
    ci_on_region, coef_contrast, composite_test, full_model_fdr, path_fwer, pivot_on_region, truncation_interval,
};
use selinf_core::knockoff::{knockoff_ci, knockoff_ci_blackbox, knockoff_select, path_events};
use selinf_core::variance::{estimate_sigma, VarianceConfig};
use selinf_core::{Contrast, DMatrix, DVector, Error, Noise, RegressionData, SelectionEvent, Side};

use crate::io::{interval_json, load_csv, num, polytope_json, polytopes_json, region_json};
use crate::methods::{Fitted, MethodName, MethodSpec};
use crate::scenario::{builtin, builtin_names, Scenario};
use crate::simulate;

#[derive(Debug, Parser)]
#[command(name = "selinf", version, about = "Selective inference after variable selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Add the conditioning event (constraints `A y <= b`) to the output.
    #[arg(long, global = true)]
    pub dump_event: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Headed numeric CSV file.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (default: the last column).
    #[arg(long)]
    pub response: Option<String>,
    /// Center the columns and scale them to norm sqrt(n); center y.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, default_value = "lasso", value_parser = parse_method)]
    pub method: MethodName,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ridge penalty of the elastic net.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Number of variables for screening and OMP.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Noise standard deviation.
    #[arg(long, conflicts_with = "estimate_sigma")]
    pub sigma: Option<f64>,
    /// Estimate the noise variance from the selection-constrained residual.
    #[arg(long)]
    pub estimate_sigma: bool,
    /// Seed for the variance sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a selection procedure.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Selective p-values and intervals for the selected coefficients.
    Infer {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        ci: bool,
        /// Goodness-of-fit test of the selected model (lasso only).
        #[arg(long)]
        gof: bool,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Condition on the selected set only (union over sign patterns).
        #[arg(long)]
        minimal: bool,
        /// Test |eta'mu| <= DELTA0 for the goodness-of-fit direction.
        #[arg(long, value_name = "DELTA0")]
        composite: Option<f64>,
    },
    /// Sequential goodness-of-fit tests along a lasso path.
    PathFwer {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Decreasing penalties, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Full-model p-values for the lasso-selected variables, BY-thresholded.
    Fdr {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Knockoff selection along a lasso path.
    Knockoff {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Decreasing penalties, comma separated (default: 40 log-spaced
        /// values from max|X'y| down to 1% of it).
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        plus: bool,
        #[arg(long)]
        ci: bool,
        /// Intervals conditioning only on each variable being selected.
        #[arg(long)]
        blackbox: bool,
        #[arg(long, default_value_t = 2000)]
        grid_points: usize,
    },
    /// Run a simulation scenario.
    Simulate {
        /// Built-in scenario name.
        #[arg(long, required_unless_present_any = ["scenario_file", "list"])]
        scenario: Option<String>,
        #[arg(long, conflicts_with = "scenario")]
        scenario_file: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Long-format CSV of per-replication records.
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the built-in scenarios.
        #[arg(long)]
        list: bool,
    },
    /// Grid-approximated p-value treating the selector as a black box.
    BlackboxP {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Selected variable to test (1-based column index; default: all).
        #[arg(long)]
        index: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        grid_points: usize,
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
    },
}

fn parse_method(s: &str) -> Result<MethodName, String> {
    s.parse()
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "usage", message: message.into() }
    }

    fn to_json(&self) -> Value {
        json!({ "error": self.kind, "message": self.message })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => "data",
            Error::Unsupported(_) | Error::SignUnionCap { .. } => "unsupported",
            _ => "numeric",
        };
        Self { code: 1, kind, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_owned();
            let _ = writeln!(err, "{}", CliError::usage(first).to_json());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(v) => match serde_json::to_string_pretty(&v) {
            Ok(text) => {
                let _ = writeln!(out, "{text}");
                0
            }
            Err(e) => {
                let _ = writeln!(err, "{}", json!({ "error": "io", "message": e.to_string() }));
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Select { data, method } => select(cli, data, method),
        Command::Infer { data, method, noise, ci, gof, alpha, minimal, composite } => {
            infer(cli, data, method, noise, InferOptions { ci: *ci, gof: *gof, alpha: *alpha, minimal: *minimal, composite: *composite })
        }
        Command::PathFwer { data, noise, lambdas, alpha } => path_cmd(cli, data, noise, lambdas, *alpha),
        Command::Fdr { data, noise, lambda, alpha } => fdr_cmd(cli, data, noise, *lambda, *alpha),
        Command::Knockoff { data, noise, lambdas, alpha, plus, ci, blackbox, grid_points } => {
            knockoff_cmd(cli, data, noise, lambdas.as_deref(), *alpha, *plus, *ci, *blackbox, *grid_points)
        }
        Command::Simulate { scenario, scenario_file, reps, seed, out, list } => {
            if *list {
                return Ok(json!({ "scenarios": builtin_names() }));
            }
            let mut sc = match (scenario, scenario_file) {
                (Some(name), _) => builtin(name).map_err(|e| CliError::usage(e.to_string()))?,
                (None, Some(path)) => Scenario::from_file(path)?,
                (None, None) => return Err(CliError::usage("--scenario or --scenario-file is required")),
            };
            if let Some(r) = reps {
                sc.reps = *r;
            }
            if let Some(s) = seed {
                sc.seed = *s;
            }
            simulate_cmd(cli, &sc, out.as_ref())
        }
        Command::BlackboxP { data, method, noise, index, grid_points, half_width } => {
            blackbox_cmd(cli, data, method, noise, *index, GridSpec { points: *grid_points, half_width_sd: *half_width })
        }
    }
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--alpha {alpha} must lie in (0, 1)")))
    }
}

fn load(args: &DataArgs) -> CliResult<RegressionData> {
    let d = load_csv(&args.data, args.response.as_deref())?;
    Ok(if args.standardize { d.standardize()? } else { d })
}

fn spec(args: &MethodArgs) -> CliResult<MethodSpec> {
    let needs_lambda = matches!(args.method, MethodName::Lasso | MethodName::Enet | MethodName::ScreenLasso);
    let needs_k = matches!(args.method, MethodName::Screen | MethodName::Omp | MethodName::ScreenLasso);
    if needs_lambda && args.lambda.is_none() {
        return Err(CliError::usage(format!("--method {} needs --lambda", args.method)));
    }
    if needs_k && args.k.is_none() {
        return Err(CliError::usage(format!("--method {} needs --k", args.method)));
    }
    Ok(MethodSpec { name: args.method, lambda: args.lambda, gamma: args.gamma, k: args.k })
}

/// Noise from `--sigma`, or estimated on `poly` with `--estimate-sigma`.
fn resolve_noise(args: &NoiseArgs, estimate: impl FnOnce(&VarianceConfig) -> CliResult<f64>) -> CliResult<(Noise, Value)> {
    match (args.sigma, args.estimate_sigma) {
        (Some(s), _) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::usage(format!("--sigma {s} must be positive")));
            }
            Ok((Noise::isotropic(s * s)?, json!({ "sigma": s, "source": "given" })))
        }
        (None, true) => {
            let cfg = VarianceConfig { seed: args.seed, ..Default::default() };
            let s2 = estimate(&cfg)?;
            Ok((Noise::isotropic(s2)?, json!({ "sigma": s2.sqrt(), "source": "estimated", "seed": args.seed })))
        }
        (None, false) => Err(CliError::usage("the noise level is required: pass --sigma or --estimate-sigma")),
    }
}

fn estimate_for(fit: &Fitted, x: &DMatrix<f64>, y: &DVector<f64>, cfg: &VarianceConfig) -> CliResult<f64> {
    let poly = fit.event(x)?;
    Ok(estimate_sigma(&poly, x, y, &fit.active(), cfg)?.sigma2_hat)
}

fn lasso_estimate(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, cfg: &VarianceConfig) -> CliResult<f64> {
    let fit = MethodSpec::new(MethodName::Lasso).lambda(lambda).fit(x, y)?;
    estimate_for(&fit, x, y, cfg)
}

/// Column indices are reported 1-based.
fn var_json(data: &RegressionData, j: usize) -> Value {
    json!({ "index": j + 1, "name": data.name(j) })
}

fn select(cli: &Cli, args: &DataArgs, margs: &MethodArgs) -> CliResult<Value> {
    let data = load(args)?;
    let spec = spec(margs)?;
    let fit = spec.fit(data.x(), data.y())?;
    let coefs = fit.coefs(data.x(), data.y())?;
    let active: Vec<Value> = fit
        .active()
        .iter()
        .zip(fit.signs())
        .zip(coefs)
        .map(|((&j, s), c)| {
            let mut v = var_json(&data, j);
            v["sign"] = json!(s);
            v["coef"] = num(c);
            v
        })
        .collect();
    let mut out = json!({ "method": spec.name.as_str(), "lambda": spec.lambda, "active": active });
    if spec.name == MethodName::Enet {
        out["gamma"] = json!(spec.gamma);
    }
    if let Some(k) = spec.k {
        out["k"] = json!(k);
    }
    if cli.dump_event {
        out["event"] = polytope_json(&fit.event(data.x())?);
    }
    Ok(out)
}

struct InferOptions {
    ci: bool,
    gof: bool,
    alpha: f64,
    minimal: bool,
    composite: Option<f64>,
}

fn infer(cli: &Cli, args: &DataArgs, margs: &MethodArgs, nargs: &NoiseArgs, opt: InferOptions) -> CliResult<Value> {
    check_alpha(opt.alpha)?;
    let data = load(args)?;
    let spec = spec(margs)?;
    let (x, y) = (data.x(), data.y());
    let fit = spec.fit(x, y)?;
    let (noise, noise_json) = resolve_noise(nargs, |cfg| estimate_for(&fit, x, y, cfg))?;
    if opt.minimal && !(spec.name == MethodName::Lasso && spec.gamma == 0.0) {
        return Err(CliError::usage("--minimal is available for --method lasso only"));
    }
    let event = fit.conditioning(x, opt.minimal)?;
    let active = fit.active();
    let coefs = fit.coefs(x, y)?;
    let (mut v_minus, mut v_plus) = (Vec::new(), Vec::new());
    let mut entries = Vec::new();
    for (k, &j) in active.iter().enumerate() {
        let c = coef_contrast(x, &active, j, &noise)?.with_label(data.name(j));
        let t = truncation_interval(&event, &c, y)?;
        let p = pivot_on_region(&t.region, &c, y, 0.0, Side::TwoSided)?;
        let mut v = var_json(&data, j);
        v["coef"] = num(coefs[k]);
        v["estimate"] = num(t.observed);
        v["p_value"] = num(p.p_value);
        v["v_minus"] = num(t.v_minus);
        v["v_plus"] = num(t.v_plus);
        v["region"] = region_json(&t.region);
        if opt.ci {
            let ci = ci_on_region(&t.region, &c, y, opt.alpha)?;
            v["ci"] = json!([num(ci.lower), num(ci.upper)]);
            if let Some(w) = ci.warning {
                v["warning"] = json!(w);
            }
        }
        v_minus.push(num(t.v_minus));
        v_plus.push(num(t.v_plus));
        entries.push(v);
    }
    let mut out = json!({
        "method": spec.name.as_str(),
        "lambda": spec.lambda,
        "alpha": opt.alpha,
        "noise": noise_json,
        "active": entries,
        "conditioning": {
            "n_constraints": event.n_constraints(),
            "minimal": opt.minimal,
            "v_minus": v_minus,
            "v_plus": v_plus,
        },
    });
    let mut dump = None;
    if opt.gof || opt.composite.is_some() {
        let Fitted::Lasso(lf) = &fit else {
            return Err(CliError::usage("--gof and --composite need --method lasso or enet"));
        };
        if lf.gamma != 0.0 {
            return Err(CliError::usage("--gof and --composite need --method lasso"));
        }
        let g = gof_event(x, &lf.active, &lf.signs, lf.lambda, y)?;
        let j_star = g.signed_max.column;
        let c = Contrast::new(g.eta.clone(), format!("gof {}", data.name(j_star)), &noise)?;
        let gof_ev = SelectionEvent::Single(g.polytope);
        let t = truncation_interval(&gof_ev, &c, y)?;
        let p = pivot_on_region(&t.region, &c, y, 0.0, Side::Upper)?;
        let mut gj = json!({
            "j_star": j_star + 1,
            "name": data.name(j_star),
            "sign": g.signed_max.s_star,
            "statistic": num(t.observed),
            "p_value": num(p.p_value),
            "reject": p.pivot > 1.0 - opt.alpha,
            "n_constraints": gof_ev.n_constraints(),
            "v_minus": num(t.v_minus),
            "v_plus": num(t.v_plus),
        });
        if let Some(d0) = opt.composite {
            if !(d0 >= 0.0) {
                return Err(CliError::usage("--composite needs DELTA0 >= 0"));
            }
            let ct = composite_test(&gof_ev, &c, y, d0, opt.alpha)?;
            gj["composite"] = json!({ "delta0": d0, "p_value": num(ct.result.p_value), "reject": ct.reject });
        }
        out["gof"] = gj;
        dump = Some(gof_ev);
    }
    if cli.dump_event {
        out["event"] = polytopes_json(event.polytopes());
        if let Some(g) = dump {
            out["gof_event"] = polytopes_json(g.polytopes());
        }
    }
    Ok(out)
}

fn path_cmd(cli: &Cli, args: &DataArgs, nargs: &NoiseArgs, lambdas: &[f64], alpha: f64) -> CliResult<Value> {
    check_alpha(alpha)?;
    let data = load(args)?;
    let (noise, noise_json) = resolve_noise(nargs, |cfg| lasso_estimate(data.x(), data.y(), lambdas[lambdas.len() - 1], cfg))?;
    let data = data.with_noise(noise)?;
    let st = path_fwer(&data, lambdas, alpha)?;
    let steps: Vec<Value> = st
        .steps
        .iter()
        .map(|s| {
            let mut v = json!({
                "lambda": s.lambda,
                "active": s.active.iter().map(|&j| var_json(&data, j)).collect::<Vec<_>>(),
                "signs": s.signs,
            });
            v["gof"] = match &s.test {
                Some(t) => json!({
                    "j_star": t.j_star + 1,
                    "p_value": num(t.result.p_value),
                    "reject": t.reject,
                    "n_constraints": t.n_constraints,
                }),
                None => Value::Null,
            };
            v
        })
        .collect();
    let selected = st.selected_model().map(|m| m.iter().map(|&j| var_json(&data, j)).collect::<Vec<_>>());
    let mut out = json!({
        "alpha": alpha,
        "noise": noise_json,
        "steps": steps,
        "stop": st.stop,
        "selected": selected,
        "any_rejection": st.any_rejection(),
    });
    if cli.dump_event {
        out["event"] = polytope_json(&st.polytope);
    }
    Ok(out)
}

fn fdr_cmd(cli: &Cli, args: &DataArgs, nargs: &NoiseArgs, lambda: f64, alpha: f64) -> CliResult<Value> {
    check_alpha(alpha)?;
    let data = load(args)?;
    let (noise, noise_json) = resolve_noise(nargs, |cfg| lasso_estimate(data.x(), data.y(), lambda, cfg))?;
    let data = data.with_noise(noise)?;
    let r = full_model_fdr(&data, lambda, alpha)?;
    let active: Vec<Value> = r
        .active
        .iter()
        .zip(&r.p_values)
        .map(|(&j, &p)| {
            let mut v = var_json(&data, j);
            v["p_value"] = num(p);
            v["rejected"] = json!(r.rejected.contains(&j));
            v
        })
        .collect();
    let mut out = json!({
        "method": "lasso",
        "lambda": lambda,
        "alpha": alpha,
        "noise": noise_json,
        "active": active,
        "rejected": r.rejected.iter().map(|&j| j + 1).collect::<Vec<_>>(),
    });
    if cli.dump_event {
        let fit = MethodSpec::new(MethodName::Lasso).lambda(lambda).fit(data.x(), data.y())?;
        out["event"] = polytope_json(&fit.event(data.x())?);
    }
    Ok(out)
}

fn default_lambdas(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let top = x.tr_mul(y).amax().max(f64::MIN_POSITIVE);
    let m = 40;
    (0..m).map(|i| top * 0.01f64.powf(i as f64 / (m - 1) as f64)).collect()
}

#[allow(clippy::too_many_arguments)]
fn knockoff_cmd(
    cli: &Cli,
    args: &DataArgs,
    nargs: &NoiseArgs,
    lambdas: Option<&[f64]>,
    alpha: f64,
    plus: bool,
    ci: bool,
    blackbox: bool,
    grid_points: usize,
) -> CliResult<Value> {
    check_alpha(alpha)?;
    let data = load(args)?;
    let (x, y) = (data.x(), data.y());
    let lambdas = lambdas.map_or_else(|| default_lambdas(x, y), <[f64]>::to_vec);
    let st = knockoff_select(x, y, &lambdas, alpha, plus)?;
    let p = x.ncols();
    let w: Vec<Value> = (0..p)
        .map(|j| {
            let mut v = var_json(&data, j);
            v["w"] = num(st.w[j]);
            v["entry"] = json!(st.entry[j]);
            v["entry_knockoff"] = json!(st.entry_tilde[j]);
            v
        })
        .collect();
    let mut out = json!({
        "alpha": alpha,
        "plus": plus,
        "s": st.s,
        "lambdas": lambdas,
        "fdp": st.fdp_curve.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "fdp_plus": st.fdp_plus_curve.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "stop": st.stop(),
        "selected": st.selected.iter().map(|&j| var_json(&data, j)).collect::<Vec<_>>(),
        "statistics": w,
    });
    if ci || blackbox {
        let (noise, noise_json) = resolve_noise(nargs, |cfg| {
            let fit = MethodSpec::new(MethodName::Lasso).lambda(lambdas[lambdas.len() - 1]).fit(x, y)?;
            estimate_for(&fit, x, y, cfg)
        })?;
        out["noise"] = noise_json;
        if ci {
            let cis = knockoff_ci(x, y, &noise, &st, alpha)?;
            out["intervals"] = Value::Array(cis.iter().map(interval_json).collect());
        }
        if blackbox {
            let grid = GridSpec { points: grid_points, ..Default::default() };
            let cis = knockoff_ci_blackbox(x, y, &noise, &st, alpha, grid)?;
            out["blackbox_intervals"] = Value::Array(cis.iter().map(interval_json).collect());
        }
    }
    if cli.dump_event {
        let events = path_events(x, &st)?;
        out["event"] = Value::Array(events.iter().map(|e| polytopes_json(e.polytopes())).collect());
    }
    Ok(out)
}

fn simulate_cmd(cli: &Cli, sc: &Scenario, out_path: Option<&PathBuf>) -> CliResult<Value> {
    let report = simulate::run(sc)?;
    if let Some(path) = out_path {
        let file =
            std::fs::File::create(path).map_err(|e| CliError { code: 1, kind: "io", message: format!("{}: {e}", path.display()) })?;
        report.write_csv(std::io::BufWriter::new(file))?;
    }
    let mut v = serde_json::to_value(&report).map_err(|e| CliError { code: 1, kind: "io", message: e.to_string() })?;
    v["metrics"] = report.metrics.iter().map(|(k, &x)| (k.clone(), num(x))).collect::<serde_json::Map<_, _>>().into();
    if cli.dump_event {
        v["event"] = polytope_json(&simulate::first_event(sc)?);
    }
    Ok(v)
}

fn blackbox_cmd(
    cli: &Cli,
    args: &DataArgs,
    margs: &MethodArgs,
    nargs: &NoiseArgs,
    index: Option<usize>,
    grid: GridSpec,
) -> CliResult<Value> {
    let data = load(args)?;
    let spec = spec(margs)?;
    let (x, y) = (data.x(), data.y());
    let fit = spec.fit(x, y)?;
    let (noise, noise_json) = resolve_noise(nargs, |cfg| estimate_for(&fit, x, y, cfg))?;
    let active = fit.active();
    let targets: Vec<usize> = match index {
        Some(i) => {
            let j = i.checked_sub(1).filter(|j| active.contains(j)).ok_or_else(|| {
                CliError::usage(format!(
                    "--index {i} is not among the selected columns {:?}",
                    active.iter().map(|j| j + 1).collect::<Vec<_>>()
                ))
            })?;
            vec![j]
        }
        None => active.clone(),
    };
    let event = SelectionEvent::Single(fit.event(x)?);
    let selector = |v: &DVector<f64>| spec.fit(x, v).ok();
    let same = |a: &Fitted, b: &Fitted| a.same_outcome(b);
    let mut entries = Vec::new();
    for j in targets {
        let c = coef_contrast(x, &active, j, &noise)?.with_label(data.name(j));
        let approx = approx_pvalue(selector, same, y, &c, 0.0, grid, Side::TwoSided)?;
        let exact = truncation_interval(&event, &c, y).and_then(|t| pivot_on_region(&t.region, &c, y, 0.0, Side::TwoSided));
        let mut v = var_json(&data, j);
        v["p_value"] = num(approx.p_value);
        v["region"] = region_json(&approx.region);
        v["exact_p_value"] = exact.map_or(Value::Null, |e| num(e.p_value));
        entries.push(v);
    }
    let mut out = json!({
        "method": spec.name.as_str(),
        "lambda": spec.lambda,
        "grid_points": grid.points,
        "noise": noise_json,
        "active": entries,
    });
    if cli.dump_event {
        out["event"] = polytopes_json(event.polytopes());
    }
    Ok(out)
}
