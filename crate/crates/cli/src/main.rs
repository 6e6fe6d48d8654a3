//! `batchq`: analytic curves, limit regimes, simulation, comparison and
//! routing for batch-arrival infinite-server queues. Every command writes CSV
//! plus a `<out>.manifest.json` that `batchq replay` can rerun.
//!
//! Exit codes: 0 ok, 1 comparison failure, 2 usage or spec error, 3 domain
//! error, 4 simulation configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod grid;
mod manifest;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchq::analytic;
use batchq::routing::{self, RoutingProblem, SimBudget};
use batchq::simulator::{self, fmt, RepSummary};
use batchq::steady_state;
use batchq::{BatchDist, Error, QueueSpec, ServiceDist, SimConfig, SubqueueMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use grid::Point;
use manifest::RunManifest;

/// Largest |θ| accepted on the command line.
const THETA_CAP: f64 = 5.0;
const SEED_ENV: &str = "BATCHQ_SEED";

#[derive(Parser, Debug)]
#[command(name = "batchq", version, about = "Batch-arrival infinite-server queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Closed-form MGFs, moments, PMFs, cumulants and covariances.
    Analytic(AnalyticArgs),
    /// Batch-scaling, fluid and diffusion limits.
    Limit(LimitArgs),
    /// Replicated simulation with snapshot statistics.
    Simulate(SimulateArgs),
    /// Simulated vs closed-form moments as z-scores.
    Compare(CompareArgs),
    /// Batch-size probabilities that equalize order-statistic sub-queues.
    Route(RouteArgs),
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum What {
    Mgf,
    Moments,
    Pmf,
    Cumulants,
    Covariance,
}

#[derive(Args, Debug, Serialize)]
struct AnalyticArgs {
    spec: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    #[arg(long, default_value = "-1:0.1:1", allow_hyphen_values = true)]
    theta_grid: String,
    #[arg(long, default_value = "0:1:10")]
    t_grid: String,
    /// Batch size override for `pmf` and `cumulants`.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 50)]
    j_max: usize,
    #[arg(long, default_value_t = 5)]
    k_max: u32,
    /// Initial counts of the two sub-queues, `a,b`, for `covariance`.
    #[arg(long, default_value = "0,0")]
    q0_split: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LimitMode {
    BatchScaling,
    Fluid,
    Diffusion,
}

#[derive(Args, Debug, Serialize)]
struct LimitArgs {
    #[arg(long, value_enum)]
    mode: LimitMode,
    /// Take λ, μ, batch moments and q0 from a spec file instead.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    batch_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    batch_second_moment: f64,
    #[arg(long, default_value_t = 0.0)]
    q0: f64,
    #[arg(long, default_value = "1,2,3,4")]
    n_list: String,
    #[arg(long, default_value = "-1:0.01:0.5", allow_hyphen_values = true)]
    theta_grid: String,
    /// Time grid for `fluid`.
    #[arg(long, default_value = "inf")]
    t_grid: String,
    /// Draws of the scaled steady state for a density estimate.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 2000)]
    sample_n: u64,
    #[arg(long)]
    samples_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    spec: PathBuf,
    #[arg(long)]
    t_grid: String,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// none, identical, order-stat:K or modulo-cap:K
    #[arg(long, default_value = "none")]
    subqueues: String,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    spec: PathBuf,
    #[arg(long)]
    t: String,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    z_threshold: f64,
    /// Spec used for the closed-form side; defaults to the simulated spec.
    #[arg(long)]
    reference_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ServiceKind {
    Exponential,
    Uniform,
    Deterministic,
    Empirical,
}

#[derive(Args, Debug, Serialize)]
struct RouteArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "exponential")]
    service: ServiceKind,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Upper end of a uniform service law.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Deterministic service duration.
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    /// Comma-separated samples of an empirical service law.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Simulation replications for the verification table; 0 skips it.
    #[arg(long, default_value_t = 0)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    #[arg(long)]
    verify_out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::DegenerateService(_) | Error::Singular(_) | Error::DegenerateDenominator(_) => 3,
            Error::SimConfig(_) => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type Outcome = Result<Vec<PathBuf>, Failure>;

fn load_spec(path: &Path) -> Result<QueueSpec, Failure> {
    QueueSpec::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn grid(text: &str) -> Result<Vec<Point>, Failure> {
    grid::parse(text).map_err(Failure::usage)
}

fn theta_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let thetas = grid::parse_finite(text).map_err(Failure::usage)?;
    if let Some(t) = thetas.iter().find(|t| t.abs() > THETA_CAP) {
        return Err(Failure::domain(format!("|θ| must be <= {THETA_CAP}, got {t}")));
    }
    Ok(thetas)
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    let ext = out.extension().map_or(String::new(), |e| format!(".{}", e.to_string_lossy()));
    out.with_file_name(format!("{stem}-{suffix}{ext}"))
}

fn set_jobs(jobs: usize) {
    if jobs > 0 {
        // a second call in the same process fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

fn parse_q0_split(text: &str) -> Result<(u64, u64), Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts[..] {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(Failure::usage(format!("bad --q0-split '{text}'"))),
        },
        _ => Err(Failure::usage("--q0-split takes two counts, a,b")),
    }
}

fn fixed_batch(spec: &QueueSpec) -> Option<u64> {
    match spec.batch {
        BatchDist::Fixed { n } => Some(n),
        _ => None,
    }
}

fn need_mu(spec: &QueueSpec) -> Result<f64, Failure> {
    spec.service
        .exponential_rate()
        .ok_or_else(|| Failure::domain("closed forms need exponential service"))
}

fn cmd_analytic(a: &AnalyticArgs) -> Outcome {
    let spec = load_spec(&a.spec)?;
    let mut rows = Vec::new();
    let header: &[&str] = match a.what {
        What::Mgf => {
            let times = grid(&a.t_grid)?;
            let thetas = theta_grid(&a.theta_grid)?;
            for t in &times {
                for &theta in &thetas {
                    let v = match *t {
                        Point::At(t) => analytic::transient_mgf_fixed(&spec, theta, t)?,
                        Point::Steady => analytic::steady_mgf_fixed(&spec, theta)?,
                    };
                    rows.push(vec![t.to_string(), fmt(theta), fmt(v)]);
                }
            }
            &["t", "theta", "mgf"]
        }
        What::Moments => {
            let fixed = fixed_batch(&spec).is_some();
            for t in grid(&a.t_grid)? {
                let m = match (t, fixed) {
                    (Point::At(x), true) => analytic::mean_var_fixed(&spec, x)?,
                    (Point::At(x), false) => analytic::mean_var_random(&spec, x)?,
                    (Point::Steady, true) => analytic::mean_var_fixed_steady(&spec)?,
                    (Point::Steady, false) => analytic::mean_var_random_steady(&spec)?,
                };
                rows.push(vec![t.to_string(), fmt(m.mean), fmt(m.variance)]);
            }
            &["t", "mean", "variance"]
        }
        What::Pmf => {
            let (n, lambda, mu) = markov_fixed_params(&spec, a.n)?;
            let pmf = analytic::steady_pmf_fixed_markov(n, lambda, mu, a.j_max)?;
            if pmf.underflow {
                eprintln!("warning: probabilities below {:e} were reported as 0", analytic::PMF_UNDERFLOW);
            }
            for (j, p) in pmf.probs.iter().enumerate() {
                rows.push(vec![j.to_string(), fmt(*p)]);
            }
            &["j", "p"]
        }
        What::Cumulants => {
            let (n, lambda, mu) = markov_fixed_params(&spec, a.n)?;
            for k in 1..=a.k_max {
                let c = analytic::cumulant_scaled(k, n, lambda, mu)?;
                rows.push(vec![k.to_string(), fmt(c), fmt(analytic::cumulant_scaled_limit(k, lambda, mu))]);
            }
            &["k", "cumulant", "limit"]
        }
        What::Covariance => {
            let mu = need_mu(&spec)?;
            let (qi, qj) = parse_q0_split(&a.q0_split)?;
            let stationary = spec.rate.is_stationary();
            for t in grid(&a.t_grid)? {
                let (cov, corr) = match t {
                    Point::At(x) => {
                        let cov = analytic::subqueue_covariance(&spec.rate, mu, x)?;
                        let corr = if stationary {
                            analytic::subqueue_correlation(qi, qj, spec.rate.base(), mu, x).ok()
                        } else {
                            None
                        };
                        (cov, corr)
                    }
                    Point::Steady => (
                        analytic::subqueue_covariance_steady(&spec.rate, mu)?,
                        Some(analytic::subqueue_correlation_steady()),
                    ),
                };
                rows.push(vec![t.to_string(), fmt(cov), corr.map_or("NaN".into(), fmt)]);
            }
            &["t", "cov", "corr"]
        }
    };
    write_rows(&a.out, header, &rows)?;
    Ok(vec![a.out.clone()])
}

fn markov_fixed_params(spec: &QueueSpec, n: Option<u64>) -> Result<(u64, f64, f64), Failure> {
    let mu = need_mu(spec)?;
    if !spec.rate.is_stationary() {
        return Err(Failure::domain("steady-state quantities need a constant arrival rate"));
    }
    let n = n
        .or_else(|| fixed_batch(spec))
        .ok_or_else(|| Failure::domain("a fixed batch size is required (or pass --n)"))?;
    Ok((n, spec.rate.base(), mu))
}

fn cmd_limit(a: &LimitArgs, seed: u64) -> Outcome {
    let (lambda, mu, m1, m2, q0) = match &a.spec {
        Some(path) => {
            let spec = load_spec(path)?;
            if !spec.rate.is_stationary() {
                return Err(Failure::domain("limit regimes need a constant arrival rate"));
            }
            let (m1, m2) = spec.batch.moments();
            (spec.rate.base(), need_mu(&spec)?, m1, m2, spec.q0 as f64)
        }
        None => (a.lambda, a.mu, a.batch_mean, a.batch_second_moment, a.q0),
    };
    let mut outputs = vec![a.out.clone()];
    match a.mode {
        LimitMode::BatchScaling => {
            let thetas = theta_grid(&a.theta_grid)?;
            let ns = grid::parse(&a.n_list).map_err(Failure::usage)?;
            let mut rows = Vec::new();
            for n in &ns {
                for &theta in &thetas {
                    let v = match *n {
                        Point::At(x) if x >= 1.0 && x.fract() == 0.0 => analytic::scaled_steady_mgf(theta, x as u64, lambda, mu),
                        Point::At(x) => return Err(Failure::usage(format!("batch size {x} is not a positive integer"))),
                        Point::Steady => analytic::scaled_limit_mgf_steady(theta, lambda, mu, 1.0)?,
                    };
                    let label = match n {
                        Point::At(x) => (*x as u64).to_string(),
                        Point::Steady => "inf".into(),
                    };
                    rows.push(vec![label, fmt(theta), fmt(v)]);
                }
            }
            if !ns.contains(&Point::Steady) {
                for &theta in &thetas {
                    let v = analytic::scaled_limit_mgf_steady(theta, lambda, mu, 1.0)?;
                    rows.push(vec!["inf".into(), fmt(theta), fmt(v)]);
                }
            }
            write_rows(&a.out, &["n", "theta", "mgf"], &rows)?;
            if a.samples > 0 {
                let path = a.samples_out.clone().unwrap_or_else(|| sibling(&a.out, "samples"));
                let xs = steady_state::scaled_limit_sample(a.sample_n, lambda, mu, seed, a.samples)?;
                let rows: Vec<Vec<String>> = xs.into_iter().map(|x| vec![fmt(x)]).collect();
                write_rows(&path, &["x"], &rows)?;
                outputs.push(path);
            }
        }
        LimitMode::Fluid => {
            let thetas = theta_grid(&a.theta_grid)?;
            let mut rows = Vec::new();
            for t in grid(&a.t_grid)? {
                for &theta in &thetas {
                    let v = match t {
                        Point::At(x) => analytic::fluid_mgf(theta, x, lambda, mu, m1, q0)?,
                        Point::Steady => analytic::fluid_mgf_steady(theta, lambda, mu, m1),
                    };
                    rows.push(vec![t.to_string(), fmt(theta), fmt(v)]);
                }
            }
            write_rows(&a.out, &["t", "theta", "mgf"], &rows)?;
        }
        LimitMode::Diffusion => {
            let p = analytic::diffusion_params(lambda, mu, m1, m2)?;
            write_rows(&a.out, &["mean", "variance"], &[vec![fmt(p.mean), fmt(p.variance)]])?;
        }
    }
    Ok(outputs)
}

fn parse_mode(text: &str) -> Result<SubqueueMode, Failure> {
    let bad = || Failure::usage(format!("bad --subqueues '{text}'"));
    let count = |s: &str| s.parse::<usize>().map_err(|_| bad());
    match text.split_once(':') {
        None if text == "none" => Ok(SubqueueMode::None),
        None if text == "identical" => Ok(SubqueueMode::Identical),
        Some(("order-stat", k)) => Ok(SubqueueMode::OrderStat(count(k)?)),
        Some(("modulo-cap", k)) => Ok(SubqueueMode::ModuloCap(count(k)?)),
        _ => Err(bad()),
    }
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Outcome {
    if a.reps == 0 {
        return Err(Failure::usage("--reps must be >= 1"));
    }
    let spec = load_spec(&a.spec)?;
    let times = grid::parse_finite(&a.t_grid).map_err(Failure::usage)?;
    let mode = parse_mode(&a.subqueues)?;
    set_jobs(a.jobs);
    let config = SimConfig {
        spec,
        horizon: times.iter().copied().fold(0.0, f64::max),
        snapshot_times: times,
        replications: a.reps,
        base_seed: seed,
        subqueue_mode: mode,
    };
    let summary: RepSummary = simulator::replicate(&config)?;
    let mut outputs = vec![a.out.clone()];
    summary.write_csv(BufWriter::new(File::create(&a.out)?))?;
    if mode != SubqueueMode::None {
        let pairs = sibling(&a.out, "pairs");
        summary.write_pairs_csv(BufWriter::new(File::create(&pairs)?))?;
        let queues = sibling(&a.out, "subqueues");
        summary.write_subqueue_csv(BufWriter::new(File::create(&queues)?))?;
        outputs.extend([pairs, queues]);
    }
    Ok(outputs)
}

/// Closed-form side of `compare`: mean, variance and MGF values at `t`.
fn reference_values(spec: &QueueSpec, t: f64) -> Result<Vec<(String, f64)>, Failure> {
    const THETAS: [f64; 2] = [-0.5, 0.3];
    let mut out = Vec::new();
    if spec.service.exponential_rate().is_some() {
        let m = match fixed_batch(spec) {
            Some(_) => analytic::mean_var_fixed(spec, t)?,
            None => analytic::mean_var_random(spec, t)?,
        };
        out.push(("mean".to_string(), m.mean));
        out.push(("variance".to_string(), m.variance));
        if fixed_batch(spec).is_some() {
            for theta in THETAS {
                out.push((format!("mgf({theta})"), analytic::transient_mgf_fixed(spec, theta, t)?));
            }
        }
        return Ok(out);
    }
    // general service: only the steady law is available in closed form
    if spec.q0 > 0 {
        return Err(Failure::usage("general-service comparison requires q0 = 0"));
    }
    if !spec.rate.is_stationary() {
        return Err(Failure::usage("general-service comparison requires a constant arrival rate"));
    }
    match spec.service.support_max() {
        Some(smax) if t >= smax => {}
        _ => return Err(Failure::usage("general-service comparison needs t beyond the service support")),
    }
    let rep = steady_state::rep_random_general(&spec.batch, spec.rate.base(), &spec.service, 1e-9)?;
    out.push(("mean".to_string(), rep.mean()));
    out.push(("variance".to_string(), rep.variance()));
    for theta in THETAS {
        out.push((format!("mgf({theta})"), rep.mgf(theta)));
    }
    Ok(out)
}

fn cmd_compare(a: &CompareArgs, seed: u64) -> Result<(Vec<PathBuf>, bool), Failure> {
    let t: f64 = a
        .t
        .parse()
        .ok()
        .filter(|t: &f64| t.is_finite() && *t >= 0.0)
        .ok_or_else(|| Failure::usage(format!("--t must be a finite time, got '{}'", a.t)))?;
    if a.reps < 2 {
        return Err(Failure::usage("--reps must be >= 2"));
    }
    let spec = load_spec(&a.spec)?;
    let reference = match &a.reference_spec {
        Some(p) => load_spec(p)?,
        None => spec.clone(),
    };
    // both sides must satisfy the same restrictions
    reference_values(&spec, t)?;
    let expected = reference_values(&reference, t)?;
    set_jobs(a.jobs);
    let config = SimConfig {
        spec,
        horizon: t,
        snapshot_times: vec![t],
        replications: a.reps,
        base_seed: seed,
        subqueue_mode: SubqueueMode::None,
    };
    let data = simulator::replicate_raw(&config)?;
    let xs = data.counts_f64(0);
    let n = xs.len() as f64;
    let mean = batchq::stats::mean(&xs);
    let mut rows = Vec::new();
    let mut ok = true;
    for (name, want) in expected {
        let (got, se) = if name == "mean" {
            (mean, batchq::stats::std_error(&xs).unwrap_or(f64::NAN))
        } else if name == "variance" {
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            (batchq::stats::variance(&xs), ((m4 - m2 * m2) / n).sqrt())
        } else {
            let theta: f64 = name[4..name.len() - 1].parse().expect("mgf label");
            let ys: Vec<f64> = xs.iter().map(|x| (theta * x).exp()).collect();
            (batchq::stats::mean(&ys), batchq::stats::std_error(&ys).unwrap_or(f64::NAN))
        };
        let z = if se > 0.0 { (got - want) / se } else if got == want { 0.0 } else { f64::INFINITY };
        ok &= z.abs() < a.z_threshold;
        rows.push(vec![name, fmt(want), fmt(got), fmt(se), fmt(z)]);
    }
    write_rows(&a.out, &["quantity", "analytic", "simulated", "se", "z"], &rows)?;
    Ok((vec![a.out.clone()], ok))
}

fn cmd_route(a: &RouteArgs, seed: u64) -> Outcome {
    let service = match a.service {
        ServiceKind::Exponential => ServiceDist::exponential(a.mu),
        ServiceKind::Uniform => ServiceDist::uniform(a.b),
        ServiceKind::Deterministic => ServiceDist::deterministic(a.d),
        ServiceKind::Empirical => {
            let text = a.samples.as_deref().ok_or_else(|| Failure::usage("--samples is required"))?;
            let xs: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
            ServiceDist::empirical(xs.map_err(|e| Failure::usage(format!("bad --samples: {e}")))?)
        }
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    let problem = RoutingProblem::new(a.k, service, a.lambda)?;
    let solution = routing::solve_phi(&problem)?;
    let mut outputs = vec![a.out.clone()];
    solution.write_csv(BufWriter::new(File::create(&a.out)?))?;
    if let Some(path) = &a.matrix_out {
        solution.write_matrix_csv(BufWriter::new(File::create(path)?))?;
        outputs.push(path.clone());
    }
    if a.reps > 0 {
        set_jobs(a.jobs);
        let report = routing::verify_equalization(&problem, &solution, SimBudget { replications: a.reps, base_seed: seed })?;
        let path = a.verify_out.clone().unwrap_or_else(|| sibling(&a.out, "verify"));
        report.write_csv(BufWriter::new(File::create(&path)?))?;
        outputs.push(path);
    }
    Ok(outputs)
}

fn command_seed(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Limit(a) => Some(a.seed),
        Command::Simulate(a) => Some(a.seed),
        Command::Compare(a) => Some(a.seed),
        Command::Route(a) => Some(a.seed),
        _ => None,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Analytic(_) => "analytic",
        Command::Limit(_) => "limit",
        Command::Simulate(_) => "simulate",
        Command::Compare(_) => "compare",
        Command::Route(_) => "route",
        Command::Replay { .. } => "replay",
    }
}

fn primary_out(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Analytic(a) => Some(&a.out),
        Command::Limit(a) => Some(&a.out),
        Command::Simulate(a) => Some(&a.out),
        Command::Compare(a) => Some(&a.out),
        Command::Route(a) => Some(&a.out),
        Command::Replay { .. } => None,
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::usage(format!("{SEED_ENV} must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn execute(argv: Vec<String>, seed_override: Option<u64>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(std::iter::once("batchq".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return if code == 0 { Ok(()) } else { Err(Failure { code, message: String::new() }) };
        }
    };
    if let Command::Replay { manifest } = &cli.command {
        let m = RunManifest::load(manifest)?;
        return execute(m.argv, m.seed);
    }
    let seed = match seed_override {
        Some(s) => Some(s),
        None => env_seed()?.or(command_seed(&cli.command)),
    }
    .filter(|_| command_seed(&cli.command).is_some());
    let s = seed.unwrap_or(0);
    // a comparison breach still writes its outputs and manifest
    let mut breach = false;
    let outputs = match &cli.command {
        Command::Analytic(a) => cmd_analytic(a)?,
        Command::Limit(a) => cmd_limit(a, s)?,
        Command::Simulate(a) => cmd_simulate(a, s)?,
        Command::Compare(a) => {
            let (outs, ok) = cmd_compare(a, s)?;
            breach = !ok;
            outs
        }
        Command::Route(a) => cmd_route(a, s)?,
        Command::Replay { .. } => unreachable!(),
    };
    let manifest = RunManifest {
        command: command_name(&cli.command).to_string(),
        argv,
        parameters: serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    if let Some(out) = primary_out(&cli.command) {
        manifest.write(out)?;
    }
    if breach {
        return Err(Failure { code: 1, message: "z-score threshold exceeded".into() });
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match execute(argv, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
