//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 on usage errors (one-line diagnostic on
//! stderr), 1 on numerical or I/O failures.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pspin_cw_core::hfunc::classify_at_precision;
use pspin_cw_core::model::Lattice;
use pspin_cw_core::sampler::{sample_spins, MagnetizationSampler, DEFAULT_SPIN_CAP};
use pspin_cw_core::{
    analyze, ci_beta, ci_h, mle_beta, mle_h, AnalysisConfig, HAnalysis, ModelParams, RngStream, Scale,
};
use serde_json::{json, Value};

use crate::error::Error;
use crate::experiments::{
    limit_law_json, phase_diagram, run_coverage, run_histogram, ExperimentSpec, HistogramOptions, PhaseDiagramSpec,
    RunConfig, Statistic,
};
use crate::format::{fmt_f64, header_comment, json_f64, json_vec, Sink};

/// Largest `N` accepted without `--allow-large-n`.
pub const N_CAP: usize = 10_000_000;

/// A decimal flag value that remembers how many digits were printed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal {
    pub value: f64,
    /// Half a unit in the last printed decimal place; zero for literals
    /// without a fractional part.
    pub half_ulp: f64,
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a decimal number"))?;
        if !value.is_finite() {
            return Err(format!("'{s}' is not finite"));
        }
        let lower = s.trim().to_ascii_lowercase();
        let (mantissa, exponent) = match lower.split_once('e') {
            Some((m, e)) => (m.to_string(), e.parse::<i32>().map_err(|_| format!("bad exponent in '{s}'"))?),
            None => (lower.clone(), 0),
        };
        let half_ulp = match mantissa.split_once('.') {
            Some((_, frac)) => 0.5 * 10f64.powi(exponent - frac.len() as i32),
            None => 0.0,
        };
        Ok(Decimal { value, half_ulp })
    }
}

#[derive(Debug, Parser)]
#[command(name = "pspin-cw", version, about = "Exact computation, estimation and limit laws for the p-spin Curie-Weiss model")]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true, env = "PSPIN_CW_THREADS")]
    threads: Option<usize>,

    /// Accept N above 10^7.
    #[arg(long, global = true)]
    allow_large_n: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Point {
    /// Interaction order.
    #[arg(long)]
    p: u32,
    /// Inverse temperature.
    #[arg(long, allow_negative_numbers = true)]
    beta: Decimal,
    /// External field.
    #[arg(long, allow_negative_numbers = true)]
    h: Decimal,
}

#[derive(Debug, Args)]
struct Snap {
    /// Half-width in beta within which the point snaps to a special,
    /// strongly critical or critical point.
    #[arg(long, default_value_t = 0.0)]
    snap_beta: f64,
    /// Half-width in h for snapping.
    #[arg(long, default_value_t = 0.0)]
    snap_h: f64,
    /// Snap within half a unit of the last printed digit of --beta and --h.
    #[arg(long)]
    printed_precision: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    H,
    Beta,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatArg {
    Sigma,
    H,
    Beta,
}

impl From<StatArg> for Statistic {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Sigma => Statistic::SigmaScaled,
            StatArg::H => Statistic::HMle,
            StatArg::Beta => Statistic::BetaMle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    None,
    Quarter,
    Sqrt,
    ThreeQuarters,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::None => Scale::None,
            ScaleArg::Quarter => Scale::QuarterN,
            ScaleArg::Sqrt => Scale::SqrtN,
            ScaleArg::ThreeQuarters => Scale::ThreeQuarterN,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Global maximizers of H and the class of a parameter point.
    Classify {
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        snap: Snap,
        /// Cross-check the root count with a grid scan.
        #[arg(long)]
        verify_grid: bool,
    },
    /// Classification grid, critical curve and special points.
    PhaseDiagram {
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 0.0)]
        beta_min: f64,
        #[arg(long, default_value_t = 1.2)]
        beta_max: f64,
        #[arg(long, default_value_t = -0.6, allow_negative_numbers = true)]
        h_min: f64,
        #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
        h_max: f64,
        #[arg(long, default_value_t = 121)]
        grid_beta: usize,
        #[arg(long, default_value_t = 121)]
        grid_h: usize,
        #[arg(long, default_value_t = 400)]
        curve_points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Log-partition function and moments; the full law with --format csv.
    Partition {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Exact draws of the average magnetization or of full configurations.
    Sample {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Emit full spin configurations.
        #[arg(long)]
        spins: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Maximum-likelihood estimate of h (known beta) or beta (known h).
    Mle(EstimatorArgs),
    /// Confidence set for h or beta.
    Ci {
        #[command(flatten)]
        args: EstimatorArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Limit law of a statistic at a parameter point.
    LimitLaw {
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        snap: Snap,
        #[arg(long, value_enum)]
        statistic: StatArg,
        /// Points at which to report the CDF.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Histogram and coverage experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long)]
    p: u32,
    /// Known inverse temperature (for --which h).
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Known field (for --which beta).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    sigma_bar: f64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    point: Point,
    #[command(flatten)]
    snap: Snap,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum)]
    statistic: StatArg,
    #[arg(long, default_value_t = 100_000)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON summary destination (default: stdout when --output is set).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Sampled and exact laws of a scaled statistic against its limit.
    Histogram {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
        /// Skip the exact finite-N law.
        #[arg(long)]
        no_exact: bool,
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// Coverage of the augmented confidence set.
    Coverage {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<pspin_cw_core::Error> for Failure {
    fn from(e: pspin_cw_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return 2;
            }
            // first paragraph of clap's message, folded onto one line
            let text = e.to_string();
            let line: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            eprintln!("{}", line.join(" "));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn check_n(n: usize, allow_large: bool) -> CliResult<()> {
    if n > N_CAP && !allow_large {
        return Err(usage(format!("N = {n} exceeds the cap {N_CAP}; pass --allow-large-n to override")));
    }
    Ok(())
}

fn params(point: &Point, n: usize, allow_large: bool) -> CliResult<ModelParams> {
    check_n(n, allow_large)?;
    ModelParams::new(point.beta.value, point.h.value, point.p, n).map_err(|e| usage(e.to_string()))
}

fn check_point(point: &Point) -> CliResult<()> {
    params(point, 1, false).map(|_| ())
}

/// The point to analyze after optional snapping, and the snapped class.
fn resolve(point: &Point, snap: &Snap) -> CliResult<(f64, f64, Option<&'static str>)> {
    check_point(point)?;
    let (db, dh) = if snap.printed_precision {
        (point.beta.half_ulp.max(snap.snap_beta), point.h.half_ulp.max(snap.snap_h))
    } else {
        (snap.snap_beta, snap.snap_h)
    };
    if !(db >= 0.0 && dh >= 0.0) {
        return Err(usage("snap widths must be non-negative"));
    }
    if db == 0.0 && dh == 0.0 && !snap.printed_precision {
        return Ok((point.beta.value, point.h.value, None));
    }
    let s = classify_at_precision(point.beta.value, point.h.value, point.p, db, dh)?;
    Ok((s.beta, s.h, Some(s.class.tag())))
}

fn analysis_json(a: &HAnalysis) -> Value {
    json!({
        "beta": a.beta,
        "h": a.h,
        "p": a.p,
        "class": a.classification.tag(),
        "k": a.maximizers.len(),
        "maximizers": json_vec(&a.maximizers),
        "values": json_vec(&a.values),
        "second_derivs": json_vec(&a.second_derivs),
        "fourth_derivs": json_vec(&a.fourth_derivs),
        "weights": json_vec(&a.weights),
    })
}

fn print_json(value: &Value) -> CliResult<()> {
    Sink::Stdout.write_json(value).map_err(Failure::from)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let run_cfg = RunConfig { threads: cli.threads };
    if cli.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let big = cli.allow_large_n;
    match cli.command {
        Command::Classify { point, snap, verify_grid } => {
            let (beta, h, snapped) = resolve(&point, &snap)?;
            let cfg = AnalysisConfig { verify_with_grid: verify_grid, ..AnalysisConfig::default() };
            let a = analyze(beta, h, point.p, &cfg)?;
            let mut out = analysis_json(&a);
            if let Some(class) = snapped {
                out["class"] = json!(class);
                out["input"] = json!({ "beta": point.beta.value, "h": point.h.value });
            }
            print_json(&out)
        }
        Command::PhaseDiagram { p, beta_min, beta_max, h_min, h_max, grid_beta, grid_h, curve_points, output, format } => {
            if p < 2 {
                return Err(usage("p must be at least 2"));
            }
            let spec = PhaseDiagramSpec {
                p,
                beta_range: (beta_min, beta_max),
                h_range: (h_min, h_max),
                grid: (grid_beta, grid_h),
                curve_points,
            };
            let diagram = phase_diagram(&spec, run_cfg)?;
            let sink = Sink::from_option(output.as_deref());
            match format {
                Format::Csv => diagram.write_csv(&sink)?,
                Format::Json => sink.write_json(&diagram.summary())?,
            }
            Ok(())
        }
        Command::Partition { point, n, output, format } => {
            let prm = params(&point, n, big)?;
            let lattice = Lattice::new(n, prm.p)?;
            let sink = Sink::from_option(output.as_deref());
            match format {
                Format::Json => {
                    let s = lattice.stats(prm.beta, prm.h);
                    sink.write_json(&json!({
                        "beta": prm.beta, "h": prm.h, "p": prm.p, "n": n,
                        "log_partition": s.log_partition,
                        "mean": s.mean,
                        "variance": s.var,
                        "mean_pow": s.mean_pow,
                        "variance_pow": s.var_pow,
                    }))?;
                }
                Format::Csv => {
                    let law = lattice.law(prm.beta, prm.h);
                    let rows: Vec<Vec<String>> = law
                        .support()
                        .iter()
                        .zip(law.log_prob())
                        .map(|(&m, &lp)| vec![fmt_f64(m), fmt_f64(lp), fmt_f64(lp.exp())])
                        .collect();
                    let comment =
                        header_comment("partition", &format!("beta={} h={} p={} n={}", prm.beta, prm.h, prm.p, n));
                    sink.write_csv(&comment, &["sigma_bar", "log_prob", "prob"], &rows)?;
                }
            }
            Ok(())
        }
        Command::Sample { point, n, count, seed, stream, spins, output, format } => {
            let prm = params(&point, n, big)?;
            let cap = if big { usize::MAX } else { DEFAULT_SPIN_CAP };
            if spins && n > cap {
                return Err(usage(format!("spin output for N = {n} exceeds the cap {cap}; pass --allow-large-n")));
            }
            let mut rng = RngStream::new(seed, stream).open();
            let mut draws: Vec<(f64, Option<String>)> = Vec::with_capacity(count);
            if spins {
                for _ in 0..count {
                    let s = sample_spins(&prm, &mut rng, cap)?;
                    let sum: i64 = s.iter().map(|&x| x as i64).sum();
                    let text: String = s.iter().map(|&x| if x > 0 { '+' } else { '-' }).collect();
                    draws.push((sum as f64 / n as f64, Some(text)));
                }
            } else {
                let law = Lattice::new(n, prm.p)?.law(prm.beta, prm.h);
                let sampler = MagnetizationSampler::new(&law);
                draws.extend((0..count).map(|_| (sampler.sample(&mut rng), None)));
            }
            let sink = Sink::from_option(output.as_deref());
            match format {
                Format::Csv => {
                    let mut header = vec!["draw", "sigma_bar"];
                    if spins {
                        header.push("spins");
                    }
                    let rows: Vec<Vec<String>> = draws
                        .iter()
                        .enumerate()
                        .map(|(i, (m, s))| {
                            let mut row = vec![i.to_string(), fmt_f64(*m)];
                            row.extend(s.clone());
                            row
                        })
                        .collect();
                    let params = format!(
                        "beta={} h={} p={} n={} count={count} seed={seed} stream={stream}",
                        prm.beta, prm.h, prm.p, n
                    );
                    sink.write_csv(&header_comment("sample", &params), &header, &rows)?;
                }
                Format::Json => {
                    let list: Vec<Value> = draws
                        .iter()
                        .map(|(m, s)| match s {
                            Some(text) => json!({ "sigma_bar": m, "spins": text }),
                            None => json!(m),
                        })
                        .collect();
                    sink.write_json(&json!({ "seed": seed, "stream": stream, "draws": list }))?;
                }
            }
            Ok(())
        }
        Command::Mle(args) => {
            let known = estimator_setup(&args, big)?;
            let r = match args.which {
                Which::H => mle_h(args.sigma_bar, known, args.p, args.n)?,
                Which::Beta => mle_beta(args.sigma_bar, known, args.p, args.n)?,
            };
            print_json(&json!({
                "which": which_tag(args.which),
                "estimate": json_f64(r.estimate),
                "existence": r.existence.tag(),
                "residual": r.residual,
                "iterations": r.iterations,
            }))
        }
        Command::Ci { args, alpha } => {
            let known = estimator_setup(&args, big)?;
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(usage("alpha must lie in (0, 1]"));
            }
            let ci = match args.which {
                Which::H => ci_h(args.sigma_bar, known, args.p, args.n, alpha)?,
                Which::Beta => ci_beta(args.sigma_bar, known, args.p, args.n, alpha)?,
            };
            print_json(&json!({
                "which": which_tag(args.which),
                "estimate": 0.5 * (ci.lower + ci.upper),
                "lower": ci.lower,
                "upper": ci.upper,
                "augmentation": json_vec(&ci.augmentation),
                "level": ci.level,
            }))
        }
        Command::LimitLaw { point, snap, statistic, at } => {
            let (beta, h, snapped) = resolve(&point, &snap)?;
            let a = analyze(beta, h, point.p, &AnalysisConfig::default())?;
            let mut out = limit_law_json(statistic.into(), &a, &at)?;
            out["beta"] = json!(beta);
            out["h"] = json!(h);
            if snapped.is_some() {
                out["input"] = json!({ "beta": point.beta.value, "h": point.h.value });
            }
            print_json(&out)
        }
        Command::Experiment(cmd) => run_experiment(cmd, run_cfg, big),
    }
}

fn which_tag(w: Which) -> &'static str {
    match w {
        Which::H => "h",
        Which::Beta => "beta",
    }
}

/// Validates estimator flags and returns the known parameter.
fn estimator_setup(args: &EstimatorArgs, big: bool) -> CliResult<f64> {
    check_n(args.n, big)?;
    if args.n < 1 {
        return Err(usage("N must be at least 1"));
    }
    if args.p < 2 {
        return Err(usage("p must be at least 2"));
    }
    if !(args.sigma_bar.abs() <= 1.0) {
        return Err(usage("--sigma-bar must lie in [-1, 1]"));
    }
    let known = match args.which {
        Which::H => args.beta.ok_or_else(|| usage("--which h needs --beta"))?,
        Which::Beta => args.h.ok_or_else(|| usage("--which beta needs --h"))?,
    };
    if !known.is_finite() {
        return Err(usage("the known parameter must be finite"));
    }
    Ok(known)
}

fn experiment_spec(common: &ExperimentArgs, big: bool) -> CliResult<ExperimentSpec> {
    let (beta, h, _) = resolve(&common.point, &common.snap)?;
    check_n(common.n, big)?;
    let prm = ModelParams::new(beta, h, common.point.p, common.n).map_err(|e| usage(e.to_string()))?;
    if common.replications < 1 {
        return Err(usage("--replications must be at least 1"));
    }
    let mut spec = ExperimentSpec::new(prm, common.statistic.into(), common.replications, common.seed);
    spec.output_path = common.output.clone();
    Ok(spec)
}

fn emit_summary(common: &ExperimentArgs, summary: &Value) -> CliResult<()> {
    match (&common.summary, &common.output) {
        (Some(path), _) => Sink::File(path.clone()).write_json(summary)?,
        (None, Some(_)) => print_json(summary)?,
        (None, None) => {}
    }
    Ok(())
}

fn run_experiment(cmd: ExperimentCommand, run_cfg: RunConfig, big: bool) -> CliResult<()> {
    match cmd {
        ExperimentCommand::Histogram { common, scale, no_exact, tolerance } => {
            let mut spec = experiment_spec(&common, big)?;
            spec.scale = scale.map(Scale::from);
            let options = HistogramOptions { exact: !no_exact, tolerance };
            let out = run_histogram(&spec, options, run_cfg)?;
            out.write_csv()?;
            emit_summary(&common, &out.summary())
        }
        ExperimentCommand::Coverage { common, alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(usage("alpha must lie in (0, 1]"));
            }
            let spec = experiment_spec(&common, big)?;
            let out = run_coverage(&spec, alpha, run_cfg)?;
            out.write_csv()?;
            emit_summary(&common, &out.summary())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_precision() {
        let d: Decimal = "0.688".parse().unwrap();
        assert_eq!(d.value, 0.688);
        assert!((d.half_ulp - 5e-4).abs() < 1e-18);
        let d: Decimal = "0".parse().unwrap();
        assert_eq!(d.half_ulp, 0.0);
        let d: Decimal = "-0.12159".parse().unwrap();
        assert!((d.half_ulp - 5e-6).abs() < 1e-20);
        let d: Decimal = "1.5e-2".parse().unwrap();
        assert!((d.half_ulp - 5e-4).abs() < 1e-18);
        assert!("abc".parse::<Decimal>().is_err());
        assert!("inf".parse::<Decimal>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
