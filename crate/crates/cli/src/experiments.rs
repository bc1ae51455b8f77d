//! Experiments comparing exact or sampled finite-N statistics with their
//! limit laws: histograms, confidence-interval coverage and phase diagrams.
//!
//! Every statistic here is a function of the average magnetization alone, so
//! each replication draws one atom of the magnetization law and the statistic
//! is evaluated once per distinct atom. Replication `r` uses the random stream
//! `(seed, r)`, and all reductions run in replication order, so outputs do not
//! depend on the number of worker threads.

use std::path::PathBuf;

use pspin_cw_core::estimate::{regular_interval_beta, regular_interval_h, MleSolver};
use pspin_cw_core::hfunc::{beta_check, critical_beta, critical_curve, critical_fields};
use pspin_cw_core::ks::{ks_sample, ks_weighted};
use pspin_cw_core::limit::{beta_mle_limit, g_law, h_mle_limit, sigma_limit, GKind};
use pspin_cw_core::sampler::MagnetizationSampler;
use pspin_cw_core::{
    analyze, beta_tilde, special_point, AnalysisConfig, ConfidenceInterval, HAnalysis, MagnetizationLaw,
    ModelParams, PointClass, RngStream, Scale, ScaledLaw,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::{fmt_f64, header_comment, json_f64, json_vec, Sink};

/// Atoms whose probability falls below this are left out of exact laws.
const EXACT_MASS_FLOOR: f64 = 1e-16;

/// Estimator solves per warm-started chunk. Fixed so that results do not
/// depend on the thread count.
const SOLVE_CHUNK: usize = 64;

/// Half-width of the neighbourhoods used to measure concentration masses.
pub const NEIGHBOURHOOD_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// The average magnetization.
    SigmaScaled,
    /// The field estimate at known `beta`.
    HMle,
    /// The inverse-temperature estimate at known `h`.
    BetaMle,
}

impl Statistic {
    pub fn tag(self) -> &'static str {
        match self {
            Statistic::SigmaScaled => "sigma",
            Statistic::HMle => "h-mle",
            Statistic::BetaMle => "beta-mle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub replications: usize,
    pub statistic: Statistic,
    /// Requested scaling; `None` takes the one attached to the limit law.
    pub scale: Option<Scale>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(params: ModelParams, statistic: Statistic, replications: usize, seed: u64) -> Self {
        Self { params, replications, statistic, scale: None, seed, output_path: None }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replications < 1 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let p = &self.params;
        format!(
            "beta={} h={} p={} n={} statistic={} replications={} seed={}",
            p.beta,
            p.h,
            p.p,
            p.n,
            self.statistic.tag(),
            self.replications,
            self.seed
        )
    }
}

/// Worker-pool settings shared by all experiments.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunConfig {
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl RunConfig {
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            builder = builder.num_threads(t.max(1));
        }
        Ok(builder.build()?.install(f))
    }
}

/// Limit law of `statistic` at an analyzed point.
pub fn statistic_limit(statistic: Statistic, analysis: &HAnalysis) -> Result<ScaledLaw> {
    let special = analysis.classification == PointClass::Special;
    Ok(match statistic {
        Statistic::SigmaScaled => sigma_limit(analysis)?,
        Statistic::HMle if special => g_law(GKind::G1, analysis)?,
        Statistic::HMle => h_mle_limit(analysis)?,
        Statistic::BetaMle if special => g_law(GKind::G2, analysis)?,
        Statistic::BetaMle => beta_mle_limit(analysis)?,
    })
}

/// Goodness of fit of a finite-N law against a limit law.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub ks_statistic: f64,
    /// Replications, or atoms of the exact law.
    pub n_effective: usize,
    pub limit_law_id: String,
    pub tolerance: f64,
    pub pass: bool,
}

impl ComparisonReport {
    fn new(ks_statistic: f64, n_effective: usize, limit: &ScaledLaw, tolerance: f64) -> Self {
        Self {
            ks_statistic,
            n_effective,
            limit_law_id: limit.law.id(),
            tolerance,
            pass: ks_statistic <= tolerance,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ks_statistic": self.ks_statistic,
            "n_effective": self.n_effective,
            "limit_law_id": self.limit_law_id,
            "tolerance": self.tolerance,
            "pass": self.pass,
        })
    }
}

/// Mass observed near one atom of a purely atomic limit law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighbourhoodMass {
    pub center: f64,
    pub expected: f64,
    pub observed: f64,
}

impl NeighbourhoodMass {
    fn to_json(self) -> Value {
        json!({
            "center": json_f64(self.center),
            "expected": self.expected,
            "observed": self.observed,
        })
    }
}

/// The statistic evaluated on the atoms of the magnetization law.
struct AtomTable {
    /// Atom indices, increasing.
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl AtomTable {
    fn value(&self, k: usize) -> f64 {
        let i = self.indices.binary_search(&k).expect("atom was tabulated");
        self.values[i]
    }
}

fn evaluate_atoms(solver: &MleSolver, statistic: Statistic, params: &ModelParams, indices: Vec<usize>) -> Result<AtomTable> {
    let support = solver.lattice().support();
    let chunks: Vec<Vec<f64>> = indices
        .par_chunks(SOLVE_CHUNK)
        .map(|chunk| -> Result<Vec<f64>> {
            let mut prev: Option<f64> = None;
            let mut out = Vec::with_capacity(chunk.len());
            for &k in chunk {
                let s = support[k];
                let r = match statistic {
                    Statistic::SigmaScaled => {
                        out.push(s);
                        continue;
                    }
                    Statistic::HMle => solver.mle_h_from(s, params.beta, prev)?,
                    Statistic::BetaMle => solver.mle_beta_from(s, params.h, prev)?,
                };
                if r.is_finite() {
                    prev = Some(r.estimate);
                }
                out.push(r.estimate);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(AtomTable { indices, values: chunks.into_iter().flatten().collect() })
}

/// Atoms carrying non-negligible mass.
fn heavy_atoms(law: &MagnetizationLaw) -> Vec<usize> {
    let floor = EXACT_MASS_FLOOR.ln();
    law.log_prob().iter().enumerate().filter(|(_, &lp)| lp >= floor).map(|(k, _)| k).collect()
}

/// Draws one atom index per replication.
fn draw_atoms(law: &MagnetizationLaw, seed: u64, replications: usize) -> Vec<usize> {
    let sampler = MagnetizationSampler::new(law);
    (0..replications)
        .into_par_iter()
        .map(|r| sampler.sample_index(&mut RngStream::new(seed, r as u64).open()))
        .collect()
}

fn distinct(mut ks: Vec<usize>) -> Vec<usize> {
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn is_atomic(limit: &ScaledLaw) -> bool {
    limit.scale == Scale::None && limit.law.continuous_mass() == 0.0
}

/// Moves a value onto the nearest atom of the limit law.
///
/// Unscaled atomic limits describe concentration, not the location of the
/// finite-N atoms, so the comparison is made after this projection. Finite
/// atoms compete by ordinary distance; an infinite atom wins when the value is
/// closer to it than to the best finite atom in the `atan` metric of the
/// extended line, which sends diverging estimates to their infinite limit.
fn project(value: f64, atoms: &[f64]) -> f64 {
    if !value.is_finite() {
        return value;
    }
    let finite = atoms
        .iter()
        .copied()
        .filter(|a| a.is_finite())
        .min_by(|a, b| (a - value).abs().total_cmp(&(b - value).abs()));
    let gap = |a: f64| (value.atan() - a.atan()).abs();
    let infinite = atoms.iter().copied().filter(|a| a.is_infinite()).min_by(|a, b| gap(*a).total_cmp(&gap(*b)));
    match (finite, infinite) {
        (Some(f), Some(i)) if gap(i) < gap(f) => i,
        (Some(f), _) => f,
        (None, Some(i)) => i,
        (None, None) => value,
    }
}

/// Concentration masses: within [`NEIGHBOURHOOD_RADIUS`] of each finite atom,
/// and projected onto each infinite atom.
fn neighbourhoods(limit: &ScaledLaw, points: &[(f64, f64)]) -> Vec<NeighbourhoodMass> {
    let atoms = limit.law.atoms();
    let locations: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    atoms
        .into_iter()
        .map(|(center, expected)| {
            let near = |x: f64| {
                if center.is_finite() {
                    (x - center).abs() <= NEIGHBOURHOOD_RADIUS
                } else {
                    project(x, &locations) == center
                }
            };
            let observed = points.iter().filter(|(x, _)| near(*x)).map(|(_, w)| w).sum();
            NeighbourhoodMass { center, expected, observed }
        })
        .collect()
}

fn compare(points: &[(f64, f64)], limit: &ScaledLaw, n_effective: usize, tolerance: f64) -> ComparisonReport {
    let ks = if is_atomic(limit) {
        let atoms: Vec<f64> = limit.law.atoms().iter().map(|a| a.0).collect();
        let projected: Vec<(f64, f64)> = points.iter().map(|&(x, w)| (project(x, &atoms), w)).collect();
        ks_weighted(&projected, &limit.law)
    } else {
        ks_weighted(points, &limit.law)
    };
    ComparisonReport::new(ks, n_effective, limit, tolerance)
}

/// Options for [`run_histogram`].
#[derive(Debug, Clone, Copy)]
pub struct HistogramOptions {
    /// Also compare the exact finite-N law of the statistic.
    pub exact: bool,
    /// KS tolerance declared for the pass flag.
    pub tolerance: f64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self { exact: true, tolerance: 0.02 }
    }
}

/// One sampled replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRow {
    pub replication: usize,
    pub sigma_bar: f64,
    pub statistic: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone)]
pub struct HistogramOutcome {
    pub spec: ExperimentSpec,
    pub analysis: HAnalysis,
    pub limit: ScaledLaw,
    pub sampled: ComparisonReport,
    pub exact: Option<ComparisonReport>,
    /// Concentration masses for atomic limits (sampled, exact).
    pub sampled_neighbourhoods: Vec<NeighbourhoodMass>,
    pub exact_neighbourhoods: Vec<NeighbourhoodMass>,
    /// The exact law of the scaled statistic as `(value, mass)`.
    pub exact_law: Vec<(f64, f64)>,
    pub rows: Vec<HistogramRow>,
}

impl HistogramOutcome {
    pub fn summary(&self) -> Value {
        let a = &self.analysis;
        json!({
            "experiment": "histogram",
            "version": crate::format::VERSION,
            "params": params_json(&self.spec.params),
            "statistic": self.spec.statistic.tag(),
            "replications": self.spec.replications,
            "seed": self.spec.seed,
            "class": a.classification.tag(),
            "maximizers": json_vec(&a.maximizers),
            "weights": json_vec(&a.weights),
            "scale": self.limit.scale.tag(),
            "center": self.limit.center,
            "sampled": self.sampled.to_json(),
            "exact": self.exact.as_ref().map(ComparisonReport::to_json),
            "sampled_neighbourhoods": self.sampled_neighbourhoods.iter().map(|n| n.to_json()).collect::<Vec<_>>(),
            "exact_neighbourhoods": self.exact_neighbourhoods.iter().map(|n| n.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![r.replication.to_string(), fmt_f64(r.sigma_bar), fmt_f64(r.statistic), fmt_f64(r.scaled)]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 4] = ["replication", "sigma_bar", "statistic", "scaled"];

    /// Writes the replication table to the spec's output path (stdout when unset).
    pub fn write_csv(&self) -> Result<()> {
        let sink = Sink::from_option(self.spec.output_path.as_deref());
        sink.write_csv(&header_comment("histogram", &self.spec.describe()), &Self::CSV_HEADER, &self.csv_rows())
    }
}

fn params_json(p: &ModelParams) -> Value {
    json!({ "beta": p.beta, "h": p.h, "p": p.p, "n": p.n })
}

/// Samples the statistic `replications` times and compares it, and optionally
/// its exact finite-N law, with the limit law at `spec.params`.
pub fn run_histogram(spec: &ExperimentSpec, options: HistogramOptions, run: RunConfig) -> Result<HistogramOutcome> {
    spec.validate()?;
    let params = spec.params;
    let analysis = analyze(params.beta, params.h, params.p, &AnalysisConfig::default())?;
    let limit = statistic_limit(spec.statistic, &analysis)?;
    if let Some(scale) = spec.scale {
        if scale != limit.scale {
            return Err(Error::Config(format!(
                "scale {} does not match the limit law at a {} point (expected {})",
                scale.tag(),
                analysis.classification.tag(),
                limit.scale.tag()
            )));
        }
    }
    run.install(|| histogram_inner(spec, options, analysis, limit))?
}

fn histogram_inner(
    spec: &ExperimentSpec,
    options: HistogramOptions,
    analysis: HAnalysis,
    limit: ScaledLaw,
) -> Result<HistogramOutcome> {
    let params = spec.params;
    let n = params.n;
    let solver = MleSolver::new(n, params.p)?;
    let law = solver.lattice().law(params.beta, params.h);
    let drawn = draw_atoms(&law, spec.seed, spec.replications);

    let mut needed = drawn.clone();
    if options.exact {
        needed.extend(heavy_atoms(&law));
    }
    let table = evaluate_atoms(&solver, spec.statistic, &params, distinct(needed))?;

    let support = law.support();
    let rows: Vec<HistogramRow> = drawn
        .iter()
        .enumerate()
        .map(|(r, &k)| {
            let statistic = table.value(k);
            HistogramRow { replication: r, sigma_bar: support[k], statistic, scaled: limit.transform(statistic, n) }
        })
        .collect();
    let w = 1.0 / rows.len() as f64;
    let sampled_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.scaled, w)).collect();
    let sampled = if is_atomic(&limit) {
        compare(&sampled_points, &limit, rows.len(), options.tolerance)
    } else {
        let values: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
        ComparisonReport::new(ks_sample(&values, &limit.law), rows.len(), &limit, options.tolerance)
    };
    let atomic = is_atomic(&limit);
    let sampled_neighbourhoods = if atomic { neighbourhoods(&limit, &sampled_points) } else { Vec::new() };

    let (exact, exact_neighbourhoods, exact_law) = if options.exact {
        let heavy = heavy_atoms(&law);
        let total: f64 = heavy.iter().map(|&k| law.log_prob()[k].exp()).sum();
        let points: Vec<(f64, f64)> =
            heavy.iter().map(|&k| (limit.transform(table.value(k), n), law.log_prob()[k].exp() / total)).collect();
        let report = compare(&points, &limit, points.len(), options.tolerance);
        let hoods = if atomic { neighbourhoods(&limit, &points) } else { Vec::new() };
        (Some(report), hoods, points)
    } else {
        (None, Vec::new(), Vec::new())
    };

    Ok(HistogramOutcome {
        spec: spec.clone(),
        analysis,
        limit,
        sampled,
        exact,
        sampled_neighbourhoods,
        exact_neighbourhoods,
        exact_law,
        rows,
    })
}

/// One replication of a coverage experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub replication: usize,
    pub sigma_bar: f64,
    pub estimate: f64,
    /// Regular interval; `None` when the estimate is infinite or the plug-in
    /// variance is unavailable, leaving only the critical-set points.
    pub interval: Option<(f64, f64)>,
    pub covered_regular: bool,
    pub covered: bool,
}

#[derive(Debug, Clone)]
pub struct CoverageOutcome {
    pub spec: ExperimentSpec,
    pub alpha: f64,
    pub truth: f64,
    pub augmentation: Vec<f64>,
    pub rows: Vec<CoverageRow>,
    /// Fraction of replications whose augmented set contains the truth.
    pub coverage: f64,
    pub coverage_regular: f64,
    /// `sqrt(c (1 - c) / R)`.
    pub mc_se: f64,
    /// Coverage of the augmented set under the exact law of the magnetization.
    pub exact_coverage: f64,
}

impl CoverageOutcome {
    pub const CSV_HEADER: [&'static str; 9] =
        ["replication", "sigma_bar", "estimate", "lower", "upper", "covered_regular", "covered", "coverage", "mc_se"];

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let (lo, hi) = r.interval.map(|(a, b)| (fmt_f64(a), fmt_f64(b))).unwrap_or_default();
                vec![
                    r.replication.to_string(),
                    fmt_f64(r.sigma_bar),
                    fmt_f64(r.estimate),
                    lo,
                    hi,
                    u8::from(r.covered_regular).to_string(),
                    u8::from(r.covered).to_string(),
                    String::new(),
                    String::new(),
                ]
            })
            .collect();
        let mut summary = vec![String::new(); Self::CSV_HEADER.len()];
        summary[0] = "summary".into();
        summary[7] = fmt_f64(self.coverage);
        summary[8] = fmt_f64(self.mc_se);
        out.push(summary);
        out
    }

    pub fn write_csv(&self) -> Result<()> {
        let sink = Sink::from_option(self.spec.output_path.as_deref());
        let params = format!("{} alpha={}", self.spec.describe(), self.alpha);
        sink.write_csv(&header_comment("coverage", &params), &Self::CSV_HEADER, &self.csv_rows())
    }

    pub fn summary(&self) -> Value {
        json!({
            "experiment": "coverage",
            "version": crate::format::VERSION,
            "params": params_json(&self.spec.params),
            "statistic": self.spec.statistic.tag(),
            "replications": self.spec.replications,
            "seed": self.spec.seed,
            "alpha": self.alpha,
            "truth": self.truth,
            "augmentation": json_vec(&self.augmentation),
            "coverage": self.coverage,
            "coverage_regular": self.coverage_regular,
            "mc_se": self.mc_se,
            "exact_coverage": self.exact_coverage,
        })
    }
}

/// Confidence set built from one atom of the magnetization law.
#[derive(Debug, Clone, PartialEq)]
struct AtomInterval {
    estimate: f64,
    interval: Option<(f64, f64)>,
}

/// Draws `replications` magnetizations, builds the augmented confidence set
/// for the parameter targeted by `spec.statistic`, and records whether it
/// contains the true value.
pub fn run_coverage(spec: &ExperimentSpec, alpha: f64, run: RunConfig) -> Result<CoverageOutcome> {
    spec.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config("alpha must lie in (0, 1]".into()));
    }
    let params = spec.params;
    let (truth, augmentation) = match spec.statistic {
        Statistic::HMle => (params.h, critical_fields(params.p, params.beta)?),
        Statistic::BetaMle => {
            if params.h == 0.0 {
                return Err(Error::Config("coverage for beta needs h != 0".into()));
            }
            (params.beta, critical_beta(params.p, params.h)?.into_iter().collect())
        }
        Statistic::SigmaScaled => {
            return Err(Error::Config("coverage needs an estimator statistic (h-mle or beta-mle)".into()))
        }
    };
    run.install(|| coverage_inner(spec, alpha, truth, augmentation))?
}

fn coverage_inner(spec: &ExperimentSpec, alpha: f64, truth: f64, augmentation: Vec<f64>) -> Result<CoverageOutcome> {
    let params = spec.params;
    let (n, p) = (params.n, params.p);
    let solver = MleSolver::new(n, p)?;
    let law = solver.lattice().law(params.beta, params.h);
    let drawn = draw_atoms(&law, spec.seed, spec.replications);
    let heavy = heavy_atoms(&law);
    let mut needed = drawn.clone();
    needed.extend(&heavy);
    let table = evaluate_atoms(&solver, spec.statistic, &params, distinct(needed))?;
    let support = law.support();

    let intervals: Vec<AtomInterval> = table
        .indices
        .par_iter()
        .zip(&table.values)
        .map(|(&k, &estimate)| {
            let s = support[k];
            let interval = if estimate.is_finite() {
                let built = match spec.statistic {
                    Statistic::HMle => regular_interval_h(estimate, s, params.beta, p, n, alpha),
                    _ => regular_interval_beta(estimate, s, p, n, alpha),
                };
                built.ok()
            } else {
                None
            };
            AtomInterval { estimate, interval }
        })
        .collect();
    let lookup = |k: usize| &intervals[table.indices.binary_search(&k).expect("atom was tabulated")];
    let set = |iv: &AtomInterval| ConfidenceInterval {
        lower: iv.interval.map_or(f64::NAN, |i| i.0),
        upper: iv.interval.map_or(f64::NAN, |i| i.1),
        augmentation: augmentation.clone(),
        level: 1.0 - alpha,
    };

    let rows: Vec<CoverageRow> = drawn
        .iter()
        .enumerate()
        .map(|(r, &k)| {
            let iv = lookup(k);
            let ci = set(iv);
            CoverageRow {
                replication: r,
                sigma_bar: support[k],
                estimate: iv.estimate,
                interval: iv.interval,
                covered_regular: iv.interval.is_some() && ci.contains_regular(truth),
                covered: ci.contains(truth),
            }
        })
        .collect();
    let r = rows.len() as f64;
    let coverage = rows.iter().filter(|row| row.covered).count() as f64 / r;
    let coverage_regular = rows.iter().filter(|row| row.covered_regular).count() as f64 / r;
    let mc_se = (coverage * (1.0 - coverage) / r).sqrt();

    let total: f64 = heavy.iter().map(|&k| law.log_prob()[k].exp()).sum();
    let exact_coverage =
        heavy.iter().filter(|&&k| set(lookup(k)).contains(truth)).map(|&k| law.log_prob()[k].exp()).sum::<f64>() / total;

    Ok(CoverageOutcome {
        spec: spec.clone(),
        alpha,
        truth,
        augmentation,
        rows,
        coverage,
        coverage_regular,
        mc_se,
        exact_coverage,
    })
}

/// Region and resolution of a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDiagramSpec {
    pub p: u32,
    pub beta_range: (f64, f64),
    pub h_range: (f64, f64),
    /// Grid points along `beta` and `h`.
    pub grid: (usize, usize),
    /// Samples of the critical curve.
    pub curve_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Grid,
    Curve,
    Special,
    StronglyCritical,
}

impl Layer {
    pub fn tag(self) -> &'static str {
        match self {
            Layer::Grid => "grid",
            Layer::Curve => "curve",
            Layer::Special => "special",
            Layer::StronglyCritical => "strongly-critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub layer: Layer,
    pub analysis: HAnalysis,
}

#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub spec: PhaseDiagramSpec,
    pub rows: Vec<PhaseRow>,
}

impl PhaseDiagram {
    pub fn layer(&self, layer: Layer) -> impl Iterator<Item = &HAnalysis> {
        self.rows.iter().filter(move |r| r.layer == layer).map(|r| &r.analysis)
    }

    pub const CSV_HEADER: [&'static str; 14] =
        ["layer", "beta", "h", "class", "k", "m1", "m2", "m3", "h2_1", "h2_2", "h2_3", "p1", "p2", "p3"];

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let triple = |xs: &[f64]| -> [String; 3] {
            std::array::from_fn(|i| xs.get(i).map(|&x| fmt_f64(x)).unwrap_or_default())
        };
        self.rows
            .iter()
            .map(|row| {
                let a = &row.analysis;
                let mut out = vec![
                    row.layer.tag().to_string(),
                    fmt_f64(a.beta),
                    fmt_f64(a.h),
                    a.classification.tag().to_string(),
                    a.maximizers.len().to_string(),
                ];
                out.extend(triple(&a.maximizers));
                out.extend(triple(&a.second_derivs));
                out.extend(triple(&a.weights));
                out
            })
            .collect()
    }

    pub fn write_csv(&self, sink: &Sink) -> Result<()> {
        let s = &self.spec;
        let params = format!(
            "p={} beta=[{},{}] h=[{},{}] grid={}x{} curve_points={}",
            s.p, s.beta_range.0, s.beta_range.1, s.h_range.0, s.h_range.1, s.grid.0, s.grid.1, s.curve_points
        );
        sink.write_csv(&header_comment("phase-diagram", &params), &Self::CSV_HEADER, &self.csv_rows())
    }

    pub fn summary(&self) -> Value {
        let count = |c: PointClass| self.layer(Layer::Grid).filter(|a| a.classification == c).count();
        let points = |l: Layer| self.layer(l).map(|a| json!([a.beta, a.h])).collect::<Vec<_>>();
        json!({
            "experiment": "phase-diagram",
            "version": crate::format::VERSION,
            "p": self.spec.p,
            "grid": [self.spec.grid.0, self.spec.grid.1],
            "counts": {
                "regular": count(PointClass::Regular),
                "special": count(PointClass::Special),
                "weakly-critical": count(PointClass::WeaklyCritical),
                "strongly-critical": count(PointClass::StronglyCritical),
            },
            "curve_points": self.layer(Layer::Curve).count(),
            "special": points(Layer::Special),
            "strongly-critical": points(Layer::StronglyCritical),
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Classifies a grid of points and traces the critical curve, the special
/// point(s) and, for even `p`, the strongly critical point.
///
/// The curve layer starts at the special point, where it terminates.
pub fn phase_diagram(spec: &PhaseDiagramSpec, run: RunConfig) -> Result<PhaseDiagram> {
    let (nb, nh) = spec.grid;
    if nb < 2 || nh < 2 {
        return Err(Error::Config("the grid needs at least 2x2 points".into()));
    }
    let (b0, b1) = spec.beta_range;
    let (h0, h1) = spec.h_range;
    if !(b0 < b1 && h0 < h1) || b0 < 0.0 {
        return Err(Error::Config("ranges must be increasing with beta >= 0".into()));
    }
    run.install(|| phase_inner(spec))?
}

fn phase_inner(spec: &PhaseDiagramSpec) -> Result<PhaseDiagram> {
    let p = spec.p;
    let cfg = AnalysisConfig::default();
    let points: Vec<(f64, f64)> = linspace(spec.beta_range.0, spec.beta_range.1, spec.grid.0)
        .flat_map(|b| linspace(spec.h_range.0, spec.h_range.1, spec.grid.1).map(move |h| (b, h)))
        .collect();
    let grid: Vec<HAnalysis> = points.par_iter().map(|&(b, h)| analyze(b, h, p, &cfg)).collect::<pspin_cw_core::Result<_>>()?;
    let mut rows: Vec<PhaseRow> = grid.into_iter().map(|analysis| PhaseRow { layer: Layer::Grid, analysis }).collect();

    let specials: Vec<(f64, f64)> = match p {
        2 => Vec::new(),
        _ if p % 2 == 0 => vec![special_point(p, 1)?, special_point(p, -1)?],
        _ => vec![special_point(p, 1)?],
    };

    // curve samples strictly beyond the special point
    let start = if p == 2 { 0.5 } else { beta_check(p) };
    let b_lo = start.max(spec.beta_range.0);
    let b_hi = spec.beta_range.1;
    let mut curve_points: Vec<(f64, f64)> = Vec::new();
    if p >= 3 && spec.beta_range.0 <= start {
        curve_points.extend(specials.iter().copied());
    }
    if b_lo < b_hi && spec.curve_points > 0 {
        let betas: Vec<f64> =
            (1..=spec.curve_points).map(|i| b_lo + (b_hi - b_lo) * i as f64 / spec.curve_points as f64).collect();
        let fields: Vec<Option<f64>> = betas.par_iter().map(|&b| critical_curve(p, b)).collect::<pspin_cw_core::Result<_>>()?;
        for (&b, phi) in betas.iter().zip(fields) {
            let Some(phi) = phi else { continue };
            let mirrored = p % 2 == 0 && phi != 0.0;
            for h in if mirrored { vec![phi, -phi] } else { vec![phi] } {
                if h >= spec.h_range.0 && h <= spec.h_range.1 {
                    curve_points.push((b, h));
                }
            }
        }
    }
    let curve: Vec<HAnalysis> =
        curve_points.par_iter().map(|&(b, h)| analyze(b, h, p, &cfg)).collect::<pspin_cw_core::Result<_>>()?;
    rows.extend(curve.into_iter().map(|analysis| PhaseRow { layer: Layer::Curve, analysis }));

    for (b, h) in specials {
        rows.push(PhaseRow { layer: Layer::Special, analysis: analyze(b, h, p, &cfg)? });
    }
    if p >= 3 && p % 2 == 0 {
        rows.push(PhaseRow { layer: Layer::StronglyCritical, analysis: analyze(beta_tilde(p), 0.0, p, &cfg)? });
    }
    Ok(PhaseDiagram { spec: *spec, rows })
}

/// Limit law of a statistic, as JSON, with CDF values at `at`.
pub fn limit_law_json(statistic: Statistic, analysis: &HAnalysis, at: &[f64]) -> Result<Value> {
    let limit = statistic_limit(statistic, analysis)?;
    let atoms: Vec<Value> = limit.law.atoms().iter().map(|&(x, w)| json!({"location": json_f64(x), "mass": w})).collect();
    let cdf: Vec<Value> = at.iter().map(|&x| json!({"x": json_f64(x), "cdf": limit.law.cdf(x)})).collect();
    Ok(json!({
        "statistic": statistic.tag(),
        "class": analysis.classification.tag(),
        "law": limit.law.id(),
        "scale": limit.scale.tag(),
        "center": limit.center,
        "mean": json_f64(limit.law.mean()),
        "atoms": atoms,
        "continuous_mass": limit.law.continuous_mass(),
        "cdf": cdf,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_keeps_infinities() {
        let atoms = [f64::NEG_INFINITY, 0.7];
        assert_eq!(project(f64::NEG_INFINITY, &atoms), f64::NEG_INFINITY);
        assert_eq!(project(0.2, &atoms), 0.7);
        assert_eq!(project(-0.2, &atoms), 0.7);
        assert_eq!(project(-3.0, &atoms), f64::NEG_INFINITY);
        assert_eq!(project(0.2, &[-0.5, 0.5]), 0.5);
        assert_eq!(project(0.2, &[]), 0.2);
    }

    #[test]
    fn linspace_endpoints() {
        let xs: Vec<f64> = linspace(-1.0, 1.0, 5).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn scale_mismatch_rejected() {
        let params = ModelParams::new(0.2, 0.1, 4, 200).unwrap();
        let mut spec = ExperimentSpec::new(params, Statistic::SigmaScaled, 10, 1);
        spec.scale = Some(Scale::QuarterN);
        assert!(matches!(run_histogram(&spec, HistogramOptions::default(), RunConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_one_gives_zero_coverage() {
        let params = ModelParams::new(0.5, 0.2, 3, 500).unwrap();
        let spec = ExperimentSpec::new(params, Statistic::BetaMle, 200, 3);
        let out = run_coverage(&spec, 1.0, RunConfig { threads: Some(2) }).unwrap();
        assert_eq!(out.coverage_regular, 0.0);
        assert_eq!(out.coverage, 0.0);
        assert_eq!(out.mc_se, 0.0);
    }

    #[test]
    fn sigma_coverage_rejected() {
        let params = ModelParams::new(0.5, 0.2, 3, 50).unwrap();
        let spec = ExperimentSpec::new(params, Statistic::SigmaScaled, 5, 0);
        assert!(run_coverage(&spec, 0.05, RunConfig::default()).is_err());
    }
}
