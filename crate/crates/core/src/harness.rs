//! Experiment orchestration: single recoveries, spectral-gap sweeps and
//! noise sweeps, emitted as fixed-schema CSV rows.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex;
use serde::Serialize;

use crate::bounds::{bound_thm1, bound_thm2, bound_thm3, bound_thm4, BoundReport};
use crate::error::{Error, Result};
use crate::graphs::{
    data_weighted_laplacian, erdos_renyi_connected, laplacian, path_graph, path_plus_random_edges,
    spectral_report, MeasurementGraph, DEFAULT_MAX_ATTEMPTS,
};
use crate::lifting::{recover, Method, RecoveryOutcome, SolverParams, TraceRow};
use crate::model::{hermitian_gaussian_noise, make_operator, synthesize_clean, unit_modulus_signal, ForwardOperator};

/// Absolute slack allowed when checking a measured error against a bound.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphSpec {
    Path,
    PathPlus { k: usize },
    ErdosRenyi { p: f64 },
}

impl GraphSpec {
    pub fn family(&self) -> &'static str {
        match self {
            GraphSpec::Path => "path",
            GraphSpec::PathPlus { .. } => "path+k",
            GraphSpec::ErdosRenyi { .. } => "er",
        }
    }

    fn k(&self) -> Option<usize> {
        match *self {
            GraphSpec::PathPlus { k } => Some(k),
            _ => None,
        }
    }

    fn p(&self) -> Option<f64> {
        match *self {
            GraphSpec::ErdosRenyi { p } => Some(p),
            _ => None,
        }
    }

    /// Draws the graph on `nodes` nodes.
    pub fn build(&self, nodes: usize, seed: u64, max_attempts: usize) -> Result<MeasurementGraph> {
        match *self {
            GraphSpec::Path => path_graph(nodes),
            GraphSpec::PathPlus { k } => path_plus_random_edges(nodes, k, seed),
            GraphSpec::ErdosRenyi { p } => erdos_renyi_connected(nodes, p, seed, max_attempts).map(|(g, _)| g),
        }
    }

    fn validate(&self, nodes: usize) -> Result<()> {
        if nodes < 2 {
            return Err(Error::Config(format!("graphs need at least 2 nodes, got {nodes}")));
        }
        match *self {
            GraphSpec::Path => Ok(()),
            GraphSpec::PathPlus { k } => {
                let room = nodes * (nodes - 1) / 2 - (nodes - 1);
                if k > room {
                    Err(Error::Config(format!("k = {k} exceeds the {room} available non-path pairs")))
                } else {
                    Ok(())
                }
            }
            GraphSpec::ErdosRenyi { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("edge probability must be in (0, 1), got {p}")))
                }
            }
        }
    }
}

/// Per-entry noise standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    Absolute(f64),
    /// Multiple of the spectral gap of the clean problem.
    RelativeToGap(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaPolicy {
    /// Minimize the misfit.
    Zero,
    /// Twice the l1 norm of the noise over the measured set.
    TwiceNoise,
    /// Twice the l1 norm of the noise over the edges only, leaving out the
    /// diagonal measurements of the general problem.
    TwiceNoiseEdges,
    Explicit(f64),
}

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Zero => f.write_str("zero"),
            SigmaPolicy::TwiceNoise => f.write_str("2x"),
            SigmaPolicy::TwiceNoiseEdges => f.write_str("2x-edges"),
            SigmaPolicy::Explicit(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SigmaPolicy::Zero),
            "2x" => Ok(SigmaPolicy::TwiceNoise),
            "2x-edges" => Ok(SigmaPolicy::TwiceNoiseEdges),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.is_finite())
                .map(SigmaPolicy::Explicit)
                .ok_or_else(|| Error::Config(format!("unknown sigma policy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Signal length.
    pub n: usize,
    /// `None` picks `path+k` with `k = 15` for the phase problem and
    /// Erdős–Rényi with `p = 1.5 ln(m) / m` for the general one.
    pub graph: Option<GraphSpec>,
    pub methods: Vec<Method>,
    /// Number of measurements for the general problem (default `2n`).
    pub m: Option<usize>,
    pub kappa: f64,
    /// `None` uses the command's default.
    pub noise: Option<NoiseSpec>,
    /// `None` uses the command's default.
    pub sigma_policy: Option<SigmaPolicy>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverParams<f64>,
    /// Extra-edge counts for the gap sweep.
    pub k_list: Vec<usize>,
    /// Edge probabilities for the gap sweep.
    pub p_list: Vec<f64>,
    /// Number of noise levels in the noise sweep.
    pub eta_points: usize,
    /// Noise sweep range as multiples of the gap.
    pub eta_rel_range: (f64, f64),
    pub max_attempts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 128,
            graph: None,
            methods: vec![Method::Eigenvector],
            m: None,
            kappa: 1.0,
            noise: None,
            sigma_policy: None,
            trials: 20,
            seed: 0,
            solver: SolverParams::default(),
            k_list: vec![1, 2, 3, 5, 8, 12, 20, 30, 50],
            p_list: vec![0.03, 0.04, 0.05],
            eta_points: 11,
            eta_rel_range: (1e-6, 1e-1),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl ExperimentConfig {
    pub fn measurements(&self) -> usize {
        self.m.unwrap_or(2 * self.n)
    }

    fn nodes(&self, method: Method) -> usize {
        if method.is_phase_problem() {
            self.n
        } else {
            self.measurements()
        }
    }

    fn graph_for(&self, method: Method) -> GraphSpec {
        self.graph.unwrap_or_else(|| {
            if method.is_phase_problem() {
                GraphSpec::PathPlus { k: 15 }
            } else {
                let m = self.measurements() as f64;
                GraphSpec::ErdosRenyi {
                    p: (1.5 * m.ln() / m).min(0.99),
                }
            }
        })
    }

    /// Rejects inconsistent settings before any work is done.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return cfg("n must be positive".into());
        }
        if self.methods.is_empty() {
            return cfg("at least one method is required".into());
        }
        if self.trials == 0 {
            return cfg("trials must be positive".into());
        }
        if !(self.kappa >= 1.0) || !self.kappa.is_finite() {
            return cfg(format!("kappa must be finite and >= 1, got {}", self.kappa));
        }
        if self.measurements() < self.n {
            return cfg(format!("m = {} must be at least n = {}", self.measurements(), self.n));
        }
        if self.n == 1 && self.kappa != 1.0 {
            return cfg("kappa must be 1 when n = 1".into());
        }
        match self.noise {
            Some(NoiseSpec::Absolute(v)) | Some(NoiseSpec::RelativeToGap(v)) if !(v >= 0.0) || !v.is_finite() => {
                return cfg(format!("noise level must be finite and >= 0, got {v}"));
            }
            _ => {}
        }
        let (lo, hi) = self.eta_rel_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return cfg(format!("bad noise range ({lo}, {hi})"));
        }
        if self.max_attempts == 0 {
            return cfg("max_attempts must be positive".into());
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        for &method in &self.methods {
            self.graph_for(method).validate(self.nodes(method))?;
        }
        Ok(())
    }
}

/// One row of experiment output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub graph: String,
    pub n: usize,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub edges: usize,
    pub lambda2: f64,
    pub lambda2_tilde: f64,
    pub eps_l1: f64,
    pub eps_spectral: f64,
    pub eps_inf: f64,
    pub sigma: f64,
    pub kappa: Option<f64>,
    pub method: String,
    pub aligned_error: f64,
    pub relative_error: f64,
    pub bound_value: f64,
    pub hypothesis_met: bool,
    pub achieved_misfit: Option<f64>,
    pub iterations: Option<usize>,
    pub runtime_ms: f64,
}

impl TrialRecord {
    /// The error the bound applies to: absolute for the phase problem,
    /// relative for the general one.
    pub fn bounded_error(&self) -> f64 {
        if self.m.is_some() {
            self.relative_error
        } else {
            self.aligned_error
        }
    }

    pub fn within_bound(&self) -> bool {
        !self.hypothesis_met || self.bounded_error() <= self.bound_value + CONTAINMENT_SLACK
    }
}

pub const CSV_COLUMNS: [&str; 23] = [
    "trial",
    "seed",
    "graph",
    "n",
    "m",
    "k",
    "p",
    "edges",
    "lambda2",
    "lambda2_tilde",
    "eps_l1",
    "eps_spectral",
    "eps_inf",
    "sigma",
    "kappa",
    "method",
    "aligned_error",
    "relative_error",
    "bound_value",
    "hypothesis_met",
    "achieved_misfit",
    "iterations",
    "runtime_ms",
];

/// Writes the header and rows. The header is written even with no rows.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[TrialRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent seed for `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

const STREAM_TRIAL: u64 = 1;
const STREAM_GRAPH: u64 = 2;
const STREAM_SIGNAL: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_OPERATOR: u64 = 5;

/// Everything a trial needs apart from the method.
struct TrialSetup<'a> {
    trial: usize,
    seed: u64,
    spec: GraphSpec,
    graph: &'a MeasurementGraph,
    noise: NoiseSpec,
    sigma_policy: SigmaPolicy,
}

/// A solved trial with its artifacts.
#[derive(Clone, Debug)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub x0: Vec<Complex<f64>>,
    pub x_hat: Vec<Complex<f64>>,
    pub trace: Vec<TraceRow<f64>>,
}

fn run_trial(cfg: &ExperimentConfig, method: Method, setup: &TrialSetup<'_>) -> Result<TrialRun> {
    let g = setup.graph;
    let general = !method.is_phase_problem();
    let n = cfg.n;
    let op: Option<ForwardOperator<f64>> = if general {
        Some(make_operator(
            cfg.measurements(),
            n,
            cfg.kappa,
            derive_seed(setup.seed, STREAM_OPERATOR, 0),
        )?)
    } else {
        None
    };
    let x0 = unit_modulus_signal::<f64>(n, derive_seed(setup.seed, STREAM_SIGNAL, 0));
    let clean = synthesize_clean(op.as_ref(), &x0, g, general)?;
    let lambda2 = match &op {
        None => spectral_report(&laplacian::<f64>(g))?.lambda2(),
        Some(a) => {
            let mags: Vec<f64> = a.apply(&x0).iter().map(|b| b.norm()).collect();
            spectral_report(&data_weighted_laplacian(g, &mags)?)?.lambda2()
        }
    };
    let eta = match setup.noise {
        NoiseSpec::Absolute(v) => v,
        NoiseSpec::RelativeToGap(r) => r * lambda2,
    };
    let noise = hermitian_gaussian_noise(g, eta, derive_seed(setup.seed, STREAM_NOISE, 0), general)?;
    let data = clean.try_add(&noise.data)?;
    let eps_l1 = noise.norms.l1_symmetric;
    let sigma = match setup.sigma_policy {
        SigmaPolicy::Zero => 0.0,
        SigmaPolicy::TwiceNoise => 2.0 * eps_l1,
        SigmaPolicy::TwiceNoiseEdges => {
            let diag: f64 = noise
                .data
                .iter()
                .filter(|&(i, j, _)| i == j)
                .map(|(_, _, v)| v.norm())
                .sum();
            2.0 * (eps_l1 - diag)
        }
        SigmaPolicy::Explicit(v) => v,
    };
    let params = SolverParams {
        sigma: Some(sigma),
        ..cfg.solver.clone()
    };
    let started = Instant::now();
    let mut outcome: RecoveryOutcome<f64> = recover(method, g, &data, op.as_ref(), &params)?;
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    outcome.align_to(&x0)?;
    let achieved = outcome.estimate.as_ref().map(|e| e.achieved_misfit);
    let bound: BoundReport<f64> = match method {
        Method::Eigenvector => bound_thm2(noise.norms.spectral, outcome.lambda2_tilde.max(0.0), n)?,
        Method::LiftedPhase => bound_thm1(eps_l1, achieved.unwrap_or(0.0), lambda2.max(0.0), n)?,
        Method::LiftedBasic => bound_thm3(eps_l1, achieved.unwrap_or(0.0), lambda2.max(0.0), op.as_ref().map_or(1.0, |a| a.kappa()))?,
        Method::LiftedTwostep => bound_thm4(eps_l1, achieved.unwrap_or(0.0), lambda2.max(0.0), op.as_ref().map_or(1.0, |a| a.kappa()))?,
    };
    let (trace, iterations) = match &outcome.estimate {
        Some(e) => (e.trace.clone(), Some(e.iterations)),
        None => (Vec::new(), None),
    };
    let record = TrialRecord {
        trial: setup.trial,
        seed: setup.seed,
        graph: setup.spec.family().to_string(),
        n,
        m: general.then(|| cfg.measurements()),
        k: setup.spec.k(),
        p: setup.spec.p(),
        edges: g.num_edges(),
        lambda2,
        lambda2_tilde: outcome.lambda2_tilde,
        eps_l1,
        eps_spectral: noise.norms.spectral,
        eps_inf: noise.norms.linf,
        sigma,
        kappa: op.as_ref().map(|a| a.kappa()),
        method: method.as_str().to_string(),
        aligned_error: outcome.aligned_error.unwrap_or(f64::NAN),
        relative_error: outcome.relative_error.unwrap_or(f64::NAN),
        bound_value: bound.value,
        hypothesis_met: bound.hypothesis_met,
        achieved_misfit: achieved,
        iterations,
        runtime_ms,
    };
    Ok(TrialRun {
        record,
        x0,
        x_hat: outcome.x_hat,
        trace,
    })
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.seed, STREAM_TRIAL, trial as u64)
}

/// Runs every method over `trials` realizations of the configured graph.
fn run_fixed_graph_trials(
    cfg: &ExperimentConfig,
    noise: NoiseSpec,
    sigma_policy: SigmaPolicy,
) -> Result<Vec<TrialRun>> {
    let mut out = Vec::new();
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg, trial);
        for &method in &cfg.methods {
            let spec = cfg.graph_for(method);
            let g = spec.build(cfg.nodes(method), derive_seed(seed, STREAM_GRAPH, 0), cfg.max_attempts)?;
            let setup = TrialSetup {
                trial,
                seed,
                spec,
                graph: &g,
                noise,
                sigma_policy,
            };
            out.push(run_trial(cfg, method, &setup)?);
        }
    }
    Ok(out)
}

/// One end-to-end recovery per method, with the recovered vector and the
/// solver trace kept. Uses trial 0 of the configured seed.
pub fn run_single(cfg: &ExperimentConfig) -> Result<Vec<TrialRun>> {
    cfg.validate()?;
    let single = ExperimentConfig {
        trials: 1,
        ..cfg.clone()
    };
    run_fixed_graph_trials(
        &single,
        cfg.noise.unwrap_or(NoiseSpec::Absolute(0.0)),
        cfg.sigma_policy.unwrap_or(SigmaPolicy::Zero),
    )
}

/// Recovery error across a family of graphs with different spectral gaps:
/// the path, the path plus `k` random edges for each `k` in `k_list`, and
/// connected Erdős–Rényi graphs for each `p` in `p_list`.
///
/// Defaults: the eigenvector method sees noise of level `1e-8`; lifted
/// methods see no noise and a target misfit of `1e-4`.
pub fn run_gap_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut family = vec![GraphSpec::Path];
    family.extend(cfg.k_list.iter().map(|&k| GraphSpec::PathPlus { k }));
    family.extend(cfg.p_list.iter().map(|&p| GraphSpec::ErdosRenyi { p }));
    for &method in &cfg.methods {
        for spec in &family {
            spec.validate(cfg.nodes(method))?;
        }
    }
    let mut out = Vec::new();
    let mut row = 0;
    for (gi, spec) in family.iter().enumerate() {
        for trial in 0..cfg.trials {
            let seed = trial_seed(cfg, trial);
            for &method in &cfg.methods {
                let (noise, sigma) = if method == Method::Eigenvector {
                    (cfg.noise.unwrap_or(NoiseSpec::Absolute(1e-8)), cfg.sigma_policy.unwrap_or(SigmaPolicy::Zero))
                } else {
                    (
                        cfg.noise.unwrap_or(NoiseSpec::Absolute(0.0)),
                        cfg.sigma_policy.unwrap_or(SigmaPolicy::Explicit(1e-4)),
                    )
                };
                let g = spec.build(
                    cfg.nodes(method),
                    derive_seed(seed, STREAM_GRAPH, gi as u64),
                    cfg.max_attempts,
                )?;
                let setup = TrialSetup {
                    trial: row,
                    seed,
                    spec: *spec,
                    graph: &g,
                    noise,
                    sigma_policy: sigma,
                };
                out.push(run_trial(cfg, method, &setup)?.record);
            }
            row += 1;
        }
    }
    Ok(out)
}

/// Log-spaced grid of `points` values between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
                .collect()
        }
    }
}

/// Recovery error on one fixed graph as the noise level runs over a
/// log-spaced grid relative to the spectral gap. The default σ policy is
/// twice the noise l1 norm.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    if cfg.eta_points == 0 {
        return Err(Error::Config("eta_points must be positive".into()));
    }
    let grid = log_grid(cfg.eta_rel_range.0, cfg.eta_rel_range.1, cfg.eta_points);
    let sigma_policy = cfg.sigma_policy.unwrap_or(SigmaPolicy::TwiceNoise);
    let graph_seed = derive_seed(cfg.seed, STREAM_GRAPH, 0);
    let mut graphs = Vec::new();
    for &method in &cfg.methods {
        let spec = cfg.graph_for(method);
        graphs.push((spec, spec.build(cfg.nodes(method), graph_seed, cfg.max_attempts)?));
    }
    let mut out = Vec::new();
    let mut row = 0;
    for &rel in &grid {
        for trial in 0..cfg.trials {
            let seed = trial_seed(cfg, trial);
            for (&method, (spec, g)) in cfg.methods.iter().zip(&graphs) {
                let setup = TrialSetup {
                    trial: row,
                    seed,
                    spec: *spec,
                    graph: g,
                    noise: NoiseSpec::RelativeToGap(rel),
                    sigma_policy,
                };
                out.push(run_trial(cfg, method, &setup)?.record);
            }
            row += 1;
        }
    }
    Ok(out)
}

/// Containment summary over a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub records: Vec<TrialRecord>,
    /// Rows whose hypothesis holds.
    pub checked: usize,
    /// Rows whose hypothesis holds and whose error exceeds the bound.
    pub violations: usize,
}

pub fn summarize_bounds(records: Vec<TrialRecord>) -> BoundCheck {
    let checked = records.iter().filter(|r| r.hypothesis_met).count();
    let violations = records.iter().filter(|r| !r.within_bound()).count();
    BoundCheck {
        records,
        checked,
        violations,
    }
}

/// Runs the configured trials and checks every row against its bound.
/// Defaults: noise at `1e-3` of the gap, σ twice the noise l1 norm.
pub fn check_bounds(cfg: &ExperimentConfig) -> Result<BoundCheck> {
    cfg.validate()?;
    let runs = run_fixed_graph_trials(
        cfg,
        cfg.noise.unwrap_or(NoiseSpec::RelativeToGap(1e-3)),
        cfg.sigma_policy.unwrap_or(SigmaPolicy::TwiceNoise),
    )?;
    Ok(summarize_bounds(runs.into_iter().map(|r| r.record).collect()))
}

/// Least-squares slope of `log10 y` against `log10 x` after dropping the
/// points with the smallest and largest `trim` fraction of `x` values.
/// Non-positive or non-finite points are ignored.
pub fn loglog_slope(xs: &[f64], ys: &[f64], trim: f64) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("slope inputs differ in length"));
    }
    let mut pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let drop = (pts.len() as f64 * trim).floor() as usize;
    let kept = if pts.len() > 2 * drop { &pts[drop..pts.len() - drop] } else { &pts[..] };
    if kept.len() < 2 {
        return Err(Error::invalid("need at least two positive points to fit a slope"));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("x values are all equal"));
    }
    Ok(sxy / sxx)
}
