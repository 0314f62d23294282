use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interf_core::harness::{
    self, ExperimentConfig, GraphSpec, NoiseSpec, SigmaPolicy, TrialRun,
};
use interf_core::lifting::{Method, WarmStart};
use interf_core::{Error, Result};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "interf", version, about = "Interferometric recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a measurement graph as an edge list.
    GenGraph(Opts),
    /// One recovery per method; optional recovered-vector and trace files.
    Single(Opts),
    /// Error against the spectral gap over path, path+k and ER graphs.
    SweepGap(Opts),
    /// Error against the noise level on a fixed graph.
    SweepNoise(Opts),
    /// Check every trial against its theoretical bound.
    CheckBounds(Opts),
}

/// Flags and config-file keys share names; flags win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Opts {
    /// Key-value (TOML) file with the same keys as the flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// path, path+k or er
    #[arg(long)]
    graph: Option<String>,
    /// Extra edges for path+k. For sweep-gap, a comma list.
    #[arg(long)]
    #[serde(default, deserialize_with = "number_or_text")]
    k: Option<String>,
    /// Edge probability for er. For sweep-gap, a comma list.
    #[arg(long)]
    #[serde(default, deserialize_with = "number_or_text")]
    p: Option<String>,
    /// Comma list of eigenvector, lifted-phase, lifted-basic, lifted-twostep.
    #[arg(long)]
    method: Option<String>,
    /// Number of measurements for the general problem (default 2n).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Absolute noise level.
    #[arg(long, conflicts_with = "eta_rel")]
    eta: Option<f64>,
    /// Noise level relative to the spectral gap. For sweep-noise, `lo:hi`.
    #[arg(long)]
    #[serde(default, deserialize_with = "number_or_text")]
    eta_rel: Option<String>,
    /// Grid size for sweep-noise.
    #[arg(long)]
    eta_points: Option<usize>,
    /// zero, 2x, 2x-edges or a number.
    #[arg(long)]
    sigma_policy: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// identity or spectral
    #[arg(long)]
    warm_start: Option<String>,
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver trace CSV (single only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Recovered vector CSV (single only).
    #[arg(long)]
    vector: Option<PathBuf>,
}

/// Lets file values like `k = 5` and `k = "1,2,5"` both through.
fn number_or_text<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }
    Ok(Some(match Raw::deserialize(d)? {
        Raw::Int(v) => v.to_string(),
        Raw::Float(v) => v.to_string(),
        Raw::Text(v) => v,
    }))
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl Opts {
    /// File values first, then any flag given on the command line.
    fn resolve(self) -> Result<Opts> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = fs::read_to_string(path)?;
        let mut base: Opts = toml::from_str(&text).map_err(|e| Error::Config(e.message().to_string()))?;
        let top = self;
        overlay!(base, top; n, graph, k, p, method, m, kappa, eta, eta_rel, eta_points,
            sigma_policy, trials, seed, max_iter, rho, warm_start, out, trace, vector);
        if base.eta.is_some() && base.eta_rel.is_some() {
            return Err(Error::Config("eta and eta-rel are exclusive".into()));
        }
        Ok(base)
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| config_err(format!("bad {key} value {v:?}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    match parse_list(s, key)?.pop() {
        Some(v) if !s.contains(',') => Ok(v),
        _ => Err(config_err(format!("{key} takes a single value here, got {s:?}"))),
    }
}

fn graph_spec(o: &Opts, n: usize, m: Option<usize>) -> Result<Option<GraphSpec>> {
    let Some(g) = o.graph.as_deref() else {
        return Ok(None);
    };
    let spec = match g {
        "path" => GraphSpec::Path,
        "path+k" => GraphSpec::PathPlus {
            k: o.k.as_deref().map(|k| parse_one(k, "k")).transpose()?.unwrap_or(15),
        },
        "er" => {
            let p = match o.p.as_deref() {
                Some(p) => parse_one(p, "p")?,
                None => {
                    let nodes = m.unwrap_or(n) as f64;
                    (1.5 * nodes.ln() / nodes).min(0.99)
                }
            };
            GraphSpec::ErdosRenyi { p }
        }
        other => return Err(config_err(format!("unknown graph {other:?}, expected path, path+k or er"))),
    };
    Ok(Some(spec))
}

fn build_config(o: &Opts, sweep_noise: bool) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(n) = o.n {
        cfg.n = n;
    }
    cfg.m = o.m;
    if let Some(methods) = &o.method {
        cfg.methods = methods
            .split(',')
            .map(|s| s.trim().parse::<Method>())
            .collect::<Result<_>>()?;
    }
    let general = cfg.methods.iter().any(|m| !m.is_phase_problem());
    cfg.graph = graph_spec(o, cfg.n, general.then(|| cfg.measurements()))?;
    if let Some(k) = &o.k {
        cfg.k_list = parse_list(k, "k")?;
    }
    if let Some(p) = &o.p {
        cfg.p_list = parse_list(p, "p")?;
    }
    if let Some(kappa) = o.kappa {
        cfg.kappa = kappa;
    }
    if let Some(eta) = o.eta {
        cfg.noise = Some(NoiseSpec::Absolute(eta));
    }
    if let Some(rel) = &o.eta_rel {
        match rel.split_once(':') {
            Some((lo, hi)) if sweep_noise => {
                cfg.eta_rel_range = (parse_one(lo, "eta-rel")?, parse_one(hi, "eta-rel")?);
            }
            Some(_) => return Err(config_err("an eta-rel range is only valid for sweep-noise")),
            None if sweep_noise => {
                let v = parse_one(rel, "eta-rel")?;
                cfg.eta_rel_range = (v, v);
                cfg.eta_points = 1;
            }
            None => cfg.noise = Some(NoiseSpec::RelativeToGap(parse_one(rel, "eta-rel")?)),
        }
    }
    if let Some(points) = o.eta_points {
        cfg.eta_points = points;
    }
    if let Some(sp) = &o.sigma_policy {
        cfg.sigma_policy = Some(sp.parse::<SigmaPolicy>()?);
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(it) = o.max_iter {
        cfg.solver.max_iter = it;
    }
    if let Some(rho) = o.rho {
        cfg.solver.rho = rho;
    }
    if let Some(ws) = &o.warm_start {
        cfg.solver.warm_start = match ws.as_str() {
            "identity" => WarmStart::Identity,
            "spectral" => WarmStart::Spectral,
            other => return Err(config_err(format!("unknown warm start {other:?}"))),
        };
    }
    cfg.solver.trace = o.trace.is_some();
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_artifacts(runs: &[TrialRun], o: &Opts) -> Result<()> {
    if let Some(path) = &o.trace {
        let mut text = String::from("method,iter,misfit,primal_res,dual_res\n");
        for run in runs {
            for row in &run.trace {
                text += &format!(
                    "{},{},{:e},{:e},{:e}\n",
                    run.record.method, row.iter, row.misfit, row.primal_res, row.dual_res
                );
            }
        }
        fs::write(path, text)?;
    }
    if let Some(path) = &o.vector {
        let mut text = String::from("method,index,re,im\n");
        for run in runs {
            for (i, v) in run.x_hat.iter().enumerate() {
                text += &format!("{},{i},{:e},{:e}\n", run.record.method, v.re, v.im);
            }
        }
        fs::write(path, text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(o) => {
            let o = o.resolve()?;
            let cfg = build_config(&o, false)?;
            let method = cfg.methods[0];
            let nodes = if method.is_phase_problem() { cfg.n } else { cfg.measurements() };
            let spec = cfg.graph.unwrap_or(GraphSpec::PathPlus { k: 15 });
            let g = spec.build(nodes, cfg.seed, cfg.max_attempts)?;
            write_output(o.out.as_deref(), &g.to_edge_list())
        }
        Command::Single(o) => {
            let o = o.resolve()?;
            let cfg = build_config(&o, false)?;
            let runs = harness::run_single(&cfg)?;
            write_artifacts(&runs, &o)?;
            let rows: Vec<_> = runs.into_iter().map(|r| r.record).collect();
            write_output(o.out.as_deref(), &harness::csv_string(&rows)?)
        }
        Command::SweepGap(o) => {
            let o = o.resolve()?;
            let mut cfg = build_config(&o, false)?;
            // k and p describe the sweep family here, not one graph
            cfg.graph = None;
            let rows = harness::run_gap_sweep(&cfg)?;
            write_output(o.out.as_deref(), &harness::csv_string(&rows)?)
        }
        Command::SweepNoise(o) => {
            let o = o.resolve()?;
            let cfg = build_config(&o, true)?;
            let rows = harness::run_noise_sweep(&cfg)?;
            write_output(o.out.as_deref(), &harness::csv_string(&rows)?)
        }
        Command::CheckBounds(o) => {
            let o = o.resolve()?;
            let cfg = build_config(&o, false)?;
            let check = harness::check_bounds(&cfg)?;
            eprintln!(
                "checked {} of {} rows, {} violations",
                check.checked,
                check.records.len(),
                check.violations
            );
            write_output(o.out.as_deref(), &harness::csv_string(&check.records)?)?;
            if check.violations > 0 {
                return Err(Error::InvalidArgument(format!("{} bound violations", check.violations)));
            }
            Ok(())
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error: kind=usage message={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message={}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
