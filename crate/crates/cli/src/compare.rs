use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use meshcast_core::growth::{
    embedded_pmf_table, in_degree_mean_exact, in_degree_tail_bound, mean_out_degree_asymptotic,
    out_degree_tail_bound, pure_birth_pmf, TailSide,
};
use meshcast_core::netsim::{
    fmt_f64, grow_dag, measure_w_root, simulate_bd_jump_chain, simulate_network,
    simulate_replications, single_node_occupancy, urn_state_after, Horizon, SimConfig,
};
use meshcast_core::queue::{
    bd_embedded_table, bd_transient_distribution, root_extra_work_mean, steady_state_unbounded,
    SeriesOptions,
};
use meshcast_core::statcheck::{tail_from_counts, tv_distance, EmpiricalDist};
use meshcast_core::{derive_stream, DistVector, ModelParams, RngStream};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{read_json, resolve_seed, to_pretty_json, write_file, Format, SCHEMA_VERSION};
use crate::Failure;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comparison config (JSON, see schemas/compare-config.schema.json).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for report.json and the long-format report.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the JSON report instead of the table.
    #[arg(long, value_enum, default_value_t = Format::Csv, hide_default_value = true)]
    pub format: Format,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub schema_version: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub checks: Vec<CheckSpec>,
}

/// One validation experiment.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// Urn simulations against the zero-mortality jump-chain table.
    UrnEmbedded { n: usize, samples: u64, tv_tol: f64 },
    /// Birth-death jump-chain simulations against the product-form table.
    JumpChainEmbedded { lambda: f64, mu: f64, n: usize, samples: u64, tv_tol: f64 },
    /// Root out-degree in full network runs against the transient law.
    NetworkRootDegree { lambda: f64, mu: f64, t: f64, replications: u64, tv_tol: f64 },
    /// Empirical mean urn state against the asymptotic mean formula.
    MeanOutDegree { n: usize, samples: u64, rel_tol: f64 },
    /// Out-degree tail frequencies against the Chernoff-type bounds.
    OutDegreeBounds { n: usize, eps: Vec<f64>, samples: u64 },
    /// In-degree tail frequencies (sampled DAGs) against their bounds.
    InDegreeBounds { n: usize, eps: Vec<f64>, samples: u64 },
    /// Long-run single-node occupancy against the stationary law.
    SteadyOccupancy { lambda: f64, mu: f64, jumps: u64, tv_tol: f64 },
    /// Live population against Poisson(lambda / mu).
    LiveCount {
        lambda: f64,
        mu: f64,
        replications: u64,
        snapshots: u32,
        spacing: f64,
        tv_tol: f64,
    },
    /// Time-averaged root extra work against sqrt(lambda / mu).
    WRoot {
        lambda: f64,
        mu: f64,
        replications: u64,
        span: f64,
        snapshot_dt: f64,
        ratio_low: f64,
        ratio_high: f64,
    },
}

impl CheckSpec {
    fn kind(&self) -> &'static str {
        match self {
            CheckSpec::UrnEmbedded { .. } => "urn_embedded",
            CheckSpec::JumpChainEmbedded { .. } => "jump_chain_embedded",
            CheckSpec::NetworkRootDegree { .. } => "network_root_degree",
            CheckSpec::MeanOutDegree { .. } => "mean_out_degree",
            CheckSpec::OutDegreeBounds { .. } => "out_degree_bounds",
            CheckSpec::InDegreeBounds { .. } => "in_degree_bounds",
            CheckSpec::SteadyOccupancy { .. } => "steady_occupancy",
            CheckSpec::LiveCount { .. } => "live_count",
            CheckSpec::WRoot { .. } => "w_root",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// `value < threshold`, `value <= threshold` or `low <= value <= high`.
    pub rule: String,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub index: usize,
    pub kind: String,
    pub spec: CheckSpec,
    pub pass: bool,
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
}

fn below(name: impl Into<String>, value: f64, limit: f64) -> Metric {
    Metric {
        name: name.into(),
        value,
        rule: format!("< {limit}"),
        pass: value < limit,
    }
}

fn within(name: impl Into<String>, value: f64, low: f64, high: f64) -> Metric {
    Metric {
        name: name.into(),
        value,
        rule: format!("in [{low}, {high}]"),
        pass: (low..=high).contains(&value),
    }
}

fn info(name: impl Into<String>, value: f64) -> Metric {
    Metric {
        name: name.into(),
        value,
        rule: "report".into(),
        pass: true,
    }
}

type Exec<T> = Result<T, Failure>;

fn exec<T>(r: meshcast_core::Result<T>) -> Exec<T> {
    r.map_err(|e| Failure::Exec(e.to_string()))
}

const CHUNKS: u64 = 64;

/// Draws `samples` values in a fixed number of chunks, one sub-stream each,
/// so the result does not depend on the thread count.
fn sample_chunks<T, F>(seed: u64, samples: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    let per = samples / CHUNKS;
    (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = derive_stream(seed, c);
            let n = if c + 1 == CHUNKS { samples - per * (CHUNKS - 1) } else { per };
            (0..n).map(|_| f(&mut rng)).collect::<Vec<T>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn tail_metrics(label: &str, samples: &[u32], mean: f64, eps: &[f64], bound: impl Fn(f64, TailSide) -> Exec<f64>) -> Exec<Vec<Metric>> {
    let mut out = Vec::new();
    for &e in eps {
        for side in [TailSide::Upper, TailSide::Lower] {
            let hits = samples
                .iter()
                .filter(|&&x| {
                    let x = f64::from(x);
                    match side {
                        TailSide::Upper => x >= (1.0 + e) * mean,
                        TailSide::Lower => x <= (1.0 - e) * mean,
                    }
                })
                .count() as u64;
            let est = exec(tail_from_counts(hits, samples.len() as u64))?;
            let b = bound(e, side)?;
            out.push(Metric {
                name: format!("{label}_{side:?}_eps{e}").to_lowercase(),
                value: est.freq,
                rule: format!("<= bound {b:.6e} + 3 s.e. {:.3e}", 3.0 * est.std_error()),
                pass: est.freq <= b + 3.0 * est.std_error(),
            });
        }
    }
    Ok(out)
}

fn params(lambda: f64, mu: f64) -> Exec<ModelParams> {
    exec(ModelParams::new(lambda, mu))
}

fn root_degrees(p: ModelParams, t: f64, seed: u64, reps: u64) -> Exec<EmpiricalDist> {
    let mut cfg = SimConfig::new(p, Horizon::Time(t));
    cfg.record_ranks = false;
    let degs = (0..reps)
        .into_par_iter()
        .map(|r| {
            let trace = simulate_network(&cfg, derive_stream(seed, r))?;
            Ok(trace.snapshots.last().map_or(0, |s| s.root_out_degree as usize))
        })
        .collect::<meshcast_core::Result<Vec<usize>>>();
    Ok(EmpiricalDist::from_samples(exec(degs)?))
}

pub fn run_check(spec: &CheckSpec, seed: u64) -> Exec<Vec<Metric>> {
    Ok(match *spec {
        CheckSpec::UrnEmbedded { n, samples, tv_tol } => {
            let table = exec(embedded_pmf_table(n))?;
            let emp = EmpiricalDist::from_samples(
                sample_chunks(seed, samples, |r| urn_state_after(n as u64, r) as usize),
            );
            vec![below("tv", exec(tv_distance(&emp, &table.distribution(n)))?, tv_tol)]
        }
        CheckSpec::JumpChainEmbedded { lambda, mu, n, samples, tv_tol } => {
            let p = params(lambda, mu)?;
            let table = exec(bd_embedded_table(&p, n))?;
            let states = sample_chunks(seed, samples, |r| {
                simulate_bd_jump_chain(n, &p, r).map(|t| t[n] as usize)
            });
            let states: Vec<usize> = exec(states.into_iter().collect())?;
            let emp = EmpiricalDist::from_samples(states);
            vec![below("tv", exec(tv_distance(&emp, &table.distribution(n)))?, tv_tol)]
        }
        CheckSpec::NetworkRootDegree { lambda, mu, t, replications, tv_tol } => {
            let p = params(lambda, mu)?;
            let emp = root_degrees(p, t, seed, replications)?;
            let model = if p.has_deaths() {
                exec(bd_transient_distribution(t, &p, SeriesOptions::default()))?.dist
            } else {
                let mut probs = Vec::new();
                let mut mass = 0.0;
                for k in 0.. {
                    let v = exec(pure_birth_pmf(k, t, lambda))?;
                    probs.push(v);
                    mass += v;
                    if 1.0 - mass < 1e-12 || k > emp.counts().len() + 40 {
                        break;
                    }
                }
                exec(DistVector::new(0, probs))?
            };
            vec![below("tv", exec(tv_distance(&emp, &model))?, tv_tol), info("mean", emp.mean())]
        }
        CheckSpec::MeanOutDegree { n, samples, rel_tol } => {
            let s = sample_chunks(seed, samples, |r| f64::from(urn_state_after(n as u64, r)));
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let asym = mean_out_degree_asymptotic(n);
            vec![info("empirical_mean", mean), info("asymptotic_mean", asym), below("relative_gap", (mean / asym - 1.0).abs(), rel_tol)]
        }
        CheckSpec::OutDegreeBounds { n, ref eps, samples } => {
            let s = sample_chunks(seed, samples, |r| urn_state_after(n as u64, r));
            let mean = exec(embedded_pmf_table(n))?.mean(n);
            tail_metrics("out_tail", &s, mean, eps, |e, side| exec(out_degree_tail_bound(n, e, side)))?
        }
        CheckSpec::InDegreeBounds { n, ref eps, samples } => {
            let s: Vec<u32> = (0..samples)
                .into_par_iter()
                .map(|r| grow_dag(n + 1, &derive_stream(seed, r)).in_degree(n))
                .collect();
            let mean = in_degree_mean_exact(n);
            tail_metrics("in_tail", &s, mean, eps, |e, side| exec(in_degree_tail_bound(n + 1, e, side)))?
        }
        CheckSpec::SteadyOccupancy { lambda, mu, jumps, tv_tol } => {
            let p = params(lambda, mu)?;
            let occ = exec(single_node_occupancy(jumps, &p, &mut derive_stream(seed, 0)))?;
            let model = exec(steady_state_unbounded(&p))?;
            vec![below("tv", exec(tv_distance(&occ, &model))?, tv_tol)]
        }
        CheckSpec::LiveCount { lambda, mu, replications, snapshots, spacing, tv_tol } => {
            let p = params(lambda, mu)?;
            let burn_in = 10.0 / mu;
            let mut cfg = SimConfig::new(p, Horizon::Time(burn_in + f64::from(snapshots) * spacing));
            cfg.snapshot_times = (0..snapshots).map(|i| burn_in + f64::from(i) * spacing).collect();
            cfg.replication_count = replications;
            cfg.master_seed = seed;
            cfg.record_ranks = false;
            let traces = exec(simulate_replications(&cfg, None))?;
            let emp = EmpiricalDist::from_samples(
                traces
                    .iter()
                    .flat_map(|t| t.snapshots.iter().filter(|s| s.time >= burn_in))
                    .map(|s| s.live_count),
            );
            let load = p.load();
            let len = emp.counts().len().max((load * 3.0) as usize) + 40;
            let mut pois = Vec::with_capacity(len);
            let mut v = (-load).exp();
            for l in 0..len {
                if l > 0 {
                    v *= load / l as f64;
                }
                pois.push(v);
            }
            let model = exec(DistVector::new(0, pois))?;
            vec![below("tv", exec(tv_distance(&emp, &model))?, tv_tol), info("mean", emp.mean())]
        }
        CheckSpec::WRoot { lambda, mu, replications, span, snapshot_dt, ratio_low, ratio_high } => {
            let p = params(lambda, mu)?;
            let burn_in = 10.0 / mu;
            let count = (span / snapshot_dt).floor() as u32;
            let mut cfg = SimConfig::new(p, Horizon::Time(burn_in + span));
            cfg.snapshot_times = (0..=count).map(|i| burn_in + f64::from(i) * snapshot_dt).collect();
            cfg.replication_count = replications;
            cfg.master_seed = seed;
            cfg.record_ranks = false;
            let traces = exec(simulate_replications(&cfg, None))?;
            let est = exec(measure_w_root(&traces, (burn_in, burn_in + span)))?;
            let target = exec(root_extra_work_mean(&p))?;
            vec![
                info("w_root_mean", est.mean),
                info("w_root_std_error", est.std_error),
                within("ratio_to_sqrt_load", est.mean / target, ratio_low, ratio_high),
            ]
        }
    })
}

pub fn build_report(config: &CompareConfig, seed: u64) -> Exec<Report> {
    let mut checks = Vec::with_capacity(config.checks.len());
    for (index, spec) in config.checks.iter().enumerate() {
        let check_seed = derive_stream(seed, index as u64).next_u64();
        let metrics = run_check(spec, check_seed)?;
        checks.push(CheckReport {
            index,
            kind: spec.kind().into(),
            spec: spec.clone(),
            pass: metrics.iter().all(|m| m.pass),
            metrics,
        });
    }
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

pub fn render_human(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<4} {:<22} {:<26} {:>14}  {:<6} rule", "#", "check", "metric", "value", "result");
    for c in &report.checks {
        for m in &c.metrics {
            let verdict = if m.rule == "report" { "-" } else if m.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{:<4} {:<22} {:<26} {:>14.6}  {:<6} {}", c.index, c.kind, m.name, m.value, verdict, m.rule);
        }
    }
    let _ = writeln!(s, "overall: {} (seed {})", if report.pass { "PASS" } else { "FAIL" }, report.seed);
    s
}

pub fn render_csv(report: &Report) -> String {
    let mut s = String::from("check,kind,metric,value,rule,pass\n");
    for c in &report.checks {
        for m in &c.metrics {
            let _ = writeln!(s, "{},{},{},{},\"{}\",{}", c.index, c.kind, m.name, fmt_f64(m.value), m.rule, m.pass);
        }
    }
    s
}

/// Returns whether every check passed.
pub fn run(args: CompareArgs) -> Exec<bool> {
    let (config, _): (CompareConfig, serde_json::Value) = read_json(&args.config)?;
    if let Some(v) = config.schema_version {
        if v != SCHEMA_VERSION {
            return Err(Failure::Exec(format!(
                "{}: unsupported schema_version {v}",
                args.config.display()
            )));
        }
    }
    let seed = resolve_seed(args.seed, config.seed);
    let report = build_report(&config, seed)?;
    let json = to_pretty_json(&report);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Exec(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("report.json"), &json)?;
        write_file(&dir.join("report.csv"), render_csv(&report).as_bytes())?;
    }
    match args.format {
        Format::Json => print!("{}", String::from_utf8_lossy(&json)),
        Format::Csv => print!("{}", render_human(&report)),
    }
    Ok(report.pass)
}
