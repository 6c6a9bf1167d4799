use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use meshcast_core::netsim::{simulate_replications, write_traces_csv, SimConfig, SimTrace};
use meshcast_core::statcheck::mean_ci;
use serde::Serialize;

use crate::output::{read_json, resolve_seed, to_pretty_json, write_file, SCHEMA_VERSION};
use crate::Failure;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON, see schemas/simulate-config.schema.json).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's master_seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub n: usize,
}

impl Stat {
    fn of(samples: &[f64]) -> Stat {
        let n = samples.len();
        match mean_ci(samples) {
            Ok(ci) => Stat { mean: ci.mean, std_error: Some(ci.std_error), n },
            Err(_) => Stat { mean: samples.iter().sum::<f64>() / n.max(1) as f64, std_error: None, n },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ChainArcs {
    pub checks: u64,
    pub hits: u64,
    pub presence: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub replications: usize,
    pub chain_arcs: ChainArcs,
    pub final_live_count: Stat,
    pub final_w_root: Stat,
    pub final_orphan_recoveries: Stat,
    pub trace_files: Vec<String>,
}

pub fn summarize(traces: &[SimTrace], seed: u64, files: Vec<String>) -> Summary {
    let finals: Vec<_> = traces.iter().filter_map(|t| t.snapshots.last()).collect();
    let checks = traces.iter().map(|t| t.chain_arc_checks).sum();
    let hits = traces.iter().map(|t| t.chain_arc_hits).sum();
    Summary {
        schema_version: SCHEMA_VERSION,
        seed,
        config_hash: traces.first().map(|t| t.meta.config_hash.clone()).unwrap_or_default(),
        replications: traces.len(),
        chain_arcs: ChainArcs {
            checks,
            hits,
            presence: (checks > 0).then(|| hits as f64 / checks as f64),
        },
        final_live_count: Stat::of(&finals.iter().map(|s| s.live_count as f64).collect::<Vec<_>>()),
        final_w_root: Stat::of(&finals.iter().map(|s| s.w_root_functional).collect::<Vec<_>>()),
        final_orphan_recoveries: Stat::of(
            &finals
                .iter()
                .map(|s| s.orphan_recovery_count_cumulative as f64)
                .collect::<Vec<_>>(),
        ),
        trace_files: files,
    }
}

pub fn load_config(path: &Path, seed_flag: Option<u64>) -> Result<SimConfig, Failure> {
    let (mut config, raw): (SimConfig, serde_json::Value) = read_json(path)?;
    let from_file = raw.get("master_seed").and_then(serde_json::Value::as_u64);
    config.master_seed = resolve_seed(seed_flag, from_file);
    config
        .validate()
        .map_err(|e| Failure::Exec(format!("{}: {e}", path.display())))?;
    Ok(config)
}

pub fn run(args: SimulateArgs, jobs: Option<usize>) -> Result<(), Failure> {
    let config = load_config(&args.config, args.seed)?;
    let traces = simulate_replications(&config, jobs).map_err(|e| Failure::Exec(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Exec(format!("{}: {e}", args.out.display())))?;
    let mut files = Vec::with_capacity(traces.len());
    for t in &traces {
        let name = format!("replication_{:04}.json", t.meta.stream_id);
        write_file(&args.out.join(&name), &to_pretty_json(t))?;
        files.push(name);
    }
    let mut csv = Vec::new();
    write_traces_csv(&traces, &mut csv).map_err(|e| Failure::Exec(e.to_string()))?;
    write_file(&args.out.join("traces.csv"), &csv)?;
    let summary = to_pretty_json(&summarize(&traces, config.master_seed, files));
    write_file(&args.out.join("summary.json"), &summary)?;
    print!("{}", String::from_utf8_lossy(&summary));
    Ok(())
}
