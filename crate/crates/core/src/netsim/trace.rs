use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Result};
use crate::model::ModelParams;

/// Version tag written into every serialized trace and summary.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Live-population ceiling used when a config does not set one.
pub const DEFAULT_MAX_LIVE: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Stop at this simulated time.
    Time(f64),
    /// Stop right after this many arrivals (root excluded).
    Arrivals(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: Horizon,
    /// Observation times; a final snapshot at the horizon is always added.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Observe right after these arrival counts.
    #[serde(default)]
    pub snapshot_arrivals: Vec<u64>,
    #[serde(default = "one")]
    pub replication_count: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_max_live")]
    pub max_live: usize,
    /// Record `(id, in_degree)` of every live node in each snapshot.
    #[serde(default = "yes")]
    pub record_ranks: bool,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

fn default_max_live() -> usize {
    DEFAULT_MAX_LIVE
}

impl SimConfig {
    pub fn new(params: ModelParams, horizon: Horizon) -> Self {
        SimConfig {
            params,
            horizon,
            snapshot_times: Vec::new(),
            snapshot_arrivals: Vec::new(),
            replication_count: 1,
            master_seed: 0,
            max_live: DEFAULT_MAX_LIVE,
            record_ranks: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Time(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(domain(format!("time horizon must be positive, got {t}")))
            }
            Horizon::Arrivals(0) => return Err(domain("arrival horizon must be positive")),
            _ => {}
        }
        if let Some(&t) = self
            .snapshot_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0))
        {
            return Err(domain(format!("snapshot time {t} is invalid")));
        }
        if let Horizon::Time(end) = self.horizon {
            if let Some(&t) = self.snapshot_times.iter().find(|&&t| t > end) {
                return Err(domain(format!("snapshot time {t} is past the horizon {end}")));
            }
        }
        if let Horizon::Arrivals(end) = self.horizon {
            if let Some(&a) = self.snapshot_arrivals.iter().find(|&&a| a > end) {
                return Err(domain(format!("snapshot arrival {a} is past the horizon {end}")));
            }
        }
        if self.replication_count == 0 {
            return Err(domain("replication_count must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub arrivals: u64,
    /// Live nodes excluding the root.
    pub live_count: usize,
    /// Organic out-degree of the root.
    pub root_out_degree: u32,
    pub root_recovery_arcs: u32,
    /// Organic out-degree counts over live non-root nodes.
    pub out_degree_histogram: Vec<u64>,
    /// Total in-degree counts over live non-root nodes.
    pub in_degree_histogram: Vec<u64>,
    /// `(node id, in-degree)` of live non-root nodes, ascending by id.
    pub in_degree_by_rank: Vec<(u64, u32)>,
    pub orphan_recovery_count_cumulative: u64,
    /// `sum over live non-root nodes of 1 / in_degree`.
    pub w_root_functional: f64,
}

impl Snapshot {
    /// The root-work functional recomputed from the in-degree histogram.
    pub fn w_root_from_histogram(&self) -> f64 {
        self.in_degree_histogram
            .iter()
            .enumerate()
            .skip(1)
            .map(|(d, &c)| c as f64 / d as f64)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub stream_id: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub schema_version: u32,
    pub meta: RunMeta,
    /// Arrivals that found their immediate predecessor alive.
    pub chain_arc_checks: u64,
    /// Of those, arrivals the predecessor accepted.
    pub chain_arc_hits: u64,
    pub snapshots: Vec<Snapshot>,
}

/// Doubles printed with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_counts(h: &[u64]) -> String {
    h.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub const CSV_HEADER: [&str; 12] = [
    "replication",
    "seed",
    "config_hash",
    "time",
    "arrivals",
    "live_count",
    "root_out_degree",
    "root_recovery_arcs",
    "orphan_recovery_count_cumulative",
    "w_root_functional",
    "out_degree_histogram",
    "in_degree_histogram",
];

/// Writes one CSV row per snapshot per trace; histograms are `;`-joined
/// counts indexed from degree zero.
pub fn write_traces_csv<W: Write>(traces: &[SimTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| domain(format!("csv write failed: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for t in traces {
        for s in &t.snapshots {
            w.write_record([
                t.meta.stream_id.to_string(),
                t.meta.seed.to_string(),
                t.meta.config_hash.clone(),
                fmt_f64(s.time),
                s.arrivals.to_string(),
                s.live_count.to_string(),
                s.root_out_degree.to_string(),
                s.root_recovery_arcs.to_string(),
                s.orphan_recovery_count_cumulative.to_string(),
                fmt_f64(s.w_root_functional),
                join_counts(&s.out_degree_histogram),
                join_counts(&s.in_degree_histogram),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| domain(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WRootEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub snapshots_used: usize,
}

/// Time average of the root-work functional over snapshots with
/// `window.0 <= time <= window.1`, pooled across `traces`.
///
/// The standard error comes from per-replication means when there are at
/// least two replications, else from ten batch means of the single run.
pub fn measure_w_root(traces: &[SimTrace], window: (f64, f64)) -> Result<WRootEstimate> {
    let (lo, hi) = window;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(domain(format!("empty window [{lo}, {hi}]")));
    }
    let per_run: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            t.snapshots
                .iter()
                .filter(|s| s.time >= lo && s.time <= hi)
                .map(|s| s.w_root_functional)
                .collect::<Vec<f64>>()
        })
        .filter(|v| !v.is_empty())
        .collect();
    let used: usize = per_run.iter().map(Vec::len).sum();
    if used == 0 {
        return Err(domain(format!("no snapshots inside window [{lo}, {hi}]")));
    }
    let mean = per_run.iter().flatten().sum::<f64>() / used as f64;
    let groups: Vec<f64> = if per_run.len() >= 2 {
        per_run
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    } else {
        let v = &per_run[0];
        let batch = (v.len() / 10).max(1);
        v.chunks(batch)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    };
    let std_error = if groups.len() >= 2 {
        let gm = groups.iter().sum::<f64>() / groups.len() as f64;
        let var = groups.iter().map(|g| (g - gm).powi(2)).sum::<f64>() / (groups.len() - 1) as f64;
        (var / groups.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(WRootEstimate {
        mean,
        std_error,
        snapshots_used: used,
    })
}
