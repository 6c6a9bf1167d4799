use std::path::PathBuf;

use clap::{Args, Subcommand};
use meshcast_core::growth::{
    embedded_pmf_table, in_degree_mean_asymptotic, in_degree_tail_bound,
    mean_out_degree_asymptotic, out_degree_tail_bound, pure_birth_pmf, TailSide,
};
use meshcast_core::queue::{
    bd_embedded_table, bd_transient_distribution, steady_state_conditional, steady_state_unbounded,
    SeriesOptions,
};
use meshcast_core::{Error, ModelParams};
use serde::Serialize;

use crate::output::{emit, render_table, Format, Row};
use crate::Failure;

#[derive(Debug, Subcommand)]
pub enum AnalyticCmd {
    /// Transient out-degree law p(k, t) for k = 0..=k-max.
    Pmf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        k_max: usize,
        /// Series tolerance when mu > 0.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Jump-chain law after n steps (arrivals when mu = 0, transitions otherwise).
    Embedded {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
    },
    /// Stationary out-degree law of node n among l live nodes; without
    /// --l, the unbounded limit.
    Steady {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        l: Option<usize>,
    },
    /// Asymptotic means and tail bounds at node count n.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn params(&self) -> Result<ModelParams, Failure> {
        ModelParams::new(self.lambda, self.mu).map_err(usage)
    }
}

#[derive(Serialize)]
struct Echo {
    lambda: f64,
    mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

fn usage(e: Error) -> Failure {
    match e {
        Error::Domain(m) => Failure::Usage(m),
        other => Failure::Exec(other.to_string()),
    }
}

fn indexed(values: impl IntoIterator<Item = f64>) -> Vec<Row> {
    values.into_iter().enumerate().map(|(k, v)| Row::new(k, v)).collect()
}

pub fn run(cmd: AnalyticCmd) -> Result<(), Failure> {
    let (common, name, echo, rows) = match cmd {
        AnalyticCmd::Pmf { common, t, k_max, tol } => {
            let p = common.params()?;
            let rows = if p.has_deaths() {
                let opts = SeriesOptions { tol, ..SeriesOptions::default() };
                let sol = bd_transient_distribution(t, &p, opts).map_err(usage)?;
                if k_max > sol.dist.support_end() {
                    eprintln!(
                        "note: states above {} are below the series tolerance and reported as 0",
                        sol.dist.support_end()
                    );
                }
                indexed((0..=k_max).map(|k| sol.dist.prob(k)))
            } else {
                let vals = (0..=k_max)
                    .map(|k| pure_birth_pmf(k, t, p.lambda()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(usage)?;
                indexed(vals)
            };
            let echo = Echo { lambda: p.lambda(), mu: p.mu(), t: Some(t), n: None, l: None, eps: None };
            (common, "analytic pmf", echo, rows)
        }
        AnalyticCmd::Embedded { common, n } => {
            let p = common.params()?;
            let rows = if p.has_deaths() {
                indexed(bd_embedded_table(&p, n).map_err(usage)?.rows[n].clone())
            } else {
                indexed(embedded_pmf_table(n).map_err(usage)?.row(n).to_vec())
            };
            let echo = Echo { lambda: p.lambda(), mu: p.mu(), t: None, n: Some(n), l: None, eps: None };
            (common, "analytic embedded", echo, rows)
        }
        AnalyticCmd::Steady { common, n, l } => {
            let p = common.params()?;
            if !p.has_deaths() {
                return Err(Failure::Usage("steady state needs --mu > 0".into()));
            }
            let dist = match l {
                Some(l) => steady_state_conditional(n, l, &p),
                None => steady_state_unbounded(&p),
            }
            .map_err(usage)?;
            let echo = Echo { lambda: p.lambda(), mu: p.mu(), t: None, n: Some(n), l, eps: None };
            (common, "analytic steady", echo, indexed(dist.probs().to_vec()))
        }
        AnalyticCmd::Bounds { common, n, eps } => {
            let p = common.params()?;
            let mut rows = vec![
                Row::new("mean_out_degree", mean_out_degree_asymptotic(n)),
                Row::new("in_degree_mean", in_degree_mean_asymptotic(n)),
            ];
            if eps < 1.0 {
                for side in [TailSide::Upper, TailSide::Lower] {
                    let b = out_degree_tail_bound(n, eps, side).map_err(usage)?;
                    rows.push(Row::new(format!("out_tail_{side:?}").to_lowercase(), b));
                }
            }
            for side in [TailSide::Upper, TailSide::Lower] {
                let b = in_degree_tail_bound(n + 1, eps, side).map_err(usage)?;
                rows.push(Row::new(format!("in_tail_{side:?}").to_lowercase(), b));
            }
            let echo = Echo { lambda: p.lambda(), mu: p.mu(), t: None, n: Some(n), l: None, eps: Some(eps) };
            (common, "analytic bounds", echo, rows)
        }
    };
    let text = render_table(common.format, name, echo, &rows);
    emit(&text, common.out.as_deref())
}
