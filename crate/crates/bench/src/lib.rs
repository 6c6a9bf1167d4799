//! Benchmark fixtures shared by the criterion targets.

use meshcast_core::netsim::{Horizon, SimConfig};
use meshcast_core::ModelParams;

/// A churning network held near `load` live peers for `horizon` time units.
pub fn churn_config(load: f64, horizon: f64) -> SimConfig {
    let params = ModelParams::new(load, 1.0).expect("positive load");
    let mut cfg = SimConfig::new(params, Horizon::Time(horizon));
    cfg.record_ranks = false;
    cfg
}
