//! Seedable simulators: the full overlay network plus single-process chains
//! used as Monte Carlo oracles.

mod chains;
mod dag;
mod network;
mod trace;

pub use chains::{
    simulate_bd_jump_chain, simulate_single_node_bd, simulate_urn_chain, single_node_occupancy,
    urn_state_after, urn_success_epochs, BdTrajectory,
};
pub use dag::{grow_dag, GrowthDag};
pub use network::{
    simulate_network, simulate_network_with_state, simulate_replications, NetworkSimulator,
    NetworkState, NodeView, ROOT_ID,
};
pub use trace::{
    fmt_f64, measure_w_root, write_traces_csv, Horizon, RunMeta, SimConfig, SimTrace, Snapshot,
    WRootEstimate, CSV_HEADER, DEFAULT_MAX_LIVE, TRACE_SCHEMA_VERSION,
};
