//! Analytic solver and seedable simulator for a P2P live-streaming overlay in
//! which every arriving peer asks all present peers for service and a peer
//! already serving `k` clients accepts with probability `1 / (1 + k)`.
//!
//! * [`growth`]: zero-mortality regime (pure-birth out-degree, urn chain,
//!   means, tail bounds, in-degree and spanning-tree asymptotics).
//! * [`queue`]: positive mortality (discouragement queue): Taylor-series
//!   transient law, embedded jump chain, steady state, root extra work.
//! * [`netsim`]: event-driven network simulator and single-process
//!   Monte Carlo oracles.
//! * [`graphkit`]: snapshot degree profiles and spanning-arborescence counts.
//! * [`statcheck`]: empirical-versus-model comparison helpers.

mod dd;
pub mod error;
pub mod graphkit;
pub mod growth;
pub mod model;
pub mod netsim;
pub mod queue;
pub mod rng;
pub mod statcheck;

pub use error::{Error, Result};
pub use model::{validate_params, DistVector, ModelParams};
pub use rng::{derive_stream, RngStream};
