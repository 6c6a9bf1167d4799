//! Direct sampler for the overlay DAG when nobody leaves.
//!
//! Without deaths every node stays and its acceptances form an independent
//! urn over the later arrivals, so a whole `n`-node DAG can be drawn node by
//! node with geometric skipping. This is far cheaper than the event-driven
//! simulator for large `n` and yields the same law.

use crate::graphkit::{ArcKind, DagArc, DagSnapshot};
use crate::rng::RngStream;

use super::chains::urn_success_epochs;
use super::network::ROOT_ID;

/// Arrival-ordered DAG on nodes `0..n_nodes`; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthDag {
    parents: Vec<Vec<u32>>,
}

impl GrowthDag {
    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    /// Upstream peers of `node`, ascending.
    pub fn parents(&self, node: usize) -> &[u32] {
        &self.parents[node]
    }

    pub fn in_degree(&self, node: usize) -> u32 {
        self.parents[node].len() as u32
    }

    /// In-degrees of the non-root nodes `1..n_nodes`.
    pub fn in_degrees(&self) -> Vec<u32> {
        self.parents.iter().skip(1).map(|p| p.len() as u32).collect()
    }

    pub fn has_arc(&self, src: usize, dst: usize) -> bool {
        self.parents[dst].binary_search(&(src as u32)).is_ok()
    }

    pub fn to_dag_snapshot(&self) -> DagSnapshot {
        let arcs = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(dst, ps)| {
                ps.iter().map(move |&src| DagArc {
                    src: u64::from(src),
                    dst: dst as u64,
                    kind: ArcKind::Organic,
                })
            })
            .collect();
        DagSnapshot::new(ROOT_ID, (0..self.n_nodes() as u64).collect(), arcs)
            .expect("sampled graph is a DAG")
    }
}

/// Draws the DAG formed by the first `n_nodes` nodes (root included) when
/// `mu = 0`. Node `i` uses sub-stream `i` of `stream`.
pub fn grow_dag(n_nodes: usize, stream: &RngStream) -> GrowthDag {
    let mut parents = vec![Vec::new(); n_nodes];
    for i in 0..n_nodes.saturating_sub(1) {
        let mut rng = stream.substream(i as u64);
        let later = (n_nodes - 1 - i) as u64;
        for step in urn_success_epochs(later, &mut rng) {
            parents[i + step as usize].push(i as u32);
        }
    }
    GrowthDag { parents }
}
