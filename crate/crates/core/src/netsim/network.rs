use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::trace::{Horizon, RunMeta, SimConfig, SimTrace, Snapshot, TRACE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::graphkit::{ArcKind, DagArc, DagSnapshot};
use crate::rng::{derive_stream, RngStream};

/// Id of the master server, present from time zero and never removed.
pub const ROOT_ID: u64 = 0;

#[derive(Debug, Clone)]
struct Node {
    arrival_time: f64,
    death_time: f64,
    out_degree_organic: u32,
    /// Outgoing arcs in creation order.
    children: Vec<(u64, ArcKind)>,
    parents: Vec<u64>,
    /// Private stream for this node's accept/reject decisions.
    rng: ChaCha8Rng,
}

/// Read-only view of a live node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeView {
    pub id: u64,
    pub arrival_time: f64,
    pub death_time: f64,
    pub out_degree_organic: u32,
    pub in_degree_total: u32,
}

/// The live overlay: a DAG whose arcs run from earlier to later arrivals.
#[derive(Debug, Clone)]
pub struct NetworkState {
    nodes: BTreeMap<u64, Node>,
    next_id: u64,
    arrivals: u64,
    orphan_recoveries: u64,
    time: f64,
}

impl NetworkState {
    fn new(stream: &RngStream) -> Self {
        let root = Node {
            arrival_time: 0.0,
            death_time: f64::INFINITY,
            out_degree_organic: 0,
            children: Vec::new(),
            parents: Vec::new(),
            rng: stream.substream(ROOT_ID),
        };
        NetworkState {
            nodes: BTreeMap::from([(ROOT_ID, root)]),
            next_id: ROOT_ID + 1,
            arrivals: 0,
            orphan_recoveries: 0,
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn orphan_recoveries(&self) -> u64 {
        self.orphan_recoveries
    }

    /// Live nodes excluding the root.
    pub fn live_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, id: u64) -> Option<NodeView> {
        self.nodes.get(&id).map(|n| NodeView {
            id,
            arrival_time: n.arrival_time,
            death_time: n.death_time,
            out_degree_organic: n.out_degree_organic,
            in_degree_total: n.parents.len() as u32,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeView> + '_ {
        self.nodes.keys().filter_map(|&id| self.node(id))
    }

    pub fn arcs(&self) -> impl Iterator<Item = DagArc> + '_ {
        self.nodes.iter().flat_map(|(&src, n)| {
            n.children
                .iter()
                .map(move |&(dst, kind)| DagArc { src, dst, kind })
        })
    }

    pub fn to_dag_snapshot(&self) -> DagSnapshot {
        DagSnapshot::new(ROOT_ID, self.nodes.keys().copied().collect(), self.arcs().collect())
            .expect("live network is a DAG")
    }

    fn check_node(&self, id: u64) -> Result<()> {
        let Some(n) = self.nodes.get(&id) else {
            return Ok(());
        };
        let bad = |msg: String| Err(Error::Internal(format!("node {id}: {msg}")));
        if id != ROOT_ID && n.parents.is_empty() {
            return bad("live node without upstream peers".into());
        }
        let mut organic = 0;
        for &(c, kind) in &n.children {
            if c <= id {
                return bad(format!("arc to earlier node {c}"));
            }
            if kind == ArcKind::Recovery && id != ROOT_ID {
                return bad("recovery arc not from the root".into());
            }
            if kind == ArcKind::Organic {
                organic += 1;
            }
            match self.nodes.get(&c) {
                Some(child) if child.parents.contains(&id) => {}
                _ => return bad(format!("dangling arc to {c}")),
            }
        }
        if organic != n.out_degree_organic {
            return bad(format!(
                "organic counter {} but {organic} organic arcs",
                n.out_degree_organic
            ));
        }
        for &p in &n.parents {
            match self.nodes.get(&p) {
                Some(parent) if p < id && parent.children.iter().any(|&(c, _)| c == id) => {}
                _ => return bad(format!("dangling parent {p}")),
            }
        }
        Ok(())
    }

    /// Full structural check of every live node.
    pub fn check_invariants(&self) -> Result<()> {
        self.nodes.keys().try_for_each(|&id| self.check_node(id))
    }

    fn recover(&mut self, id: u64) {
        let root = self.nodes.get_mut(&ROOT_ID).expect("root is immortal");
        root.children.push((id, ArcKind::Recovery));
        self.nodes
            .get_mut(&id)
            .expect("recovered node is live")
            .parents
            .push(ROOT_ID);
        self.orphan_recoveries += 1;
    }

    /// Adds node `id`; returns the peers that accepted it.
    fn arrive(&mut self, id: u64, now: f64, death_time: f64, rng: ChaCha8Rng) -> Vec<u64> {
        let mut accepted = Vec::new();
        for (&peer, node) in self.nodes.iter_mut() {
            let p = 1.0 / (1.0 + f64::from(node.out_degree_organic));
            if node.rng.random::<f64>() < p {
                node.out_degree_organic += 1;
                node.children.push((id, ArcKind::Organic));
                accepted.push(peer);
            }
        }
        self.nodes.insert(
            id,
            Node {
                arrival_time: now,
                death_time,
                out_degree_organic: 0,
                children: Vec::new(),
                parents: accepted.clone(),
                rng,
            },
        );
        if accepted.is_empty() {
            self.recover(id);
        }
        self.arrivals += 1;
        self.time = now;
        accepted
    }

    /// Removes node `id` with its arcs; returns ids whose links changed.
    fn die(&mut self, id: u64, now: f64) -> Vec<u64> {
        let node = self.nodes.remove(&id).expect("dying node is live");
        let mut touched = Vec::with_capacity(node.parents.len() + node.children.len());
        for &p in &node.parents {
            let parent = self.nodes.get_mut(&p).expect("parent outlives child link");
            if let Some(pos) = parent.children.iter().position(|&(c, _)| c == id) {
                let (_, kind) = parent.children.remove(pos);
                if kind == ArcKind::Organic {
                    parent.out_degree_organic -= 1;
                }
            }
            touched.push(p);
        }
        for &(c, _) in &node.children {
            let child = self.nodes.get_mut(&c).expect("child link to live node");
            child.parents.retain(|&p| p != id);
            if child.parents.is_empty() {
                self.recover(c);
            }
            touched.push(c);
        }
        touched.push(ROOT_ID);
        self.time = now;
        touched
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Death {
    time: f64,
    id: u64,
}

impl Eq for Death {}

impl Ord for Death {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Death {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event-driven simulator of one replication.
///
/// Arrivals form a Poisson(`lambda`) stream. An arriving node asks every live
/// node, the root included; a node with organic out-degree `k` accepts with
/// probability `1 / (1 + k)`, drawn from its own sub-stream. Non-root nodes
/// live an exponential(`mu`) time. A death removes the node and its arcs, and
/// any node left without in-arcs (or an arrival that nobody accepted) gets a
/// recovery arc from the root. Recovery arcs never count towards the root's
/// acceptance degree. Simultaneous events resolve deaths first, then by id.
#[derive(Debug)]
pub struct NetworkSimulator {
    config: SimConfig,
    stream: RngStream,
    state: NetworkState,
    deaths: BinaryHeap<Reverse<Death>>,
    next_arrival: f64,
    interarrival: Exp<f64>,
    lifetime: Option<Exp<f64>>,
    chain_checks: u64,
    chain_hits: u64,
    snapshots: Vec<Snapshot>,
}

impl NetworkSimulator {
    pub fn new(config: &SimConfig, stream: RngStream) -> Result<Self> {
        config.validate()?;
        let params = config.params;
        let interarrival = Exp::new(params.lambda()).expect("validated rate");
        let lifetime = params
            .has_deaths()
            .then(|| Exp::new(params.mu()).expect("validated rate"));
        let mut stream = stream;
        let state = NetworkState::new(&stream);
        let next_arrival = interarrival.sample(&mut stream);
        Ok(NetworkSimulator {
            config: config.clone(),
            stream,
            state,
            deaths: BinaryHeap::new(),
            next_arrival,
            interarrival,
            lifetime,
            chain_checks: 0,
            chain_hits: 0,
            snapshots: Vec::new(),
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    fn next_death_time(&self) -> f64 {
        self.deaths.peek().map_or(f64::INFINITY, |Reverse(d)| d.time)
    }

    fn step_arrival(&mut self) -> Result<()> {
        let now = self.next_arrival;
        let id = self.state.next_id;
        self.state.next_id += 1;
        let death_time = match &self.lifetime {
            Some(exp) => now + exp.sample(&mut self.stream),
            None => f64::INFINITY,
        };
        let rng = self.stream.substream(id);
        let predecessor_alive = self.state.nodes.contains_key(&(id - 1));
        let accepted = self.state.arrive(id, now, death_time, rng);
        if predecessor_alive {
            self.chain_checks += 1;
            if accepted.last() == Some(&(id - 1)) {
                self.chain_hits += 1;
            }
        }
        if death_time.is_finite() {
            self.deaths.push(Reverse(Death {
                time: death_time,
                id,
            }));
        }
        if self.state.live_count() > self.config.max_live {
            return Err(Error::Capacity(format!(
                "live population {} exceeds cap {}",
                self.state.live_count(),
                self.config.max_live
            )));
        }
        self.next_arrival = now + self.interarrival.sample(&mut self.stream);
        if cfg!(debug_assertions) {
            self.state.check_node(id)?;
            for p in accepted {
                self.state.check_node(p)?;
            }
        }
        Ok(())
    }

    fn step_death(&mut self) -> Result<()> {
        let Reverse(d) = self.deaths.pop().expect("death pending");
        let touched = self.state.die(d.id, d.time);
        if cfg!(debug_assertions) {
            for id in touched {
                self.state.check_node(id)?;
            }
        }
        Ok(())
    }

    fn record(&mut self, time: f64) -> Result<()> {
        self.state.check_invariants()?;
        let s = &self.state;
        let mut out_hist: Vec<u64> = Vec::new();
        let mut in_hist: Vec<u64> = Vec::new();
        let mut ranks = Vec::new();
        let mut w_root = 0.0;
        let bump = |h: &mut Vec<u64>, d: usize| {
            if h.len() <= d {
                h.resize(d + 1, 0);
            }
            h[d] += 1;
        };
        for (&id, n) in s.nodes.iter().skip(1) {
            let indeg = n.parents.len();
            bump(&mut out_hist, n.out_degree_organic as usize);
            bump(&mut in_hist, indeg);
            if self.config.record_ranks {
                ranks.push((id, indeg as u32));
            }
            w_root += 1.0 / indeg as f64;
        }
        let root = &s.nodes[&ROOT_ID];
        self.snapshots.push(Snapshot {
            time,
            arrivals: s.arrivals,
            live_count: s.live_count(),
            root_out_degree: root.out_degree_organic,
            root_recovery_arcs: root.children.len() as u32 - root.out_degree_organic,
            out_degree_histogram: out_hist,
            in_degree_histogram: in_hist,
            in_degree_by_rank: ranks,
            orphan_recovery_count_cumulative: s.orphan_recoveries,
            w_root_functional: w_root,
        });
        Ok(())
    }

    /// Runs to the configured horizon, recording every requested snapshot.
    pub fn run(&mut self) -> Result<()> {
        let mut times = self.config.snapshot_times.clone();
        times.sort_by(f64::total_cmp);
        let mut marks = self.config.snapshot_arrivals.clone();
        marks.sort_unstable();
        marks.dedup();
        let mut ti = 0;
        let mut mi = 0;
        while mi < marks.len() && marks[mi] == 0 {
            self.record(0.0)?;
            mi += 1;
        }
        loop {
            let next_event = self.next_death_time().min(self.next_arrival);
            let time_cap = match self.config.horizon {
                Horizon::Time(end) => next_event.min(end),
                Horizon::Arrivals(_) => next_event,
            };
            while ti < times.len() && times[ti] < time_cap {
                self.record(times[ti])?;
                ti += 1;
            }
            if let Horizon::Time(end) = self.config.horizon {
                if next_event > end {
                    while ti < times.len() && times[ti] <= end {
                        ti += 1;
                    }
                    self.state.time = end;
                    return self.record(end);
                }
            }
            if self.next_death_time() <= self.next_arrival {
                self.step_death()?;
                continue;
            }
            self.step_arrival()?;
            let count = self.state.arrivals;
            let marked = mi < marks.len() && marks[mi] == count;
            if marked {
                self.record(self.state.time)?;
                mi += 1;
            }
            if self.config.horizon == Horizon::Arrivals(count) {
                if !marked {
                    self.record(self.state.time)?;
                }
                return Ok(());
            }
        }
    }

    pub fn into_parts(self) -> (SimTrace, NetworkState) {
        let trace = SimTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            meta: RunMeta {
                seed: self.stream.master_seed(),
                stream_id: self.stream.stream_id(),
                config_hash: self.config.hash(),
            },
            chain_arc_checks: self.chain_checks,
            chain_arc_hits: self.chain_hits,
            snapshots: self.snapshots,
        };
        (trace, self.state)
    }
}

/// Runs one replication and returns its trace together with the final graph.
pub fn simulate_network_with_state(
    config: &SimConfig,
    stream: RngStream,
) -> Result<(SimTrace, NetworkState)> {
    let mut sim = NetworkSimulator::new(config, stream)?;
    sim.run()?;
    Ok(sim.into_parts())
}

pub fn simulate_network(config: &SimConfig, stream: RngStream) -> Result<SimTrace> {
    simulate_network_with_state(config, stream).map(|(t, _)| t)
}

/// Runs `config.replication_count` replications on streams
/// `(config.master_seed, 0..count)`, on `jobs` threads (rayon's default when
/// `None`). The result is ordered by stream id whatever the schedule.
pub fn simulate_replications(config: &SimConfig, jobs: Option<usize>) -> Result<Vec<SimTrace>> {
    config.validate()?;
    let run = || {
        (0..config.replication_count)
            .into_par_iter()
            .map(|id| simulate_network(config, derive_stream(config.master_seed, id)))
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}
