//! Snapshot graphs of the overlay: degree profiles and spanning-arborescence
//! counts.
//!
//! Every arc points from an earlier to a later arrival, so each non-root node
//! picks its tree parent independently among its in-neighbours and the
//! number of arborescences rooted at the root is the product of the non-root
//! in-degrees. The matrix-tree determinant is kept as an independent check.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest node count accepted by the exact determinant oracle.
pub const MATRIX_TREE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    /// Created by an accepted service request.
    Organic,
    /// Created by the root for a node left without upstream peers.
    Recovery,
}

impl ArcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcKind::Organic => "organic",
            ArcKind::Recovery => "recovery",
        }
    }
}

impl std::str::FromStr for ArcKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "organic" => Ok(ArcKind::Organic),
            "recovery" => Ok(ArcKind::Recovery),
            other => Err(domain(format!("unknown arc kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DagArc {
    pub src: u64,
    pub dst: u64,
    pub kind: ArcKind,
}

/// A graph whose arcs all run from a smaller to a larger node id, with the
/// smallest id as root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagSnapshot {
    root: u64,
    nodes: Vec<u64>,
    arcs: Vec<DagArc>,
}

impl DagSnapshot {
    /// Validates and builds a snapshot. `nodes` may be given in any order and
    /// is stored sorted by id (arrival order).
    pub fn new(root: u64, nodes: Vec<u64>, arcs: Vec<DagArc>) -> Result<Self> {
        let set: BTreeSet<u64> = nodes.iter().copied().collect();
        if set.len() != nodes.len() {
            return Err(domain("duplicate node id"));
        }
        if set.first() != Some(&root) {
            return Err(domain(format!("root {root} must be the smallest node id")));
        }
        let mut seen = BTreeSet::new();
        for a in &arcs {
            if a.src >= a.dst {
                return Err(domain(format!(
                    "arc {} -> {} does not run from an earlier to a later node",
                    a.src, a.dst
                )));
            }
            if !set.contains(&a.src) || !set.contains(&a.dst) {
                return Err(domain(format!("arc {} -> {} has an unknown endpoint", a.src, a.dst)));
            }
            if !seen.insert((a.src, a.dst)) {
                return Err(domain(format!("duplicate arc {} -> {}", a.src, a.dst)));
            }
        }
        Ok(DagSnapshot {
            root,
            nodes: set.into_iter().collect(),
            arcs,
        })
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn nodes(&self) -> &[u64] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[DagArc] {
        &self.arcs
    }

    fn positions(&self) -> HashMap<u64, usize> {
        self.nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    /// Serializes to the edge-list text format: a `root <id>` line followed by
    /// one `src dst kind` line per arc.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("root {}\n", self.root);
        for a in &self.arcs {
            let _ = writeln!(out, "{} {} {}", a.src, a.dst, a.kind.as_str());
        }
        out
    }

    /// Parses the edge-list text format. Nodes are the root plus every arc
    /// endpoint.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (line, first) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty edge list".into()))?;
        let root = match first.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["root", id] => id
                .parse::<u64>()
                .map_err(|e| parse_err(line, format!("bad root id: {e}")))?,
            _ => return Err(parse_err(line, format!("expected `root <id>`, got {first:?}"))),
        };
        let mut nodes = BTreeSet::from([root]);
        let mut arcs = Vec::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split_whitespace().collect();
            let [src, dst, kind] = fields.as_slice() else {
                return Err(parse_err(line, format!("expected `src dst kind`, got {l:?}")));
            };
            let src = src
                .parse::<u64>()
                .map_err(|e| parse_err(line, format!("bad src: {e}")))?;
            let dst = dst
                .parse::<u64>()
                .map_err(|e| parse_err(line, format!("bad dst: {e}")))?;
            let kind = kind
                .parse::<ArcKind>()
                .map_err(|e| parse_err(line, e.to_string()))?;
            nodes.insert(src);
            nodes.insert(dst);
            arcs.push(DagArc { src, dst, kind });
        }
        DagSnapshot::new(root, nodes.into_iter().collect(), arcs)
    }
}

/// Degree vectors indexed by arrival rank (position in [`DagSnapshot::nodes`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfiles {
    pub out_degree_by_rank: Vec<u32>,
    pub in_degree_by_rank: Vec<u32>,
}

pub fn degree_profiles(g: &DagSnapshot) -> DegreeProfiles {
    let pos = g.positions();
    let mut out = vec![0u32; g.nodes.len()];
    let mut inn = vec![0u32; g.nodes.len()];
    for a in &g.arcs {
        out[pos[&a.src]] += 1;
        inn[pos[&a.dst]] += 1;
    }
    DegreeProfiles {
        out_degree_by_rank: out,
        in_degree_by_rank: inn,
    }
}

/// Natural log of the number of spanning arborescences rooted at the root,
/// `sum_{v != root} ln indeg(v)`; negative infinity when some non-root node
/// has no in-arc.
pub fn count_arborescences_product(g: &DagSnapshot) -> f64 {
    let profiles = degree_profiles(g);
    profiles
        .in_degree_by_rank
        .iter()
        .skip(1)
        .map(|&d| if d == 0 { f64::NEG_INFINITY } else { f64::from(d).ln() })
        .sum()
}

/// Exact arborescence count from the determinant of the in-degree Laplacian
/// with the root row and column removed (fraction-free elimination).
pub fn count_arborescences_matrix_tree(g: &DagSnapshot) -> Result<BigUint> {
    let n = g.nodes.len();
    if n > MATRIX_TREE_LIMIT {
        return Err(Error::Capacity(format!(
            "matrix-tree oracle handles at most {MATRIX_TREE_LIMIT} nodes, got {n}"
        )));
    }
    let pos = g.positions();
    let mut lap = vec![vec![0i64; n]; n];
    for a in &g.arcs {
        let (u, v) = (pos[&a.src], pos[&a.dst]);
        lap[v][v] += 1;
        lap[u][v] -= 1;
    }
    let root = pos[&g.root];
    let keep: Vec<usize> = (0..n).filter(|&i| i != root).collect();
    let mut m: Vec<Vec<BigInt>> = keep
        .iter()
        .map(|&r| keep.iter().map(|&c| BigInt::from(lap[r][c])).collect())
        .collect();
    let det = bareiss_determinant(&mut m);
    Ok(det
        .to_biguint()
        .expect("Laplacian minors of a digraph are non-negative"))
}

fn bareiss_determinant(m: &mut [Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn arc(src: u64, dst: u64) -> DagArc {
        DagArc {
            src,
            dst,
            kind: ArcKind::Organic,
        }
    }

    fn path() -> DagSnapshot {
        DagSnapshot::new(1, vec![1, 2, 3], vec![arc(1, 2), arc(2, 3)]).unwrap()
    }

    fn triangle() -> DagSnapshot {
        DagSnapshot::new(1, vec![1, 2, 3], vec![arc(1, 2), arc(1, 3), arc(2, 3)]).unwrap()
    }

    #[test]
    fn path_graph() {
        let g = path();
        assert_eq!(count_arborescences_product(&g), 0.0);
        assert_eq!(count_arborescences_matrix_tree(&g).unwrap(), BigUint::from(1u32));
        let d = degree_profiles(&g);
        assert_eq!(d.out_degree_by_rank, vec![1, 1, 0]);
        assert_eq!(d.in_degree_by_rank, vec![0, 1, 1]);
    }

    #[test]
    fn triangle_graph() {
        let g = triangle();
        assert!((count_arborescences_product(&g) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(count_arborescences_matrix_tree(&g).unwrap(), BigUint::from(2u32));
        assert_eq!(degree_profiles(&g).in_degree_by_rank[2], 2);
    }

    #[test]
    fn unreachable_node() {
        let g = DagSnapshot::new(1, vec![1, 2, 3], vec![arc(1, 2)]).unwrap();
        assert_eq!(count_arborescences_product(&g), f64::NEG_INFINITY);
        assert!(count_arborescences_matrix_tree(&g).unwrap().is_zero());
    }

    #[test]
    fn rejects_backward_arcs_and_bad_roots() {
        assert!(DagSnapshot::new(1, vec![1, 2], vec![arc(2, 1)]).is_err());
        assert!(DagSnapshot::new(2, vec![1, 2], vec![]).is_err());
        assert!(DagSnapshot::new(1, vec![1, 2], vec![arc(1, 2), arc(1, 2)]).is_err());
        let big: Vec<u64> = (0..21).collect();
        let g = DagSnapshot::new(0, big, vec![]).unwrap();
        assert!(matches!(count_arborescences_matrix_tree(&g), Err(Error::Capacity(_))));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = triangle();
        g.arcs[1].kind = ArcKind::Recovery;
        let text = g.to_edge_list();
        assert_eq!(text, "root 1\n1 2 organic\n1 3 recovery\n2 3 organic\n");
        assert_eq!(DagSnapshot::from_edge_list(&text).unwrap(), g);
    }

    #[test]
    fn edge_list_errors_carry_lines() {
        let err = DagSnapshot::from_edge_list("root 0\n0 1 organic\n1 x organic\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = DagSnapshot::from_edge_list("0 1 organic\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = DagSnapshot::from_edge_list("root 0\n0 1 tree\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    fn random_dag() -> impl Strategy<Value = DagSnapshot> {
        (2usize..=8).prop_flat_map(|n| {
            let pairs: Vec<(u64, u64)> = (0..n as u64)
                .flat_map(|d| (0..d).map(move |s| (s, d)))
                .collect();
            proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |mask| {
                let arcs = pairs
                    .iter()
                    .zip(mask)
                    .filter(|(_, keep)| *keep)
                    .map(|(&(s, d), _)| arc(s, d))
                    .collect();
                DagSnapshot::new(0, (0..n as u64).collect(), arcs).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn product_equals_determinant(g in random_dag()) {
            let det = count_arborescences_matrix_tree(&g).unwrap();
            let log = count_arborescences_product(&g);
            if det.is_zero() {
                prop_assert_eq!(log, f64::NEG_INFINITY);
            } else {
                let exact: u64 = degree_profiles(&g).in_degree_by_rank[1..].iter().map(|&d| d as u64).product();
                prop_assert_eq!(det.to_u64().unwrap(), exact);
                prop_assert!((log.exp() - exact as f64).abs() < 1e-9 * exact as f64);
            }
        }

        #[test]
        fn handshake(g in random_dag()) {
            let d = degree_profiles(&g);
            let a = g.arcs().len() as u32;
            prop_assert_eq!(d.out_degree_by_rank.iter().sum::<u32>(), a);
            prop_assert_eq!(d.in_degree_by_rank.iter().sum::<u32>(), a);
        }
    }
}
