//! Graph topologies and input identifier assignments.
//!
//! Rings are the primary topology; general bounded-degree graphs are only
//! accepted by the `deltasq` protocol. Identifier assignments come in two
//! flavours: globally unique identifiers, and identifiers that merely form a
//! proper coloring of the graph.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("identifier range [0, {bound}) is too small for {nodes} nodes")]
    RangeTooSmall { bound: u64, nodes: usize },
    #[error("graph admits no proper coloring with {0} colors")]
    ColoringInfeasible(u64),
    #[error("invalid identifier assignment: {0}")]
    InvalidIds(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple connected graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
}

impl Graph {
    /// The `n`-node ring where node `i` is adjacent to `i ± 1 (mod n)`.
    pub fn cycle(n: usize) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::InvalidTopology(format!("a cycle needs at least 3 nodes, got {n}")));
        }
        let adjacency = (0..n)
            .map(|i| {
                let mut nb = vec![(i + n - 1) % n, (i + 1) % n];
                nb.sort_unstable();
                nb
            })
            .collect();
        Ok(Graph { adjacency })
    }

    /// Builds a graph from an undirected edge list. Duplicate edges are merged;
    /// self-loops, out-of-range endpoints and disconnected graphs are rejected.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, ModelError> {
        if node_count < 2 {
            return Err(ModelError::InvalidTopology(format!("need at least 2 nodes, got {node_count}")));
        }
        let mut sets = vec![BTreeSet::new(); node_count];
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(ModelError::InvalidTopology(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(ModelError::InvalidTopology(format!("self-loop at node {u}")));
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        let graph = Graph { adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect() };
        if !graph.is_connected() {
            return Err(ModelError::InvalidTopology("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// Seeded connected graph with maximum degree at most `max_degree`.
    ///
    /// A random spanning tree is grown first (each new node attaches to a
    /// uniformly drawn earlier node, redrawing while that node is saturated),
    /// then `extra_edges` additional edges are attempted with the same
    /// rejection rule.
    pub fn random_bounded_degree(
        n: usize,
        max_degree: usize,
        extra_edges: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::InvalidTopology(format!("need at least 2 nodes, got {n}")));
        }
        if max_degree < 2 {
            return Err(ModelError::InvalidTopology(format!("maximum degree must be at least 2, got {max_degree}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
        for v in 1..n {
            loop {
                let u = rng.gen_range(0..v);
                if sets[u].len() < max_degree {
                    sets[u].insert(v);
                    sets[v].insert(u);
                    break;
                }
            }
        }
        let mut added = 0;
        let mut attempts = 0;
        while added < extra_edges && attempts < 64 * (extra_edges + 1) {
            attempts += 1;
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u == v || sets[u].contains(&v) || sets[u].len() >= max_degree || sets[v].len() >= max_degree {
                continue;
            }
            sets[u].insert(v);
            sets[v].insert(u);
            added += 1;
        }
        Ok(Graph { adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, p: NodeId) -> &[NodeId] {
        &self.adjacency[p]
    }

    pub fn degree(&self, p: NodeId) -> usize {
        self.adjacency[p].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn are_adjacent(&self, p: NodeId, q: NodeId) -> bool {
        self.adjacency[p].binary_search(&q).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// True for a connected 2-regular graph, i.e. a ring.
    pub fn is_cycle(&self) -> bool {
        self.node_count() >= 3 && self.adjacency.iter().all(|nb| nb.len() == 2) && self.is_connected()
    }

    /// Nodes in ring order starting from node 0, or `None` for non-cycles.
    pub fn ring_order(&self) -> Option<Vec<NodeId>> {
        if !self.is_cycle() {
            return None;
        }
        let n = self.node_count();
        let mut order = Vec::with_capacity(n);
        let (mut prev, mut cur) = (usize::MAX, 0);
        for _ in 0..n {
            order.push(cur);
            let next = self.adjacency[cur].iter().copied().find(|&v| v != prev).expect("cycle node has two neighbors");
            prev = cur;
            cur = next;
        }
        Some(order)
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Parses the edge-list format: one `u v` pair per line, 0-based,
    /// `#` starts a comment. The node count is one more than the largest index.
    pub fn parse_edge_list(text: &str) -> Result<Self, ModelError> {
        let mut edges = Vec::new();
        for (line, raw) in data_lines(text) {
            let (u, v) = parse_pair(raw, line)?;
            edges.push((to_index(u, line)?, to_index(v, line)?));
        }
        let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::from_edges(n, edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges().map(|(u, v)| format!("{u} {v}\n")).collect()
    }
}

impl fmt::Display for Graph {
    /// `cycle:<n>` for rings built by [`Graph::cycle`], otherwise
    /// `edges:<n>:u-v,u-v,...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.node_count();
        if n >= 3 && Graph::cycle(n).is_ok_and(|c| &c == self) {
            return write!(f, "cycle:{n}");
        }
        write!(f, "edges:{n}:")?;
        for (i, (u, v)) in self.edges().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{u}-{v}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Graph {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| ModelError::Parse { line: 1, msg: format!("{msg}: {s:?}") };
        if let Some(n) = s.strip_prefix("cycle:") {
            return Graph::cycle(n.parse().map_err(|_| bad("bad cycle size"))?);
        }
        let rest = s.strip_prefix("edges:").ok_or_else(|| bad("unknown graph form"))?;
        let (n, list) = rest.split_once(':').ok_or_else(|| bad("missing node count"))?;
        let n: usize = n.parse().map_err(|_| bad("bad node count"))?;
        let mut edges = Vec::new();
        for e in list.split(',').filter(|e| !e.is_empty()) {
            let (u, v) = e.split_once('-').ok_or_else(|| bad("bad edge"))?;
            edges.push((
                u.parse().map_err(|_| bad("bad edge endpoint"))?,
                v.parse().map_err(|_| bad("bad edge endpoint"))?,
            ));
        }
        Graph::from_edges(n, edges)
    }
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdKind {
    Unique,
    ProperColoring,
}

/// The input identifier `X_p` of every node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdAssignment {
    pub ids: Vec<u64>,
    pub kind: IdKind,
}

impl IdAssignment {
    /// Wraps `ids` after checking the invariant of `kind` against `g`.
    pub fn new(g: &Graph, ids: Vec<u64>, kind: IdKind) -> Result<Self, ModelError> {
        let assignment = IdAssignment { ids, kind };
        assignment.validate(g)?;
        Ok(assignment)
    }

    /// Picks the strongest kind the values satisfy: unique if pairwise
    /// distinct, proper-coloring otherwise.
    pub fn infer(g: &Graph, ids: Vec<u64>) -> Result<Self, ModelError> {
        let distinct: BTreeSet<_> = ids.iter().collect();
        let kind = if distinct.len() == ids.len() { IdKind::Unique } else { IdKind::ProperColoring };
        Self::new(g, ids, kind)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self, g: &Graph) -> Result<(), ModelError> {
        if self.ids.len() != g.node_count() {
            return Err(ModelError::InvalidIds(format!("{} identifiers for {} nodes", self.ids.len(), g.node_count())));
        }
        if let Some((u, v)) = g.edges().find(|&(u, v)| self.ids[u] == self.ids[v]) {
            return Err(ModelError::InvalidIds(format!("adjacent nodes {u} and {v} share identifier {}", self.ids[u])));
        }
        if self.kind == IdKind::Unique {
            let distinct: BTreeSet<_> = self.ids.iter().collect();
            if distinct.len() != self.ids.len() {
                return Err(ModelError::InvalidIds("identifiers are not pairwise distinct".into()));
            }
        }
        Ok(())
    }

    /// Parses the id-file format: one `node id` pair per line, `#` comments.
    pub fn parse_id_file(g: &Graph, text: &str) -> Result<Self, ModelError> {
        let mut ids = vec![None; g.node_count()];
        for (line, raw) in data_lines(text) {
            let (node, id) = parse_pair(raw, line)?;
            let node = to_index(node, line)?;
            let slot = ids
                .get_mut(node)
                .ok_or_else(|| ModelError::Parse { line, msg: format!("node {node} out of range") })?;
            if slot.replace(id).is_some() {
                return Err(ModelError::Parse { line, msg: format!("node {node} listed twice") });
            }
        }
        let ids = ids
            .into_iter()
            .enumerate()
            .map(|(p, id)| id.ok_or_else(|| ModelError::InvalidIds(format!("node {p} has no identifier"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::infer(g, ids)
    }

    pub fn load_id_file(g: &Graph, path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::parse_id_file(g, &std::fs::read_to_string(path)?)
    }

    pub fn to_id_file(&self) -> String {
        self.ids.iter().enumerate().map(|(p, x)| format!("{p} {x}\n")).collect()
    }
}

/// Default identifier range `[0, n³)`, never smaller than `n`.
pub fn default_id_bound(n: usize) -> u64 {
    let n = n as u64;
    n.saturating_mul(n).saturating_mul(n).max(n)
}

/// Uniform injective assignment into `[0, bound)`, deterministic per seed.
pub fn random_unique_ids(g: &Graph, bound: u64, seed: u64) -> Result<IdAssignment, ModelError> {
    let n = g.node_count();
    if bound < n as u64 {
        return Err(ModelError::RangeTooSmall { bound, nodes: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = rand::seq::index::sample(&mut rng, bound as usize, n).into_iter().map(|x| x as u64).collect();
    Ok(IdAssignment { ids, kind: IdKind::Unique })
}

/// `ids(i) = i` around the ring: one local maximum, one local minimum and a
/// single monotone chain through every other node.
pub fn monotone_chain_ids(n: usize) -> Result<IdAssignment, ModelError> {
    Graph::cycle(n)?;
    Ok(IdAssignment { ids: (0..n as u64).collect(), kind: IdKind::Unique })
}

/// A random proper coloring of `g` with values in `[0, k)`.
///
/// Backtracking search over nodes in BFS order with a seeded shuffle of the
/// candidate colors; exhausting the search proves infeasibility.
pub fn proper_coloring_ids(g: &Graph, k: u64, seed: u64) -> Result<IdAssignment, ModelError> {
    let n = g.node_count();
    if k == 0 || (k == 1 && n > 1) {
        return Err(ModelError::ColoringInfeasible(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = bfs_order(g);
    // Greedy never needs more than Δ+1 colors; 2Δ+2 keeps some variety.
    let palette: Vec<u64> = (0..k.min(2 * g.max_degree() as u64 + 2)).collect();
    let candidates: Vec<Vec<u64>> = order
        .iter()
        .map(|_| {
            let mut c = palette.clone();
            c.shuffle(&mut rng);
            c
        })
        .collect();
    let mut colors: Vec<Option<u64>> = vec![None; n];
    let mut cursor = vec![0usize; n];
    let mut depth = 0;
    while depth < n {
        let p = order[depth];
        let mut placed = false;
        while cursor[depth] < candidates[depth].len() {
            let c = candidates[depth][cursor[depth]];
            cursor[depth] += 1;
            if g.neighbors(p).iter().all(|&q| colors[q] != Some(c)) {
                colors[p] = Some(c);
                placed = true;
                break;
            }
        }
        if placed {
            depth += 1;
        } else {
            cursor[depth] = 0;
            colors[p] = None;
            if depth == 0 {
                return Err(ModelError::ColoringInfeasible(k));
            }
            depth -= 1;
            colors[order[depth]] = None;
        }
    }
    let ids = colors.into_iter().map(|c| c.expect("all nodes colored")).collect();
    Ok(IdAssignment { ids, kind: IdKind::ProperColoring })
}

fn bfs_order(g: &Graph) -> Vec<NodeId> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_pair(raw: &str, line: usize) -> Result<(u64, u64), ModelError> {
    let mut it = raw.split_whitespace().map(str::parse::<u64>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(ModelError::Parse { line, msg: format!("expected two naturals, got {raw:?}") }),
    }
}

fn to_index(v: u64, line: usize) -> Result<NodeId, ModelError> {
    usize::try_from(v).map_err(|_| ModelError::Parse { line, msg: format!("index {v} too large") })
}
