//! Undirected simple graphs, the generators used by the experiments, and the
//! plain-text edge-list format.
//!
//! Graphs are stored as sorted adjacency lists over node ids `0..n`. Every
//! graph accepted here is simple (no self-loops, no duplicate edges) and has
//! minimum degree at least one, so every node has a nonempty neighborhood to
//! consult during an update. Disconnected graphs are allowed — clique unions
//! depend on it — and the few operations that do require connectivity check
//! it themselves.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },
    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("node {node} has no incident edges")]
    IsolatedNode { node: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error("{what} needs at least {need} nodes, got {got}")]
    TooFewNodes {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("clique size must be at least 2, got {size}")]
    CliqueTooSmall { size: usize },
    #[error("tree max degree must be at least 2, got {dmax}")]
    TreeDegreeTooSmall { dmax: usize },
    #[error("regular graph needs n*d even, got n = {n}, d = {d}")]
    DegreeParity { n: usize, d: usize },
    #[error("regular graph needs 1 <= d < n, got n = {n}, d = {d}")]
    DegreeOutOfRange { n: usize, d: usize },
    #[error("no simple {d}-regular pairing found on {n} nodes after {attempts} attempts")]
    PairingRetriesExceeded { n: usize, d: usize, attempts: usize },
    #[error("bad graph spec {spec:?}: {msg}")]
    Spec { spec: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    degrees: Vec<u32>,
}

impl Graph {
    /// Builds a graph on `n` nodes from an edge iterator. Deduplicates
    /// repeated edges, rejects self-loops and out-of-range endpoints, and
    /// rejects isolated nodes (every node must have degree >= 1).
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            if u >= n {
                return Err(GraphError::NodeOutOfRange { node: u, n });
            }
            if v >= n {
                return Err(GraphError::NodeOutOfRange { node: v, n });
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &set {
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        for (node, nbrs) in adjacency.iter_mut().enumerate() {
            if nbrs.is_empty() {
                return Err(GraphError::IsolatedNode { node });
            }
            nbrs.sort_unstable();
        }
        let degrees = adjacency.iter().map(|a| a.len() as u32).collect();
        Ok(Graph { adjacency, degrees })
    }

    /// Parses the plain-text edge-list format: one `u v` pair per line,
    /// blank lines skipped, `#` starts a comment line. Node count is
    /// `1 + max id`.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut max_id = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let mut parts = body.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(GraphError::Parse {
                        line,
                        msg: format!("expected two node ids, got {body:?}"),
                    })
                }
            };
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|e| GraphError::Parse {
                    line,
                    msg: format!("bad node id {tok:?}: {e}"),
                })
            };
            let (u, v) = (parse(a)?, parse(b)?);
            max_id = Some(max_id.map_or(u.max(v), |m: usize| m.max(u).max(v)));
            edges.push((u, v));
        }
        match max_id {
            None => Err(GraphError::Empty),
            Some(m) => Graph::from_edges(m + 1, edges),
        }
    }

    /// Serializes to the same edge-list format `from_edge_list` reads:
    /// one `u v` line per edge with u < v, sorted, trailing newline.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for u in 0..self.node_count() {
            for &v in &self.adjacency[u] {
                if (v as usize) > u {
                    out.push_str(&format!("{u} {v}\n"));
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u] as usize
    }

    pub fn min_degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0) as usize
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&(v as u32)).is_ok()
    }

    /// Number of connected components (BFS over all nodes).
    pub fn component_count(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut queue = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push(start);
            while let Some(u) = queue.pop() {
                for &v in &self.adjacency[u] {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        queue.push(v as usize);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// A single cycle: connected and 2-regular.
    pub fn is_cycle(&self) -> bool {
        self.degrees.iter().all(|&d| d == 2) && self.is_connected()
    }
}

/// Cycle on `n >= 3` nodes: node `i` is adjacent to `(i±1) mod n`.
pub fn gen_cycle(n: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::TooFewNodes {
            what: "cycle",
            need: 3,
            got: n,
        });
    }
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Disjoint union of `k >= 1` cliques of size `s >= 2`; block `j` occupies
/// ids `j*s .. (j+1)*s`.
pub fn gen_clique_union(k: usize, s: usize) -> Result<Graph, GraphError> {
    if k < 1 {
        return Err(GraphError::TooFewNodes {
            what: "clique union",
            need: 1,
            got: k,
        });
    }
    if s < 2 {
        return Err(GraphError::CliqueTooSmall { size: s });
    }
    let mut edges = Vec::new();
    for block in 0..k {
        let base = block * s;
        for i in 0..s {
            for j in (i + 1)..s {
                edges.push((base + i, base + j));
            }
        }
    }
    Graph::from_edges(k * s, edges)
}

/// The Petersen graph: outer 5-cycle on 0..5, inner pentagram on 5..10
/// (`i+5 ~ ((i+2) mod 5)+5`), spokes `i ~ i+5`. 3-regular, 10 nodes,
/// 15 edges.
pub fn gen_petersen() -> Graph {
    let mut edges = Vec::with_capacity(15);
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i + 5, ((i + 2) % 5) + 5));
        edges.push((i, i + 5));
    }
    Graph::from_edges(10, edges).expect("petersen construction is fixed and valid")
}

/// Random tree by sequential attachment: node `i` (for `i >= 1`) attaches to
/// a uniformly random earlier node that still has fewer than `dmax`
/// neighbors. For `dmax >= 2` an eligible parent always exists (the chain of
/// most recent nodes degenerates to a path in the worst case).
pub fn gen_random_tree(n: usize, dmax: usize, seed: u64) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes {
            what: "tree",
            need: 2,
            got: n,
        });
    }
    if dmax < 2 {
        return Err(GraphError::TreeDegreeTooSmall { dmax });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deg = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut eligible: Vec<usize> = Vec::with_capacity(n);
    for i in 1..n {
        eligible.clear();
        eligible.extend((0..i).filter(|&j| deg[j] < dmax));
        debug_assert!(!eligible.is_empty(), "dmax >= 2 always leaves a free slot");
        let parent = eligible[rng.random_range(0..eligible.len())];
        deg[parent] += 1;
        deg[i] += 1;
        edges.push((parent, i));
    }
    Graph::from_edges(n, edges)
}

const PAIRING_ATTEMPTS: usize = 1000;

/// Random `d`-regular graph via the pairing model: lay out `d` stubs per
/// node, shuffle, pair consecutive stubs, and restart from a fresh RNG
/// stream whenever the pairing produces a self-loop or duplicate edge.
/// Deterministic in `seed`; fails after 1000 rejected pairings.
pub fn gen_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    if d < 1 || d >= n {
        return Err(GraphError::DegreeOutOfRange { n, d });
    }
    if (n * d) % 2 != 0 {
        return Err(GraphError::DegreeParity { n, d });
    }
    let mut stubs: Vec<u32> = Vec::with_capacity(n * d);
    'attempt: for attempt in 0..PAIRING_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        stubs.clear();
        for v in 0..n {
            stubs.extend(std::iter::repeat(v as u32).take(d));
        }
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'attempt;
            }
        }
        let edges = seen.iter().map(|&(u, v)| (u as usize, v as usize));
        return Graph::from_edges(n, edges);
    }
    Err(GraphError::PairingRetriesExceeded {
        n,
        d,
        attempts: PAIRING_ATTEMPTS,
    })
}

/// Textual description of a graph, e.g. `cycle:12`, `cliques:4x5`,
/// `regular:30:4:7`, `tree:40:4:1`, `petersen`, or `file:graphs/g.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    Cycle(usize),
    Petersen,
    Cliques { k: usize, s: usize },
    Tree { n: usize, dmax: usize, seed: u64 },
    Regular { n: usize, d: usize, seed: u64 },
    File(PathBuf),
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, GraphError> {
        match self {
            GraphSpec::Cycle(n) => gen_cycle(*n),
            GraphSpec::Petersen => Ok(gen_petersen()),
            GraphSpec::Cliques { k, s } => gen_clique_union(*k, *s),
            GraphSpec::Tree { n, dmax, seed } => gen_random_tree(*n, *dmax, *seed),
            GraphSpec::Regular { n, d, seed } => gen_random_regular(*n, *d, *seed),
            GraphSpec::File(path) => Graph::from_edge_list(&std::fs::read_to_string(path)?),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Cycle(n) => write!(f, "cycle:{n}"),
            GraphSpec::Petersen => write!(f, "petersen"),
            GraphSpec::Cliques { k, s } => write!(f, "cliques:{k}x{s}"),
            GraphSpec::Tree { n, dmax, seed } => write!(f, "tree:{n}:{dmax}:{seed}"),
            GraphSpec::Regular { n, d, seed } => write!(f, "regular:{n}:{d}:{seed}"),
            GraphSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| GraphError::Spec {
            spec: s.to_string(),
            msg: msg.to_string(),
        };
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let fields = |r: Option<&str>| -> Vec<String> {
            r.map(|r| r.split(':').map(str::to_string).collect())
                .unwrap_or_default()
        };
        let num = |tok: &str, what: &str| {
            tok.parse::<usize>()
                .map_err(|_| bad(&format!("bad {what} {tok:?}")))
        };
        match head {
            "petersen" => {
                if rest.is_some() {
                    return Err(bad("petersen takes no arguments"));
                }
                Ok(GraphSpec::Petersen)
            }
            "cycle" => match fields(rest).as_slice() {
                [n] => Ok(GraphSpec::Cycle(num(n, "node count")?)),
                _ => Err(bad("expected cycle:N")),
            },
            "cliques" => match fields(rest).as_slice() {
                [kxs] => {
                    let (k, s_tok) = kxs.split_once('x').ok_or_else(|| bad("expected cliques:KxS"))?;
                    Ok(GraphSpec::Cliques {
                        k: num(k, "clique count")?,
                        s: num(s_tok, "clique size")?,
                    })
                }
                _ => Err(bad("expected cliques:KxS")),
            },
            "tree" => match fields(rest).as_slice() {
                [n, dmax, seed] => Ok(GraphSpec::Tree {
                    n: num(n, "node count")?,
                    dmax: num(dmax, "max degree")?,
                    seed: seed.parse().map_err(|_| bad(&format!("bad seed {seed:?}")))?,
                }),
                _ => Err(bad("expected tree:N:DMAX:SEED")),
            },
            "regular" => match fields(rest).as_slice() {
                [n, d, seed] => Ok(GraphSpec::Regular {
                    n: num(n, "node count")?,
                    d: num(d, "degree")?,
                    seed: seed.parse().map_err(|_| bad(&format!("bad seed {seed:?}")))?,
                }),
                _ => Err(bad("expected regular:N:D:SEED")),
            },
            "file" => match rest {
                Some(path) if !path.is_empty() => Ok(GraphSpec::File(PathBuf::from(path))),
                _ => Err(bad("expected file:PATH")),
            },
            other => Err(bad(&format!("unknown graph kind {other:?}"))),
        }
    }
}
