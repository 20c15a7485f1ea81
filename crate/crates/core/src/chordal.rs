//! Undirected graphs, chordality, chordal extensions, maximal cliques and
//! fundamental cycles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::network::bfs_order;

/// Simple undirected graph on nodes `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphJson {
            n: self.n(),
            edges: self.edges(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        if raw.edges.iter().any(|&(a, b)| a >= raw.n || b >= raw.n || a == b) {
            return Err(serde::de::Error::custom("edge out of range or self-loop"));
        }
        Ok(Graph::from_edges(raw.n, &raw.edges))
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge list; duplicates are ignored.
    ///
    /// # Panics
    /// On self-loops or out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::empty(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b, "self-loop at node {a}");
        assert!(a < self.n() && b < self.n(), "edge ({a}, {b}) out of range");
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
            let pos = self.adj[b].binary_search(&a).unwrap_err();
            self.adj[b].insert(pos, a);
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m());
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Some node not reachable from `root`, if any.
    pub fn unreachable_from(&self, root: usize) -> Option<usize> {
        if self.n() == 0 {
            return None;
        }
        let (order, _) = bfs_order(&self.adj, root);
        if order.len() == self.n() {
            return None;
        }
        let mut seen = vec![false; self.n()];
        for v in order {
            seen[v] = true;
        }
        seen.iter().position(|s| !s)
    }

    pub fn is_connected(&self) -> bool {
        self.unreachable_from(0).is_none()
    }

    /// BFS spanning tree from `root`: visit order and parent of every node.
    pub fn bfs_tree(&self, root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
        bfs_order(&self.adj, root)
    }

    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.m() + 1 == self.n()
    }
}

/// Maximum cardinality search. Returns an elimination ordering (the reverse
/// of the visit order), which is a perfect elimination ordering exactly when
/// the graph is chordal.
pub fn mcs_order(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut weight = vec![0usize; n];
    let mut done = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        // heaviest unnumbered node, lowest index on ties
        let mut best = None;
        for v in 0..n {
            if !done[v] && best.map_or(true, |b: usize| weight[v] > weight[b]) {
                best = Some(v);
            }
        }
        let v = best.unwrap();
        done[v] = true;
        visit.push(v);
        for &w in g.neighbors(v) {
            if !done[w] {
                weight[w] += 1;
            }
        }
    }
    visit.reverse();
    visit
}

/// Checks directly that for each node its later neighbours form a clique.
pub fn is_peo(g: &Graph, order: &[usize]) -> bool {
    let n = g.n();
    if order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return false;
        }
        pos[v] = i;
    }
    order.iter().all(|&v| {
        let later: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| pos[w] > pos[v]).collect();
        g.is_clique(&later)
    })
}

pub fn is_chordal(g: &Graph) -> bool {
    is_peo(g, &mcs_order(g))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordalExtension {
    pub base: Graph,
    pub fill_edges: Vec<(usize, usize)>,
    /// Perfect elimination ordering of `filled()`.
    pub peo: Vec<usize>,
    pub maximal_cliques: Vec<Vec<usize>>,
}

impl ChordalExtension {
    /// The chordal graph `base ∪ fill_edges`.
    pub fn filled(&self) -> Graph {
        let mut g = self.base.clone();
        for &(a, b) in &self.fill_edges {
            g.add_edge(a, b);
        }
        g
    }

    /// The trivial extension by the complete graph.
    pub fn complete(base: &Graph) -> Self {
        let n = base.n();
        let full = Graph::complete(n);
        let fill = full.edges().into_iter().filter(|&(a, b)| !base.has_edge(a, b)).collect();
        let peo: Vec<usize> = (0..n).collect();
        ChordalExtension {
            base: base.clone(),
            fill_edges: fill,
            maximal_cliques: cliques_from_peo(&full, &peo),
            peo,
        }
    }
}

/// Greedy minimum-degree elimination (ties broken by lowest index).
pub fn chordal_extend(g: &Graph) -> ChordalExtension {
    let n = g.n();
    let mut work: Vec<BTreeSet<usize>> =
        (0..n).map(|v| g.neighbors(v).iter().copied().collect()).collect();
    let mut alive = vec![true; n];
    let mut peo = Vec::with_capacity(n);
    let mut fill = BTreeSet::new();
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (work[v].len(), v))
            .unwrap();
        let nb: Vec<usize> = work[v].iter().copied().collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if work[a].insert(b) {
                    work[b].insert(a);
                    fill.insert((a.min(b), a.max(b)));
                }
            }
        }
        for &a in &nb {
            work[a].remove(&v);
        }
        alive[v] = false;
        peo.push(v);
    }
    let fill_edges: Vec<(usize, usize)> = fill.into_iter().collect();
    let mut filled = g.clone();
    for &(a, b) in &fill_edges {
        filled.add_edge(a, b);
    }
    let maximal_cliques = cliques_from_peo(&filled, &peo);
    ChordalExtension {
        base: g.clone(),
        fill_edges,
        peo,
        maximal_cliques,
    }
}

/// Maximal cliques of a chordal graph given one of its perfect elimination
/// orderings; sorted members, list sorted lexicographically.
pub fn cliques_from_peo(g: &Graph, peo: &[usize]) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut pos = vec![0; n];
    for (i, &v) in peo.iter().enumerate() {
        pos[v] = i;
    }
    let candidates: Vec<Vec<usize>> = peo
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| pos[w] > pos[v]).collect();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    let contains = |big: &[usize], small: &[usize]| small.iter().all(|x| big.binary_search(x).is_ok());
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let dominated = candidates.iter().enumerate().any(|(j, d)| {
            j != i && d.len() >= c.len() && contains(d, c) && (d.len() > c.len() || j < i)
        });
        if !dominated {
            out.push(c.clone());
        }
    }
    out.sort();
    out
}

/// Maximal cliques of the extension's chordal graph.
pub fn maximal_cliques(ext: &ChordalExtension) -> Vec<Vec<usize>> {
    cliques_from_peo(&ext.filled(), &ext.peo)
}

/// One cycle per non-tree edge of the BFS spanning tree from node 0, as a
/// closed node sequence `n1, n2, …, nk` (the edge `nk → n1` closes it).
pub fn fundamental_cycles(g: &Graph) -> Vec<Vec<usize>> {
    if g.n() == 0 {
        return Vec::new();
    }
    let (order, parent) = g.bfs_tree(0);
    let mut depth = vec![0usize; g.n()];
    for &v in &order {
        if let Some(p) = parent[v] {
            depth[v] = depth[p] + 1;
        }
    }
    let mut cycles = Vec::new();
    for (a, b) in g.edges() {
        if parent[a] == Some(b) || parent[b] == Some(a) {
            continue;
        }
        // walk both endpoints up to their common ancestor
        let (mut x, mut y) = (a, b);
        let mut left = vec![x];
        let mut right = vec![y];
        while x != y {
            if depth[x] >= depth[y] {
                x = parent[x].expect("connected graph");
                left.push(x);
            } else {
                y = parent[y].expect("connected graph");
                right.push(y);
            }
        }
        right.pop();
        right.reverse();
        // a → … → lca → … → b, closed by b → a
        left.extend(right);
        cycles.push(left);
    }
    cycles
}
