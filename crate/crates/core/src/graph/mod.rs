//! Graphs, line-graph distances, edge colorings and canonical matchings.

mod generate;
mod io;

pub use generate::{generate, InstanceKind};
pub use io::GraphFile;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

pub type VertexId = usize;
pub type EdgeId = usize;
pub type Color = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<[VertexId; 2]>,
    adj: Vec<Vec<EdgeId>>,
    max_degree: usize,
    multigraph: bool,
    arrival_order: Option<Vec<EdgeId>>,
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl Graph {
    /// Simple graph: no self-loops, no parallel edges.
    pub fn new(n: usize, edges: Vec<[VertexId; 2]>) -> Result<Graph> {
        Graph::build(n, edges, false)
    }

    /// Multigraph with parallel edges, used for virtual graphs in degree splitting.
    pub fn new_multigraph(n: usize, edges: Vec<[VertexId; 2]>) -> Result<Graph> {
        Graph::build(n, edges, true)
    }

    fn build(n: usize, edges: Vec<[VertexId; 2]>, multigraph: bool) -> Result<Graph> {
        let mut adj = vec![Vec::new(); n];
        for (id, &[u, v]) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge {id} has endpoint outside 0..{n}")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {id} is a self-loop at {u}")));
            }
            adj[u].push(id);
            adj[v].push(id);
        }
        if !multigraph {
            let mut seen = std::collections::HashSet::with_capacity(edges.len());
            for (id, &[u, v]) in edges.iter().enumerate() {
                if !seen.insert((u.min(v), u.max(v))) {
                    return Err(Error::InvalidGraph(format!("edge {id} duplicates {{{u},{v}}}")));
                }
            }
        }
        let max_degree = adj.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Graph {
            n,
            edges,
            adj,
            max_degree,
            multigraph,
            arrival_order: None,
            meta: serde_json::Map::new(),
        })
    }

    pub fn with_arrival_order(mut self, order: Vec<EdgeId>) -> Result<Graph> {
        check_permutation(&order, self.m())?;
        self.arrival_order = Some(order);
        Ok(self)
    }

    pub fn arrival_order(&self) -> Option<&[EdgeId]> {
        self.arrival_order.as_deref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[VertexId; 2]] {
        &self.edges
    }

    pub fn endpoints(&self, e: EdgeId) -> [VertexId; 2] {
        self.edges[e]
    }

    pub fn other(&self, e: EdgeId, v: VertexId) -> VertexId {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    pub fn check_edge(&self, e: EdgeId) -> Result<()> {
        if e < self.m() {
            Ok(())
        } else {
            Err(Error::UnknownEdge(e))
        }
    }

    /// Distinct neighbors of `v`, sorted.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self.adj[v].iter().map(|&e| self.other(e, v)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Edges sharing an endpoint with `e`, excluding `e`; sorted and deduplicated.
    pub fn edge_neighbors(&self, e: EdgeId) -> Vec<EdgeId> {
        let [u, v] = self.edges[e];
        let mut out: Vec<EdgeId> = self.adj[u]
            .iter()
            .chain(self.adj[v].iter())
            .copied()
            .filter(|&f| f != e)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn shares_vertex(&self, e: EdgeId, f: EdgeId) -> bool {
        let [a, b] = self.edges[e];
        let [c, d] = self.edges[f];
        a == c || a == d || b == c || b == d
    }

    /// Subgraph on the listed edges, keeping all vertices. Returns the map
    /// from new edge ids to original ids.
    pub fn edge_subgraph(&self, ids: &[EdgeId]) -> Result<(Graph, Vec<EdgeId>)> {
        let edges = ids.iter().map(|&e| self.edges[e]).collect();
        let g = Graph::build(self.n, edges, self.multigraph)?;
        Ok((g, ids.to_vec()))
    }
}

pub(crate) fn check_permutation(order: &[EdgeId], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(Error::InvalidParams(format!(
            "arrival order has {} entries for {m} edges",
            order.len()
        )));
    }
    let mut seen = vec![false; m];
    for &e in order {
        if e >= m || std::mem::replace(&mut seen[e], true) {
            return Err(Error::InvalidParams(format!("arrival order is not a permutation (edge {e})")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineDistance {
    Finite(usize),
    Unreachable,
}

/// Reusable breadth-first search over the line graph. Keeps its scratch
/// buffers between queries so repeated balls on one graph cost only the
/// size of the ball.
#[derive(Clone, Debug, Default)]
pub struct LineBfs {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    generation: u32,
    order: Vec<EdgeId>,
    vstamp: Vec<u32>,
}

impl LineBfs {
    pub fn new(g: &Graph) -> LineBfs {
        LineBfs {
            stamp: vec![0; g.m()],
            dist: vec![0; g.m()],
            generation: 0,
            order: Vec::new(),
            vstamp: vec![0; g.n()],
        }
    }

    fn bump(&mut self, g: &Graph) {
        if self.stamp.len() != g.m() || self.vstamp.len() != g.n() {
            *self = LineBfs::new(g);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.vstamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    /// Edges within line distance `radius` of `e` in BFS order.
    pub fn run(&mut self, g: &Graph, e: EdgeId, radius: usize) -> &[EdgeId] {
        self.bump(g);
        let gen = self.generation;
        self.order.clear();
        self.order.push(e);
        self.stamp[e] = gen;
        self.dist[e] = 0;
        let mut head = 0;
        while head < self.order.len() {
            let f = self.order[head];
            head += 1;
            let d = self.dist[f] as usize;
            if d == radius {
                continue;
            }
            for x in g.endpoints(f) {
                // An expanded vertex contributes nothing new on a second visit.
                if self.vstamp[x] == gen {
                    continue;
                }
                self.vstamp[x] = gen;
                for &h in g.incident(x) {
                    if self.stamp[h] != gen {
                        self.stamp[h] = gen;
                        self.dist[h] = d as u32 + 1;
                        self.order.push(h);
                    }
                }
            }
        }
        &self.order
    }

    /// Distance of `f` in the most recent `run`, if reached.
    pub fn dist(&self, f: EdgeId) -> Option<usize> {
        (self.stamp[f] == self.generation).then(|| self.dist[f] as usize)
    }

    pub fn contains(&self, f: EdgeId) -> bool {
        self.stamp[f] == self.generation
    }
}

pub fn line_distance(g: &Graph, e: EdgeId, f: EdgeId) -> Result<LineDistance> {
    g.check_edge(e)?;
    g.check_edge(f)?;
    let mut bfs = LineBfs::new(g);
    bfs.run(g, e, usize::MAX);
    Ok(match bfs.dist(f) {
        Some(d) => LineDistance::Finite(d),
        None => LineDistance::Unreachable,
    })
}

/// All edges within line distance `radius` of `e`, sorted, including `e`.
pub fn ball(g: &Graph, e: EdgeId, radius: usize) -> Vec<EdgeId> {
    let mut bfs = LineBfs::new(g);
    let mut out = bfs.run(g, e, radius).to_vec();
    out.sort_unstable();
    out
}

/// Vertex distances from `src`, truncated at `limit`.
pub fn vertex_distances(g: &Graph, src: VertexId, limit: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(x) = q.pop_front() {
        let d = dist[x].unwrap();
        if d == limit {
            continue;
        }
        for &e in g.incident(x) {
            let y = g.other(e, x);
            if dist[y].is_none() {
                dist[y] = Some(d + 1);
                q.push_back(y);
            }
        }
    }
    dist
}

/// Vertices at distance 1..=k from `v` (neighbors of `v` in the k-th power), sorted.
pub fn power_neighbors(g: &Graph, v: VertexId, k: usize) -> Vec<VertexId> {
    vertex_distances(g, v, k)
        .iter()
        .enumerate()
        .filter_map(|(x, d)| matches!(d, Some(d) if *d > 0).then_some(x))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeColoring {
    pub colors: Vec<Option<Color>>,
    /// Main palette is `1..=delta`; the fallback palette starts at `delta + 1`.
    pub delta: usize,
}

impl EdgeColoring {
    pub fn new(m: usize, delta: usize) -> EdgeColoring {
        EdgeColoring {
            colors: vec![None; m],
            delta,
        }
    }

    pub fn get(&self, e: EdgeId) -> Option<Color> {
        self.colors[e]
    }

    pub fn set(&mut self, e: EdgeId, c: Color) {
        self.colors[e] = Some(c);
    }

    pub fn max_color(&self) -> Color {
        self.colors.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub proper: bool,
    pub colors_used: usize,
    pub max_fallback_degree: usize,
    pub main_colors_used: usize,
    pub fallback_colors_used: usize,
    pub conflicts: Vec<(EdgeId, EdgeId, Color)>,
}

pub fn verify_edge_coloring(g: &Graph, col: &EdgeColoring) -> Result<VerifyReport> {
    if col.colors.len() != g.m() {
        return Err(Error::InvalidParams(format!(
            "coloring covers {} edges, graph has {}",
            col.colors.len(),
            g.m()
        )));
    }
    if let Some(e) = col.colors.iter().position(Option::is_none) {
        return Err(Error::UncoloredEdge(e));
    }
    let mut conflicts = Vec::new();
    let mut max_fallback_degree = 0;
    for v in 0..g.n() {
        let mut seen: BTreeMap<Color, EdgeId> = BTreeMap::new();
        let mut fallback = 0;
        for &e in g.incident(v) {
            let c = col.colors[e].unwrap();
            if c as usize > col.delta {
                fallback += 1;
            }
            if let Some(&f) = seen.get(&c) {
                conflicts.push((f.min(e), f.max(e), c));
            } else {
                seen.insert(c, e);
            }
        }
        max_fallback_degree = max_fallback_degree.max(fallback);
    }
    conflicts.sort_unstable();
    conflicts.dedup();
    let mut used: Vec<Color> = col.colors.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let main_colors_used = used.iter().filter(|&&c| c as usize <= col.delta).count();
    Ok(VerifyReport {
        proper: conflicts.is_empty(),
        colors_used: used.len(),
        max_fallback_degree,
        main_colors_used,
        fallback_colors_used: used.len() - main_colors_used,
        conflicts,
    })
}

/// Greedy proper edge coloring in edge-id order with colors from 1; uses at
/// most 2Δ−1 colors. Serves as the base coloring for canonical matchings.
pub fn greedy_edge_coloring(g: &Graph) -> EdgeColoring {
    let mut col = EdgeColoring::new(g.m(), g.max_degree());
    let mut used: Vec<Color> = Vec::new();
    for e in 0..g.m() {
        used.clear();
        for x in g.endpoints(e) {
            used.extend(g.incident(x).iter().filter_map(|&f| col.colors[f]));
        }
        used.sort_unstable();
        let mut c = 1;
        for &u in &used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        col.colors[e] = Some(c);
    }
    col
}

fn check_proper(g: &Graph, col: &EdgeColoring) -> Result<()> {
    let rep = verify_edge_coloring(g, col)?;
    if let Some(&(e, f, c)) = rep.conflicts.first() {
        return Err(Error::ImproperColoring(e, f, c));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingPartition {
    /// Matchings ordered by base color; edges within one matching sorted by id.
    pub matchings: Vec<Vec<EdgeId>>,
    pub colors: Vec<Color>,
}

/// Partition of all edges incident to `U` into matchings, one per base color.
pub fn canonical_matchings(
    g: &Graph,
    base: &EdgeColoring,
    w: VertexId,
    u_set: &[VertexId],
) -> Result<MatchingPartition> {
    check_proper(g, base)?;
    if w >= g.n() {
        return Err(Error::UnknownVertex(w));
    }
    let nbrs = g.neighbors(w);
    for &u in u_set {
        if nbrs.binary_search(&u).is_err() {
            return Err(Error::InvalidParams(format!("vertex {u} is not a neighbor of {w}")));
        }
    }
    Ok(canonical_matchings_unchecked(g, base, u_set))
}

/// As `canonical_matchings`, for callers that validated the base coloring once.
pub fn canonical_matchings_unchecked(
    g: &Graph,
    base: &EdgeColoring,
    u_set: &[VertexId],
) -> MatchingPartition {
    let mut edges: Vec<EdgeId> = u_set.iter().flat_map(|&u| g.incident(u).iter().copied()).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut classes: BTreeMap<Color, Vec<EdgeId>> = BTreeMap::new();
    for e in edges {
        classes.entry(base.colors[e].expect("base coloring is total")).or_default().push(e);
    }
    let (colors, matchings) = classes.into_iter().unzip();
    MatchingPartition { matchings, colors }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::new(n, (0..n - 1).map(|i| [i, i + 1]).collect()).unwrap()
    }

    #[test]
    fn line_distance_on_path() {
        let g = path(4);
        assert_eq!(line_distance(&g, 0, 1).unwrap(), LineDistance::Finite(1));
        assert_eq!(line_distance(&g, 0, 2).unwrap(), LineDistance::Finite(2));
        assert_eq!(line_distance(&g, 1, 1).unwrap(), LineDistance::Finite(0));
        assert!(line_distance(&g, 0, 9).is_err());
    }

    #[test]
    fn line_distance_unreachable() {
        let g = Graph::new(4, vec![[0, 1], [2, 3]]).unwrap();
        assert_eq!(line_distance(&g, 0, 1).unwrap(), LineDistance::Unreachable);
    }

    #[test]
    fn balls() {
        let g = path(13);
        assert_eq!(ball(&g, 0, 0), vec![0]);
        assert_eq!(ball(&g, 0, 5), vec![0, 1, 2, 3, 4, 5]);
        let star = Graph::new(5, vec![[0, 1], [0, 2], [0, 3], [1, 4]]).unwrap();
        assert_eq!(ball(&star, 0, 1), vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Graph::new(2, vec![[0, 0]]).is_err());
        assert!(Graph::new(2, vec![[0, 1], [1, 0]]).is_err());
        assert!(Graph::new_multigraph(2, vec![[0, 1], [1, 0]]).is_ok());
        assert!(Graph::new(2, vec![[0, 2]]).is_err());
    }

    #[test]
    fn verify_triangle() {
        let g = Graph::new(3, vec![[0, 1], [1, 2], [0, 2]]).unwrap();
        let mut col = EdgeColoring::new(3, 2);
        for (e, c) in [1, 2, 3].into_iter().enumerate() {
            col.set(e, c);
        }
        let rep = verify_edge_coloring(&g, &col).unwrap();
        assert!(rep.proper);
        assert_eq!(rep.colors_used, 3);
        assert_eq!(rep.max_fallback_degree, 1);
        col.set(1, 1);
        col.set(2, 2);
        let rep = verify_edge_coloring(&g, &col).unwrap();
        assert!(!rep.proper);
        assert_eq!(rep.conflicts, vec![(0, 1, 1)]);
        col.colors[2] = None;
        assert!(matches!(verify_edge_coloring(&g, &col), Err(Error::UncoloredEdge(2))));
    }

    #[test]
    fn greedy_is_proper_and_bounded() {
        let g = generate(&InstanceKind::RandomMaxDeg { n: 60, delta: 7 }, 3).unwrap();
        let col = greedy_edge_coloring(&g);
        let rep = verify_edge_coloring(&g, &col).unwrap();
        assert!(rep.proper);
        assert!(col.max_color() as usize <= 2 * g.max_degree() - 1);
    }

    #[test]
    fn canonical_matchings_small_cases() {
        let g = Graph::new(4, vec![[0, 1], [1, 2], [1, 3]]).unwrap();
        let base = greedy_edge_coloring(&g);
        let mp = canonical_matchings(&g, &base, 0, &[1]).unwrap();
        assert_eq!(mp.matchings, vec![vec![0], vec![1], vec![2]]);
        let tri = Graph::new(3, vec![[0, 1], [1, 2], [0, 2]]).unwrap();
        let base = greedy_edge_coloring(&tri);
        let mp = canonical_matchings(&tri, &base, 0, &[1, 2]).unwrap();
        assert_eq!(mp.matchings.len(), 3);
        assert!(mp.matchings.iter().all(|m| m.len() == 1));
        assert!(canonical_matchings(&g, &base_bad(&g), 0, &[1]).is_err());
        assert!(canonical_matchings(&g, &greedy_edge_coloring(&g), 0, &[2]).is_err());
    }

    fn base_bad(g: &Graph) -> EdgeColoring {
        let mut c = EdgeColoring::new(g.m(), g.max_degree());
        for e in 0..g.m() {
            c.set(e, 1);
        }
        c
    }
}
