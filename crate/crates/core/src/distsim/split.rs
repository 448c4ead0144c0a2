use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use serde::{Deserialize, Serialize};

/// Closed walks covering every edge of the multigraph on `n` vertices with
/// the given endpoints, loops allowed. Odd-degree vertices are joined to an
/// extra vertex `n` by dummy edges with ids `ends.len()..`; a walk that uses
/// a dummy edge starts with one. Steps are (edge, traversed ends[0] → ends[1]).
pub fn euler_circuits(n: usize, ends: &[[usize; 2]]) -> Vec<Vec<(usize, bool)>> {
    let m = ends.len();
    let mut all: Vec<[usize; 2]> = ends.to_vec();
    let mut deg = vec![0usize; n];
    for &[a, b] in ends {
        deg[a] += 1;
        deg[b] += 1;
    }
    for (v, &d) in deg.iter().enumerate() {
        if d % 2 == 1 {
            all.push([n, v]);
        }
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
    for (e, &[a, b]) in all.iter().enumerate() {
        adj[a].push((e, b));
        adj[b].push((e, a));
    }
    let mut used = vec![false; all.len()];
    let mut ptr = vec![0usize; n + 1];
    let mut out = Vec::new();
    let starts = std::iter::once(n).chain(0..n);
    for s in starts {
        loop {
            while ptr[s] < adj[s].len() && used[adj[s][ptr[s]].0] {
                ptr[s] += 1;
            }
            if ptr[s] == adj[s].len() {
                break;
            }
            let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(s, None)];
            let mut rev = Vec::new();
            while let Some(&(x, _)) = stack.last() {
                while ptr[x] < adj[x].len() && used[adj[x][ptr[x]].0] {
                    ptr[x] += 1;
                }
                if ptr[x] < adj[x].len() {
                    let (e, y) = adj[x][ptr[x]];
                    used[e] = true;
                    stack.push((y, Some((e, all[e][0] == x))));
                } else {
                    let (_, step) = stack.pop().expect("non-empty");
                    if let Some(st) = step {
                        rev.push(st);
                    }
                }
            }
            rev.reverse();
            if let Some(i) = rev.iter().position(|&(e, _)| e >= m) {
                rev.rotate_left(i);
            }
            out.push(rev);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    /// Edge e points from endpoints(e)[0] to endpoints(e)[1].
    pub forward: Vec<bool>,
    /// Analytic distributed cost, ⌈log₂ n⌉ rounds.
    pub rounds_estimate: usize,
}

impl Orientation {
    pub fn tail(&self, g: &Graph, e: EdgeId) -> VertexId {
        let [a, b] = g.endpoints(e);
        if self.forward[e] {
            a
        } else {
            b
        }
    }

    pub fn out_degree(&self, g: &Graph, v: VertexId) -> usize {
        g.incident(v).iter().filter(|&&e| self.tail(g, e) == v).count()
    }

    /// Vertices of degree at least 3 with no outgoing edge.
    pub fn sinks(&self, g: &Graph) -> Vec<VertexId> {
        (0..g.n()).filter(|&v| g.degree(v) >= 3 && self.out_degree(g, v) == 0).collect()
    }
}

/// Orients along Euler walks, so in- and out-degree differ by at most one.
pub fn sinkless_orientation(g: &Graph) -> Orientation {
    let ends: Vec<[usize; 2]> = (0..g.m()).map(|e| g.endpoints(e)).collect();
    let mut forward = vec![true; g.m()];
    for walk in euler_circuits(g.n(), &ends) {
        for (e, fwd) in walk {
            if e < g.m() {
                forward[e] = fwd;
            }
        }
    }
    Orientation { forward, rounds_estimate: ceil_log2(g.n()) }
}

fn ceil_log2(x: usize) -> usize {
    (usize::BITS - x.max(1).saturating_sub(1).leading_zeros()) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Recursion levels; by default enough for (2/3)^levels ≤ η.
    pub max_depth: Option<usize>,
    pub max_path_len: usize,
    pub gamma_ceiling: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { max_depth: None, max_path_len: 64, gamma_ceiling: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub q: Vec<i8>,
    pub discrepancy: Vec<usize>,
    pub eta: f64,
    /// max over v of discrepancy(v) − η·d(v), floored at 0.
    pub gamma: f64,
    pub depth: usize,
    pub max_path_len: usize,
}

/// |Σ_{e∋v} q(e)| for every vertex.
pub fn discrepancy(g: &Graph, q: &[i8]) -> Vec<usize> {
    (0..g.n())
        .map(|v| g.incident(v).iter().map(|&e| q[e] as i64).sum::<i64>().unsigned_abs() as usize)
        .collect()
}

/// A walk in the original graph standing in for one edge.
#[derive(Clone, Debug)]
struct VPath {
    ends: [VertexId; 2],
    seq: Vec<EdgeId>,
}

impl VPath {
    fn reversed(mut self) -> VPath {
        self.ends.swap(0, 1);
        self.seq.reverse();
        self
    }
}

/// Red/blue split of the edges. Each level splits every vertex into groups
/// of three path ends, orients the group graph without sinks, and lets each
/// vertex pair up one outgoing path per full group, joining each pair into a
/// longer path through it. The final paths get signs chained along Euler
/// walks and are colored alternately, so only path ends contribute.
pub fn degree_split(g: &Graph, eta: f64, cfg: &SplitConfig) -> Result<SplitAssignment> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParams(format!("eta must be positive, got {eta}")));
    }
    let n = g.n();
    let planned = if eta >= 1.0 { 0 } else { ((1.0 / eta).ln() / 1.5f64.ln()).ceil() as usize };
    let planned = cfg.max_depth.map_or(planned, |d| d.min(planned));
    let mut paths: Vec<VPath> = (0..g.m()).map(|e| VPath { ends: g.endpoints(e), seq: vec![e] }).collect();
    let mut depth = 0;
    let mut longest = 1;
    while depth < planned && 2 * longest <= cfg.max_path_len {
        // Path ends at each vertex, grouped in threes.
        let mut at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (p, path) in paths.iter().enumerate() {
            at[path.ends[0]].push((p, 0));
            at[path.ends[1]].push((p, 1));
        }
        let mut group_of = vec![[0usize; 2]; paths.len()];
        let mut groups = 0;
        for list in &at {
            for chunk in list.chunks(3) {
                for &(p, side) in chunk {
                    group_of[p][side] = groups;
                }
                groups += 1;
            }
        }
        let mut tail_side = vec![0usize; paths.len()];
        for walk in euler_circuits(groups, &group_of) {
            for (p, fwd) in walk {
                if p < paths.len() {
                    tail_side[p] = if fwd { 0 } else { 1 };
                }
            }
        }
        let mut merged = vec![false; paths.len()];
        let mut fresh: Vec<VPath> = Vec::new();
        for (v, list) in at.iter().enumerate() {
            let picks: Vec<(usize, usize)> = list
                .chunks(3)
                .filter(|c| c.len() == 3)
                .map(|c| *c.iter().find(|&&(p, side)| tail_side[p] == side).expect("a full group has an out-edge"))
                .collect();
            for pair in picks.chunks(2).filter(|c| c.len() == 2) {
                let (a, sa) = pair[0];
                let (b, sb) = pair[1];
                merged[a] = true;
                merged[b] = true;
                let first = if sa == 1 { paths[a].clone() } else { paths[a].clone().reversed() };
                let second = if sb == 0 { paths[b].clone() } else { paths[b].clone().reversed() };
                debug_assert!(first.ends[1] == v && second.ends[0] == v);
                let mut seq = first.seq;
                seq.extend(second.seq);
                fresh.push(VPath { ends: [first.ends[0], second.ends[1]], seq });
            }
        }
        if fresh.is_empty() {
            break;
        }
        let mut next: Vec<VPath> = paths.into_iter().zip(merged).filter(|(_, m)| !m).map(|(p, _)| p).collect();
        next.extend(fresh);
        paths = next;
        longest = paths.iter().map(|p| p.seq.len()).max().unwrap_or(1);
        depth += 1;
    }
    let q = chain_signs(n, g.m(), &paths);
    let discrepancy = discrepancy(g, &q);
    let gamma = (0..n)
        .map(|v| discrepancy[v] as f64 - eta * g.degree(v) as f64)
        .fold(0.0f64, f64::max);
    if gamma > cfg.gamma_ceiling {
        return Err(Error::Infeasible(format!(
            "split discrepancy constant {gamma} exceeds the ceiling {}",
            cfg.gamma_ceiling
        )));
    }
    Ok(SplitAssignment { q, discrepancy, eta, gamma, depth, max_path_len: longest })
}

/// Signs each path so that along every Euler walk the arrival at a vertex
/// cancels the departure, then alternates signs along the path.
fn chain_signs(n: usize, m: usize, paths: &[VPath]) -> Vec<i8> {
    let ends: Vec<[usize; 2]> = paths.iter().map(|p| p.ends).collect();
    let mut q = vec![0i8; m];
    for walk in euler_circuits(n, &ends) {
        let mut carry: Option<i8> = None;
        for (p, fwd) in walk {
            if p >= paths.len() {
                carry = None;
                continue;
            }
            let seq = &paths[p].seq;
            let parity: i8 = if seq.len() % 2 == 1 { 1 } else { -1 };
            let depart = carry.map_or(1, |c| -c);
            let arrive = depart * parity;
            carry = Some(arrive);
            let mut s = if fwd { depart } else { arrive };
            for &e in seq {
                q[e] = s;
                s = -s;
            }
        }
    }
    q
}

/// ((1+η)/2)^i·Δ + (γ/2)·Σ_{j<i} ((1+η)/2)^j.
pub fn split_bound(delta: usize, eta: f64, gamma: f64, i: usize) -> f64 {
    let r = (1.0 + eta) / 2.0;
    let geo: f64 = (0..i).map(|j| r.powi(j as i32)).sum();
    r.powi(i as i32) * delta as f64 + gamma / 2.0 * geo
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    /// Edge ids of each part.
    pub parts: Vec<Vec<EdgeId>>,
    pub k: usize,
    pub eta: f64,
    /// Largest γ over all splits performed.
    pub gamma: f64,
    pub max_degrees: Vec<usize>,
    /// Closed-form bound on the part degrees with the measured γ.
    pub bound: f64,
    pub sum_max_degree: usize,
    pub depth: usize,
    pub max_path_len: usize,
}

/// k = ⌈log₂(Δ/Δ_target)⌉ rounds of halving with η = ε/(2k).
pub fn split_to_max_degree(g: &Graph, target: usize, eps: f64, cfg: &SplitConfig) -> Result<SplitResult> {
    let delta = g.max_degree();
    if target == 0 || target >= delta {
        return Err(Error::InvalidParams(format!("target degree {target} must lie in 1..{delta}")));
    }
    let k = (delta as f64 / target as f64).log2().ceil() as usize;
    let eta = eps / (2.0 * k as f64);
    let mut parts: Vec<Vec<EdgeId>> = vec![(0..g.m()).collect()];
    let (mut gamma, mut depth, mut longest) = (0.0f64, 0, 1);
    for _ in 0..k {
        let mut next = Vec::with_capacity(2 * parts.len());
        for part in &parts {
            let sub = Graph::new(g.n(), part.iter().map(|&e| g.endpoints(e)).collect())?;
            let s = degree_split(&sub, eta, cfg)?;
            gamma = gamma.max(s.gamma);
            depth = depth.max(s.depth);
            longest = longest.max(s.max_path_len);
            let (mut red, mut blue) = (Vec::new(), Vec::new());
            for (i, &e) in part.iter().enumerate() {
                if s.q[i] > 0 {
                    red.push(e);
                } else {
                    blue.push(e);
                }
            }
            next.push(red);
            next.push(blue);
        }
        parts = next;
    }
    let max_degrees: Vec<usize> = parts
        .iter()
        .map(|p| {
            let mut d = vec![0usize; g.n()];
            for &e in p {
                for v in g.endpoints(e) {
                    d[v] += 1;
                }
            }
            d.into_iter().max().unwrap_or(0)
        })
        .collect();
    Ok(SplitResult {
        k,
        eta,
        gamma,
        bound: split_bound(delta, eta, gamma, k),
        sum_max_degree: max_degrees.iter().sum(),
        max_degrees,
        parts,
        depth,
        max_path_len: longest,
    })
}
