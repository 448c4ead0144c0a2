//! Brute-force references for conflicts, splitting and the locality lower bound.

use edgecolor_core::graph::{Color, EdgeColoring, EdgeId, Graph};
use std::collections::BTreeMap;

const INF: usize = usize::MAX / 4;

/// All-pairs line-graph distances by Floyd–Warshall; for small graphs only.
pub fn line_distances(g: &Graph) -> Vec<Vec<usize>> {
    let m = g.m();
    let mut d = vec![vec![INF; m]; m];
    for e in 0..m {
        d[e][e] = 0;
        let [a, b] = g.endpoints(e);
        for f in 0..m {
            let [c, x] = g.endpoints(f);
            if f != e && (a == c || a == x || b == c || b == x) {
                d[e][f] = 1;
            }
        }
    }
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Conflict sets from lazy walks e→a→b→c→d→f, each step staying put or
/// moving to an adjacent edge, with base(a) = base(d) and a ≠ d; plus every
/// pair within line distance 3.
pub fn brute_conflicts(g: &Graph, base: &EdgeColoring) -> Vec<Vec<EdgeId>> {
    let m = g.m();
    let dist = line_distances(g);
    let lazy: Vec<Vec<EdgeId>> = (0..m).map(|x| (0..m).filter(|&y| dist[x][y] <= 1).collect()).collect();
    let color = |e: EdgeId| base.colors[e].expect("total base coloring");
    let mut out = vec![Vec::new(); m];
    for e in 0..m {
        for f in 0..m {
            if e == f {
                continue;
            }
            let mut hit = dist[e][f] <= 3;
            'walk: for &a in &lazy[e] {
                if hit {
                    break;
                }
                for &b in &lazy[a] {
                    for &c in &lazy[b] {
                        for &d in &lazy[c] {
                            if dist[d][f] <= 1 && a != d && color(a) == color(d) {
                                hit = true;
                                break 'walk;
                            }
                        }
                    }
                }
            }
            if hit {
                out[e].push(f);
            }
        }
    }
    out
}

/// |Σ_{e∋v} q(e)| per vertex, after checking every label is ±1.
pub fn discrepancy(g: &Graph, q: &[i8]) -> Result<Vec<usize>, String> {
    if q.len() != g.m() {
        return Err(format!("{} labels for {} edges", q.len(), g.m()));
    }
    if let Some(e) = q.iter().position(|&x| x != 1 && x != -1) {
        return Err(format!("edge {e} has label {}", q[e]));
    }
    let mut s = vec![0i64; g.n()];
    for (e, &x) in q.iter().enumerate() {
        for v in g.endpoints(e) {
            s[v] += x as i64;
        }
    }
    Ok(s.iter().map(|x| x.unsigned_abs() as usize).collect())
}

/// Δ_i ≤ ((1+η)/2)^i·Δ + (γ/2)·Σ_{j<i} ((1+η)/2)^j, by unrolling the
/// one-level recurrence Δ_{i+1} = ((1+η)/2)·Δ_i + γ/2.
pub fn split_bound_unrolled(delta: usize, eta: f64, gamma: f64, levels: usize) -> f64 {
    let mut x = delta as f64;
    for _ in 0..levels {
        x = (1.0 + eta) / 2.0 * x + gamma / 2.0;
    }
    x
}

/// Max degree of the subgraph formed by `edges`.
pub fn part_degree(g: &Graph, edges: &[EdgeId]) -> usize {
    let mut deg = vec![0usize; g.n()];
    for &e in edges {
        for v in g.endpoints(e) {
            deg[v] += 1;
        }
    }
    deg.into_iter().max().unwrap_or(0)
}

/// What an edge sees within line distance 2: (distance, relative position,
/// color) of already colored edges, with no identifiers.
pub type ViewSignature = Vec<(usize, u8, Color)>;

/// Deterministic first-fit that may read only colored edges within line
/// distance 2 and decides from their colors alone.
pub struct Locality2Greedy<'g> {
    g: &'g Graph,
    pub colors: Vec<Option<Color>>,
    pub views: Vec<(EdgeId, ViewSignature, Color)>,
}

impl<'g> Locality2Greedy<'g> {
    pub fn new(g: &'g Graph) -> Locality2Greedy<'g> {
        Locality2Greedy { g, colors: vec![None; g.m()], views: Vec::new() }
    }

    fn view(&self, e: EdgeId) -> ViewSignature {
        let g = self.g;
        let [a, b] = g.endpoints(e);
        let mut sig = Vec::new();
        for f in 0..g.m() {
            let Some(c) = self.colors[f] else { continue };
            let [x, y] = g.endpoints(f);
            let touches = [x, y].iter().filter(|v| **v == a || **v == b).count();
            if touches > 0 {
                sig.push((1, touches as u8, c));
                continue;
            }
            let near = g.incident(a).iter().chain(g.incident(b)).any(|&h| h != e && g.shares_vertex(h, f));
            if near {
                sig.push((2, 0, c));
            }
        }
        sig.sort_unstable();
        sig
    }

    pub fn arrive(&mut self, e: EdgeId) -> Color {
        let sig = self.view(e);
        let c = (1..).find(|c| !sig.iter().any(|&(d, _, x)| d == 1 && x == *c)).expect("unbounded palette");
        self.colors[e] = Some(c);
        self.views.push((e, sig, c));
        c
    }
}

/// Outcome of the baseline on one star_lb copy with star edges first.
#[derive(Debug)]
pub struct LowerBoundCheck {
    pub colors_used: usize,
    pub stars_identical: bool,
    pub connector_fresh: usize,
    pub views_consistent: bool,
}

pub fn lower_bound_check(g: &Graph, order: &[EdgeId]) -> LowerBoundCheck {
    let delta = g.max_degree();
    let mut alg = Locality2Greedy::new(g);
    for &e in order {
        alg.arrive(e);
    }
    let leaf = |v: usize| g.degree(v) == 1;
    // Star edges by center, in arrival order.
    let mut stars: BTreeMap<usize, Vec<Color>> = BTreeMap::new();
    let mut connectors = Vec::new();
    for &e in order {
        let [a, b] = g.endpoints(e);
        let c = alg.colors[e].expect("colored");
        match (leaf(a), leaf(b)) {
            (true, false) => stars.entry(b).or_default().push(c),
            (false, true) => stars.entry(a).or_default().push(c),
            _ => connectors.push(c),
        }
    }
    let first = stars.values().next().cloned().unwrap_or_default();
    let stars_identical = stars.len() == delta && stars.values().all(|s| *s == first);
    let mut fresh: Vec<Color> = connectors.iter().copied().filter(|c| !first.contains(c)).collect();
    fresh.sort_unstable();
    fresh.dedup();
    // Equal views must have produced equal colors.
    let mut seen: BTreeMap<ViewSignature, Color> = BTreeMap::new();
    let views_consistent = alg.views.iter().all(|(_, sig, c)| *seen.entry(sig.clone()).or_insert(*c) == *c);
    let mut all: Vec<Color> = alg.colors.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    LowerBoundCheck { colors_used: all.len(), stars_identical, connector_fresh: fresh.len(), views_consistent }
}

/// Line-graph distances from `src` up to `limit`, by plain BFS over incident lists.
pub fn line_dist_from(g: &Graph, src: EdgeId, limit: usize) -> std::collections::HashMap<EdgeId, usize> {
    let mut dist = std::collections::HashMap::from([(src, 0)]);
    let mut frontier = vec![src];
    for d in 1..=limit {
        let mut next = Vec::new();
        for &e in &frontier {
            for v in g.endpoints(e) {
                for &f in g.incident(v) {
                    if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(f) {
                        slot.insert(d);
                        next.push(f);
                    }
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Largest line distance between a step's center and any edge it read;
/// `limit + 1` stands for anything farther than `limit`.
pub fn max_read_distance(g: &Graph, steps: &[(EdgeId, Vec<EdgeId>)], limit: usize) -> usize {
    let mut worst = 0;
    for (center, reads) in steps {
        let dist = line_dist_from(g, *center, limit);
        for f in reads {
            worst = worst.max(dist.get(f).copied().unwrap_or(limit + 1));
        }
    }
    worst
}

/// Adjacent equal colors or a missing color, if any.
pub fn coloring_defect(g: &Graph, colors: &[Option<Color>]) -> Option<String> {
    if let Some(e) = colors.iter().position(Option::is_none) {
        return Some(format!("edge {e} uncolored"));
    }
    for v in 0..g.n() {
        let mut seen: Vec<(Color, EdgeId)> = g.incident(v).iter().map(|&e| (colors[e].unwrap(), e)).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0].0 == w[1].0) {
            return Some(format!("edges {} and {} share color {} at vertex {v}", w[0].1, w[1].1, w[0].0));
        }
    }
    None
}
