use super::{EdgeId, Graph};
use crate::error::{Error, Result};
use crate::rng::{keyed_rng, tag};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    Path { n: usize },
    Cycle { n: usize },
    StarLb { delta: usize, reps: usize },
    RandomMaxDeg { n: usize, delta: usize },
    CompleteBipartite { a: usize, b: usize },
}

pub fn generate(kind: &InstanceKind, seed: u64) -> Result<Graph> {
    let mut g = match *kind {
        InstanceKind::Path { n } => {
            if n < 2 {
                return Err(Error::InvalidParams("path needs n >= 2".into()));
            }
            Graph::new(n, (0..n - 1).map(|i| [i, i + 1]).collect())?
        }
        InstanceKind::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParams("cycle needs n >= 3".into()));
            }
            Graph::new(n, (0..n).map(|i| [i, (i + 1) % n]).collect())?
        }
        InstanceKind::StarLb { delta, reps } => star_lb(delta, reps)?,
        InstanceKind::RandomMaxDeg { n, delta } => random_max_deg(n, delta, seed)?,
        InstanceKind::CompleteBipartite { a, b } => {
            if a == 0 || b == 0 {
                return Err(Error::InvalidParams("complete bipartite needs a, b >= 1".into()));
            }
            let edges = (0..a).flat_map(|i| (0..b).map(move |j| [i, a + j])).collect();
            Graph::new(a + b, edges)?
        }
    };
    g.meta.insert("instance".into(), serde_json::to_value(kind)?);
    g.meta.insert("seed".into(), seed.into());
    Ok(g)
}

/// `delta` stars with `delta - 1` leaves each, plus a root joined to every
/// star center. Star edges come first in both id and arrival order.
fn star_lb(delta: usize, reps: usize) -> Result<Graph> {
    if delta < 2 || reps == 0 {
        return Err(Error::InvalidParams("star_lb needs delta >= 2 and reps >= 1".into()));
    }
    let per_copy = delta * delta + 1;
    let mut star_edges = Vec::new();
    let mut connectors = Vec::new();
    for r in 0..reps {
        let base = r * per_copy;
        let root = base + delta * delta;
        for s in 0..delta {
            let center = base + s * delta;
            for l in 1..delta {
                star_edges.push([center, center + l]);
            }
            connectors.push([center, root]);
        }
    }
    let m = star_edges.len() + connectors.len();
    star_edges.extend(connectors);
    let g = Graph::new(reps * per_copy, star_edges)?;
    let order: Vec<EdgeId> = (0..m).collect();
    g.with_arrival_order(order)
}

/// Random matchings layered under a degree cap until no layer adds an edge.
fn random_max_deg(n: usize, delta: usize, seed: u64) -> Result<Graph> {
    if delta == 0 || delta >= n {
        return Err(Error::InvalidParams(format!("random_max_deg needs 1 <= delta < n (got delta={delta}, n={n})")));
    }
    let mut rng = keyed_rng(&[tag::GENERATE, seed, n as u64, delta as u64]);
    let mut deg = vec![0usize; n];
    let mut present = HashSet::new();
    let mut edges = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut idle = 0;
    while idle < 3 {
        perm.shuffle(&mut rng);
        let mut added = false;
        for pair in perm.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if deg[u] < delta && deg[v] < delta && present.insert((u, v)) {
                deg[u] += 1;
                deg[v] += 1;
                edges.push([u, v]);
                added = true;
            }
        }
        idle = if added { 0 } else { idle + 1 };
    }
    Graph::new(n, edges)
}
