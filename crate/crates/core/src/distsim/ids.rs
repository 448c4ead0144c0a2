use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use serde::{Deserialize, Serialize};

/// Short identifiers, distinct for any two vertices within distance 2r.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    pub ids: Vec<u32>,
    pub radius: usize,
    /// Number of distinct ids in use.
    pub palette: usize,
    pub bits: usize,
}

pub(crate) fn bits_for(max_value: u128) -> usize {
    (128 - max_value.leading_zeros() as usize).max(1)
}

/// Greedy coloring of G^(2r) in id order.
pub fn compress_ids(g: &Graph, r: usize) -> Result<IdMap> {
    if r == 0 {
        return Err(Error::InvalidParams("id radius must be at least 1".into()));
    }
    let n = g.n();
    let reach = 2 * r;
    let mut ids: Vec<u32> = vec![u32::MAX; n];
    let mut stamp = vec![0u32; n];
    let mut dist = vec![0usize; n];
    let mut queue: Vec<VertexId> = Vec::new();
    let mut taken: Vec<bool> = Vec::new();
    for v in 0..n {
        let gen = v as u32 + 1;
        queue.clear();
        queue.push(v);
        stamp[v] = gen;
        dist[v] = 0;
        let mut head = 0;
        taken.iter_mut().for_each(|t| *t = false);
        while head < queue.len() {
            let x = queue[head];
            head += 1;
            if ids[x] != u32::MAX {
                let c = ids[x] as usize;
                if c >= taken.len() {
                    taken.resize(c + 1, false);
                }
                taken[c] = true;
            }
            if dist[x] == reach {
                continue;
            }
            for &e in g.incident(x) {
                let y = g.other(e, x);
                if stamp[y] != gen {
                    stamp[y] = gen;
                    dist[y] = dist[x] + 1;
                    queue.push(y);
                }
            }
        }
        ids[v] = taken.iter().position(|t| !t).unwrap_or(taken.len()) as u32;
    }
    let palette = ids.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    Ok(IdMap { bits: bits_for(palette.saturating_sub(1) as u128), ids, radius: r, palette })
}
