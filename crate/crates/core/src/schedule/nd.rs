use super::locality;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::online::{ColoringState, Params};
use crate::rng::{keyed_rng, tag};
use crate::slocal::{Algorithm, Engine, Step};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Vertex BFS with reusable buffers.
struct VBfs {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    gen: u32,
    order: Vec<VertexId>,
}

impl VBfs {
    fn new(n: usize) -> VBfs {
        VBfs { stamp: vec![0; n], dist: vec![0; n], gen: 0, order: Vec::new() }
    }

    /// Vertices within `k` hops of `src`, `src` first.
    fn run(&mut self, g: &Graph, src: VertexId, k: usize) -> &[VertexId] {
        self.gen += 1;
        let gen = self.gen;
        self.order.clear();
        self.order.push(src);
        self.stamp[src] = gen;
        self.dist[src] = 0;
        let mut head = 0;
        while head < self.order.len() {
            let x = self.order[head];
            head += 1;
            if self.dist[x] as usize == k {
                continue;
            }
            for &e in g.incident(x) {
                let y = g.other(e, x);
                if self.stamp[y] != gen {
                    self.stamp[y] = gen;
                    self.dist[y] = self.dist[x] + 1;
                    self.order.push(y);
                }
            }
        }
        &self.order
    }
}

/// Clusters of vertices grouped into classes; clusters of one class are
/// pairwise non-adjacent in the `power`-th power of the graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub power: usize,
    pub clusters: Vec<Vec<VertexId>>,
    pub cluster_class: Vec<usize>,
    /// Number of classes (c).
    pub classes: usize,
    /// Largest strong diameter of a cluster in the power graph (d).
    pub diameter: usize,
    /// Per cluster strong diameter.
    pub cluster_diameter: Vec<usize>,
}

impl Decomposition {
    /// Builds and validates a decomposition from explicit clusters.
    pub fn new(g: &Graph, power: usize, clusters: Vec<Vec<VertexId>>, cluster_class: Vec<usize>) -> Result<Decomposition> {
        if clusters.len() != cluster_class.len() {
            return Err(Error::InvalidDecomposition("one class per cluster required".into()));
        }
        let classes = cluster_class.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut bfs = VBfs::new(g.n());
        let cluster_diameter: Vec<usize> = clusters.iter().map(|c| strong_diameter(g, power, c, &mut bfs)).collect();
        let dec = Decomposition {
            power,
            diameter: cluster_diameter.iter().copied().max().unwrap_or(0),
            clusters,
            cluster_class,
            classes,
            cluster_diameter,
        };
        validate_decomposition(g, &dec)?;
        Ok(dec)
    }

    pub fn cluster_of(&self, n: usize) -> Vec<usize> {
        let mut of = vec![usize::MAX; n];
        for (i, c) in self.clusters.iter().enumerate() {
            for &v in c {
                of[v] = i;
            }
        }
        of
    }
}

/// Diameter of the cluster inside the power graph restricted to it;
/// `usize::MAX` when disconnected there.
fn strong_diameter(g: &Graph, power: usize, cluster: &[VertexId], bfs: &mut VBfs) -> usize {
    let mut inside = std::collections::HashSet::with_capacity(cluster.len());
    inside.extend(cluster.iter().copied());
    let mut nbrs: std::collections::HashMap<VertexId, Vec<VertexId>> = std::collections::HashMap::new();
    for &v in cluster {
        let r: Vec<VertexId> = bfs.run(g, v, power).iter().skip(1).copied().filter(|x| inside.contains(x)).collect();
        nbrs.insert(v, r);
    }
    let mut diam = 0;
    for &s in cluster {
        let mut dist: std::collections::HashMap<VertexId, usize> = std::collections::HashMap::from([(s, 0)]);
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            let d = dist[&x];
            for &y in &nbrs[&x] {
                if !dist.contains_key(&y) {
                    dist.insert(y, d + 1);
                    q.push_back(y);
                }
            }
        }
        if dist.len() < cluster.len() {
            return usize::MAX;
        }
        diam = diam.max(dist.values().copied().max().unwrap_or(0));
    }
    diam
}

/// Checks the clusters partition V and same-class clusters are far apart.
pub fn validate_decomposition(g: &Graph, dec: &Decomposition) -> Result<()> {
    let of = dec.cluster_of(g.n());
    let total: usize = dec.clusters.iter().map(Vec::len).sum();
    if total != g.n() || of.contains(&usize::MAX) {
        return Err(Error::InvalidDecomposition("clusters do not partition the vertices".into()));
    }
    let mut bfs = VBfs::new(g.n());
    for u in 0..g.n() {
        let cu = of[u];
        for &v in bfs.run(g, u, dec.power).iter().skip(1) {
            let cv = of[v];
            if cv != cu && dec.cluster_class[cv] == dec.cluster_class[cu] {
                return Err(Error::InvalidDecomposition(format!(
                    "clusters {cu} and {cv} share class {} but vertices {u} and {v} are within {} hops",
                    dec.cluster_class[cu], dec.power
                )));
            }
        }
    }
    Ok(())
}

/// Seeded ball carving in G^(ℓ+2). Each class grows balls from unclustered
/// vertices in random order until a layer no longer doubles the ball; the
/// final layer is deferred to later classes.
pub fn nd_decompose(g: &Graph, ell: usize, seed: u64) -> Result<Decomposition> {
    let k = ell + 2;
    let n = g.n();
    let mut order: Vec<VertexId> = (0..n).collect();
    order.shuffle(&mut keyed_rng(&[tag::CARVE, seed]));
    let mut clustered = vec![false; n];
    let mut left = n;
    let mut clusters = Vec::new();
    let mut cluster_class = Vec::new();
    let mut bfs = VBfs::new(n);
    let mut class = 0;
    while left > 0 {
        let mut alive: Vec<bool> = clustered.iter().map(|&c| !c).collect();
        let mut in_ball = vec![false; n];
        for &v in &order {
            if !alive[v] {
                continue;
            }
            let mut ball = vec![v];
            in_ball[v] = true;
            let mut frontier = vec![v];
            let boundary = loop {
                let mut next = Vec::new();
                for &x in &frontier {
                    for &y in bfs.run(g, x, k).iter().skip(1) {
                        if alive[y] && !in_ball[y] {
                            in_ball[y] = true;
                            next.push(y);
                        }
                    }
                }
                if next.len() <= ball.len() {
                    break next;
                }
                ball.extend_from_slice(&next);
                frontier = next;
            };
            for &x in &ball {
                clustered[x] = true;
                alive[x] = false;
            }
            for &x in &boundary {
                alive[x] = false;
                in_ball[x] = false;
            }
            left -= ball.len();
            ball.sort_unstable();
            clusters.push(ball);
            cluster_class.push(class);
        }
        class += 1;
    }
    Decomposition::new(g, k, clusters, cluster_class)
}

pub struct NdRun {
    pub state: ColoringState,
    /// (class, edge id) order the run is equivalent to.
    pub induced_order: Vec<EdgeId>,
    /// Σ over classes of (largest cluster diameter in the class + 1)·(ℓ+2).
    pub round_estimate: usize,
    /// c·(d+1)·(ℓ+2).
    pub round_bound: usize,
}

/// Runs each class's clusters side by side; within a cluster, edges go in
/// id order. An edge belongs to the cluster of its larger endpoint.
pub fn execute_via_nd(g: &Graph, params: Params, dec: &Decomposition, alg: &Algorithm) -> Result<NdRun> {
    let ell = locality(alg);
    if dec.power < ell + 2 {
        return Err(Error::InvalidDecomposition(format!(
            "decomposition of power {} is too weak for locality {ell}",
            dec.power
        )));
    }
    validate_decomposition(g, dec)?;
    let of = dec.cluster_of(g.n());
    let mut owned: Vec<Vec<EdgeId>> = vec![Vec::new(); dec.clusters.len()];
    for e in 0..g.m() {
        let [u, v] = g.endpoints(e);
        owned[of[u.max(v)]].push(e);
    }
    let mut eng = Engine::new(g, params, alg, ell, false)?;
    let mut induced_order = Vec::with_capacity(g.m());
    let mut round_estimate = 0;
    for class in 0..dec.classes {
        let members: Vec<usize> = (0..dec.clusters.len()).filter(|&i| dec.cluster_class[i] == class).collect();
        let mut class_edges: Vec<EdgeId> = members.iter().flat_map(|&i| owned[i].iter().copied()).collect();
        class_edges.sort_unstable();
        induced_order.extend(class_edges);
        // Each cluster's next edge is decided once its predecessor has
        // committed; pending steps commit in edge-id order.
        let mut next = vec![0usize; members.len()];
        let eng_ref = &eng;
        let first: Vec<_> = members
            .par_iter()
            .map(|&i| owned[i].first().map(|&e| eng_ref.decide(e)).transpose())
            .collect::<Result<_>>()?;
        let mut pending: BTreeMap<EdgeId, (usize, Step)> = BTreeMap::new();
        for (k, step) in first.into_iter().enumerate() {
            if let Some(step) = step {
                pending.insert(step.decision.edge, (k, step));
            }
        }
        while let Some((_, (k, step))) = pending.pop_first() {
            eng.commit(step)?;
            next[k] += 1;
            if let Some(&e) = owned[members[k]].get(next[k]) {
                pending.insert(e, (k, eng.decide(e)?));
            }
        }
        let d = members.iter().map(|&i| dec.cluster_diameter[i]).max().unwrap_or(0);
        round_estimate += (d + 1) * (ell + 2);
    }
    Ok(NdRun {
        state: eng.finish().state,
        induced_order,
        round_estimate,
        round_bound: dec.classes * (dec.diameter + 1) * (ell + 2),
    })
}
