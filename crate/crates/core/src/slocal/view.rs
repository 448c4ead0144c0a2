use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::online::{ColoringState, EdgeTuple};
use std::collections::{HashMap, HashSet};

/// The radius-ℓ ball around an arriving edge. Every access is checked
/// against the ball and logged; boundary vertex degrees are not exposed.
pub struct LocalView<'a> {
    g: &'a Graph,
    state: &'a ColoringState,
    center: EdgeId,
    radius: usize,
    dist: HashMap<EdgeId, usize>,
    reads: HashMap<EdgeId, usize>,
}

impl<'a> LocalView<'a> {
    pub fn new(g: &'a Graph, state: &'a ColoringState, center: EdgeId, radius: usize) -> Result<LocalView<'a>> {
        g.check_edge(center)?;
        let mut dist = HashMap::from([(center, 0)]);
        let mut expanded: HashSet<VertexId> = HashSet::new();
        let mut frontier = vec![center];
        for d in 1..=radius {
            let mut next = Vec::new();
            for &f in &frontier {
                for v in g.endpoints(f) {
                    if !expanded.insert(v) {
                        continue;
                    }
                    for &h in g.incident(v) {
                        if let std::collections::hash_map::Entry::Vacant(s) = dist.entry(h) {
                            s.insert(d);
                            next.push(h);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(LocalView { g, state, center, radius, dist, reads: HashMap::new() })
    }

    pub fn center(&self) -> EdgeId {
        self.center
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn contains(&self, f: EdgeId) -> bool {
        self.dist.contains_key(&f)
    }

    /// Edges of the ball, sorted.
    pub fn ball(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = self.dist.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn touch(&mut self, f: EdgeId) -> Result<()> {
        match self.dist.get(&f) {
            Some(&d) => {
                self.reads.insert(f, d);
                Ok(())
            }
            None => Err(Error::LocalityViolation { center: self.center, edge: f, limit: self.radius }),
        }
    }

    pub(crate) fn state(&self) -> &'a ColoringState {
        self.state
    }

    pub fn endpoints(&mut self, f: EdgeId) -> Result<[VertexId; 2]> {
        self.touch(f)?;
        Ok(self.g.endpoints(f))
    }

    pub fn arrived(&mut self, f: EdgeId) -> Result<bool> {
        self.touch(f)?;
        Ok(self.state.arrived(f))
    }

    pub fn tuple(&mut self, f: EdgeId) -> Result<Option<&'a EdgeTuple>> {
        self.touch(f)?;
        Ok(self.state.tuple(f))
    }

    /// Visible edges at `v`. At the boundary this may be a strict subset of
    /// the incident edges, so the degree of `v` is not revealed there.
    pub fn edges_at(&mut self, v: VertexId) -> Result<Vec<EdgeId>> {
        let out: Vec<EdgeId> = self.g.incident(v).iter().copied().filter(|f| self.dist.contains_key(f)).collect();
        for &f in &out {
            self.touch(f)?;
        }
        Ok(out)
    }

    /// Marks a batch of edges as read.
    pub fn read_all(&mut self, fs: &[EdgeId]) -> Result<()> {
        for &f in fs {
            self.touch(f)?;
        }
        Ok(())
    }

    /// Logged reads as (edge, distance), sorted by edge.
    pub fn into_reads(self) -> Vec<(EdgeId, usize)> {
        let mut v: Vec<(EdgeId, usize)> = self.reads.into_iter().collect();
        v.sort_unstable();
        v
    }
}
