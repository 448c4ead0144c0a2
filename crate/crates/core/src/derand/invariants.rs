use super::PotentialState;
use crate::graph::{EdgeId, Graph, VertexId};
use crate::online::ColoringState;
use serde::{Deserialize, Serialize};

/// Truth of the four run invariants, read directly from the coloring state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub t: u64,
    /// Current Φ, when potentials are tracked.
    pub phi: Option<f64>,
    /// (i) Φ < 1.
    pub small_potential: Option<bool>,
    /// (ii) every edge has at most 2ε⁵Δ colors with P > A.
    pub few_bad_colors: bool,
    pub worst_bad_colors: (Option<EdgeId>, usize),
    /// (iii) every vertex has at most αΔ bad neighbors.
    pub few_bad_neighbors: bool,
    pub worst_bad_neighbors: (Option<VertexId>, usize),
    /// (iv) every bad vertex saw at most εΔ arrivals with Z = 0 after turning bad.
    pub bad_vertex_property: bool,
    pub worst_zero_arrivals: (Option<VertexId>, usize),
}

impl InvariantReport {
    /// (ii)–(iv) hold.
    pub fn structural_ok(&self) -> bool {
        self.few_bad_colors && self.few_bad_neighbors && self.bad_vertex_property
    }
}

pub fn check_invariants(g: &Graph, state: &ColoringState, pot: Option<&PotentialState>) -> InvariantReport {
    let p = &state.params;
    let d = p.delta as f64;
    let mut worst_c = (None, 0);
    for e in 0..g.m() {
        let k = state.p(e).iter().filter(|&&x| x > p.cap_num).count();
        if k > worst_c.1 {
            worst_c = (Some(e), k);
        }
    }
    let mut worst_n = (None, 0);
    let mut worst_z = (None, 0);
    for v in 0..g.n() {
        let bad_nbrs = g.neighbors(v).into_iter().filter(|&u| state.is_bad(u)).count();
        if bad_nbrs > worst_n.1 {
            worst_n = (Some(v), bad_nbrs);
        }
        if let Some(t0) = state.became_bad_at(v) {
            let zeros = g
                .incident(v)
                .iter()
                .filter_map(|&e| state.tuple(e))
                .filter(|t| t.t > t0 && t.p_before.iter().all(|&x| x == 0))
                .count();
            if zeros > worst_z.1 {
                worst_z = (Some(v), zeros);
            }
        }
    }
    let phi = pot.map(|x| x.total().to_f64());
    InvariantReport {
        t: state.clock(),
        phi,
        small_potential: phi.map(|x| x < 1.0),
        few_bad_colors: worst_c.1 as f64 <= 2.0 * p.eps.powi(5) * d,
        worst_bad_colors: worst_c,
        few_bad_neighbors: worst_n.1 as f64 <= p.alpha * d,
        worst_bad_neighbors: worst_n,
        bad_vertex_property: worst_z.1 as f64 <= p.eps * d,
        worst_zero_arrivals: worst_z,
    }
}
