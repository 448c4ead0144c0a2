//! Registry of martingale potentials and their incremental maintenance.

use super::family::{binomial, combinations, restricted_subsets, Sizes};
use super::{DerandConfig, FamilyMode, PhiParams};
use crate::error::{Error, Result};
use crate::graph::{canonical_matchings_unchecked, verify_edge_coloring, Color, EdgeColoring, EdgeId, Graph, VertexId};
use crate::numeric::Dd;
use crate::online::{ColoringState, EntryKind, Params, Transition};
use crate::rng::mix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Largest Δ for which the exact step test on Q fits in u128.
const MAX_DELTA: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    FewBadColors,
    FewBadNeighbors,
    BadVertexProp,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::FewBadColors, Family::FewBadNeighbors, Family::BadVertexProp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::FewBadColors => "few_bad_colors",
            Family::FewBadNeighbors => "few_bad_neighbors",
            Family::BadVertexProp => "bad_vertex_prop",
        }
    }
}

/// Identity of a martingale; equal keys are one term with multiplicity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKey {
    /// Σ_{c∈C} q_wc − Q_wC(0).
    Q { w: VertexId, colors: Vec<Color> },
    /// K_{M,C} − K_{M,C}(0).
    K { m: Vec<EdgeId>, colors: Vec<Color> },
    /// −L_{M,C}.
    NegL { m: Vec<EdgeId>, colors: Vec<Color> },
    /// Badness accumulated at U by qualifying arrivals.
    H { u: Vec<VertexId> },
    /// Deficit of C-colored arrivals at U.
    X { colors: Vec<Color>, u: Vec<VertexId> },
}

impl TermKey {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TermKey::Q { .. } => "Q",
            TermKey::K { .. } => "K",
            TermKey::NegL { .. } => "negL",
            TermKey::H { .. } => "H",
            TermKey::X { .. } => "X",
        }
    }

    pub fn colors(&self) -> &[Color] {
        match self {
            TermKey::Q { colors, .. } | TermKey::K { colors, .. } | TermKey::NegL { colors, .. } | TermKey::X { colors, .. } => colors,
            TermKey::H { .. } => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct QEntry {
    frozen: Dd,
    prod: Dd,
    live: u128,
}

impl QEntry {
    fn value(&self, den: u128) -> Dd {
        self.frozen + self.prod * Dd::ratio(self.live, den)
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub key: TermKey,
    pub phi_params: PhiParams,
    /// Multiplicity per family, indexed by `Family::index`.
    pub mult: [u32; 3],
    /// Value at time 0 subtracted for Q and K terms.
    pub x0: Dd,
    /// Raw tracked quantity (q-sum, K, L, H or X).
    pub value: Dd,
    /// Exact numerator sum for K terms.
    pub kint: u128,
    pub steps: u64,
    pub ln_phi: Dd,
    pub phi: Dd,
    pub support: u32,
    kappa: Dd,
    half_lambda: Dd,
    n: Dd,
    cmask: u128,
}

impl Term {
    pub fn weight(&self) -> u32 {
        self.mult.iter().sum()
    }

    /// The argument X of the potential for a raw value.
    pub fn shifted(&self, value: Dd) -> Dd {
        match self.key {
            TermKey::Q { .. } | TermKey::K { .. } => value - self.x0,
            TermKey::NegL { .. } => -value,
            TermKey::H { .. } | TermKey::X { .. } => value,
        }
    }

    fn ln_phi_at(&self, value: Dd, steps: u64) -> Dd {
        let drift = self.half_lambda * (Dd::ONE + Dd::from_u64(steps) / self.n);
        self.kappa * (self.shifted(value) - drift)
    }

    fn has_color(&self, c: Color) -> bool {
        self.cmask >> (c - 1) & 1 == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
struct TermChange {
    id: u32,
    value: Dd,
    kint: u128,
    steps: u64,
    ln_phi: Dd,
    phi: Dd,
    stepped: bool,
}

/// Effect of one transition on the potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect {
    pub edge: EdgeId,
    /// Change of the total potential.
    pub delta: Dd,
    pub family_delta: [Dd; 3],
    changes: Vec<TermChange>,
    q_updates: Vec<(VertexId, Vec<QEntry>)>,
}

impl Effect {
    pub fn touched(&self) -> usize {
        self.changes.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum SupportKey {
    Closed(VertexId),
    Matching(Vec<EdgeId>),
    Set(Vec<VertexId>),
}

#[derive(Clone, Debug)]
pub struct PotentialState {
    pub params: Params,
    pub sizes: Sizes,
    /// "exact" or "restricted".
    pub mode_used: &'static str,
    /// Registered martingales counted with multiplicity.
    pub registered: u64,
    terms: Vec<Term>,
    index: HashMap<TermKey, u32>,
    q: Vec<Vec<QEntry>>,
    q_terms: Vec<Vec<u32>>,
    kl_terms: Vec<Vec<u32>>,
    ux_terms: Vec<Vec<u32>>,
    supports: Vec<Vec<EdgeId>>,
    supports_by_edge: Vec<Vec<u32>>,
    changed_by: Vec<Vec<EdgeId>>,
    total: Dd,
    by_family: [Dd; 3],
    h_low: Dd,
    h_inc: [Dd; 2],
}

struct Builder<'a> {
    g: &'a Graph,
    st: PotentialState,
    support_index: HashMap<SupportKey, u32>,
    budget: Option<u64>,
    restricted: Option<(usize, u64)>,
}

/// Union of two ascending id lists.
fn merge_sorted(x: &[u32], y: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        i += (x[i] == v) as usize;
        j += (y[j] == v) as usize;
        out.push(v);
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    out
}

fn color_mask(cs: &[Color]) -> u128 {
    cs.iter().fold(0u128, |m, &c| m | 1u128 << (c - 1))
}

fn ids(xs: &[usize]) -> Vec<u64> {
    xs.iter().map(|&x| x as u64).collect()
}

impl<'a> Builder<'a> {
    fn subsets<T: Copy + Ord + 'static>(&self, items: &[T], r: usize, key: &[u64]) -> Box<dyn Iterator<Item = Vec<T>>> {
        match self.restricted {
            Some((k, seed)) => {
                let mut kk = vec![seed];
                kk.extend_from_slice(key);
                Box::new(restricted_subsets(items, r, k, &kk).into_iter())
            }
            None => {
                let items = items.to_vec();
                Box::new(combinations(items.len(), r).map(move |ix| ix.iter().map(|&i| items[i]).collect()))
            }
        }
    }

    fn support(&mut self, key: SupportKey) -> u32 {
        if let Some(&id) = self.support_index.get(&key) {
            return id;
        }
        let g = self.g;
        let mut edges: Vec<EdgeId> = match &key {
            SupportKey::Closed(w) => {
                let mut vs = g.neighbors(*w);
                vs.push(*w);
                vs.iter().flat_map(|&v| g.incident(v).iter().copied()).collect()
            }
            SupportKey::Matching(m) => m.iter().flat_map(|&f| g.edge_neighbors(f).into_iter().chain([f])).collect(),
            SupportKey::Set(u) => u.iter().flat_map(|&v| g.incident(v).iter().copied()).collect(),
        };
        edges.sort_unstable();
        edges.dedup();
        let id = self.st.supports.len() as u32;
        for &e in &edges {
            self.st.supports_by_edge[e].push(id);
        }
        self.st.supports.push(edges);
        self.support_index.insert(key, id);
        id
    }

    fn add(&mut self, key: TermKey, family: Family, state: &ColoringState) -> Result<()> {
        self.st.registered += 1;
        if let Some(b) = self.budget {
            if self.st.registered > b {
                return Err(Error::BudgetExceeded { budget: b });
            }
        }
        if let Some(&id) = self.st.index.get(&key) {
            self.st.terms[id as usize].mult[family.index()] += 1;
            return Ok(());
        }
        let p = &self.st.params;
        let (eps, d, den) = (p.eps, p.delta as f64, p.den());
        let s_prob = 24.0 * p.a;
        let (phi_params, support_key, x0, value, kint) = match &key {
            TermKey::Q { w, colors } => {
                let x0: Dd = colors.iter().map(|&c| self.st.q[*w][c as usize - 1].value(den)).sum();
                let pp = PhiParams::new(eps.powi(6) * d / 2.0, s_prob, d * d);
                (pp, SupportKey::Closed(*w), x0, x0, 0)
            }
            TermKey::K { m, colors } | TermKey::NegL { m, colors } => {
                let pp = PhiParams::new(
                    eps * (m.len() * colors.len()) as f64 / (2.0 * d),
                    s_prob,
                    2.0 * m.len() as f64 * d,
                );
                let sk = SupportKey::Matching(m.clone());
                if matches!(key, TermKey::K { .. }) {
                    let kint: u128 = m.iter().flat_map(|&f| colors.iter().map(move |&c| (f, c))).map(|(f, c)| state.p_ec(f, c)).sum();
                    let x0 = Dd::ratio(kint, den);
                    (pp, sk, x0, x0, kint)
                } else {
                    (pp, sk, Dd::ZERO, Dd::ZERO, 0)
                }
            }
            TermKey::H { u } => {
                let n = (p.alpha * d * d).max((u.len() as f64) * d);
                let pp = PhiParams::new(eps * p.alpha * d * d, 1.0, n);
                (pp, SupportKey::Set(u.clone()), Dd::ZERO, Dd::ZERO, 0)
            }
            TermKey::X { u, .. } => {
                let n = (eps * d * d).max((u.len() as f64) * d);
                let pp = PhiParams::new(2.0 * eps.powi(3) * d * d * (1.0 - eps / 2.0), 2.0, n);
                (pp, SupportKey::Set(u.clone()), Dd::ZERO, Dd::ZERO, 0)
            }
        };
        let support = self.support(support_key);
        let mut t = Term {
            cmask: color_mask(key.colors()),
            key: key.clone(),
            phi_params,
            mult: [0; 3],
            x0,
            value,
            kint,
            steps: 0,
            ln_phi: Dd::ZERO,
            phi: Dd::ZERO,
            support,
            kappa: phi_params.kappa(),
            half_lambda: Dd::from_f64(phi_params.lambda).mul_f64(0.5),
            n: Dd::from_f64(phi_params.n),
        };
        t.mult[family.index()] = 1;
        t.ln_phi = t.ln_phi_at(value, 0);
        t.phi = t.ln_phi.exp();
        let id = self.st.terms.len() as u32;
        match &key {
            TermKey::Q { w, .. } => self.st.q_terms[*w].push(id),
            TermKey::K { m, .. } | TermKey::NegL { m, .. } => {
                for &f in m {
                    self.st.kl_terms[f].push(id);
                }
            }
            TermKey::H { u } | TermKey::X { u, .. } => {
                for &v in u {
                    self.st.ux_terms[v].push(id);
                }
            }
        }
        self.st.index.insert(key, id);
        self.st.terms.push(t);
        Ok(())
    }

    fn run(mut self, base: &EdgeColoring, state: &ColoringState) -> Result<PotentialState> {
        let g = self.g;
        let d = self.st.params.delta;
        let sz = self.st.sizes;
        let colors: Vec<Color> = (1..=d as Color).collect();
        for w in 0..g.n() {
            if g.degree(w) == 0 {
                continue;
            }
            let wk = w as u64;
            for cs in self.subsets(&colors, sz.q_colors, &[0, wk]) {
                self.add(TermKey::Q { w, colors: cs }, Family::FewBadColors, state)?;
            }
            let nbrs = g.neighbors(w);
            if nbrs.len() >= sz.fbn_u {
                for u in self.subsets(&nbrs, sz.fbn_u, &[1, wk]) {
                    self.add(TermKey::H { u: u.clone() }, Family::FewBadNeighbors, state)?;
                    let mp = canonical_matchings_unchecked(g, base, &u);
                    let uk = mix(&ids(&u));
                    for (i, mi) in mp.matchings.iter().enumerate() {
                        self.check_room(binomial(mi.len(), sz.fbn_m))?;
                        for m in self.subsets(mi, sz.fbn_m, &[2, wk, uk, i as u64]) {
                            self.add(TermKey::K { m: m.clone(), colors: colors.clone() }, Family::FewBadNeighbors, state)?;
                            self.add(TermKey::NegL { m, colors: colors.clone() }, Family::FewBadNeighbors, state)?;
                        }
                    }
                }
            }
            if nbrs.len() >= sz.bvp_u {
                for u in self.subsets(&nbrs, sz.bvp_u, &[3, wk]) {
                    let mp = canonical_matchings_unchecked(g, base, &u);
                    let uk = mix(&ids(&u));
                    let mut ms: Vec<Vec<EdgeId>> = Vec::new();
                    for (i, mi) in mp.matchings.iter().enumerate() {
                        self.check_room(binomial(mi.len(), sz.bvp_m) + ms.len() as u128)?;
                        ms.extend(self.subsets(mi, sz.bvp_m, &[5, wk, uk, i as u64]));
                    }
                    for cs in self.subsets(&colors, sz.bvp_colors, &[4, wk, uk]) {
                        self.add(TermKey::X { colors: cs.clone(), u: u.clone() }, Family::BadVertexProp, state)?;
                        for m in &ms {
                            self.add(TermKey::K { m: m.clone(), colors: cs.clone() }, Family::BadVertexProp, state)?;
                            self.add(TermKey::NegL { m: m.clone(), colors: cs.clone() }, Family::BadVertexProp, state)?;
                        }
                    }
                }
            }
        }
        let mut st = self.st;
        st.recompute_totals();
        Ok(st)
    }

    /// Refuses before materializing more subsets than the budget allows.
    fn check_room(&self, extra: u128) -> Result<()> {
        match self.budget {
            Some(b) if self.st.registered as u128 + extra > b as u128 => Err(Error::BudgetExceeded { budget: b }),
            _ => Ok(()),
        }
    }
}

/// Registers every martingale for a fresh state. `base` is a proper
/// Δ'-edge-coloring used to split neighborhoods into matchings.
pub fn register_potentials(
    g: &Graph,
    base: &EdgeColoring,
    state: &ColoringState,
    cfg: &DerandConfig,
) -> Result<PotentialState> {
    match cfg.mode {
        FamilyMode::Exact { budget } => build(g, base, state, cfg, Some(budget), None),
        FamilyMode::Restricted { k, seed } => build(g, base, state, cfg, None, Some((k, seed))),
        FamilyMode::Auto { budget, k, seed } => match build(g, base, state, cfg, Some(budget), None) {
            Err(Error::BudgetExceeded { .. }) => build(g, base, state, cfg, None, Some((k, seed))),
            r => r,
        },
    }
}

fn build(
    g: &Graph,
    base: &EdgeColoring,
    state: &ColoringState,
    cfg: &DerandConfig,
    budget: Option<u64>,
    restricted: Option<(usize, u64)>,
) -> Result<PotentialState> {
    let params = state.params.clone();
    if params.delta > MAX_DELTA {
        return Err(Error::InvalidParams(format!(
            "the deterministic chooser supports delta <= {MAX_DELTA}, got {}",
            params.delta
        )));
    }
    if state.clock() != 0 {
        return Err(Error::InvalidParams("potentials must be registered on a fresh state".into()));
    }
    let rep = verify_edge_coloring(g, base)?;
    if let Some(&(e, f, c)) = rep.conflicts.first() {
        return Err(Error::ImproperColoring(e, f, c));
    }
    let d = params.delta;
    let mut q = vec![Vec::new(); g.n()];
    for (w, slot) in q.iter_mut().enumerate() {
        *slot = (1..=d as Color)
            .map(|c| QEntry {
                frozen: Dd::ZERO,
                prod: Dd::ONE,
                live: g.incident(w).iter().map(|&e| state.p_ec(e, c)).sum(),
            })
            .collect();
    }
    let eps = Dd::from_f64(params.eps);
    let ck_eps = Dd::from_f64(params.c_k) * eps;
    let st = PotentialState {
        sizes: Sizes::resolve(&params, &cfg.sizes),
        mode_used: if restricted.is_some() { "restricted" } else { "exact" },
        registered: 0,
        terms: Vec::new(),
        index: HashMap::new(),
        q,
        q_terms: vec![Vec::new(); g.n()],
        kl_terms: vec![Vec::new(); g.m()],
        ux_terms: vec![Vec::new(); g.n()],
        supports: Vec::new(),
        supports_by_edge: vec![Vec::new(); g.m()],
        changed_by: Vec::new(),
        total: Dd::ZERO,
        by_family: [Dd::ZERO; 3],
        h_low: Dd::ONE - ck_eps,
        h_inc: [-ck_eps, Dd::ONE - ck_eps],
        params,
    };
    let b = Builder { g, st, support_index: HashMap::new(), budget, restricted };
    let mut st = b.run(base, state)?;
    st.changed_by = vec![Vec::new(); st.terms.len()];
    Ok(st)
}

impl PotentialState {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, key: &TermKey) -> Option<&Term> {
        self.index.get(key).map(|&i| &self.terms[i as usize])
    }

    pub fn total(&self) -> Dd {
        self.total
    }

    pub fn by_family(&self) -> [Dd; 3] {
        self.by_family
    }

    pub fn support(&self, id: u32) -> &[EdgeId] {
        &self.supports[id as usize]
    }

    /// Edges whose arrival changed each term (non-trivial steps), by term index.
    pub fn changed_by(&self) -> &[Vec<EdgeId>] {
        &self.changed_by
    }

    /// Union of the supports of all terms an arrival of `e` can change.
    pub fn affected_reads(&self, e: EdgeId) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.supports_by_edge[e]
            .iter()
            .flat_map(|&s| self.supports[s as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Sum recomputed from the cached per-term values, in index order.
    pub fn recompute_totals(&mut self) {
        let mut by = [Dd::ZERO; 3];
        let mut total = Dd::ZERO;
        for t in &self.terms {
            for (f, slot) in by.iter_mut().enumerate() {
                if t.mult[f] > 0 {
                    *slot += t.phi.mul_f64(t.mult[f] as f64);
                }
            }
            total += t.phi.mul_f64(t.weight() as f64);
        }
        self.by_family = by;
        self.total = total;
    }

    fn x_rate(&self, ncolors: usize) -> Dd {
        (Dd::ONE - Dd::from_f64(self.params.eps).mul_f64(0.5)) * Dd::from_u64(ncolors as u64)
            / Dd::from_u64(self.params.delta as u64)
    }

    /// Effect of `tr` on every term, without modifying anything.
    pub fn evaluate(&self, g: &Graph, tr: &Transition) -> Result<Effect> {
        let d = self.params.delta;
        let den = self.params.den();
        let e = tr.edge;
        let [a, b] = g.endpoints(e);
        let mut changes: Vec<TermChange> = Vec::new();

        // Few-bad-colors: per-vertex live sums.
        let mut ws: Vec<(VertexId, Vec<i128>)> = vec![(a, vec![0; d]), (b, vec![0; d])];
        for up in &tr.updates {
            for v in g.endpoints(up.f) {
                let slot = match ws.iter().position(|(w, _)| *w == v) {
                    Some(i) => i,
                    None => {
                        ws.push((v, vec![0; d]));
                        ws.len() - 1
                    }
                };
                for x in &up.entries {
                    ws[slot].1[x.c as usize - 1] += x.new as i128 - x.old as i128;
                }
            }
        }
        let mut q_updates = Vec::new();
        for (i, (w, dl)) in ws.iter().enumerate() {
            if self.q_terms[*w].is_empty() {
                continue;
            }
            let on_edge = i < 2;
            let cur = &self.q[*w];
            let mut next = cur.clone();
            let mut mask = 0u128;
            for c in 0..d {
                let en = cur[c];
                if on_edge {
                    let p = tr.p_before[c];
                    let l1 = en.live - p;
                    let l2 = (l1 as i128 + dl[c]) as u128;
                    if !en.prod.is_zero() {
                        let lhs = (den - p.min(den)).checked_mul(l2);
                        let rhs = den.checked_mul(l1);
                        if lhs.is_none() || rhs.is_none() {
                            return Err(Error::GridOverflow(d));
                        }
                        if lhs != rhs {
                            mask |= 1 << c;
                        }
                    }
                    if p > 0 {
                        next[c].frozen = en.frozen + en.prod * Dd::ratio(p, den);
                        next[c].prod = en.prod * Dd::ratio(den - p.min(den), den);
                    }
                    next[c].live = l2;
                } else if dl[c] != 0 {
                    if !en.prod.is_zero() {
                        mask |= 1 << c;
                    }
                    next[c].live = (en.live as i128 + dl[c]) as u128;
                }
            }
            // Colors whose entry moved; terms avoiding them keep their value.
            let moved = (0..d)
                .filter(|&c| next[c] != cur[c])
                .fold(0u128, |m, c| m | 1 << c);
            if moved == 0 {
                q_updates.push((*w, next));
                continue;
            }
            let qv: Vec<Option<Dd>> =
                (0..d).map(|c| (moved >> c & 1 == 1).then(|| next[c].value(den))).collect();
            for &id in &self.q_terms[*w] {
                let t = &self.terms[id as usize];
                if moved & t.cmask == 0 {
                    continue;
                }
                let stepped = mask & t.cmask != 0;
                let value: Dd = (0..d)
                    .filter(|&c| t.cmask >> c & 1 == 1)
                    .map(|c| qv[c].unwrap_or_else(|| next[c].value(den)))
                    .sum();
                changes.push(self.change(id, value, 0, stepped)?);
            }
            q_updates.push((*w, next));
        }

        // Matching terms K and −L.
        let good = tr.line.endpoints_good();
        // One contribution per (update, term); merged per term below in
        // occurrence order.
        let mut parts: Vec<(u32, i128, Dd, bool)> = Vec::new();
        for up in &tr.updates {
            for &id in &self.kl_terms[up.f] {
                let t = &self.terms[id as usize];
                let mut part = (id, 0i128, Dd::ZERO, false);
                let is_k = matches!(t.key, TermKey::K { .. });
                if is_k || good {
                    for x in up.entries.iter().filter(|x| t.has_color(x.c)) {
                        if is_k {
                            part.1 += x.new as i128 - x.old as i128;
                            part.3 |= x.new != x.old;
                        } else {
                            let bar = match x.kind {
                                EntryKind::Zeroed | EntryKind::Degenerate => Dd::ZERO,
                                EntryKind::Scaled { .. } => Dd::ratio(x.new, den),
                                EntryKind::Capped { num, den: q } | EntryKind::Clamped { num, den: q } => {
                                    Dd::ratio(num, q)
                                }
                            };
                            part.2 += bar - Dd::ratio(x.old, den);
                            let same = matches!(x.kind, EntryKind::Scaled { .. }) && x.new == x.old;
                            part.3 |= !same;
                        }
                    }
                }
                parts.push(part);
            }
        }
        parts.sort_by_key(|x| x.0);
        let mut acc: Vec<(u32, i128, Dd, bool)> = Vec::new();
        for (id, kd, ld, st) in parts {
            match acc.last_mut() {
                Some(a) if a.0 == id => {
                    a.1 += kd;
                    a.2 += ld;
                    a.3 |= st;
                }
                _ => acc.push((id, kd, ld, st)),
            }
        }
        for (id, kd, ld, stepped) in acc {
            let t = &self.terms[id as usize];
            if matches!(t.key, TermKey::K { .. }) {
                let kint = (t.kint as i128 + kd) as u128;
                changes.push(self.change(id, Dd::ratio(kint, den), kint, stepped)?);
            } else {
                changes.push(self.change(id, t.value + ld, 0, stepped)?);
            }
        }

        // Neighborhood terms H and X.
        let ux = merge_sorted(&self.ux_terms[a], &self.ux_terms[b]);
        let z = tr.z_before();
        let marked = tr.line.marked() as usize;
        let h_qualifies = good && z <= den && Dd::ratio(z, den) >= self.h_low;
        let mut rates: Vec<Option<Dd>> = vec![None; d + 1];
        let mut last_zc: Option<(u128, Dd)> = None;
        for id in ux {
            let t = &self.terms[id as usize];
            let inc = match &t.key {
                TermKey::H { .. } => h_qualifies.then(|| self.h_inc[marked]),
                TermKey::X { colors, u } => {
                    let s = [a, b].iter().filter(|v| u.binary_search(v).is_ok()).count();
                    let zc: u128 = colors.iter().map(|&c| tr.p_before[c as usize - 1]).sum();
                    let rate = *rates[colors.len()].get_or_insert_with(|| self.x_rate(colors.len()));
                    let zr = match last_zc {
                        Some((v, r)) if v == zc => r,
                        _ => {
                            let r = Dd::ratio(zc, den);
                            last_zc = Some((zc, r));
                            r
                        }
                    };
                    let qualifies = good && zr <= rate;
                    let hit = tr.line == crate::online::LineTag::Color && tr.main_color.is_some_and(|c| t.has_color(c));
                    let hit = if hit { Dd::ONE } else { Dd::ZERO };
                    qualifies.then(|| (hit - rate).mul_f64(s as f64))
                }
                _ => unreachable!("only H and X terms are indexed by vertex"),
            };
            if let Some(inc) = inc {
                if !inc.is_zero() {
                    changes.push(self.change(id, t.value + inc, 0, true)?);
                }
            }
        }

        let mut delta = Dd::ZERO;
        let mut family_delta = [Dd::ZERO; 3];
        for ch in &changes {
            let t = &self.terms[ch.id as usize];
            let diff = ch.phi - t.phi;
            delta += diff.mul_f64(t.weight() as f64);
            for (f, slot) in family_delta.iter_mut().enumerate() {
                if t.mult[f] > 0 {
                    *slot += diff.mul_f64(t.mult[f] as f64);
                }
            }
        }
        Ok(Effect { edge: e, delta, family_delta, changes, q_updates })
    }

    fn change(&self, id: u32, value: Dd, kint: u128, stepped: bool) -> Result<TermChange> {
        let t = &self.terms[id as usize];
        let steps = t.steps + stepped as u64;
        if steps as f64 > t.phi_params.n {
            return Err(Error::StepOverflow { term: format!("{:?}", t.key), bound: t.phi_params.n });
        }
        let ln_phi = t.ln_phi_at(value, steps);
        Ok(TermChange { id, value, kint, steps, ln_phi, phi: ln_phi.exp(), stepped })
    }

    pub fn apply(&mut self, eff: Effect) {
        for ch in eff.changes {
            let t = &mut self.terms[ch.id as usize];
            if ch.stepped || ch.value != t.value {
                self.changed_by[ch.id as usize].push(eff.edge);
            }
            t.value = ch.value;
            t.kint = ch.kint;
            t.steps = ch.steps;
            t.ln_phi = ch.ln_phi;
            t.phi = ch.phi;
        }
        for (w, next) in eff.q_updates {
            self.q[w] = next;
        }
        self.total += eff.delta;
        for (slot, d) in self.by_family.iter_mut().zip(eff.family_delta) {
            *slot += d;
        }
    }

    /// For each unarrived neighbor of `e`, the colors whose fractional
    /// scale-up should round up: those where the first-order change of Φ
    /// in P_fc is negative for a good-endpoint arrival of `e`.
    pub fn rounding_preferences(&self, g: &Graph, state: &ColoringState, e: EdgeId) -> Vec<(EdgeId, u128)> {
        let d = self.params.delta;
        let den = self.params.den();
        let [a, b] = g.endpoints(e);
        let p_e = state.p(e);
        let mut q_slope: HashMap<VertexId, Vec<Dd>> = HashMap::new();
        let mut out = Vec::new();
        for f in g.edge_neighbors(e) {
            if state.arrived(f) {
                continue;
            }
            let mut deriv = vec![Dd::ZERO; d];
            for &id in &self.kl_terms[f] {
                let t = &self.terms[id as usize];
                let w = (t.phi * t.kappa).mul_f64(t.weight() as f64);
                let w = if matches!(t.key, TermKey::K { .. }) { w } else { -w };
                for (c, slot) in deriv.iter_mut().enumerate() {
                    if t.cmask >> c & 1 == 1 {
                        *slot += w;
                    }
                }
            }
            for v in g.endpoints(f) {
                let slope = q_slope.entry(v).or_insert_with(|| {
                    let mut s = vec![Dd::ZERO; d];
                    for &id in &self.q_terms[v] {
                        let t = &self.terms[id as usize];
                        let w = (t.phi * t.kappa).mul_f64(t.weight() as f64);
                        for (c, slot) in s.iter_mut().enumerate() {
                            if t.cmask >> c & 1 == 1 {
                                *slot += w;
                            }
                        }
                    }
                    for (c, slot) in s.iter_mut().enumerate() {
                        let mut prod = self.q[v][c].prod;
                        if v == a || v == b {
                            prod = prod * Dd::ratio(den - p_e[c].min(den), den);
                        }
                        *slot = *slot * prod;
                    }
                    s
                });
                for c in 0..d {
                    deriv[c] += slope[c];
                }
            }
            let mask = (0..d).filter(|&c| deriv[c] < Dd::ZERO).fold(0u128, |m, c| m | 1 << c);
            out.push((f, mask));
        }
        out
    }
}
