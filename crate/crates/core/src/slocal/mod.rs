//! Sequential execution in the edge-arrival local model: every decision reads
//! only the radius-ℓ line-graph ball of the arriving edge.

mod view;

pub use view::LocalView;

use crate::derand::{register_potentials, ArgminChooser, DerandConfig, PotentialState, TraceRow};
use crate::error::{Error, Result};
use crate::graph::{greedy_edge_coloring, line_distance, EdgeColoring, EdgeId, Graph, LineBfs, LineDistance};
use crate::online::{
    classify_values, keyed_coin, neighbor_entries, rounding_rng, sample_from, sampling_rng, Chooser, ColoringState,
    Decision, EdgeTuple, Params, RoundingChoice,
};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "snake_case")]
pub enum OrderKind {
    Id,
    Reverse,
    /// The order stored with the instance (star edges first for star_lb).
    Adversarial,
    Random { seed: u64 },
    Explicit { edges: Vec<EdgeId> },
}

/// A validated permutation of the edge ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalOrder(Vec<EdgeId>);

impl ArrivalOrder {
    pub fn new(g: &Graph, kind: &OrderKind) -> Result<ArrivalOrder> {
        let m = g.m();
        let v = match kind {
            OrderKind::Id => (0..m).collect(),
            OrderKind::Reverse => (0..m).rev().collect(),
            OrderKind::Adversarial => g
                .arrival_order()
                .ok_or_else(|| Error::InvalidParams("instance carries no adversarial order".into()))?
                .to_vec(),
            OrderKind::Random { seed } => {
                use rand::seq::SliceRandom;
                let mut v: Vec<EdgeId> = (0..m).collect();
                v.shuffle(&mut crate::rng::keyed_rng(&[crate::rng::tag::GENERATE, *seed, 0x6f72_6465_72]));
                v
            }
            OrderKind::Explicit { edges } => edges.clone(),
        };
        crate::graph::check_permutation(&v, m)?;
        Ok(ArrivalOrder(v))
    }

    pub fn as_slice(&self) -> &[EdgeId] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Randomized { seed: u64 },
    Deterministic {
        #[serde(default)]
        derand: DerandConfig,
    },
}

/// How rounding coins of past arrivals are recovered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundingSource {
    Keyed(u64),
    /// Directions stored in the arrived edge's tuple.
    Stored,
}

/// Recomputes P_e from the tuples of arrived neighbors, replayed in arrival
/// order. `arrived` lists every arrived neighbor; `None` means its tuple is missing.
pub fn reconstruct_p(
    params: &Params,
    e: EdgeId,
    arrived: &[(EdgeId, Option<&EdgeTuple>)],
    rounding: RoundingSource,
) -> Result<Vec<u128>> {
    let mut ts: Vec<(EdgeId, &EdgeTuple)> = Vec::with_capacity(arrived.len());
    for &(f, t) in arrived {
        ts.push((f, t.ok_or(Error::MissingTuple(f))?));
    }
    ts.sort_by_key(|(_, t)| t.t);
    let mut p = vec![params.p0; params.delta];
    for (f, t) in ts {
        let mut coins: Option<ChaCha8Rng> = None;
        let stored: &[_] = t.round_up.iter().find(|(x, _)| *x == e).map_or(&[], |x| x.1.as_slice());
        let ups = neighbor_entries(params, &p, &t.p_before, t.line, t.main_color, |c, rem, den| match rounding {
            RoundingSource::Keyed(seed) => keyed_coin(coins.get_or_insert_with(|| rounding_rng(seed, f, e)), rem, den),
            RoundingSource::Stored => stored.contains(&c),
        });
        for x in ups {
            p[x.c as usize - 1] = x.new;
        }
    }
    Ok(p)
}

/// Recomputes P_e through a view of radius ≥ 1.
pub fn lazy_p(view: &mut LocalView, rounding: RoundingSource) -> Result<Vec<u128>> {
    let e = view.center();
    let mut arrived = Vec::new();
    for v in view.endpoints(e)? {
        for f in view.edges_at(v)? {
            if f != e && view.arrived(f)? {
                arrived.push(f);
            }
        }
    }
    arrived.sort_unstable();
    arrived.dedup();
    let tuples: Vec<(EdgeId, Option<&EdgeTuple>)> = arrived.iter().map(|&f| (f, view.state().tuple(f))).collect();
    reconstruct_p(&view.state().params, e, &tuples, rounding)
}

/// Bad and dangerous status of the endpoints of the center, from incident tuples.
pub fn lazy_status(view: &mut LocalView) -> Result<([bool; 2], [bool; 2])> {
    let e = view.center();
    let params = view.state().params.clone();
    let ends = view.endpoints(e)?;
    let mut bad = [false; 2];
    let mut dangerous = [false; 2];
    for (i, &v) in ends.iter().enumerate() {
        let (mut udeg, mut baddeg) = (0u32, 0u32);
        for f in view.edges_at(v)? {
            if let Some(t) = view.tuple(f)? {
                udeg += t.line.increments_badness() as u32;
                let fe = view.endpoints(f)?;
                let other = if fe[0] == v { 1 } else { 0 };
                baddeg += t.endpoint_bad[other] as u32;
            }
        }
        bad[i] = udeg >= params.bad_count;
        dangerous[i] = baddeg >= params.dangerous_count;
    }
    Ok((bad, dangerous))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessStep {
    pub t: u64,
    pub center: EdgeId,
    /// (edge, line distance from the center), sorted by edge.
    pub reads: Vec<(EdgeId, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLog {
    pub steps: Vec<AccessStep>,
}

impl AccessLog {
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut *w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<AccessLog> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(AccessLog { steps })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityAudit {
    pub max_radius: Option<usize>,
    pub histogram: BTreeMap<usize, u64>,
    /// Reads whose recomputed distance disagrees with the logged one or exceeds ℓ.
    pub violations: Vec<(EdgeId, EdgeId)>,
}

/// Recomputes the distance of every logged read from its step's center.
pub fn audit_locality(g: &Graph, log: &AccessLog, ell: usize) -> Result<LocalityAudit> {
    let mut histogram = BTreeMap::new();
    let mut max_radius = None;
    let mut violations = Vec::new();
    let mut bfs = LineBfs::new(g);
    for s in &log.steps {
        g.check_edge(s.center)?;
        let reach = s.reads.iter().map(|r| r.1).max().unwrap_or(0).max(ell);
        bfs.run(g, s.center, reach);
        for &(f, logged) in &s.reads {
            let d = match bfs.dist(f) {
                Some(d) => d,
                None => match line_distance(g, s.center, f)? {
                    LineDistance::Finite(d) => d,
                    LineDistance::Unreachable => usize::MAX,
                },
            };
            if d != logged || d > ell {
                violations.push((s.center, f));
            }
            *histogram.entry(d).or_insert(0) += 1;
            max_radius = max_radius.max(Some(d));
        }
    }
    Ok(LocalityAudit { max_radius, histogram, violations })
}

/// Decision for one arrival, computed from its view.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub decision: Decision,
    pub lazy_p: Vec<u128>,
    pub reads: Vec<(EdgeId, usize)>,
}

enum Mode {
    Randomized(u64),
    Deterministic(Box<ArgminChooser>),
}

/// Holds the eager state and decides arrivals through radius-limited views.
pub struct Engine<'g> {
    g: &'g Graph,
    pub state: ColoringState,
    mode: Mode,
    ell: usize,
    log: Option<AccessLog>,
}

impl<'g> Engine<'g> {
    pub fn new(g: &'g Graph, params: Params, alg: &Algorithm, ell: usize, log_reads: bool) -> Result<Engine<'g>> {
        Engine::with_base(g, params, alg, ell, log_reads, None)
    }

    /// `base` is the Δ'-coloring used to define canonical matchings; greedy by default.
    pub fn with_base(
        g: &'g Graph,
        params: Params,
        alg: &Algorithm,
        ell: usize,
        log_reads: bool,
        base: Option<&EdgeColoring>,
    ) -> Result<Engine<'g>> {
        if ell == 0 {
            return Err(Error::InvalidParams("locality must be at least 1".into()));
        }
        let state = ColoringState::new(g, params)?;
        let mode = match alg {
            Algorithm::Randomized { seed } => Mode::Randomized(*seed),
            Algorithm::Deterministic { derand } => {
                let owned;
                let base = match base {
                    Some(b) => b,
                    None => {
                        owned = greedy_edge_coloring(g);
                        &owned
                    }
                };
                let pot = register_potentials(g, base, &state, derand)?;
                Mode::Deterministic(Box::new(ArgminChooser::new(pot, true)))
            }
        };
        Ok(Engine { g, state, mode, ell, log: log_reads.then(AccessLog::default) })
    }

    pub fn locality(&self) -> usize {
        self.ell
    }

    pub fn potentials(&self) -> Option<&PotentialState> {
        match &self.mode {
            Mode::Deterministic(c) => Some(&c.pot),
            Mode::Randomized(_) => None,
        }
    }

    /// Decides the arrival of `e` from the current state; read-only.
    pub fn decide(&self, e: EdgeId) -> Result<Step> {
        let mut view = LocalView::new(self.g, &self.state, e, self.ell)?;
        if view.arrived(e)? {
            return Err(Error::AlreadyProcessed(e));
        }
        let source = match self.mode {
            Mode::Randomized(seed) => RoundingSource::Keyed(seed),
            Mode::Deterministic(_) => RoundingSource::Stored,
        };
        let p = lazy_p(&mut view, source)?;
        let (bad, dangerous) = lazy_status(&mut view)?;
        let branch = classify_values(&p, bad, dangerous, self.state.den());
        let decision = match self.state.forced_decision(e, branch) {
            Some(d) => d,
            None => match &self.mode {
                Mode::Randomized(seed) => {
                    let outcome = sample_from(&p, self.state.den(), &mut sampling_rng(*seed, e))?;
                    ColoringState::outcome_decision(e, outcome, RoundingChoice::Keyed(*seed))
                }
                Mode::Deterministic(ch) => {
                    view.read_all(&ch.pot.affected_reads(e))?;
                    ch.pot.choose(self.g, &self.state, e)?.decision
                }
            },
        };
        Ok(Step { decision, lazy_p: p, reads: view.into_reads() })
    }

    /// Applies a decided step, cross-checking the lazily rebuilt P_e.
    pub fn commit(&mut self, step: Step) -> Result<()> {
        let e = step.decision.edge;
        if step.lazy_p != self.state.p(e) {
            return Err(Error::LazyMismatch(e));
        }
        let tr = self.state.plan(self.g, &step.decision)?;
        if let Mode::Deterministic(ch) = &mut self.mode {
            ch.observe(self.g, &self.state, &tr)?;
        }
        self.state.apply(self.g, &tr)?;
        if matches!(step.decision.rounding, RoundingChoice::Explicit(_)) {
            self.state.set_round_up(e, tr.round_ups());
        }
        if let Some(log) = self.log.as_mut() {
            log.steps.push(AccessStep { t: self.state.clock(), center: e, reads: step.reads });
        }
        Ok(())
    }

    pub fn process(&mut self, e: EdgeId) -> Result<()> {
        let step = self.decide(e)?;
        self.commit(step)
    }

    pub fn finish(self) -> SlocalRun {
        let (potentials, trace) = match self.mode {
            Mode::Deterministic(ch) => {
                let ch = *ch;
                (Some(ch.pot), ch.trace)
            }
            Mode::Randomized(_) => (None, None),
        };
        SlocalRun { state: self.state, log: self.log.unwrap_or_default(), potentials, trace }
    }
}

pub struct SlocalRun {
    pub state: ColoringState,
    pub log: AccessLog,
    pub potentials: Option<PotentialState>,
    pub trace: Option<Vec<TraceRow>>,
}

impl SlocalRun {
    pub fn coloring(&self) -> &EdgeColoring {
        self.state.coloring()
    }
}

pub fn run_slocal(
    g: &Graph,
    params: Params,
    order: &ArrivalOrder,
    alg: &Algorithm,
    ell: usize,
    log_reads: bool,
) -> Result<SlocalRun> {
    let mut eng = Engine::new(g, params, alg, ell, log_reads)?;
    for &e in order.as_slice() {
        eng.process(e)?;
    }
    Ok(eng.finish())
}
