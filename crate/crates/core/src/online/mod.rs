//! The online edge coloring algorithm with exact grid arithmetic and a
//! pluggable chooser for sample-path arrivals.

mod params;

pub use params::{Constants, Grid, Params};

use crate::error::{Error, Result};
use crate::graph::{Color, EdgeColoring, EdgeId, Graph, VertexId};
use crate::rng::{keyed_rng, tag};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which line of the algorithm handled an arrival.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineTag {
    MarkBad,
    ColorBad,
    MarkZGe1,
    Color,
    MarkBot,
}

impl LineTag {
    pub fn marked(self) -> bool {
        matches!(self, LineTag::MarkBad | LineTag::MarkZGe1 | LineTag::MarkBot)
    }

    pub fn increments_badness(self) -> bool {
        matches!(self, LineTag::MarkZGe1 | LineTag::MarkBot)
    }

    /// Both endpoints were good on arrival.
    pub fn endpoints_good(self) -> bool {
        matches!(self, LineTag::MarkZGe1 | LineTag::Color | LineTag::MarkBot)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<LineTag> {
        Some(match c {
            0 => LineTag::MarkBad,
            1 => LineTag::ColorBad,
            2 => LineTag::MarkZGe1,
            3 => LineTag::Color,
            4 => LineTag::MarkBot,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            LineTag::MarkBad => "mark_bad",
            LineTag::ColorBad => "color_bad",
            LineTag::MarkZGe1 => "mark_z_ge_1",
            LineTag::Color => "color",
            LineTag::MarkBot => "mark_bot",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BadPathMark,
    BadPathColor(Color),
    MarkZGe1,
    SamplePath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Color(Color),
    Bot,
}

/// How scale-ups landing between grid points are rounded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingChoice {
    /// Round up with probability rem/den, coins keyed by (seed, arriving edge, neighbor).
    Keyed(u64),
    /// Exactly the listed (neighbor, colors) round up; everything else rounds down.
    Explicit(Vec<(EdgeId, Vec<Color>)>),
    /// Always round down.
    Floor,
}

impl RoundingChoice {
    pub fn explicit_for(&self, f: EdgeId) -> &[Color] {
        match self {
            RoundingChoice::Explicit(v) => v
                .iter()
                .find(|(g, _)| *g == f)
                .map(|(_, cs)| cs.as_slice())
                .unwrap_or(&[]),
            _ => &[],
        }
    }
}

/// Full description of how one arrival is handled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub edge: EdgeId,
    pub line: LineTag,
    /// Main-palette color for `color` and `color_bad` lines.
    pub main_color: Option<Color>,
    pub rounding: RoundingChoice,
}

/// What happened to one entry `P_fc` of an unarrived neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Zeroed,
    /// Scale-up landing between grid points, fractional part `rem / den`;
    /// `up` records the rounding direction.
    Scaled { rem: u128, den: u128, up: bool },
    /// Left unchanged because the old value exceeded A; the uncapped value
    /// would have been `num / den` (as a probability, not a numerator).
    Capped { num: u128, den: u128 },
    /// Scaled value exceeded 1 and was clamped; uncapped value `num / den`.
    Clamped { num: u128, den: u128 },
    /// Division by zero (P_ec = 1); target zeroed.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryUpdate {
    pub c: Color,
    pub old: u128,
    pub new: u128,
    pub kind: EntryKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborUpdate {
    pub f: EdgeId,
    /// Only entries that changed or were capped/clamped; all others keep their value.
    pub entries: Vec<EntryUpdate>,
}

/// An arrival's effect on the state, computed before it is applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub edge: EdgeId,
    pub line: LineTag,
    pub main_color: Option<Color>,
    pub p_before: Vec<u128>,
    /// Bad status of `g.endpoints(edge)` on arrival.
    pub endpoint_bad: [bool; 2],
    pub updates: Vec<NeighborUpdate>,
}

impl Transition {
    pub fn z_before(&self) -> u128 {
        self.p_before.iter().sum()
    }

    /// Colors rounded up, per neighbor, in the form stored in tuples.
    pub fn round_ups(&self) -> Vec<(EdgeId, Vec<Color>)> {
        self.updates
            .iter()
            .filter_map(|u| {
                let cs: Vec<Color> = u
                    .entries
                    .iter()
                    .filter(|x| matches!(x.kind, EntryKind::Scaled { up: true, .. }))
                    .map(|x| x.c)
                    .collect();
                (!cs.is_empty()).then_some((u.f, cs))
            })
            .collect()
    }
}

/// Information stored at an edge when it is processed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTuple {
    pub t: u64,
    pub line: LineTag,
    pub color: Color,
    pub main_color: Option<Color>,
    pub p_before: Vec<u128>,
    pub endpoint_bad: [bool; 2],
    /// Rounding directions for neighbors, when not derivable from keyed coins.
    pub round_up: Vec<(EdgeId, Vec<Color>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CappedEntry {
    pub f: EdgeId,
    pub c: Color,
    pub num: u128,
    pub den: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub edge: EdgeId,
    pub t: u64,
    pub branch: LineTag,
    pub color: Color,
    #[serde(rename = "P_before")]
    pub p_before: Vec<u128>,
    pub marked: bool,
    /// Uncapped values of capped or clamped neighbor entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncapped: Vec<CappedEntry>,
}

/// Branch selection from the quantities visible at the arriving edge.
pub fn classify_values(p_e: &[u128], bad: [bool; 2], dangerous: [bool; 2], den: u128) -> Branch {
    if bad[0] || bad[1] {
        let first = p_e.iter().position(|&p| p > 0);
        match first {
            Some(i) if !dangerous[0] && !dangerous[1] => Branch::BadPathColor(i as Color + 1),
            _ => Branch::BadPathMark,
        }
    } else if p_e.iter().sum::<u128>() > den {
        Branch::MarkZGe1
    } else {
        Branch::SamplePath
    }
}

/// Update of one unarrived neighbor's vector when an edge with pre-arrival
/// vector `p_g` arrives. `round_up(c, rem, den)` decides fractional scale-ups.
pub fn neighbor_entries(
    params: &Params,
    p_f: &[u128],
    p_g: &[u128],
    line: LineTag,
    main_color: Option<Color>,
    mut round_up: impl FnMut(Color, u128, u128) -> bool,
) -> Vec<EntryUpdate> {
    let den = params.den();
    let mut out = Vec::new();
    let zero = match line {
        LineTag::Color | LineTag::ColorBad => main_color,
        _ => None,
    };
    let scale = matches!(line, LineTag::Color | LineTag::MarkBot);
    if !scale && zero.is_none() {
        return out;
    }
    for (i, &old) in p_f.iter().enumerate() {
        let c = i as Color + 1;
        if old == 0 {
            continue;
        }
        if Some(c) == zero {
            out.push(EntryUpdate { c, old, new: 0, kind: EntryKind::Zeroed });
            continue;
        }
        if !scale {
            continue;
        }
        let pg = p_g[i];
        if pg == 0 {
            continue;
        }
        if pg >= den {
            out.push(EntryUpdate { c, old, new: 0, kind: EntryKind::Degenerate });
            continue;
        }
        let q = den - pg;
        if old > params.cap_num {
            out.push(EntryUpdate { c, old, new: old, kind: EntryKind::Capped { num: old, den: q } });
            continue;
        }
        let exact = old * den;
        let (fl, rem) = (exact / q, exact % q);
        if fl > den || (fl == den && rem > 0) {
            out.push(EntryUpdate { c, old, new: den, kind: EntryKind::Clamped { num: old, den: q } });
            continue;
        }
        let up = rem > 0 && round_up(c, rem, q);
        let new = fl + up as u128;
        out.push(EntryUpdate { c, old, new, kind: EntryKind::Scaled { rem, den: q, up } });
    }
    out
}

/// Draws the keyed rounding coin for a fractional part `rem / den`.
pub fn keyed_coin(rng: &mut ChaCha8Rng, rem: u128, den: u128) -> bool {
    rng.gen_range(0..den) < rem
}

pub fn rounding_rng(seed: u64, arriving: EdgeId, neighbor: EdgeId) -> ChaCha8Rng {
    keyed_rng(&[tag::ROUND, seed, arriving as u64, neighbor as u64])
}

pub fn sampling_rng(seed: u64, e: EdgeId) -> ChaCha8Rng {
    keyed_rng(&[tag::SAMPLE, seed, e as u64])
}

/// Samples a color with probability P_ec, or ⊥ with the remaining mass.
pub fn sample_from(p_e: &[u128], den: u128, rng: &mut impl Rng) -> Result<Outcome> {
    let total: u128 = p_e.iter().sum();
    if total > den {
        return Err(Error::Infeasible(format!("cannot sample: sum of P is {total}/{den} > 1")));
    }
    let r = rng.gen_range(0..den);
    let mut acc = 0;
    for (i, &p) in p_e.iter().enumerate() {
        acc += p;
        if r < acc {
            return Ok(Outcome::Color(i as Color + 1));
        }
    }
    Ok(Outcome::Bot)
}

/// Eagerly maintained state of the algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColoringState {
    pub params: Params,
    p: Vec<u128>,
    tuples: Vec<Option<EdgeTuple>>,
    udeg: Vec<u32>,
    baddeg: Vec<u32>,
    became_bad_at: Vec<Option<u64>>,
    fallback_at: Vec<Vec<Color>>,
    clock: u64,
    records: Vec<DecisionRecord>,
    coloring: EdgeColoring,
    /// Anomalies worth surfacing (degenerate divisions).
    pub notes: Vec<String>,
}

pub fn init_state(g: &Graph, params: Params) -> Result<ColoringState> {
    ColoringState::new(g, params)
}

impl ColoringState {
    pub fn new(g: &Graph, params: Params) -> Result<ColoringState> {
        if params.delta < g.max_degree() {
            return Err(Error::InvalidParams(format!(
                "delta {} is below the graph's max degree {}",
                params.delta,
                g.max_degree()
            )));
        }
        let d = params.delta;
        Ok(ColoringState {
            p: vec![params.p0; g.m() * d],
            tuples: vec![None; g.m()],
            udeg: vec![0; g.n()],
            baddeg: vec![0; g.n()],
            became_bad_at: vec![None; g.n()],
            fallback_at: vec![Vec::new(); g.n()],
            clock: 0,
            records: Vec::new(),
            coloring: EdgeColoring::new(g.m(), d),
            notes: Vec::new(),
            params,
        })
    }

    pub fn delta(&self) -> usize {
        self.params.delta
    }

    pub fn den(&self) -> u128 {
        self.params.den()
    }

    pub fn p(&self, e: EdgeId) -> &[u128] {
        let d = self.delta();
        &self.p[e * d..(e + 1) * d]
    }

    pub fn p_ec(&self, e: EdgeId, c: Color) -> u128 {
        self.p[e * self.delta() + c as usize - 1]
    }

    pub fn z(&self, e: EdgeId) -> u128 {
        self.p(e).iter().sum()
    }

    pub fn tuple(&self, e: EdgeId) -> Option<&EdgeTuple> {
        self.tuples[e].as_ref()
    }

    pub fn arrived(&self, e: EdgeId) -> bool {
        self.tuples[e].is_some()
    }

    pub fn udeg(&self, v: VertexId) -> u32 {
        self.udeg[v]
    }

    pub fn baddeg(&self, v: VertexId) -> u32 {
        self.baddeg[v]
    }

    pub fn is_bad(&self, v: VertexId) -> bool {
        self.udeg[v] >= self.params.bad_count
    }

    pub fn is_dangerous(&self, v: VertexId) -> bool {
        self.baddeg[v] >= self.params.dangerous_count
    }

    pub fn became_bad_at(&self, v: VertexId) -> Option<u64> {
        self.became_bad_at[v]
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn coloring(&self) -> &EdgeColoring {
        &self.coloring
    }

    pub fn into_coloring(self) -> EdgeColoring {
        self.coloring
    }

    /// Test hook: overwrite the badness counter of a vertex.
    pub fn force_udeg(&mut self, v: VertexId, value: u32) {
        self.udeg[v] = value;
        if self.is_bad(v) && self.became_bad_at[v].is_none() {
            self.became_bad_at[v] = Some(self.clock);
        }
    }

    /// Test hook: overwrite one probability numerator.
    pub fn force_p(&mut self, e: EdgeId, c: Color, num: u128) {
        let d = self.delta();
        self.p[e * d + c as usize - 1] = num;
    }

    pub fn classify_arrival(&self, g: &Graph, e: EdgeId) -> Result<Branch> {
        g.check_edge(e)?;
        if self.arrived(e) {
            return Err(Error::AlreadyProcessed(e));
        }
        let [u, v] = g.endpoints(e);
        Ok(classify_values(
            self.p(e),
            [self.is_bad(u), self.is_bad(v)],
            [self.is_dangerous(u), self.is_dangerous(v)],
            self.den(),
        ))
    }

    pub fn sample_color(&self, e: EdgeId, rng: &mut impl Rng) -> Result<Outcome> {
        sample_from(self.p(e), self.den(), rng)
    }

    /// Decision for any non-sample branch; `None` for the sample path.
    pub fn forced_decision(&self, e: EdgeId, branch: Branch) -> Option<Decision> {
        let (line, main_color) = match branch {
            Branch::BadPathMark => (LineTag::MarkBad, None),
            Branch::BadPathColor(c) => (LineTag::ColorBad, Some(c)),
            Branch::MarkZGe1 => (LineTag::MarkZGe1, None),
            Branch::SamplePath => return None,
        };
        Some(Decision { edge: e, line, main_color, rounding: RoundingChoice::Floor })
    }

    pub fn outcome_decision(e: EdgeId, outcome: Outcome, rounding: RoundingChoice) -> Decision {
        match outcome {
            Outcome::Color(c) => Decision { edge: e, line: LineTag::Color, main_color: Some(c), rounding },
            Outcome::Bot => Decision { edge: e, line: LineTag::MarkBot, main_color: None, rounding },
        }
    }

    /// Computes the effect of `decision` without modifying the state.
    pub fn plan(&self, g: &Graph, decision: &Decision) -> Result<Transition> {
        let e = decision.edge;
        g.check_edge(e)?;
        if self.arrived(e) {
            return Err(Error::AlreadyProcessed(e));
        }
        if let Some(c) = decision.main_color {
            if c == 0 || c as usize > self.delta() || self.p_ec(e, c) == 0 {
                return Err(Error::Infeasible(format!("color {c} has zero probability at edge {e}")));
            }
        }
        let [u, v] = g.endpoints(e);
        let p_e = self.p(e);
        let mut updates = Vec::new();
        for f in g.edge_neighbors(e) {
            if self.arrived(f) {
                continue;
            }
            let mut coins: Option<ChaCha8Rng> = None;
            let explicit = decision.rounding.explicit_for(f);
            let entries = neighbor_entries(
                &self.params,
                self.p(f),
                p_e,
                decision.line,
                decision.main_color,
                |c, rem, den| match &decision.rounding {
                    RoundingChoice::Keyed(seed) => {
                        keyed_coin(coins.get_or_insert_with(|| rounding_rng(*seed, e, f)), rem, den)
                    }
                    RoundingChoice::Explicit(_) => explicit.contains(&c),
                    RoundingChoice::Floor => false,
                },
            );
            if !entries.is_empty() {
                updates.push(NeighborUpdate { f, entries });
            }
        }
        Ok(Transition {
            edge: e,
            line: decision.line,
            main_color: decision.main_color,
            p_before: p_e.to_vec(),
            endpoint_bad: [self.is_bad(u), self.is_bad(v)],
            updates,
        })
    }

    /// Applies a planned transition and returns its decision record.
    pub fn apply(&mut self, g: &Graph, tr: &Transition) -> Result<DecisionRecord> {
        let e = tr.edge;
        if self.arrived(e) {
            return Err(Error::AlreadyProcessed(e));
        }
        let d = self.delta();
        let mut uncapped = Vec::new();
        for up in &tr.updates {
            for x in &up.entries {
                self.p[up.f * d + x.c as usize - 1] = x.new;
                match x.kind {
                    EntryKind::Capped { num, den } | EntryKind::Clamped { num, den } => {
                        uncapped.push(CappedEntry { f: up.f, c: x.c, num, den })
                    }
                    EntryKind::Degenerate => self
                        .notes
                        .push(format!("edge {e}: P_e{} = 1 while scaling neighbor {}", x.c, up.f)),
                    _ => {}
                }
            }
        }
        let [u, v] = g.endpoints(e);
        let [bu, bv] = tr.endpoint_bad;
        if bu {
            self.baddeg[v] += 1;
        }
        if bv {
            self.baddeg[u] += 1;
        }
        let t = self.clock + 1;
        if tr.line.increments_badness() {
            for x in [u, v] {
                self.udeg[x] += 1;
                if self.is_bad(x) && self.became_bad_at[x].is_none() {
                    self.became_bad_at[x] = Some(t);
                }
            }
        }
        let color = if tr.line.marked() {
            let c = self.greedy_fallback(g, e);
            self.fallback_at[u].push(c);
            self.fallback_at[v].push(c);
            c
        } else {
            tr.main_color.expect("colored line carries a color")
        };
        self.coloring.set(e, color);
        self.clock = t;
        self.tuples[e] = Some(EdgeTuple {
            t,
            line: tr.line,
            color,
            main_color: tr.main_color,
            p_before: tr.p_before.clone(),
            endpoint_bad: tr.endpoint_bad,
            round_up: Vec::new(),
        });
        let rec = DecisionRecord {
            edge: e,
            t,
            branch: tr.line,
            color,
            p_before: tr.p_before.clone(),
            marked: tr.line.marked(),
            uncapped,
        };
        self.records.push(rec.clone());
        Ok(rec)
    }

    /// Stores explicit rounding directions in the tuple of an arrived edge.
    pub fn set_round_up(&mut self, e: EdgeId, dirs: Vec<(EdgeId, Vec<Color>)>) {
        if let Some(t) = self.tuples[e].as_mut() {
            t.round_up = dirs;
        }
    }

    /// Smallest color above Δ unused by marked edges sharing an endpoint.
    pub fn greedy_fallback(&self, g: &Graph, e: EdgeId) -> Color {
        let [u, v] = g.endpoints(e);
        let mut used: Vec<Color> = self.fallback_at[u].iter().chain(&self.fallback_at[v]).copied().collect();
        used.sort_unstable();
        let mut c = self.delta() as Color + 1;
        for x in used {
            if x == c {
                c += 1;
            } else if x > c {
                break;
            }
        }
        c
    }

    pub fn commit(&mut self, g: &Graph, decision: &Decision) -> Result<(Transition, DecisionRecord)> {
        let tr = self.plan(g, decision)?;
        let rec = self.apply(g, &tr)?;
        if matches!(decision.rounding, RoundingChoice::Explicit(_)) {
            self.set_round_up(decision.edge, tr.round_ups());
        }
        Ok((tr, rec))
    }

    /// Runs one arrival end to end with the given chooser.
    pub fn process_edge(&mut self, g: &Graph, e: EdgeId, chooser: &mut dyn Chooser) -> Result<DecisionRecord> {
        let branch = self.classify_arrival(g, e)?;
        let decision = match self.forced_decision(e, branch) {
            Some(d) => d,
            None => chooser.choose(g, self, e)?,
        };
        let tr = self.plan(g, &decision)?;
        chooser.observe(g, self, &tr)?;
        let rec = self.apply(g, &tr)?;
        if matches!(decision.rounding, RoundingChoice::Explicit(_)) {
            self.set_round_up(e, tr.round_ups());
        }
        Ok(rec)
    }
}

/// Chooses the outcome of sample-path arrivals.
pub trait Chooser {
    fn choose(&mut self, g: &Graph, state: &ColoringState, e: EdgeId) -> Result<Decision>;

    /// Called with every planned transition before it is applied.
    fn observe(&mut self, _g: &Graph, _state: &ColoringState, _tr: &Transition) -> Result<()> {
        Ok(())
    }
}

/// The randomized chooser: keyed sampling and keyed rounding coins.
#[derive(Clone, Copy, Debug)]
pub struct SeededSampler {
    pub seed: u64,
}

impl Chooser for SeededSampler {
    fn choose(&mut self, _g: &Graph, state: &ColoringState, e: EdgeId) -> Result<Decision> {
        let outcome = state.sample_color(e, &mut sampling_rng(self.seed, e))?;
        Ok(ColoringState::outcome_decision(e, outcome, RoundingChoice::Keyed(self.seed)))
    }
}

/// Runs the algorithm over an arrival order with a chooser.
pub fn run_online(
    g: &Graph,
    params: Params,
    order: &[EdgeId],
    chooser: &mut dyn Chooser,
) -> Result<ColoringState> {
    crate::graph::check_permutation(order, g.m())?;
    let mut st = ColoringState::new(g, params)?;
    for &e in order {
        st.process_edge(g, e, chooser)?;
    }
    Ok(st)
}
