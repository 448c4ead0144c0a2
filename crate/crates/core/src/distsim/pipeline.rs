use super::ids::{bits_for, compress_ids, IdMap};
use super::split::{split_to_max_degree, SplitConfig, SplitResult};
use super::{default_bandwidth, run_rounds, Envelope, Message, Mode, Network, NodeProgram, RoundTrace};
use crate::derand::DerandConfig;
use crate::error::{Error, Result};
use crate::graph::{greedy_edge_coloring, EdgeColoring, EdgeId, Graph, VertexId};
use crate::online::{Constants, EdgeTuple, Params};
use crate::schedule::{conflict_schedule, distance_schedule, execute_schedule_observed, locality, Relation};
use crate::slocal::Algorithm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Bit widths of the tuple fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldWidths {
    /// Compressed vertex id.
    pub ib: usize,
    /// Schedule step.
    pub tb: usize,
    /// Color, also used for list length prefixes.
    pub cb: usize,
    /// One probability numerator.
    pub vb: usize,
    /// Palette size, the width of a rounding mask.
    pub delta: usize,
}

impl FieldWidths {
    pub fn new(ids: &IdMap, steps: usize, params: &Params) -> FieldWidths {
        let delta = params.delta;
        FieldWidths {
            ib: ids.bits,
            tb: bits_for(steps as u128),
            cb: bits_for(3 * delta as u128 + 1),
            vb: bits_for(params.den()),
            delta,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub bits: usize,
}

impl Encoded {
    fn put(&mut self, value: u128, width: usize) -> Result<()> {
        if width < 128 && value >> width != 0 {
            return Err(Error::InvalidParams(format!("value {value} does not fit in {width} bits")));
        }
        for i in (0..width).rev() {
            if self.bits % 8 == 0 {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                *self.bytes.last_mut().expect("pushed") |= 0x80 >> (self.bits % 8);
            }
            self.bits += 1;
        }
        Ok(())
    }
}

struct Reader<'a> {
    src: &'a Encoded,
    pos: usize,
}

impl Reader<'_> {
    fn get(&mut self, width: usize) -> Result<u128> {
        if self.pos + width > self.src.bits {
            return Err(Error::InvalidParams("truncated tuple encoding".into()));
        }
        let mut v = 0u128;
        for _ in 0..width {
            let bit = (self.src.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u128;
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Fields of a tuple as carried on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireTuple {
    pub ids: [u32; 2],
    pub step: u64,
    pub color: u32,
    pub main_color: Option<u32>,
    pub line: u8,
    pub endpoint_bad: [bool; 2],
    pub p: Vec<u128>,
    /// (other endpoint id of the neighbor, bitmask of rounded-up colors).
    pub round_up: Vec<(u32, u128)>,
}

/// Layout: two ids, step, color, main color (0 for none), 3-bit line tag,
/// two badness bits, a length-prefixed list of P numerators and a
/// length-prefixed list of rounding masks keyed by neighbor endpoint id.
pub fn encode_tuple(w: &FieldWidths, t: &WireTuple) -> Result<Encoded> {
    let mut out = Encoded::default();
    out.put(t.ids[0] as u128, w.ib)?;
    out.put(t.ids[1] as u128, w.ib)?;
    out.put(t.step as u128, w.tb)?;
    out.put(t.color as u128, w.cb)?;
    out.put(t.main_color.unwrap_or(0) as u128, w.cb)?;
    out.put(t.line as u128, 3)?;
    out.put(t.endpoint_bad[0] as u128, 1)?;
    out.put(t.endpoint_bad[1] as u128, 1)?;
    out.put(t.p.len() as u128, w.cb)?;
    for &x in &t.p {
        out.put(x, w.vb)?;
    }
    out.put(t.round_up.len() as u128, w.cb)?;
    for &(id, mask) in &t.round_up {
        out.put(id as u128, w.ib)?;
        out.put(mask, w.delta)?;
    }
    Ok(out)
}

pub fn decode_tuple(w: &FieldWidths, src: &Encoded) -> Result<WireTuple> {
    let mut r = Reader { src, pos: 0 };
    let ids = [r.get(w.ib)? as u32, r.get(w.ib)? as u32];
    let step = r.get(w.tb)? as u64;
    let color = r.get(w.cb)? as u32;
    let main_color = match r.get(w.cb)? as u32 {
        0 => None,
        c => Some(c),
    };
    let line = r.get(3)? as u8;
    let endpoint_bad = [r.get(1)? == 1, r.get(1)? == 1];
    let np = r.get(w.cb)? as usize;
    let p = (0..np).map(|_| r.get(w.vb)).collect::<Result<_>>()?;
    let nr = r.get(w.cb)? as usize;
    let round_up = (0..nr).map(|_| Ok((r.get(w.ib)? as u32, r.get(w.delta)?))).collect::<Result<_>>()?;
    if r.pos != src.bits {
        return Err(Error::InvalidParams("trailing bits in tuple encoding".into()));
    }
    Ok(WireTuple { ids, step, color, main_color, line, endpoint_bad, p, round_up })
}

fn wire_tuple(g: &Graph, ids: &IdMap, e: EdgeId, step: usize, t: &EdgeTuple) -> WireTuple {
    let [a, b] = g.endpoints(e);
    let round_up = t
        .round_up
        .iter()
        .map(|(f, cs)| {
            let [x, y] = g.endpoints(*f);
            let far = if x == a || x == b { y } else { x };
            (ids.ids[far], cs.iter().fold(0u128, |m, &c| m | 1u128 << (c - 1)))
        })
        .collect();
    WireTuple {
        ids: [ids.ids[a], ids.ids[b]],
        step: step as u64,
        color: t.color,
        main_color: t.main_color,
        line: t.line.code(),
        endpoint_bad: t.endpoint_bad,
        p: t.p_before.clone(),
        round_up,
    }
}

#[derive(Clone, Debug)]
struct FloodMsg {
    origin: EdgeId,
    ttl: u8,
    payload: usize,
}

const TTL_BITS: usize = 3;

impl Message for FloodMsg {
    fn bits(&self) -> usize {
        self.payload + TTL_BITS
    }
}

/// Pushes each source tuple to every vertex within `ttl` hops.
struct Flood {
    sources: Vec<Vec<(EdgeId, usize)>>,
    ttl: u8,
}

impl NodeProgram for Flood {
    type State = HashSet<EdgeId>;
    type Msg = FloodMsg;

    fn init(&self, g: &Graph, v: VertexId) -> (Self::State, Vec<(EdgeId, FloodMsg)>) {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &(origin, payload) in &self.sources[v] {
            seen.insert(origin);
            for &e in g.incident(v) {
                out.push((e, FloodMsg { origin, ttl: self.ttl - 1, payload }));
            }
        }
        (seen, out)
    }

    fn step(
        &self,
        g: &Graph,
        v: VertexId,
        _round: usize,
        seen: &mut Self::State,
        inbox: &[Envelope<FloodMsg>],
    ) -> Vec<(EdgeId, FloodMsg)> {
        let mut out = Vec::new();
        for env in inbox {
            if !seen.insert(env.msg.origin) || env.msg.ttl == 0 {
                continue;
            }
            for &e in g.incident(v) {
                if e != env.edge {
                    out.push((e, FloodMsg { ttl: env.msg.ttl - 1, ..env.msg.clone() }));
                }
            }
        }
        out
    }

    fn halted(&self, _: &Self::State) -> bool {
        true
    }
}

/// Max(4, ⌈c·√log₂ n⌉).
pub fn delta_prime(n: usize, c: f64) -> usize {
    let log = (n.max(2) as f64).log2();
    4.max((c * log.sqrt()).ceil() as usize)
}

/// c·Δ'³·(ib + vb) bits.
pub fn envelope_bits(c: usize, delta: usize, w: &FieldWidths) -> usize {
    c * delta.pow(3) * (w.ib + w.vb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub constants: Constants,
    /// Constant in the split target max(4, ⌈c·√log₂ n⌉).
    pub c: f64,
    /// Overrides the split target.
    pub delta_prime: Option<usize>,
    /// Defaults to CONGEST with bandwidth max(16, 4⌈log₂ n⌉).
    pub mode: Option<Mode>,
    pub round_cap: usize,
    /// Ids are unique within this radius; defaults to locality + 1.
    pub id_radius: Option<usize>,
    pub split: SplitConfig,
    pub envelope_c: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            algorithm: Algorithm::Deterministic { derand: DerandConfig::default() },
            constants: Constants::default(),
            c: 1.0,
            delta_prime: None,
            mode: None,
            round_cap: 10_000,
            id_radius: None,
            split: SplitConfig::default(),
            envelope_c: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    SmallDelta,
    Split,
}

/// Congestion of one schedule step of one part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCongestion {
    pub part: usize,
    pub step: usize,
    pub edges: usize,
    /// Largest number of bits on one directed channel during the step.
    pub max_channel_bits: usize,
    pub max_message_bits: usize,
    pub logical_rounds: usize,
    pub physical_rounds: usize,
    pub envelope_bits: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartReport {
    pub edges: usize,
    pub max_degree: usize,
    pub widths: FieldWidths,
    pub colors_used: u32,
    pub trace: RoundTrace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineRun {
    pub coloring: EdgeColoring,
    pub branch: Branch,
    pub delta_prime: usize,
    pub mode: Mode,
    pub split: Option<SplitResult>,
    pub parts: Vec<PartReport>,
    pub steps: Vec<StepCongestion>,
    /// Parts run side by side, so this is the slowest part's physical rounds.
    pub physical_rounds: usize,
    pub colors_used: u32,
}

/// Splits down to degree Δ', then colors each part on its own palette by
/// executing a schedule whose committed tuples are pushed through the
/// simulated network, one flood per step.
pub fn congest_pipeline(g: &Graph, eps: f64, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let n = g.n();
    let delta = g.max_degree();
    let dp = cfg.delta_prime.unwrap_or_else(|| delta_prime(n, cfg.c));
    let mode = cfg.mode.unwrap_or(Mode::Congest { bandwidth: default_bandwidth(n) });
    if delta <= dp {
        let coloring = greedy_edge_coloring(g);
        let colors_used = coloring.max_color();
        return Ok(PipelineRun {
            coloring,
            branch: Branch::SmallDelta,
            delta_prime: dp,
            mode,
            split: None,
            parts: Vec::new(),
            steps: Vec::new(),
            physical_rounds: 0,
            colors_used,
        });
    }
    let split = split_to_max_degree(g, dp, eps, &cfg.split)?;
    let outcomes: Vec<(Vec<Option<u32>>, PartReport, Vec<StepCongestion>)> = split
        .parts
        .par_iter()
        .enumerate()
        .map(|(i, part)| run_part(g, i, part, eps, mode, cfg))
        .collect::<Result<_>>()?;
    let mut coloring = EdgeColoring::new(g.m(), delta);
    let mut offset = 0u32;
    let mut parts = Vec::new();
    let mut steps = Vec::new();
    for ((local, report, st), part) in outcomes.into_iter().zip(&split.parts) {
        for (j, &e) in part.iter().enumerate() {
            let c = local[j].ok_or(Error::UncoloredEdge(e))?;
            coloring.set(e, offset + c);
        }
        offset += report.colors_used;
        parts.push(report);
        steps.extend(st);
    }
    Ok(PipelineRun {
        coloring,
        branch: Branch::Split,
        delta_prime: dp,
        mode,
        physical_rounds: parts.iter().map(|p| p.trace.physical_rounds).max().unwrap_or(0),
        colors_used: offset,
        split: Some(split),
        parts,
        steps,
    })
}

type PartOutcome = (Vec<Option<u32>>, PartReport, Vec<StepCongestion>);

fn run_part(g: &Graph, index: usize, part: &[EdgeId], eps: f64, mode: Mode, cfg: &PipelineConfig) -> Result<PartOutcome> {
    let sub = Graph::new(g.n(), part.iter().map(|&e| g.endpoints(e)).collect())?;
    let d = sub.max_degree();
    if d == 0 {
        let widths = FieldWidths { ib: 1, tb: 1, cb: 1, vb: 1, delta: 0 };
        let report = PartReport { edges: 0, max_degree: 0, widths, colors_used: 0, trace: RoundTrace::default() };
        return Ok((Vec::new(), report, Vec::new()));
    }
    let params = Params::with_constants(d, eps, cfg.constants.clone())?;
    let ell = locality(&cfg.algorithm);
    let base = greedy_edge_coloring(&sub);
    let (schedule, cg) = match cfg.algorithm {
        Algorithm::Deterministic { .. } => {
            let (cs, cg) = conflict_schedule(&sub, &base)?;
            (cs.schedule, Some(cg))
        }
        Algorithm::Randomized { .. } => (distance_schedule(&sub, ell)?, None),
    };
    let rel = match &cg {
        Some(cg) => Relation::Conflict(cg),
        None => Relation::Distance(ell),
    };
    let ids = compress_ids(&sub, cfg.id_radius.unwrap_or(ell + 1))?;
    let widths = FieldWidths::new(&ids, schedule.classes.len(), &params);
    let envelope = envelope_bits(cfg.envelope_c, d, &widths);
    let net = Network { mode, round_cap: cfg.round_cap };
    let mut trace = RoundTrace::default();
    let mut steps = Vec::new();
    let run = execute_schedule_observed(&sub, params, &schedule, &cfg.algorithm, &rel, Some(&base), |step, edges, state| {
        let mut sources: Vec<Vec<(EdgeId, usize)>> = vec![Vec::new(); sub.n()];
        let mut max_message_bits = 0;
        for &e in edges {
            let t = state.tuple(e).ok_or(Error::MissingTuple(e))?;
            let bits = encode_tuple(&widths, &wire_tuple(&sub, &ids, e, step, t))?.bits;
            max_message_bits = max_message_bits.max(bits + TTL_BITS);
            let [a, b] = sub.endpoints(e);
            sources[a.min(b)].push((e, bits));
        }
        let flood = Flood { sources, ttl: (ell + 1) as u8 };
        let out = run_rounds(&sub, &net, &flood)?;
        steps.push(StepCongestion {
            part: index,
            step,
            edges: edges.len(),
            max_channel_bits: out.trace.max_channel_bits,
            max_message_bits,
            logical_rounds: out.trace.rounds,
            physical_rounds: out.trace.physical_rounds,
            envelope_bits: envelope,
        });
        trace.extend(&out.trace);
        Ok(())
    })?;
    let local: Vec<Option<u32>> = (0..sub.m()).map(|e| run.state.coloring().get(e)).collect();
    let colors_used = run.state.coloring().max_color();
    let report = PartReport { edges: sub.m(), max_degree: d, widths, colors_used, trace };
    Ok((local, report, steps))
}
