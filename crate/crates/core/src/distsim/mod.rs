//! Synchronous message passing with LOCAL/CONGEST bandwidth accounting,
//! identifier compression, sinkless orientation and degree splitting.

mod ids;
mod pipeline;
mod split;

pub use ids::{compress_ids, IdMap};
pub use pipeline::{
    congest_pipeline, decode_tuple, delta_prime, encode_tuple, envelope_bits, Branch, Encoded, FieldWidths,
    PartReport, PipelineConfig, PipelineRun, StepCongestion, WireTuple,
};
pub use split::{
    degree_split, discrepancy, euler_circuits, sinkless_orientation, split_to_max_degree, split_bound, Orientation, SplitAssignment,
    SplitConfig, SplitResult,
};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    Local,
    Congest { bandwidth: usize },
}

pub trait Message: Clone + Send + Sync {
    fn bits(&self) -> usize;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope<M> {
    pub from: VertexId,
    pub edge: EdgeId,
    pub msg: M,
}

/// A node's behavior. Nodes step when they are not halted or have mail.
pub trait NodeProgram: Sync {
    type State: Send + Sync;
    type Msg: Message;

    fn init(&self, g: &Graph, v: VertexId) -> (Self::State, Vec<(EdgeId, Self::Msg)>);

    fn step(
        &self,
        g: &Graph,
        v: VertexId,
        round: usize,
        state: &mut Self::State,
        inbox: &[Envelope<Self::Msg>],
    ) -> Vec<(EdgeId, Self::Msg)>;

    fn halted(&self, state: &Self::State) -> bool;
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStat {
    pub round: usize,
    /// Largest number of bits on one directed channel in this round.
    pub max_bits: usize,
    pub messages: usize,
    /// Physical rounds this logical round costs.
    pub physical: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub rounds: usize,
    pub physical_rounds: usize,
    pub per_round: Vec<RoundStat>,
    pub total_messages: usize,
    pub total_bits: usize,
    /// Largest total over the run of bits on one directed channel.
    pub max_channel_bits: usize,
    /// Per round and channel bit loads, bucketed by load.
    pub congestion_histogram: BTreeMap<usize, usize>,
}

impl RoundTrace {
    /// Concatenates `other` after `self`.
    pub fn extend(&mut self, other: &RoundTrace) {
        for r in &other.per_round {
            self.per_round.push(RoundStat { round: self.rounds + r.round, ..r.clone() });
        }
        self.rounds += other.rounds;
        self.physical_rounds += other.physical_rounds;
        self.total_messages += other.total_messages;
        self.total_bits += other.total_bits;
        self.max_channel_bits = self.max_channel_bits.max(other.max_channel_bits);
        for (&k, &v) in &other.congestion_histogram {
            *self.congestion_histogram.entry(k).or_default() += v;
        }
    }
}

/// Physical rounds for one logical round with the given largest channel load.
pub fn physical_rounds(mode: Mode, max_bits: usize) -> usize {
    match mode {
        Mode::Local => 1,
        Mode::Congest { bandwidth } => max_bits.div_ceil(bandwidth).max(1),
    }
}

/// Default CONGEST bandwidth, max(16, 4⌈log₂ n⌉) bits.
pub fn default_bandwidth(n: usize) -> usize {
    let log = (usize::BITS - n.max(1).saturating_sub(1).leading_zeros()) as usize;
    16.max(4 * log)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub mode: Mode,
    pub round_cap: usize,
}

impl Network {
    pub fn local() -> Network {
        Network { mode: Mode::Local, round_cap: 10_000 }
    }

    pub fn congest(bandwidth: usize) -> Network {
        Network { mode: Mode::Congest { bandwidth }, round_cap: 10_000 }
    }
}

pub struct RoundsOutput<S> {
    pub states: Vec<S>,
    pub trace: RoundTrace,
}

/// Runs the program in lockstep until every node has halted and no message
/// is in flight. Rounds that carry no message are not counted.
pub fn run_rounds<P: NodeProgram>(g: &Graph, net: &Network, prog: &P) -> Result<RoundsOutput<P::State>> {
    if let Mode::Congest { bandwidth: 0 } = net.mode {
        return Err(Error::InvalidParams("bandwidth must be positive".into()));
    }
    let n = g.n();
    let (mut states, mut outboxes): (Vec<P::State>, Vec<Vec<(EdgeId, P::Msg)>>) =
        (0..n).into_par_iter().map(|v| prog.init(g, v)).unzip();
    let mut trace = RoundTrace::default();
    let mut totals: std::collections::HashMap<(EdgeId, VertexId), usize> = std::collections::HashMap::new();
    let mut iterations = 0;
    loop {
        let mut inbox: Vec<Vec<Envelope<P::Msg>>> = Vec::new();
        let mut load: BTreeMap<(EdgeId, VertexId), usize> = BTreeMap::new();
        let mut messages = 0;
        for (v, out) in outboxes.iter_mut().enumerate() {
            for (e, msg) in out.drain(..) {
                g.check_edge(e)?;
                let [a, b] = g.endpoints(e);
                if a != v && b != v {
                    return Err(Error::InvalidParams(format!("node {v} sent on edge {e} it is not incident to")));
                }
                if inbox.is_empty() {
                    inbox = (0..n).map(|_| Vec::new()).collect();
                }
                *load.entry((e, v)).or_default() += msg.bits();
                messages += 1;
                inbox[g.other(e, v)].push(Envelope { from: v, edge: e, msg });
            }
        }
        let any_mail = messages > 0;
        if !any_mail && states.iter().all(|s| prog.halted(s)) {
            break;
        }
        iterations += 1;
        if iterations > net.round_cap {
            return Err(Error::RoundCap { cap: net.round_cap, rounds: trace.rounds });
        }
        if any_mail {
            trace.rounds += 1;
            let max_bits = load.values().copied().max().unwrap_or(0);
            let physical = physical_rounds(net.mode, max_bits);
            let bits: usize = load.values().sum();
            for &l in load.values() {
                *trace.congestion_histogram.entry(l).or_default() += 1;
            }
            trace.physical_rounds += physical;
            trace.total_messages += messages;
            trace.total_bits += bits;
            trace.per_round.push(RoundStat { round: trace.rounds, max_bits, messages, physical });
            for (k, l) in load {
                *totals.entry(k).or_default() += l;
            }
        }
        let round = trace.rounds;
        let empty: Vec<Envelope<P::Msg>> = Vec::new();
        outboxes = states
            .par_iter_mut()
            .enumerate()
            .map(|(v, s)| {
                let mail = inbox.get(v).unwrap_or(&empty);
                if mail.is_empty() && prog.halted(s) {
                    Vec::new()
                } else {
                    prog.step(g, v, round, s, mail)
                }
            })
            .collect();
    }
    trace.max_channel_bits = totals.values().copied().max().unwrap_or(0);
    Ok(RoundsOutput { states, trace })
}
