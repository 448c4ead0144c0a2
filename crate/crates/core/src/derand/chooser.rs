use super::PotentialState;
use crate::error::{Error, Result};
use crate::graph::{Color, EdgeId, Graph};
use crate::numeric::Dd;
use crate::online::{Chooser, ColoringState, Decision, EntryKind, Outcome, RoundingChoice, Transition};
use serde::{Deserialize, Serialize};

/// Deltas within this absolute distance of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub decision: Decision,
    pub delta: Dd,
    /// Every feasible outcome with its Φ change, colors ascending then ⊥.
    pub candidates: Vec<(Outcome, Dd)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub edge: EdgeId,
    pub line: String,
    pub color: Option<Color>,
    pub phi_before: f64,
    pub phi_after: f64,
    pub delta: f64,
    pub few_bad_colors: f64,
    pub few_bad_neighbors: f64,
    pub bad_vertex_prop: f64,
}

/// Applies the rounding preferences to a round-down plan.
fn with_rounding(mut tr: Transition, prefs: &[(EdgeId, u128)]) -> Transition {
    for up in tr.updates.iter_mut() {
        let mask = prefs.iter().find(|(f, _)| *f == up.f).map_or(0, |x| x.1);
        for x in up.entries.iter_mut() {
            if let EntryKind::Scaled { rem, den, up: false } = x.kind {
                if rem > 0 && mask >> (x.c - 1) & 1 == 1 {
                    x.new += 1;
                    x.kind = EntryKind::Scaled { rem, den, up: true };
                }
            }
        }
    }
    tr
}

impl PotentialState {
    /// Φ change of every feasible outcome for a sample-path arrival.
    pub fn candidates(&self, g: &Graph, state: &ColoringState, e: EdgeId) -> Result<Vec<(Outcome, Dd, Decision)>> {
        let p_e = state.p(e);
        let den = state.den();
        let prefs = self.rounding_preferences(g, state, e);
        let mut outcomes: Vec<Outcome> = (0..p_e.len())
            .filter(|&i| p_e[i] > 0)
            .map(|i| Outcome::Color(i as Color + 1))
            .collect();
        if p_e.iter().sum::<u128>() < den {
            outcomes.push(Outcome::Bot);
        }
        let mut out = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let floor = ColoringState::outcome_decision(e, o, RoundingChoice::Floor);
            let tr = with_rounding(state.plan(g, &floor)?, &prefs);
            let delta = self.evaluate(g, &tr)?.delta;
            let decision = ColoringState::outcome_decision(e, o, RoundingChoice::Explicit(tr.round_ups()));
            out.push((o, delta, decision));
        }
        Ok(out)
    }

    /// The outcome minimizing the Φ change, lowest color then ⊥ on ties.
    pub fn choose(&self, g: &Graph, state: &ColoringState, e: EdgeId) -> Result<Choice> {
        let cands = self.candidates(g, state, e)?;
        let tol = Dd::from_f64(TIE_TOLERANCE);
        let min = cands
            .iter()
            .map(|c| c.1)
            .reduce(|a, b| if b < a { b } else { a })
            .ok_or_else(|| Error::Infeasible(format!("no feasible outcome at edge {e}")))?;
        if min > tol {
            let dump = serde_json::json!({
                "edge": e,
                "t": state.clock(),
                "phi": self.total().to_f64(),
                "p_e": state.p(e).iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "candidates": cands.iter().map(|c| (format!("{:?}", c.0), c.1.to_string())).collect::<Vec<_>>(),
            });
            return Err(Error::EstimatorBreach { edge: e, dump: dump.to_string() });
        }
        let (_, delta, decision) = cands.iter().find(|c| c.1 <= min + tol).cloned().expect("minimum exists");
        Ok(Choice {
            decision,
            delta,
            candidates: cands.into_iter().map(|c| (c.0, c.1)).collect(),
        })
    }
}

/// Deterministic chooser: argmin of the potential change, kept in sync with
/// every transition through `observe`.
pub struct ArgminChooser {
    pub pot: PotentialState,
    /// Per-arrival Φ trace, when enabled.
    pub trace: Option<Vec<TraceRow>>,
    pub last: Option<Choice>,
}

impl ArgminChooser {
    pub fn new(pot: PotentialState, trace: bool) -> ArgminChooser {
        ArgminChooser { pot, trace: trace.then(Vec::new), last: None }
    }
}

impl Chooser for ArgminChooser {
    fn choose(&mut self, g: &Graph, state: &ColoringState, e: EdgeId) -> Result<Decision> {
        let c = self.pot.choose(g, state, e)?;
        let d = c.decision.clone();
        self.last = Some(c);
        Ok(d)
    }

    fn observe(&mut self, g: &Graph, state: &ColoringState, tr: &Transition) -> Result<()> {
        let eff = self.pot.evaluate(g, tr)?;
        let before = self.pot.total();
        let delta = eff.delta;
        self.pot.apply(eff);
        if let Some(rows) = self.trace.as_mut() {
            let f = self.pot.by_family();
            rows.push(TraceRow {
                t: state.clock() + 1,
                edge: tr.edge,
                line: tr.line.name().to_string(),
                color: tr.main_color,
                phi_before: before.to_f64(),
                phi_after: self.pot.total().to_f64(),
                delta: delta.to_f64(),
                few_bad_colors: f[0].to_f64(),
                few_bad_neighbors: f[1].to_f64(),
                bad_vertex_prop: f[2].to_f64(),
            });
        }
        Ok(())
    }
}
