//! Schedules for running the sequential local algorithm in parallel classes.

mod nd;

pub use nd::{execute_via_nd, nd_decompose, validate_decomposition, Decomposition, NdRun};

use crate::error::{Error, Result};
use crate::graph::{verify_edge_coloring, Color, EdgeColoring, EdgeId, Graph, LineBfs};
use crate::online::{ColoringState, Params};
use crate::slocal::{Algorithm, Engine};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Named conflict degree bound 2Δ⁴ + 8Δ³, checked on every tested instance.
/// 2Δ⁴ follows the same-matching count (2Δ choices for a, Δ for b, Δ for c,
/// one for d, Δ for f); 8Δ³ is slack for the distance-3 rule.
pub fn conflict_degree_bound(delta: usize) -> usize {
    2 * delta.pow(4) + 8 * delta.pow(3)
}

/// Locality of each algorithm in the edge-arrival model.
pub fn locality(alg: &Algorithm) -> usize {
    match alg {
        Algorithm::Randomized { .. } => 1,
        Algorithm::Deterministic { .. } => 5,
    }
}

/// Pairs of edges that may not share a class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictGraph {
    adj: Vec<Vec<EdgeId>>,
}

impl ConflictGraph {
    pub fn from_adjacency(adj: Vec<Vec<EdgeId>>) -> ConflictGraph {
        ConflictGraph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, e: EdgeId) -> &[EdgeId] {
        &self.adj[e]
    }

    pub fn degree(&self, e: EdgeId) -> usize {
        self.adj[e].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn conflicts(&self, e: EdgeId, f: EdgeId) -> bool {
        self.adj[e].binary_search(&f).is_ok()
    }
}

fn check_base(g: &Graph, base: &EdgeColoring) -> Result<()> {
    let rep = verify_edge_coloring(g, base)?;
    if let Some(&(e, f, c)) = rep.conflicts.first() {
        return Err(Error::ImproperColoring(e, f, c));
    }
    let limit = 2 * g.max_degree().max(1);
    if base.max_color() as usize > limit {
        return Err(Error::InvalidParams(format!(
            "base coloring uses color {} above 2Δ = {limit}",
            base.max_color()
        )));
    }
    Ok(())
}

/// e and f conflict when their line distance is at most 3, or when some a
/// within distance 1 of e and d within distance 1 of f share a base color
/// and lie within distance 3 of each other (one matching reaching both).
pub fn build_conflict_graph(g: &Graph, base: &EdgeColoring) -> Result<ConflictGraph> {
    check_base(g, base)?;
    let m = g.m();
    let color = |e: EdgeId| base.colors[e].expect("checked total");
    let mut bfs = LineBfs::new(g);
    let mut partners: Vec<Vec<EdgeId>> = Vec::with_capacity(m);
    let mut near1: Vec<Vec<EdgeId>> = Vec::with_capacity(m);
    for a in 0..m {
        let ca = color(a);
        partners.push(bfs.run(g, a, 3).iter().copied().filter(|&d| d != a && color(d) == ca).collect());
        near1.push(bfs.run(g, a, 1).to_vec());
    }
    let mut stamp = vec![usize::MAX; m];
    let mut adj = Vec::with_capacity(m);
    for e in 0..m {
        let mut out: Vec<EdgeId> = Vec::new();
        stamp[e] = e;
        for &f in bfs.run(g, e, 3) {
            if stamp[f] != e {
                stamp[f] = e;
                out.push(f);
            }
        }
        for &a in &near1[e] {
            for &d in &partners[a] {
                for &f in &near1[d] {
                    if stamp[f] != e {
                        stamp[f] = e;
                        out.push(f);
                    }
                }
            }
        }
        out.sort_unstable();
        adj.push(out);
    }
    Ok(ConflictGraph { adj })
}

/// Greedy coloring of the ℓ-th power of the line graph in id order.
pub fn distance_l_edge_coloring(g: &Graph, ell: usize) -> Result<EdgeColoring> {
    if ell == 0 {
        return Err(Error::InvalidParams("distance must be at least 1".into()));
    }
    let mut col = EdgeColoring::new(g.m(), g.max_degree());
    let mut bfs = LineBfs::new(g);
    let mut used: Vec<Color> = Vec::new();
    for e in 0..g.m() {
        used.clear();
        used.extend(bfs.run(g, e, ell).iter().filter_map(|&f| col.colors[f]));
        used.sort_unstable();
        used.dedup();
        let mut c = 1;
        for &u in &used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        col.set(e, c);
    }
    Ok(col)
}

/// First pair of distinct edges within distance ℓ sharing a color.
pub fn distance_coloring_violation(g: &Graph, col: &EdgeColoring, ell: usize) -> Option<(EdgeId, EdgeId)> {
    let mut bfs = LineBfs::new(g);
    for e in 0..g.m() {
        let ce = col.get(e);
        if let Some(&f) = bfs.run(g, e, ell).iter().find(|&&f| f != e && col.get(f) == ce) {
            return Some((e, f));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteReduction {
    pub colors: Vec<Color>,
    /// One target color is tried per round.
    pub rounds: usize,
}

/// Round r tries color r at every uncolored node with no neighbor holding r;
/// tryers adopt in order of their initial color unless a neighbor adopted r
/// earlier in the same round. Uses at most maxdeg + 1 colors.
pub fn reduce_palette(cg: &ConflictGraph, initial: &[Color]) -> Result<PaletteReduction> {
    let n = cg.len();
    if initial.len() != n {
        return Err(Error::InvalidParams("initial coloring length differs from the conflict graph".into()));
    }
    for e in 0..n {
        if let Some(&f) = cg.neighbors(e).iter().find(|&&f| initial[f] == initial[e]) {
            return Err(Error::ImproperColoring(e, f, initial[e]));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&e| (initial[e], e));
    let mut colors: Vec<Color> = vec![0; n];
    let mut left = n;
    let mut rounds = 0;
    while left > 0 {
        rounds += 1;
        let r = rounds as Color;
        for &e in &order {
            if colors[e] == 0 && cg.neighbors(e).iter().all(|&f| colors[f] != r) {
                colors[e] = r;
                left -= 1;
            }
        }
    }
    Ok(PaletteReduction { colors, rounds: rounds.max(1) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub classes: Vec<Vec<EdgeId>>,
    /// "conflict", "distance-l" or "nd".
    pub builder: String,
    pub params: serde_json::Value,
}

impl Schedule {
    /// Classes from a coloring, by ascending color with edges in id order.
    pub fn from_colors(colors: &[Color], builder: &str, params: serde_json::Value) -> Schedule {
        let k = colors.iter().copied().max().unwrap_or(0) as usize;
        let mut classes = vec![Vec::new(); k];
        for (e, &c) in colors.iter().enumerate() {
            classes[c as usize - 1].push(e);
        }
        classes.retain(|c| !c.is_empty());
        Schedule { classes, builder: builder.into(), params }
    }

    pub fn singletons(order: &[EdgeId]) -> Schedule {
        Schedule {
            classes: order.iter().map(|&e| vec![e]).collect(),
            builder: "singletons".into(),
            params: serde_json::Value::Null,
        }
    }

    /// The induced sequential order: class by class, edge id within a class.
    pub fn induced_order(&self) -> Vec<EdgeId> {
        self.classes
            .iter()
            .flat_map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect()
    }

    pub fn check_partition(&self, m: usize) -> Result<()> {
        crate::graph::check_permutation(&self.induced_order(), m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictSchedule {
    pub schedule: Schedule,
    pub conflict_max_degree: usize,
    pub initial_colors: usize,
    pub palette_rounds: usize,
}

/// Conflict graph, a distance-5 initial coloring, then palette reduction.
pub fn conflict_schedule(g: &Graph, base: &EdgeColoring) -> Result<(ConflictSchedule, ConflictGraph)> {
    let cg = build_conflict_graph(g, base)?;
    let init = distance_l_edge_coloring(g, 5)?;
    let initial: Vec<Color> = init.colors.iter().map(|c| c.expect("total")).collect();
    let red = reduce_palette(&cg, &initial)?;
    let schedule = Schedule::from_colors(
        &red.colors,
        "conflict",
        serde_json::json!({ "conflict_max_degree": cg.max_degree(), "initial_colors": init.max_color() }),
    );
    let cs = ConflictSchedule {
        schedule,
        conflict_max_degree: cg.max_degree(),
        initial_colors: init.max_color() as usize,
        palette_rounds: red.rounds,
    };
    Ok((cs, cg))
}

/// Classes of a greedy distance-ℓ coloring.
pub fn distance_schedule(g: &Graph, ell: usize) -> Result<Schedule> {
    let col = distance_l_edge_coloring(g, ell)?;
    let colors: Vec<Color> = col.colors.iter().map(|c| c.expect("total")).collect();
    Ok(Schedule::from_colors(&colors, "distance-l", serde_json::json!({ "ell": ell })))
}

/// The relation a schedule's classes must be independent in.
pub enum Relation<'a> {
    Conflict(&'a ConflictGraph),
    Distance(usize),
}

pub fn check_classes(g: &Graph, schedule: &Schedule, rel: &Relation) -> Result<()> {
    schedule.check_partition(g.m())?;
    let mut bfs = LineBfs::new(g);
    for (i, class) in schedule.classes.iter().enumerate() {
        let mut sorted = class.clone();
        sorted.sort_unstable();
        for &e in &sorted {
            let bad = match rel {
                Relation::Conflict(cg) => cg.neighbors(e).iter().copied().find(|f| sorted.binary_search(f).is_ok()),
                Relation::Distance(ell) => bfs
                    .run(g, e, *ell)
                    .iter()
                    .copied()
                    .find(|&f| f != e && sorted.binary_search(&f).is_ok()),
            };
            if let Some(f) = bad {
                return Err(Error::ConflictInClass { class: i, e, f });
            }
        }
    }
    Ok(())
}

pub struct ScheduleRun {
    pub state: ColoringState,
    pub classes: usize,
}

/// Runs class by class: every edge of a class decides against the state
/// left by earlier classes (in parallel), then commits in edge-id order.
pub fn execute_schedule(
    g: &Graph,
    params: Params,
    schedule: &Schedule,
    alg: &Algorithm,
    rel: &Relation,
) -> Result<ScheduleRun> {
    execute_schedule_with(g, params, schedule, alg, rel, None, |c| c)
}

/// As `execute_schedule`, with an optional base coloring for the
/// deterministic potentials and a hook permuting each class's commit order.
pub fn execute_schedule_with(
    g: &Graph,
    params: Params,
    schedule: &Schedule,
    alg: &Algorithm,
    rel: &Relation,
    base: Option<&EdgeColoring>,
    commit_order: impl Fn(Vec<EdgeId>) -> Vec<EdgeId>,
) -> Result<ScheduleRun> {
    run_classes(g, params, schedule, alg, rel, base, commit_order, |_, _, _| Ok(()))
}

/// As [`execute_schedule`], calling `observe(class, edges, state)` after
/// each class has been committed.
pub fn execute_schedule_observed(
    g: &Graph,
    params: Params,
    schedule: &Schedule,
    alg: &Algorithm,
    rel: &Relation,
    base: Option<&EdgeColoring>,
    observe: impl FnMut(usize, &[EdgeId], &ColoringState) -> Result<()>,
) -> Result<ScheduleRun> {
    run_classes(g, params, schedule, alg, rel, base, |c| c, observe)
}

#[allow(clippy::too_many_arguments)]
fn run_classes(
    g: &Graph,
    params: Params,
    schedule: &Schedule,
    alg: &Algorithm,
    rel: &Relation,
    base: Option<&EdgeColoring>,
    commit_order: impl Fn(Vec<EdgeId>) -> Vec<EdgeId>,
    mut observe: impl FnMut(usize, &[EdgeId], &ColoringState) -> Result<()>,
) -> Result<ScheduleRun> {
    check_classes(g, schedule, rel)?;
    let mut eng = Engine::with_base(g, params, alg, locality(alg), false, base)?;
    for (ci, class) in schedule.classes.iter().enumerate() {
        let mut sorted = class.clone();
        sorted.sort_unstable();
        let eng_ref = &eng;
        let steps: Vec<_> = sorted.par_iter().map(|&e| eng_ref.decide(e)).collect::<Result<_>>()?;
        let mut slots: Vec<Option<_>> = steps.into_iter().map(Some).collect();
        let order = commit_order(sorted.clone());
        for e in order {
            let i = sorted.binary_search(&e).expect("permutation of the class");
            let step = slots[i].take().expect("each edge committed once");
            eng.commit(step)?;
        }
        observe(ci, &sorted, &eng.state)?;
    }
    Ok(ScheduleRun { classes: schedule.classes.len(), state: eng.finish().state })
}
