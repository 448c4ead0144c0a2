use anyhow::{bail, ensure, Context, Result};
use edgecolor_core::derand::{DerandConfig, TraceRow};
use edgecolor_core::distsim::{congest_pipeline, PipelineConfig, RoundTrace};
use edgecolor_core::graph::{
    generate, greedy_edge_coloring, verify_edge_coloring, EdgeColoring, Graph, InstanceKind, VerifyReport,
};
use edgecolor_core::online::{Constants, DecisionRecord, Params};
use edgecolor_core::schedule::{
    conflict_schedule, distance_schedule, execute_schedule, execute_via_nd, locality, nd_decompose, Relation,
};
use edgecolor_core::slocal::{audit_locality, run_slocal, AccessLog, Algorithm, ArrivalOrder, LocalityAudit, OrderKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const EXPERIMENT_SCHEMA: &str = "edgecolor.experiment/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Randomized,
    Deterministic,
    CongestPipeline,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Randomized => "randomized",
            AlgorithmKind::Deterministic => "deterministic",
            AlgorithmKind::CongestPipeline => "congest-pipeline",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ScheduleBuilder {
    /// One edge at a time in the arrival order.
    #[default]
    Sequential,
    /// Conflict graph classes, reduced palette.
    Conflict,
    /// Distance-ℓ classes; ℓ defaults to the algorithm's locality.
    Distance { ell: Option<usize> },
    /// Network decomposition of G^(ℓ+2).
    Nd { seed: u64 },
}

impl ScheduleBuilder {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleBuilder::Sequential => "sequential",
            ScheduleBuilder::Conflict => "conflict",
            ScheduleBuilder::Distance { .. } => "distance",
            ScheduleBuilder::Nd { .. } => "nd",
        }
    }
}

/// Either a generator with its seed or a graph file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<InstanceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceSpec {
    pub fn load(&self, base: &Path) -> Result<Graph> {
        match (&self.generator, &self.path) {
            (Some(kind), None) => Ok(generate(kind, self.seed)?),
            (None, Some(p)) => read_graph(&base.join(p)),
            _ => bail!("instance needs exactly one of `generator` and `path`"),
        }
    }

    pub fn label(&self) -> String {
        match (&self.generator, &self.path) {
            (Some(kind), _) => instance_label(kind),
            (_, Some(p)) => p.display().to_string(),
            _ => "unknown".into(),
        }
    }
}

pub fn instance_label(kind: &InstanceKind) -> String {
    match kind {
        InstanceKind::Path { n } => format!("path(n={n})"),
        InstanceKind::Cycle { n } => format!("cycle(n={n})"),
        InstanceKind::StarLb { delta, reps } => format!("star_lb(delta={delta},reps={reps})"),
        InstanceKind::RandomMaxDeg { n, delta } => format!("random(n={n},delta={delta})"),
        InstanceKind::CompleteBipartite { a, b } => format!("bipartite(a={a},b={b})"),
    }
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let s = std::fs::read_to_string(path).with_context(|| format!("reading graph {}", path.display()))?;
    Graph::from_json(&s).with_context(|| format!("parsing graph {}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub instance: InstanceSpec,
    pub algorithm: AlgorithmKind,
    pub eps: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub schedule: ScheduleBuilder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderKind>,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub derand: DerandConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub log_reads: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("malformed experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.schema == EXPERIMENT_SCHEMA, "config schema must be {EXPERIMENT_SCHEMA:?}, got {:?}", self.schema);
        ensure!(self.eps > 0.0 && self.eps < 1.0, "eps must lie in (0,1), got {}", self.eps);
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        Ok(())
    }

    pub fn core_algorithm(&self, seed: u64) -> Algorithm {
        match self.algorithm {
            AlgorithmKind::Randomized => Algorithm::Randomized { seed },
            AlgorithmKind::Deterministic | AlgorithmKind::CongestPipeline => {
                Algorithm::Deterministic { derand: self.derand.clone() }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSummary {
    pub start: f64,
    pub end: f64,
    pub max: f64,
}

impl PhiSummary {
    pub fn of(rows: &[TraceRow]) -> Option<PhiSummary> {
        let first = rows.first()?;
        let last = rows.last()?;
        let max = rows.iter().map(|r| r.phi_after.max(r.phi_before)).fold(f64::MIN, f64::max);
        Some(PhiSummary { start: first.phi_before, end: last.phi_after, max })
    }
}

pub struct Outcome {
    pub coloring: EdgeColoring,
    pub report: VerifyReport,
    pub records: Vec<DecisionRecord>,
    pub rounds: usize,
    pub max_congestion_bits: Option<usize>,
    pub phi: Option<PhiSummary>,
    pub phi_rows: Vec<TraceRow>,
    pub log: Option<AccessLog>,
    pub audit: Option<LocalityAudit>,
    pub trace: Option<RoundTrace>,
    /// Mean over vertices with edges of the fraction of marked incident edges.
    pub marked_fraction: Option<f64>,
}

/// Runs one seed and verifies the result; an improper coloring is an error.
pub fn run_once(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<Outcome> {
    ensure!(g.m() > 0, "the instance has no edges");
    let params = Params::with_constants(g.max_degree(), cfg.eps, cfg.constants.clone())?;
    let alg = cfg.core_algorithm(seed);
    let ell = locality(&alg);
    let mut out = Outcome {
        coloring: EdgeColoring::new(g.m(), g.max_degree()),
        report: VerifyReport::default(),
        records: Vec::new(),
        rounds: 0,
        max_congestion_bits: None,
        phi: None,
        phi_rows: Vec::new(),
        log: None,
        audit: None,
        trace: None,
        marked_fraction: None,
    };
    let state = match (cfg.algorithm, &cfg.schedule) {
        (AlgorithmKind::CongestPipeline, _) => {
            let pcfg = PipelineConfig { constants: cfg.constants.clone(), ..cfg.pipeline.clone() };
            let run = congest_pipeline(g, cfg.eps, &pcfg)?;
            out.rounds = run.physical_rounds;
            out.max_congestion_bits = Some(run.steps.iter().map(|s| s.max_channel_bits).max().unwrap_or(0));
            let mut trace = RoundTrace::default();
            for p in &run.parts {
                trace.extend(&p.trace);
            }
            out.trace = Some(trace);
            out.coloring = run.coloring;
            None
        }
        (_, ScheduleBuilder::Sequential) => {
            let kind = cfg.order.clone().unwrap_or(OrderKind::Id);
            let order = ArrivalOrder::new(g, &kind)?;
            let run = run_slocal(g, params, &order, &alg, ell, cfg.log_reads)?;
            if cfg.log_reads {
                let audit = audit_locality(g, &run.log, ell)?;
                ensure!(audit.violations.is_empty(), "locality audit found reads beyond radius {ell}");
                out.audit = Some(audit);
                out.log = Some(run.log.clone());
            }
            if let Some(rows) = run.trace {
                out.phi = PhiSummary::of(&rows);
                out.phi_rows = rows;
            }
            out.rounds = g.m();
            Some(run.state)
        }
        (_, ScheduleBuilder::Conflict) => {
            let (cs, cg) = conflict_schedule(g, &greedy_edge_coloring(g))?;
            out.rounds = cs.schedule.classes.len();
            Some(execute_schedule(g, params, &cs.schedule, &alg, &Relation::Conflict(&cg))?.state)
        }
        (_, ScheduleBuilder::Distance { ell: d }) => {
            let d = d.unwrap_or(ell);
            let sch = distance_schedule(g, d)?;
            out.rounds = sch.classes.len();
            Some(execute_schedule(g, params, &sch, &alg, &Relation::Distance(d))?.state)
        }
        (_, ScheduleBuilder::Nd { seed: nd_seed }) => {
            let dec = nd_decompose(g, ell, *nd_seed)?;
            let run = execute_via_nd(g, params, &dec, &alg)?;
            out.rounds = run.round_estimate;
            Some(run.state)
        }
    };
    if let Some(state) = state {
        out.coloring = state.coloring().clone();
        out.records = state.records().to_vec();
        out.marked_fraction = Some(marked_fraction(g, &out.records));
    }
    out.report = verify_edge_coloring(g, &out.coloring)?;
    if let Some(&(e, f, c)) = out.report.conflicts.first() {
        bail!("improper coloring: edges {e} and {f} share color {c}");
    }
    ensure!(out.coloring.colors.iter().all(Option::is_some), "some edge was left uncolored");
    Ok(out)
}

fn marked_fraction(g: &Graph, records: &[DecisionRecord]) -> f64 {
    let mut marked = vec![0usize; g.n()];
    for r in records.iter().filter(|r| r.marked) {
        for v in g.endpoints(r.edge) {
            marked[v] += 1;
        }
    }
    let with_edges: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) > 0).collect();
    if with_edges.is_empty() {
        return 0.0;
    }
    with_edges.iter().map(|&v| marked[v] as f64 / g.degree(v) as f64).sum::<f64>() / with_edges.len() as f64
}
