use crate::experiment::{instance_label, run_once, AlgorithmKind, ExperimentConfig, InstanceSpec, ScheduleBuilder, EXPERIMENT_SCHEMA};
use anyhow::{ensure, Context, Result};
use edgecolor_core::derand::DerandConfig;
use edgecolor_core::distsim::PipelineConfig;
use edgecolor_core::graph::{generate, InstanceKind};
use edgecolor_core::online::Constants;
use edgecolor_core::slocal::OrderKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const BENCH_SCHEMA: &str = "edgecolor.bench/1";
pub const CSV_VERSION_LINE: &str = "# edgecolor-bench v1";

/// A sweep: explicit instances plus the random_max_deg grid n × delta,
/// crossed with eps, seeds and algorithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub schema: String,
    #[serde(default)]
    pub instances: Vec<InstanceKind>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub delta: Vec<usize>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmKind>,
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
    #[serde(default)]
    pub log_reads: bool,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<BenchConfig> {
        let cfg: BenchConfig = serde_json::from_str(text).context("malformed bench config")?;
        ensure!(cfg.schema == BENCH_SCHEMA, "bench schema must be {BENCH_SCHEMA:?}, got {:?}", cfg.schema);
        ensure!(!cfg.seeds.is_empty() && !cfg.eps.is_empty() && !cfg.algorithms.is_empty(), "empty sweep axis");
        Ok(cfg)
    }

    fn instance_kinds(&self) -> Vec<InstanceKind> {
        let mut out = self.instances.clone();
        for &n in &self.n {
            for &delta in &self.delta {
                out.push(InstanceKind::RandomMaxDeg { n, delta });
            }
        }
        out
    }

    fn experiments(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for kind in self.instance_kinds() {
            for &eps in &self.eps {
                for &seed in &self.seeds {
                    for &algorithm in &self.algorithms {
                        out.push(ExperimentConfig {
                            schema: EXPERIMENT_SCHEMA.into(),
                            instance: InstanceSpec { generator: Some(kind.clone()), path: None, seed },
                            algorithm,
                            eps,
                            seeds: vec![seed],
                            schedule: self.schedule.clone(),
                            order: self.order.clone(),
                            constants: self.constants.clone(),
                            derand: self.derand.clone(),
                            pipeline: self.pipeline.clone(),
                            output_dir: None,
                            log_reads: self.log_reads,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub delta: usize,
    pub eps: f64,
    pub seed: u64,
    pub algorithm: String,
    pub schedule: String,
    pub proper: bool,
    pub colors_used: usize,
    pub main_colors_used: usize,
    pub fallback_colors_used: usize,
    pub fallback_degree_max: usize,
    pub marked_fraction: Option<f64>,
    pub rounds: usize,
    pub max_congestion_bits: Option<usize>,
    pub phi_start: Option<f64>,
    pub phi_end: Option<f64>,
    pub phi_max: Option<f64>,
}

fn run_row(cfg: &ExperimentConfig) -> Result<BenchRow> {
    let kind = cfg.instance.generator.as_ref().expect("bench instances are generated");
    let seed = cfg.seeds[0];
    let g = generate(kind, seed)?;
    let out = run_once(cfg, &g, seed).with_context(|| format!("{} seed {seed} {}", instance_label(kind), cfg.algorithm.name()))?;
    let schedule = match cfg.algorithm {
        AlgorithmKind::CongestPipeline => "pipeline",
        _ => cfg.schedule.name(),
    };
    Ok(BenchRow {
        instance: instance_label(kind),
        n: g.n(),
        m: g.m(),
        delta: g.max_degree(),
        eps: cfg.eps,
        seed,
        algorithm: cfg.algorithm.name().into(),
        schedule: schedule.into(),
        proper: out.report.proper,
        colors_used: out.report.colors_used,
        main_colors_used: out.report.main_colors_used,
        fallback_colors_used: out.report.fallback_colors_used,
        fallback_degree_max: out.report.max_fallback_degree,
        marked_fraction: out.marked_fraction,
        rounds: out.rounds,
        max_congestion_bits: out.max_congestion_bits,
        phi_start: out.phi.map(|p| p.start),
        phi_end: out.phi.map(|p| p.end),
        phi_max: out.phi.map(|p| p.max),
    })
}

/// Runs the sweep in parallel; rows come back in sweep order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.experiments().par_iter().map(run_row).collect()
}

pub fn write_csv(rows: &[BenchRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{CSV_VERSION_LINE}")?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}
