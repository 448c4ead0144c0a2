mod bench;
mod experiment;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use edgecolor_core::distsim::{degree_split, split_to_max_degree, Mode, SplitConfig};
use edgecolor_core::graph::{generate, greedy_edge_coloring, verify_edge_coloring, Color, EdgeColoring, Graph, InstanceKind};
use edgecolor_core::schedule::{
    check_classes, conflict_schedule, distance_schedule, locality, nd_decompose, validate_decomposition, Relation,
};
use edgecolor_core::slocal::{audit_locality, AccessLog, Algorithm, OrderKind};
use experiment::{read_graph, run_once, AlgorithmKind, ExperimentConfig, InstanceSpec, Outcome, ScheduleBuilder};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const COLORING_SCHEMA: &str = "edgecolor.coloring/1";

#[derive(Parser)]
#[command(name = "edgecolor", version, about = "Online and distributed edge coloring experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated instance as graph JSON.
    Generate(GenerateArgs),
    /// Run an algorithm, verify the coloring and write its records.
    Run(RunArgs),
    /// Build and validate a parallel schedule.
    Schedule(ScheduleArgs),
    /// Degree splitting.
    Split(SplitArgs),
    /// Check a coloring against a graph.
    Verify(VerifyArgs),
    /// Sweep a bench config and write CSV.
    Bench(BenchArgs),
    /// Replay an access log and check read distances.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Path,
    Cycle,
    StarLb,
    Random,
    Bipartite,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Local,
    Congest,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Id,
    Reverse,
    Adversarial,
    Random,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph JSON, used when no config is given.
    #[arg(long, conflicts_with = "config")]
    graph: Option<PathBuf>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmKind>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    bandwidth_bits: Option<usize>,
    #[arg(long)]
    round_cap: Option<usize>,
    #[arg(long)]
    log_reads: bool,
    #[arg(long, env = "EDGECOLOR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuilderArg {
    Conflict,
    Distance,
    Nd,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    builder: BuilderArg,
    /// Locality the schedule must respect; defaults to that of --algorithm.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, value_enum, default_value = "deterministic")]
    algorithm: AlgorithmKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Split repeatedly until the part degrees reach this target.
    #[arg(long, conflicts_with = "eta")]
    target: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// One split with this η.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    /// JSON with a "colors" array, one entry per edge.
    #[arg(long)]
    coloring: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV file; defaults to bench.csv in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "EDGECOLOR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    graph: PathBuf,
    /// access_log.jsonl written by `run --log-reads`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    ell: usize,
}

#[derive(Serialize, Deserialize)]
struct ColoringFile {
    schema: String,
    #[serde(default)]
    delta: Option<usize>,
    colors: Vec<Option<Color>>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Schedule(a) => cmd_schedule(a),
        Cmd::Split(a) => cmd_split(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Audit(a) => cmd_audit(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
}

fn need(v: Option<usize>, name: &str) -> Result<usize> {
    v.with_context(|| format!("--{name} is required for this family"))
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let kind = match a.family {
        Family::Path => InstanceKind::Path { n: need(a.n, "n")? },
        Family::Cycle => InstanceKind::Cycle { n: need(a.n, "n")? },
        Family::StarLb => InstanceKind::StarLb { delta: need(a.delta, "delta")?, reps: a.reps },
        Family::Random => InstanceKind::RandomMaxDeg { n: need(a.n, "n")?, delta: need(a.delta, "delta")? },
        Family::Bipartite => InstanceKind::CompleteBipartite { a: need(a.a, "a")?, b: need(a.b, "b")? },
    };
    let g = generate(&kind, a.seed)?;
    emit(a.out.as_deref(), &g.to_json()?)
}

fn run_config(a: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let (mut cfg, base) = match (&a.config, &a.graph) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (ExperimentConfig::parse(&text)?, base)
        }
        (None, Some(g)) => {
            let cfg = ExperimentConfig {
                schema: experiment::EXPERIMENT_SCHEMA.into(),
                instance: InstanceSpec { generator: None, path: Some(g.clone()), seed: 0 },
                algorithm: a.algorithm.context("--algorithm is required without --config")?,
                eps: a.eps.unwrap_or(0.5),
                seeds: vec![0],
                schedule: ScheduleBuilder::Sequential,
                order: None,
                constants: Default::default(),
                derand: Default::default(),
                pipeline: Default::default(),
                output_dir: None,
                log_reads: false,
            };
            (cfg, PathBuf::new())
        }
        (None, None) => bail!("give --config or --graph"),
    };
    if let Some(alg) = a.algorithm {
        cfg.algorithm = alg;
    }
    if let Some(eps) = a.eps {
        cfg.eps = eps;
    }
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(o) = a.order {
        cfg.order = Some(match o {
            OrderArg::Id => OrderKind::Id,
            OrderArg::Reverse => OrderKind::Reverse,
            OrderArg::Adversarial => OrderKind::Adversarial,
            OrderArg::Random => OrderKind::Random { seed: cfg.seeds[0] },
        });
    }
    match (a.mode, a.bandwidth_bits) {
        (Some(ModeArg::Local), Some(_)) => bail!("--bandwidth-bits needs --mode congest"),
        (Some(ModeArg::Local), None) => cfg.pipeline.mode = Some(Mode::Local),
        (_, Some(b)) => cfg.pipeline.mode = Some(Mode::Congest { bandwidth: b }),
        (Some(ModeArg::Congest), None) => cfg.pipeline.mode = None,
        (None, None) => {}
    }
    if let Some(cap) = a.round_cap {
        cfg.pipeline.round_cap = cap;
    }
    cfg.log_reads |= a.log_reads;
    cfg.validate()?;
    Ok((cfg, base))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let (cfg, base) = run_config(&a)?;
    let g = cfg.instance.load(&base)?;
    let root = cfg.output_dir.clone().unwrap_or_else(|| a.out_dir.clone());
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    write_file(&root.join("config.json"), serde_json::to_string_pretty(&cfg)?.as_bytes())?;
    for &seed in &cfg.seeds {
        let out = run_once(&cfg, &g, seed)?;
        let dir = if cfg.seeds.len() > 1 { root.join(format!("seed-{seed}")) } else { root.clone() };
        write_outputs(&dir, &cfg, &g, seed, &out)?;
        let summary = serde_json::json!({
            "seed": seed,
            "proper": out.report.proper,
            "colors_used": out.report.colors_used,
            "fallback_degree_max": out.report.max_fallback_degree,
            "rounds": out.rounds,
            "dir": dir.display().to_string(),
        });
        println!("{summary}");
    }
    Ok(())
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, g: &Graph, seed: u64, out: &Outcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let cf = ColoringFile {
        schema: COLORING_SCHEMA.into(),
        delta: Some(out.coloring.delta),
        colors: out.coloring.colors.clone(),
    };
    write_file(&dir.join("coloring.json"), serde_json::to_string(&cf)?.as_bytes())?;

    let mut w = BufWriter::new(fs::File::create(dir.join("decisions.jsonl"))?);
    for r in &out.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    if let Some(log) = &out.log {
        let mut w = BufWriter::new(fs::File::create(dir.join("access_log.jsonl"))?);
        log.write_jsonl(&mut w)?;
        w.flush()?;
    }
    if !out.phi_rows.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("phi_trace.csv"))?;
        for r in &out.phi_rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    if let Some(trace) = &out.trace {
        let mut w = csv::Writer::from_path(dir.join("rounds.csv"))?;
        w.write_record(["round", "max_bits", "total_msgs"])?;
        for (i, r) in trace.per_round.iter().enumerate() {
            w.write_record([i.to_string(), r.max_bits.to_string(), r.messages.to_string()])?;
        }
        w.flush()?;
    }
    let summary = serde_json::json!({
        "schema": "edgecolor.summary/1",
        "instance": cfg.instance.label(),
        "n": g.n(),
        "m": g.m(),
        "delta": g.max_degree(),
        "algorithm": cfg.algorithm.name(),
        "seed": seed,
        "report": out.report,
        "rounds": out.rounds,
        "max_congestion_bits": out.max_congestion_bits,
        "marked_fraction": out.marked_fraction,
        "phi": out.phi,
        "locality": out.audit.as_ref().map(|a| serde_json::json!({ "max_radius": a.max_radius, "histogram": a.histogram })),
    });
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())
}

fn cmd_schedule(a: ScheduleArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let alg = match a.algorithm {
        AlgorithmKind::Randomized => Algorithm::Randomized { seed: a.seed },
        _ => Algorithm::Deterministic { derand: Default::default() },
    };
    let ell = a.ell.unwrap_or_else(|| locality(&alg));
    let json = match a.builder {
        BuilderArg::Conflict => {
            let (cs, cg) = conflict_schedule(&g, &greedy_edge_coloring(&g))?;
            check_classes(&g, &cs.schedule, &Relation::Conflict(&cg))?;
            serde_json::to_value(&cs)?
        }
        BuilderArg::Distance => {
            let s = distance_schedule(&g, ell)?;
            check_classes(&g, &s, &Relation::Distance(ell))?;
            serde_json::to_value(&s)?
        }
        BuilderArg::Nd => {
            let dec = nd_decompose(&g, ell, a.seed)?;
            validate_decomposition(&g, &dec)?;
            serde_json::to_value(&dec)?
        }
    };
    let doc = serde_json::json!({ "schema": "edgecolor.schedule/1", "ell": ell, "schedule": json });
    emit(a.out.as_deref(), &serde_json::to_string(&doc)?)
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let cfg = SplitConfig { max_depth: a.max_depth, ..SplitConfig::default() };
    let json = match (a.target, a.eta) {
        (Some(t), None) => serde_json::to_value(split_to_max_degree(&g, t, a.eps, &cfg)?)?,
        (None, Some(eta)) => serde_json::to_value(degree_split(&g, eta, &cfg)?)?,
        _ => bail!("give exactly one of --target and --eta"),
    };
    let doc = serde_json::json!({ "schema": "edgecolor.split/1", "result": json });
    emit(a.out.as_deref(), &serde_json::to_string(&doc)?)
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let text = fs::read_to_string(&a.coloring).with_context(|| format!("reading {}", a.coloring.display()))?;
    let cf: ColoringFile = serde_json::from_str(&text).context("malformed coloring file")?;
    ensure!(cf.colors.len() == g.m(), "coloring has {} entries, graph has {} edges", cf.colors.len(), g.m());
    let col = EdgeColoring { colors: cf.colors, delta: cf.delta.unwrap_or_else(|| g.max_degree()) };
    if let Some(e) = col.colors.iter().position(Option::is_none) {
        bail!("edge {e} is uncolored");
    }
    let rep = verify_edge_coloring(&g, &col)?;
    if let Some(&(e, f, c)) = rep.conflicts.first() {
        bail!("conflict: edges {e} and {f} share color {c} ({} conflicting pairs)", rep.conflicts.len());
    }
    println!("{}", serde_json::to_string(&rep)?);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = bench::BenchConfig::parse(&text)?;
    let rows = bench::run_bench(&cfg)?;
    let path = a.out.unwrap_or_else(|| a.out_dir.join("bench.csv"));
    let mut buf = Vec::new();
    bench::write_csv(&rows, &mut buf)?;
    write_file(&path, &buf)?;
    eprintln!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let text = fs::read_to_string(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let log = AccessLog::read_jsonl(&text)?;
    let audit = audit_locality(&g, &log, a.ell)?;
    println!("{}", serde_json::to_string(&audit)?);
    if let Some(&(e, f)) = audit.violations.first() {
        bail!("read of edge {f} while deciding edge {e} exceeds radius {} ({} violations)", a.ell, audit.violations.len());
    }
    Ok(())
}
