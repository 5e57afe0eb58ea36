//! `trank` command line: every command prints JSON lines on stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use trank_core::approx::Resolution;
use trank_core::model::MassMode;
use trank_core::storage::{IndexHeader, MAGIC};
use trank_core::{Aggregate, Dataset, IoStats, QuerySpec, TopKQuery};

use crate::eval::bench::bench_one;
use crate::eval::{quality, QualitySummary, SynthProfile, ValueModel, Workload};
use crate::format::{load_dataset, read_csv, save_dataset};
use crate::index::{build_file, open_file, BuildParams, MethodTag};
use crate::FileStore;

#[derive(Debug, Parser)]
#[command(name = "trank", version, about = "Aggregate top-k queries over piecewise-linear time series")]
pub struct Cli {
    /// Directory that relative paths are resolved against.
    #[arg(long, global = true, env = "TRANK_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Convert `object_id,t,value` rows (or a binary dataset) to a binary dataset.
    Ingest(IngestArgs),
    /// Build an index file.
    Build(BuildArgs),
    /// Run one top-k query against an index file.
    Query(QueryArgs),
    /// Measure build and query IO per method.
    Bench(SweepArgs),
    /// Measure answer quality per method against brute force.
    Eval(SweepArgs),
    /// Describe a dataset or index file.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub profile: ValueModel,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n_avg: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000.0)]
    pub t_end: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ResolutionArgs {
    /// Gap mass as a fraction of the total.
    #[arg(long, conflicts_with = "r")]
    pub epsilon: Option<f64>,
    /// Target breakpoint count, both ends included.
    #[arg(long)]
    pub r: Option<usize>,
}

impl ResolutionArgs {
    fn resolution(&self) -> Option<Resolution> {
        self.epsilon.map(Resolution::Epsilon).or(self.r.map(Resolution::Breakpoints))
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodTag,
    #[command(flatten)]
    pub resolution: ResolutionArgs,
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, default_value_t = 4096)]
    pub block_size: usize,
    /// Allow QUERY1 indexes with r² ≥ N or r·k_max ≥ N.
    #[arg(long)]
    pub oversized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggArg {
    Sum,
    Avg,
}

impl From<AggArg> for Aggregate {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Sum => Aggregate::Sum,
            AggArg::Avg => Aggregate::Avg,
        }
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t2: f64,
    #[arg(long, value_enum, default_value = "sum")]
    pub aggregate: AggArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = MethodTag::ALL)]
    pub methods: Vec<MethodTag>,
    /// Breakpoint targets to sweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "epsilon")]
    pub r: Vec<usize>,
    /// Gap mass fractions to sweep.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Query length as a fraction of T.
    #[arg(long, default_value_t = 0.2)]
    pub interval: f64,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, default_value_t = 4096)]
    pub block_size: usize,
    #[arg(long, value_enum, default_value = "sum")]
    pub aggregate: AggArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub oversized: bool,
    /// Also write `<prefix>.jsonl` and `<prefix>.tsv`.
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub path: PathBuf,
}

/// Parses `args` and runs the command, writing records to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let dir = cli.data_dir.clone();
    let p = |x: &Path| resolve(dir.as_deref(), x);
    match cli.command {
        Command::Gen(a) => {
            let profile = SynthProfile { t_end: a.t_end, ..SynthProfile::new(a.profile, a.m, a.n_avg, a.seed) };
            if a.m == 0 || a.n_avg == 0 || !(a.t_end > 0.0 && a.t_end.is_finite()) {
                bail!("m and n_avg must be at least 1 and t_end positive");
            }
            let ds = profile.generate();
            let path = p(&a.out);
            save_dataset(&ds, &path)?;
            emit(out, &summary("gen", &path, &ds))
        }
        Command::Ingest(a) => {
            let input = p(&a.input);
            let (ds, ids) = if is_binary(&input)? {
                let ds = load_dataset(&input)?;
                let ids = (1..=ds.m() as u64).collect();
                (ds, ids)
            } else {
                read_csv(std::fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?)?
            };
            let path = p(&a.out);
            save_dataset(&ds, &path)?;
            let mut s = summary("ingest", &path, &ds);
            s["renumbered"] = json!(ids.iter().enumerate().any(|(i, &id)| id != i as u64 + 1));
            emit(out, &s)
        }
        Command::Build(a) => {
            let ds = load_dataset(&p(&a.data))?;
            let params = BuildParams {
                resolution: a.resolution.resolution(),
                k_max: a.k_max,
                page_size: a.block_size,
                oversized: a.oversized,
            };
            let path = p(&a.out);
            let mut io = IoStats::default();
            let start = Instant::now();
            let idx = build_file(&ds, a.method, &params, &path, &mut io)?;
            let mut s = json!({
                "command": "build",
                "method": a.method,
                "path": path,
                "pages": idx.pages(),
                "build_reads": io.reads,
                "build_writes": io.writes,
                "build_ms": start.elapsed().as_secs_f64() * 1e3,
            });
            if let Some(b) = idx.breakpoints() {
                s["r"] = json!(b.len());
                s["epsilon"] = json!(b.epsilon);
                s["k_max"] = json!(a.k_max);
            }
            emit(out, &s)
        }
        Command::Query(a) => {
            let path = p(&a.index);
            let mut io = IoStats::default();
            let idx = open_file(&path, &mut io)?;
            let q = QuerySpec::new(a.k, a.t1, a.t2, a.aggregate.into())?;
            let mut io = IoStats::default();
            let start = Instant::now();
            let ans = idx.query(&q, &mut io)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            for (j, e) in ans.entries.iter().enumerate() {
                emit(out, &json!({"rank": j + 1, "object": e.object.0, "score": e.score}))?;
            }
            emit(out, &json!({"method": idx.tag(), "results": ans.len(), "io_reads": io.reads, "io_writes": io.writes, "elapsed_ms": ms}))
        }
        Command::Bench(a) => sweep(&a, &p, out, true),
        Command::Eval(a) => sweep(&a, &p, out, false),
        Command::Info(a) => {
            let path = p(&a.path);
            if !is_binary(&path)? {
                bail!("{} is not a trank file", path.display());
            }
            let mut head = [0u8; 7];
            std::io::Read::read_exact(&mut std::fs::File::open(&path)?, &mut head)?;
            if head[6] == 0 {
                return emit(out, &summary("info", &path, &load_dataset(&path)?));
            }
            let mut io = IoStats::default();
            let h = IndexHeader::read(&FileStore::open(&path)?, &mut io)?;
            let idx = open_file(&path, &mut io)?;
            let mut s = json!({
                "command": "info",
                "path": path,
                "kind": h.kind.tag(),
                "method": idx.tag(),
                "page_size": h.page_size,
                "pages": idx.pages(),
                "entries": h.entry_count,
                "companion": h.companion,
            });
            if let Some(b) = idx.breakpoints() {
                s["r"] = json!(b.len());
                s["epsilon"] = json!(b.epsilon);
                s["tau"] = json!(b.tau);
                s["k_max"] = json!(idx.k_max());
            }
            emit(out, &s)
        }
    }
}

fn sweep(a: &SweepArgs, p: &dyn Fn(&Path) -> PathBuf, out: &mut dyn Write, bench: bool) -> anyhow::Result<()> {
    let ds = load_dataset(&p(&a.data))?;
    let mut resolutions: Vec<Option<Resolution>> = a.r.iter().map(|&r| Some(Resolution::Breakpoints(r))).collect();
    resolutions.extend(a.epsilon.iter().map(|&e| Some(Resolution::Epsilon(e))));
    let approx: Vec<MethodTag> = a.methods.iter().copied().filter(|m| !m.is_exact()).collect();
    if resolutions.is_empty() {
        if !approx.is_empty() {
            let names: Vec<&str> = approx.iter().map(|m| m.name()).collect();
            bail!("methods {} need --r or --epsilon", names.join(", "));
        }
        resolutions.push(None);
    }
    let w = Workload::fixed_fraction(ds.t_end(), a.queries, a.interval, a.k, a.aggregate.into(), a.seed);
    let mut lines = Vec::new();
    let mut tsv = Vec::new();
    for (i, res) in resolutions.iter().enumerate() {
        let params = BuildParams { resolution: *res, k_max: a.k_max, page_size: a.block_size, oversized: a.oversized };
        for &tag in &a.methods {
            if tag.is_exact() && i > 0 {
                continue;
            }
            let line = if bench {
                let row = bench_one(&ds, tag, &params, &w)?;
                tsv.push(row.tsv());
                serde_json::to_value(&row)?
            } else {
                let idx = crate::AnyIndex::build(
                    &ds,
                    tag,
                    &params,
                    trank_core::MemStore::new(a.block_size)?,
                    || Ok(trank_core::MemStore::new(a.block_size)?),
                    &mut IoStats::default(),
                )?;
                let s = QualitySummary::of(tag, &quality(&idx, &ds, &w)?);
                let r = idx.breakpoints().map_or(0, |b| b.len());
                tsv.push(format!("{}\t{}\t{}\t{}\t{}\t{}", tag, r, s.queries, s.mean_precision_recall, s.mean_approx_ratio, s.rankwise_pass_rate));
                let mut v = serde_json::to_value(&s)?;
                v["r"] = json!(r);
                v
            };
            emit(out, &line)?;
            lines.push(line);
        }
    }
    if let Some(prefix) = &a.out_prefix {
        let prefix = p(prefix);
        let mut j = String::new();
        for l in &lines {
            j.push_str(&l.to_string());
            j.push('\n');
        }
        std::fs::write(prefix.with_extension("jsonl"), j)?;
        let header = if bench {
            crate::eval::BenchRow::COLUMNS.join("\t")
        } else {
            "method\tr\tqueries\tmean_precision_recall\tmean_approx_ratio\trankwise_pass_rate".to_string()
        };
        std::fs::write(prefix.with_extension("tsv"), format!("{header}\n{}\n", tsv.join("\n")))?;
    }
    Ok(())
}

fn resolve(dir: Option<&Path>, p: &Path) -> PathBuf {
    match dir {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn is_binary(path: &Path) -> anyhow::Result<bool> {
    let mut f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut magic = [0u8; 4];
    Ok(std::io::Read::read_exact(&mut f, &mut magic).is_ok() && magic == MAGIC)
}

fn summary(command: &str, path: &Path, ds: &Dataset) -> serde_json::Value {
    json!({
        "command": command,
        "path": path,
        "kind": "dataset",
        "m": ds.m(),
        "n": ds.n(),
        "mass": ds.total_mass(MassMode::Signed),
        "abs_mass": ds.total_mass(MassMode::Absolute),
        "t_end": ds.t_end(),
    })
}

fn emit(out: &mut dyn Write, v: &serde_json::Value) -> anyhow::Result<()> {
    writeln!(out, "{v}")?;
    Ok(())
}
