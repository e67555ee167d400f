use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use spreadrec::harness::{LambdaGrid, Metric, Objective};
use spreadrec::ingest::ColumnRef;
use spreadrec::runner::{self, DatasetConfig, RunConfig};
use spreadrec::{Algorithm, AveragingMode, HybridVariant, Schema, SplitMethod};

/// Bipartite-network recommenders and their evaluation harness.
#[derive(Debug, Parser)]
#[command(name = "spreadrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw interaction file into a canonical edge list, id map and statistics row.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print statistics of a dataset after coarse-graining.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Write one training/probe split per seed.
    Split(ExpArgs),
    /// Evaluate one algorithm on every seed.
    Run(ExpArgs),
    /// Evaluate several algorithms on the same seeds.
    Compare(ExpArgs),
    /// Evaluate a hybrid over a grid of lambda values.
    Sweep(ExpArgs),
    /// Sweep lambda and report the best grid point for an objective.
    Optimize(ExpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    /// Tab-separated user, item, 1-5 rating, timestamp.
    Movielens,
    /// Two columns, user and object, no rating.
    Unary,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Config file whose dataset section provides defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interaction file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Field separator; a single space splits on any whitespace.
    #[arg(long)]
    delimiter: Option<String>,
    /// User column, by zero-based index or header name.
    #[arg(long)]
    user_col: Option<ColumnRef>,
    #[arg(long)]
    object_col: Option<ColumnRef>,
    /// Rating column; ignored for unary input.
    #[arg(long)]
    rating_col: Option<ColumnRef>,
    /// Inclusive rating scale as `low:high`.
    #[arg(long)]
    rating_scale: Option<String>,
    /// The first non-comment line names the columns.
    #[arg(long)]
    header: bool,
    /// Keep links rated at least this value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Largest tolerated fraction of malformed records.
    #[arg(long)]
    max_error_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct ExpArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `random:FRACTION` or `low-degree:THRESHOLD:PROBABILITY`.
    #[arg(long)]
    split: Option<SplitMethod>,
    /// Algorithm names, comma separated: grank, usim, probs, heats,
    /// hybrid-eq6, hybrid-wprime, hybrid-wdoubleprime, linear-X+Y.
    #[arg(long = "algo", value_delimiter = ',')]
    algorithms: Vec<String>,
    /// Lambda for hybrid algorithms named without one.
    #[arg(long)]
    lambda: Option<f64>,
    /// Hybrid family to sweep.
    #[arg(long)]
    variant: Option<HybridVariant>,
    /// `start:end:step` or comma-separated points.
    #[arg(long)]
    grid: Option<LambdaGrid>,
    /// Metric to optimize, or `utility:METRIC=WEIGHT,...`.
    #[arg(long)]
    objective: Option<Objective>,
    /// Recommendation list length.
    #[arg(long = "L", alias = "list-len")]
    list_len: Option<usize>,
    /// Number of replicate seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Root seed all replicate seeds derive from.
    #[arg(long)]
    seed: Option<u64>,
    /// Which users' lists enter personalization and surprisal.
    #[arg(long)]
    averaging: Option<AveragingMode>,
    /// Sample this many user pairs for personalization.
    #[arg(long)]
    pair_budget: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
}

impl DataArgs {
    fn base_config(&self) -> anyhow::Result<RunConfig> {
        match &self.config {
            Some(p) => Ok(RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?),
            None => Ok(RunConfig::default()),
        }
    }

    fn apply(&self, current: Option<DatasetConfig>) -> anyhow::Result<DatasetConfig> {
        let mut d = match (current, &self.input) {
            (Some(mut d), Some(p)) => {
                d.path = p.clone();
                d
            }
            (Some(d), None) => d,
            (None, Some(p)) => DatasetConfig::new(p),
            (None, None) => bail!("no input file; pass --input or a config with a dataset"),
        };
        match self.format {
            Some(Format::Movielens) => d.schema = Schema::movielens(),
            Some(Format::Unary) => d.schema = Schema::unary("\t"),
            None => {}
        }
        let s = &mut d.schema;
        if let Some(v) = &self.delimiter {
            s.delimiter = unescape(v);
        }
        if let Some(c) = &self.user_col {
            s.user = c.clone();
        }
        if let Some(c) = &self.object_col {
            s.object = c.clone();
        }
        if let Some(c) = &self.rating_col {
            s.rating = Some(c.clone());
        }
        if let Some(r) = &self.rating_scale {
            let (lo, hi) = r
                .split_once(':')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .with_context(|| format!("bad rating scale '{r}', expected low:high"))?;
            s.rating_scale = Some((lo, hi));
        }
        if self.header {
            s.has_header = true;
        }
        if let Some(t) = self.threshold {
            d.threshold = Some(t);
        }
        if let Some(m) = self.max_error_rate {
            d.max_error_rate = m;
        }
        if d.threshold.is_some() && d.schema.rating.is_none() {
            bail!("a rating threshold needs a rating column");
        }
        if !(0.0..=1.0).contains(&d.max_error_rate) {
            bail!("max error rate must lie in [0, 1]");
        }
        Ok(d)
    }

    fn dataset(&self) -> anyhow::Result<DatasetConfig> {
        let base = self.base_config()?;
        self.apply(base.dataset)
    }
}

fn unescape(s: &str) -> String {
    match s {
        "\\t" | "tab" => "\t".into(),
        "space" => " ".into(),
        _ => s.into(),
    }
}

impl ExpArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = self.data.base_config()?;
        cfg.dataset = Some(self.data.apply(cfg.dataset.take())?);
        if let Some(v) = self.split {
            cfg.split = v;
        }
        if !self.algorithms.is_empty() {
            cfg.algorithms = self
                .algorithms
                .iter()
                .map(|a| Algorithm::parse_with_lambda(a, self.lambda))
                .collect::<Result<_, _>>()?;
        } else if self.lambda.is_some() {
            bail!("--lambda needs --algo");
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(g) = &self.grid {
            cfg.grid = g.clone();
        }
        if let Some(o) = &self.objective {
            cfg.objective = o.clone();
        }
        if let Some(v) = self.list_len {
            cfg.list_len = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.seed {
            cfg.root_seed = v;
        }
        if let Some(v) = self.averaging {
            cfg.averaging = v;
        }
        if let Some(v) = self.pair_budget {
            cfg.pair_budget = Some(v);
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        cfg.output = Some(self.out.clone().context("no output directory; pass --out")?);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_file(dir: &std::path::Path, name: &str) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(dir.join(name)).with_context(|| format!("reading {name}"))?;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        println!("{line}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { data, out } => {
            let cfg = data.dataset().map_err(usage)?;
            let summary = runner::ingest_to_dir(&cfg, &out).map_err(runtime)?;
            let r = &summary.record;
            eprintln!(
                "read {} lines: {} records, {} malformed",
                r.lines_read, r.records, r.malformed
            );
            print!("{}", runner::stats_tsv(&r.stats));
        }
        Command::Stats { data } => {
            let cfg = data.dataset().map_err(usage)?;
            let loaded = runner::load_dataset(&cfg).map_err(runtime)?;
            print!("{}", runner::stats_tsv(&loaded.record.stats));
        }
        Command::Split(args) => {
            let cfg = args.config().map_err(usage)?;
            let manifests = runner::execute_split(&cfg).map_err(runtime)?;
            println!("seed\ttraining_links\tprobe_links\tprobe_users");
            for m in manifests {
                println!("{}\t{}\t{}\t{}", m.seed, m.training_links, m.probe_links, m.probe_users);
            }
        }
        Command::Run(args) => {
            let cfg = args.config().map_err(usage)?;
            if cfg.algorithms.len() != 1 {
                return Err(usage(anyhow::anyhow!(
                    "run takes exactly one algorithm; use compare for several"
                )));
            }
            runner::execute_run(&cfg).map_err(runtime)?;
            print_file(cfg.output.as_deref().unwrap(), "summary.tsv").map_err(Failure::Runtime)?;
        }
        Command::Compare(args) => {
            let cfg = args.config().map_err(usage)?;
            runner::execute_compare(&cfg).map_err(runtime)?;
            print_file(cfg.output.as_deref().unwrap(), "summary.tsv").map_err(Failure::Runtime)?;
        }
        Command::Sweep(args) => {
            let cfg = args.config().map_err(usage)?;
            runner::execute_sweep(&cfg).map_err(runtime)?;
            print_file(cfg.output.as_deref().unwrap(), "curve_r.tsv").map_err(Failure::Runtime)?;
        }
        Command::Optimize(args) => {
            let cfg = args.config().map_err(usage)?;
            if !cfg.grid.values().contains(&1.0) {
                return Err(usage(anyhow::anyhow!("the grid must contain lambda = 1")));
            }
            let opt = runner::execute_optimize(&cfg).map_err(runtime)?;
            let r = opt.overall.at_optimum.mean(Metric::R);
            eprintln!("lambda* = {} (r = {:?})", opt.overall.lambda, r);
            print_file(cfg.output.as_deref().unwrap(), "optimization.tsv").map_err(Failure::Runtime)?;
        }
    }
    Ok(())
}

/// Configuration problems exit with 2, failures while running with 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: anyhow::Error) -> Failure {
    Failure::Usage(e)
}

/// Schema mismatches are reported as usage errors even when discovered
/// while reading the input.
fn runtime(e: spreadrec::Error) -> Failure {
    match e {
        spreadrec::Error::Schema(_) => Failure::Usage(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
