//! Config-driven experiment runs that write reproducible output directories.
//!
//! Every run writes `config.toml` (enough to repeat the run), `manifest.json`
//! (dataset checksum, seeds, split checksums and output checksums) and its
//! result files. Text outputs start with a `# config:` comment line; JSON
//! outputs embed the config instead.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{Algorithm, Base, HybridVariant};
use crate::error::{Error, Result};
use crate::graph::GraphStats;
use crate::harness::{
    compare_algorithms, coverage_probe, derive_seeds, lambda_sweep, make_splits, optimize_lambda, Comparison,
    LambdaGrid, Metric, Objective, OptimizationResult, Summary, SweepResult,
};
use crate::ingest::{
    parse_interactions, write_edge_list, write_id_map, Dataset, Parsed, ProbeSplit, Schema, SplitManifest,
    SplitMethod,
};
use crate::metrics::{AveragingMode, EvalOptions, EvalReport};

/// Where the interactions come from and how they become unary links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "Schema::movielens")]
    pub schema: Schema,
    /// Ratings at or above this value become links; `None` keeps every record.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Largest tolerated fraction of malformed records.
    #[serde(default = "default_error_rate")]
    pub max_error_rate: f64,
}

fn default_error_rate() -> f64 {
    0.01
}

impl DatasetConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DatasetConfig {
            path: path.into(),
            schema: Schema::movielens(),
            threshold: None,
            max_error_rate: default_error_rate(),
        }
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub split: SplitMethod,
    /// Algorithms for `run` (exactly one) and `compare`.
    pub algorithms: Vec<Algorithm>,
    /// Hybrid family for `sweep` and `optimize`.
    pub variant: HybridVariant,
    pub grid: LambdaGrid,
    pub objective: Objective,
    pub list_len: usize,
    pub seeds: usize,
    pub root_seed: u64,
    pub averaging: AveragingMode,
    /// Sample this many user pairs for personalization instead of all pairs.
    pub pair_budget: Option<u64>,
    /// Worker threads; `None` lets the thread pool decide.
    pub workers: Option<usize>,
    /// Not serialized, so a run repeated elsewhere writes identical files.
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub dataset: Option<DatasetConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            split: SplitMethod::Random { fraction: 0.1 },
            algorithms: vec![Algorithm::Base(Base::ProbS)],
            variant: HybridVariant::Eq6,
            grid: LambdaGrid::default(),
            objective: Objective::Metric(Metric::R),
            list_len: crate::DEFAULT_LIST_LEN,
            seeds: 10,
            root_seed: 42,
            averaging: AveragingMode::ProbeUsers,
            pair_budget: None,
            workers: None,
            output: None,
            dataset: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Single-line JSON used in output headers.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        for a in &self.algorithms {
            a.validate()?;
        }
        if self.list_len == 0 {
            return Err(Error::InvalidParameter("list length must be positive".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        if self.root_seed > i64::MAX as u64 {
            return Err(Error::InvalidParameter(format!(
                "root seed must not exceed {}",
                i64::MAX
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("worker count must be positive".into()));
        }
        if let Some(d) = &self.dataset {
            if !(0.0..=1.0).contains(&d.max_error_rate) {
                return Err(Error::InvalidParameter("max_error_rate must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            list_len: self.list_len,
            averaging: self.averaging,
            pair_budget: self.pair_budget,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        derive_seeds(self.root_seed, self.seeds)
    }

    fn dataset(&self) -> Result<&DatasetConfig> {
        self.dataset
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no dataset configured".into()))
    }

    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("no output directory configured".into()))
    }

    /// Runs `f` on a pool capped at `workers` threads.
    fn in_pool<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.workers {
            None => f(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
                .install(f),
        }
    }
}

/// A dataset loaded for a run, with provenance.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub record: DatasetRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub path: String,
    pub sha256: String,
    pub lines_read: usize,
    pub records: usize,
    pub malformed: usize,
    pub stats: GraphStats,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_file(cfg: &DatasetConfig) -> Result<Parsed> {
    let path = &cfg.path;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_interactions(BufReader::new(file), &cfg.schema)?;
    let total = parsed.interactions.len() + parsed.errors.len();
    if total > 0 {
        let rate = parsed.errors.len() as f64 / total as f64;
        if rate > cfg.max_error_rate {
            let first = &parsed.errors[0];
            return Err(Error::Parse(format!(
                "{} of {total} records malformed ({:.2}% > {:.2}%), first at line {}: {:?}",
                parsed.errors.len(),
                100.0 * rate,
                100.0 * cfg.max_error_rate,
                first.line,
                first.kind
            )));
        }
    }
    Ok(parsed)
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<LoadedDataset> {
    let parsed = parse_file(cfg)?;
    let dataset = Dataset::from_parsed(&parsed, cfg.threshold, true)?;
    let record = DatasetRecord {
        path: cfg.path.display().to_string(),
        sha256: file_sha256(&cfg.path)?,
        lines_read: parsed.lines_read,
        records: parsed.interactions.len(),
        malformed: parsed.errors.len(),
        stats: dataset.stats(),
    };
    Ok(LoadedDataset { dataset, record })
}

/// Header and value line of a one-row statistics table.
pub fn stats_tsv(stats: &GraphStats) -> String {
    let (num, den) = stats.sparsity_ratio();
    let sparsity = stats.sparsity.map_or_else(|| "NA".to_string(), |s| format!("{s:e}"));
    format!(
        "users\tobjects\tlinks\tsparsity\tsparsity_exact\n{}\t{}\t{}\t{}\t{}/{}\n",
        stats.users, stats.objects, stats.links, sparsity, num, den
    )
}

/// Collects output files and their checksums.
struct OutputDir {
    dir: PathBuf,
    header: String,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    fn create(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = OutputDir {
            dir: dir.to_path_buf(),
            header: format!("# config: {{\"command\":\"{command}\",\"run\":{}}}\n", cfg.to_json_line()?),
            files: BTreeMap::new(),
        };
        out.write_raw("config.toml", &cfg.to_toml()?)?;
        Ok(out)
    }

    fn write_raw(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), hex(&Sha256::digest(body.as_bytes())));
        Ok(())
    }

    fn write_text(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("{}{body}", self.header);
        self.write_raw(name, &text)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, command: &str, cfg: &RunConfig, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            command: &'a str,
            config: &'a RunConfig,
            result: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Wrapped {
            command,
            config: cfg,
            result: value,
        })?;
        text.push('\n');
        self.write_raw(name, &text)
    }

    fn finish(mut self, manifest: &Manifest) -> Result<BTreeMap<String, String>> {
        let mut manifest = manifest.clone();
        manifest.outputs = self.files.clone();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write_raw("manifest.json", &text)?;
        Ok(self.files)
    }
}

/// Reproducibility record of one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub dataset: DatasetRecord,
    pub seeds: Vec<u64>,
    pub splits: Vec<SplitManifest>,
    /// Checksums of every other file in the directory.
    pub outputs: BTreeMap<String, String>,
}

struct Prepared {
    loaded: LoadedDataset,
    seeds: Vec<u64>,
    splits: Vec<ProbeSplit>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let loaded = load_dataset(cfg.dataset()?)?;
    let seeds = cfg.seed_list();
    let splits = make_splits(&loaded.dataset.graph, &cfg.split, &seeds)?;
    Ok(Prepared {
        loaded,
        seeds,
        splits,
    })
}

fn manifest(command: &str, cfg: &RunConfig, p: &Prepared) -> Manifest {
    Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        dataset: p.loaded.record.clone(),
        seeds: p.seeds.clone(),
        splits: p.splits.iter().map(ProbeSplit::manifest).collect(),
        outputs: BTreeMap::new(),
    }
}

fn reports_tsv<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut s = EvalReport::tsv_header();
    s.push('\n');
    for r in reports {
        s.push_str(&r.tsv_row());
        s.push('\n');
    }
    s
}

fn reports_jsonl<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> Result<String> {
    let mut s = String::new();
    for r in reports {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

fn summaries_tsv<'a>(summaries: impl IntoIterator<Item = &'a Summary>) -> String {
    let mut s = Summary::tsv_header();
    s.push('\n');
    for x in summaries {
        s.push_str(&x.tsv_row());
        s.push('\n');
    }
    s
}

/// Evaluates the configured algorithms on every seed and writes
/// `reports.tsv`, `reports.jsonl`, `summary.tsv` and `coverage.tsv`.
pub fn execute_compare(cfg: &RunConfig) -> Result<Comparison> {
    execute_comparison("compare", cfg)
}

/// Like [`execute_compare`] for exactly one algorithm.
pub fn execute_run(cfg: &RunConfig) -> Result<Comparison> {
    if cfg.algorithms.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "run needs exactly one algorithm, got {}",
            cfg.algorithms.len()
        )));
    }
    execute_comparison("run", cfg)
}

fn execute_comparison(command: &str, cfg: &RunConfig) -> Result<Comparison> {
    let dir = cfg.output()?.to_path_buf();
    cfg.in_pool(|| {
        let p = prepare(cfg)?;
        let table = compare_algorithms(&p.splits, &cfg.algorithms, cfg.eval_options())?;
        let mut coverage = String::from("algorithm\tseed\tzero_score_fraction\tmean_top_degree\tL\n");
        for &alg in &cfg.algorithms {
            for s in &p.splits {
                let c = coverage_probe(s, alg, cfg.list_len)?;
                coverage.push_str(&format!(
                    "{alg}\t{}\t{}\t{}\t{}\n",
                    s.seed, c.zero_score_fraction, c.mean_top_degree, c.list_len
                ));
            }
        }
        let mut out = OutputDir::create(&dir, command, cfg)?;
        out.write_text("reports.tsv", &reports_tsv(&table.rows))?;
        out.write_raw("reports.jsonl", &reports_jsonl(&table.rows)?)?;
        out.write_text("summary.tsv", &summaries_tsv(&table.summaries))?;
        out.write_text("coverage.tsv", &coverage)?;
        out.finish(&manifest(command, cfg, &p))?;
        Ok(table)
    })
}

fn write_sweep(out: &mut OutputDir, command: &str, cfg: &RunConfig, sweep: &SweepResult) -> Result<()> {
    out.write_text("reports.tsv", &reports_tsv(sweep.points.iter().flat_map(|p| &p.reports)))?;
    out.write_text("summary.tsv", &summaries_tsv(sweep.points.iter().map(|p| &p.summary)))?;
    for m in Metric::ALL {
        let mut s = String::from("lambda\tmean\tsd\n");
        for (lambda, stat) in sweep.curve(m) {
            match stat {
                Some(st) => s.push_str(&format!("{lambda}\t{}\t{}\n", st.mean, st.sd)),
                None => s.push_str(&format!("{lambda}\tNA\tNA\n")),
            }
        }
        out.write_text(&format!("curve_{m}.tsv"), &s)?;
    }
    out.write_json("sweep.json", command, cfg, sweep)
}

fn sweep_of(cfg: &RunConfig, p: &Prepared) -> Result<SweepResult> {
    lambda_sweep(&p.splits, cfg.variant, &cfg.grid, cfg.eval_options())
}

/// Sweeps λ over the grid; writes per-metric curves and `sweep.json`.
pub fn execute_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let dir = cfg.output()?.to_path_buf();
    cfg.in_pool(|| {
        let p = prepare(cfg)?;
        let sweep = sweep_of(cfg, &p)?;
        let mut out = OutputDir::create(&dir, "sweep", cfg)?;
        write_sweep(&mut out, "sweep", cfg, &sweep)?;
        out.finish(&manifest("sweep", cfg, &p))?;
        Ok(sweep)
    })
}

/// Optimum over the seed means plus one optimum per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub overall: OptimizationResult,
    pub per_seed: Vec<(u64, OptimizationResult)>,
}

fn delta_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn optimization_tsv(o: &Optimization) -> String {
    let mut s = String::from("scope\tlambda\tr\tdelta_r_pct\tdelta_e_p_pct\tdelta_h_pct\tdelta_surprisal_pct\n");
    let mut row = |scope: String, r: &OptimizationResult| {
        let d = r.deltas;
        s.push_str(&format!(
            "{scope}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.lambda,
            r.at_optimum.mean(Metric::R).map_or("NA".into(), |v| v.to_string()),
            delta_cell(d.r),
            delta_cell(d.e_p),
            delta_cell(d.h),
            delta_cell(d.surprisal)
        ));
    };
    row("mean".into(), &o.overall);
    for (seed, r) in &o.per_seed {
        row(format!("seed:{seed}"), r);
    }
    s
}

/// Sweeps λ and picks the best grid point for the configured objective.
pub fn execute_optimize(cfg: &RunConfig) -> Result<Optimization> {
    let dir = cfg.output()?.to_path_buf();
    cfg.in_pool(|| {
        let p = prepare(cfg)?;
        let sweep = sweep_of(cfg, &p)?;
        let overall = optimize_lambda(&sweep, &cfg.objective)?;
        let per_seed = (0..sweep.seeds.len())
            .map(|i| {
                let rep = sweep.replicate(i).expect("index within seeds");
                Ok((sweep.seeds[i], optimize_lambda(&rep, &cfg.objective)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let opt = Optimization { overall, per_seed };
        let mut out = OutputDir::create(&dir, "optimize", cfg)?;
        write_sweep(&mut out, "optimize", cfg, &sweep)?;
        out.write_text("optimization.tsv", &optimization_tsv(&opt))?;
        out.write_json("optimization.json", "optimize", cfg, &opt)?;
        out.finish(&manifest("optimize", cfg, &p))?;
        Ok(opt)
    })
}

/// Writes one split directory per seed under the output directory.
pub fn execute_split(cfg: &RunConfig) -> Result<Vec<SplitManifest>> {
    let dir = cfg.output()?.to_path_buf();
    let p = prepare(cfg)?;
    let out = OutputDir::create(&dir, "split", cfg)?;
    let mut manifests = Vec::with_capacity(p.splits.len());
    for (i, s) in p.splits.iter().enumerate() {
        manifests.push(s.write(&dir.join(format!("seed-{i:02}")))?);
    }
    out.finish(&manifest("split", cfg, &p))?;
    Ok(manifests)
}

/// Outcome of [`ingest_to_dir`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub record: DatasetRecord,
}

/// Writes the canonical edge list (`edges.tsv`), the id map (`ids.tsv`) and
/// a statistics row (`stats.tsv`) for a raw interaction file.
pub fn ingest_to_dir(cfg: &DatasetConfig, dir: &Path) -> Result<IngestSummary> {
    let loaded = load_dataset(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ds = &loaded.dataset;
    write_edge_list(&dir.join("edges.tsv"), ds.graph.edges())?;
    write_id_map(&dir.join("ids.tsv"), &ds.users, &ds.objects)?;
    let path = dir.join("stats.tsv");
    fs::write(&path, stats_tsv(&loaded.record.stats)).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("ingest.json");
    let mut text = serde_json::to_string_pretty(&loaded.record)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(IngestSummary {
        record: loaded.record,
    })
}
