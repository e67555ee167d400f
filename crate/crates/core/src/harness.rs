//! Experiment orchestration: algorithm comparisons, λ sweeps, λ optimization
//! and coverage diagnostics, replicated over seeded probe splits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{recommend, Algorithm, HybridVariant, Scorer};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::ingest::{split, ProbeSplit, SplitMethod};
use crate::metrics::{evaluate, EvalOptions, EvalReport};

/// Replicate seeds derived from one root seed.
pub fn derive_seeds(root: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    (0..count).map(|_| rng.gen()).collect()
}

/// Draws one probe split per seed.
pub fn make_splits(g: &BipartiteGraph, method: &SplitMethod, seeds: &[u64]) -> Result<Vec<ProbeSplit>> {
    seeds.iter().map(|&s| split(g, method, s)).collect()
}

/// A metric reported by [`EvalReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R,
    Precision,
    Recall,
    EP,
    ER,
    H,
    Surprisal,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::R,
        Metric::Precision,
        Metric::Recall,
        Metric::EP,
        Metric::ER,
        Metric::H,
        Metric::Surprisal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::R => "r",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::EP => "e_p",
            Metric::ER => "e_r",
            Metric::H => "h",
            Metric::Surprisal => "surprisal",
        }
    }

    /// Only the mean relative rank improves downwards.
    pub fn lower_is_better(self) -> bool {
        self == Metric::R
    }

    pub fn of(self, r: &EvalReport) -> Option<f64> {
        match self {
            Metric::R => Some(r.r),
            Metric::Precision => Some(r.precision),
            Metric::Recall => Some(r.recall),
            Metric::EP => Some(r.e_p),
            Metric::ER => Some(r.e_r),
            Metric::H => r.h,
            Metric::Surprisal => r.surprisal,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s || (s == "i" && *m == Metric::Surprisal))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric '{s}'")))
    }
}

/// Mean and sample standard deviation of one metric across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, sd, n })
    }
}

/// Per-metric statistics over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub replicates: usize,
    pub r: Option<Stat>,
    pub precision: Option<Stat>,
    pub recall: Option<Stat>,
    pub e_p: Option<Stat>,
    pub e_r: Option<Stat>,
    pub h: Option<Stat>,
    pub surprisal: Option<Stat>,
}

impl Summary {
    pub fn of(algorithm: Algorithm, reports: &[EvalReport]) -> Summary {
        let stat = |m: Metric| {
            let v: Vec<f64> = reports.iter().filter_map(|r| m.of(r)).collect();
            Stat::of(&v)
        };
        Summary {
            algorithm,
            replicates: reports.len(),
            r: stat(Metric::R),
            precision: stat(Metric::Precision),
            recall: stat(Metric::Recall),
            e_p: stat(Metric::EP),
            e_r: stat(Metric::ER),
            h: stat(Metric::H),
            surprisal: stat(Metric::Surprisal),
        }
    }

    pub fn get(&self, m: Metric) -> Option<Stat> {
        match m {
            Metric::R => self.r,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::EP => self.e_p,
            Metric::ER => self.e_r,
            Metric::H => self.h,
            Metric::Surprisal => self.surprisal,
        }
    }

    pub fn mean(&self, m: Metric) -> Option<f64> {
        self.get(m).map(|s| s.mean)
    }

    pub fn tsv_header() -> String {
        let mut cols = vec!["algorithm".to_string(), "replicates".to_string()];
        for m in Metric::ALL {
            cols.push(format!("{m}_mean"));
            cols.push(format!("{m}_sd"));
        }
        cols.join("\t")
    }

    pub fn tsv_row(&self) -> String {
        let mut cols = vec![self.algorithm.to_string(), self.replicates.to_string()];
        for m in Metric::ALL {
            match self.get(m) {
                Some(s) => {
                    cols.push(s.mean.to_string());
                    cols.push(s.sd.to_string());
                }
                None => cols.extend(["NA".to_string(), "NA".to_string()]),
            }
        }
        cols.join("\t")
    }
}

/// One row per (algorithm, seed) plus per-algorithm summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<EvalReport>,
    pub summaries: Vec<Summary>,
}

impl Comparison {
    pub fn reports_for(&self, algorithm: Algorithm) -> Vec<&EvalReport> {
        self.rows.iter().filter(|r| r.algorithm == algorithm).collect()
    }

    pub fn summary(&self, algorithm: Algorithm) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }
}

/// Evaluates every algorithm on every split. Rows are ordered by algorithm,
/// then by split.
pub fn compare_algorithms(splits: &[ProbeSplit], algorithms: &[Algorithm], opts: EvalOptions) -> Result<Comparison> {
    if algorithms.is_empty() {
        return Err(Error::InvalidParameter("no algorithm to compare".into()));
    }
    if splits.is_empty() {
        return Err(Error::InvalidParameter("no split to evaluate on".into()));
    }
    let mut rows = Vec::with_capacity(algorithms.len() * splits.len());
    let mut summaries = Vec::with_capacity(algorithms.len());
    for &alg in algorithms {
        let reports = splits
            .iter()
            .map(|s| evaluate(s, alg, opts))
            .collect::<Result<Vec<_>>>()?;
        summaries.push(Summary::of(alg, &reports));
        rows.extend(reports);
    }
    Ok(Comparison { rows, summaries })
}

/// An ascending set of λ values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct LambdaGrid {
    points: Vec<f64>,
    spec: String,
}

fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl LambdaGrid {
    /// `start, start + step, …` up to `end`, with 0 and 1 added.
    pub fn range(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || start > end || start < 0.0 || end > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "bad grid {start}:{end}:{step}; need 0 <= start <= end <= 1 and step > 0"
            )));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        let mut points: Vec<f64> = (0..=n).map(|i| snap(start + i as f64 * step)).collect();
        points.push(0.0);
        points.push(1.0);
        Self::from_points(points, format!("{start}:{end}:{step}"))
    }

    /// Explicit points. A single point is kept as is; two or more also get
    /// the endpoints 0 and 1.
    pub fn points(values: &[f64]) -> Result<Self> {
        let spec = values.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut points = values.to_vec();
        if points.len() > 1 {
            points.push(0.0);
            points.push(1.0);
        }
        Self::from_points(points, spec)
    }

    fn from_points(mut points: Vec<f64>, spec: String) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty lambda grid".into()));
        }
        if let Some(bad) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("lambda {bad} outside [0, 1]")));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(LambdaGrid { points, spec })
    }

    pub fn values(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::range(0.0, 1.0, 0.05).expect("default grid is valid")
    }
}

impl fmt::Display for LambdaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    /// `start:end:step` or a comma-separated list of points.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad lambda grid '{s}'"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a, b, c] => LambdaGrid::range(num(a)?, num(b)?, num(c)?),
            [_] => {
                let pts = s.split(',').map(num).collect::<Result<Vec<_>>>()?;
                LambdaGrid::points(&pts)
            }
            _ => Err(bad()),
        }
    }
}

impl From<LambdaGrid> for String {
    fn from(g: LambdaGrid) -> String {
        g.spec
    }
}

impl TryFrom<String> for LambdaGrid {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Reports of one λ value across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub reports: Vec<EvalReport>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variant: HybridVariant,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// `(λ, mean, sd)` rows of one metric.
    pub fn curve(&self, metric: Metric) -> Vec<(f64, Option<Stat>)> {
        self.points
            .iter()
            .map(|p| (p.lambda, p.summary.get(metric)))
            .collect()
    }

    pub fn point(&self, lambda: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.lambda == lambda)
    }

    /// The same sweep restricted to replicate `index`.
    pub fn replicate(&self, index: usize) -> Option<SweepResult> {
        let seed = *self.seeds.get(index)?;
        let points = self
            .points
            .iter()
            .map(|p| {
                let reports = vec![p.reports[index].clone()];
                SweepPoint {
                    lambda: p.lambda,
                    summary: Summary::of(p.summary.algorithm, &reports),
                    reports,
                }
            })
            .collect();
        Some(SweepResult {
            variant: self.variant,
            grid: self.grid.clone(),
            seeds: vec![seed],
            points,
        })
    }
}

/// Evaluates the hybrid at every grid point on every split.
pub fn lambda_sweep(splits: &[ProbeSplit], variant: HybridVariant, grid: &LambdaGrid, opts: EvalOptions) -> Result<SweepResult> {
    if splits.is_empty() {
        return Err(Error::InvalidParameter("no split to sweep on".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid.values() {
        let alg = Algorithm::hybrid(variant, lambda)?;
        let reports = splits
            .iter()
            .map(|s| evaluate(s, alg, opts))
            .collect::<Result<Vec<_>>>()?;
        points.push(SweepPoint {
            lambda,
            summary: Summary::of(alg, &reports),
            reports,
        });
    }
    Ok(SweepResult {
        variant,
        grid: grid.values().to_vec(),
        seeds: splits.iter().map(|s| s.seed).collect(),
        points,
    })
}

/// What λ optimization maximizes or minimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Objective {
    /// Minimize `r`, maximize everything else.
    Metric(Metric),
    /// Maximize `Σ weight · metric`.
    Utility(Vec<(Metric, f64)>),
}

impl Objective {
    /// Larger is better.
    fn score(&self, s: &Summary) -> Option<f64> {
        match self {
            Objective::Metric(m) => {
                let v = s.mean(*m)?;
                Some(if m.lower_is_better() { -v } else { v })
            }
            Objective::Utility(terms) => terms
                .iter()
                .map(|(m, w)| s.mean(*m).map(|v| w * v))
                .sum(),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Metric(m) => write!(f, "{m}"),
            Objective::Utility(terms) => {
                let t: Vec<String> = terms.iter().map(|(m, w)| format!("{m}={w}")).collect();
                write!(f, "utility:{}", t.join(","))
            }
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// A metric name (`r`, `e_p`, `h`, …) or `utility:r=-1,h=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("utility:") {
            None => Ok(Objective::Metric(s.parse()?)),
            Some(terms) => {
                let parsed = terms
                    .split(',')
                    .map(|t| {
                        let (m, w) = t
                            .split_once('=')
                            .ok_or_else(|| Error::InvalidParameter(format!("bad utility term '{t}'")))?;
                        let w: f64 = w
                            .trim()
                            .parse()
                            .map_err(|_| Error::InvalidParameter(format!("bad weight in '{t}'")))?;
                        Ok((m.trim().parse()?, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if parsed.is_empty() {
                    return Err(Error::InvalidParameter("empty utility".into()));
                }
                Ok(Objective::Utility(parsed))
            }
        }
    }
}

impl From<Objective> for String {
    fn from(o: Objective) -> String {
        o.to_string()
    }
}

impl TryFrom<String> for Objective {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Percentage improvements over the λ = 1 baseline. `r` counts a decrease
/// as improvement; the others an increase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub r: Option<f64>,
    pub e_p: Option<f64>,
    pub h: Option<f64>,
    pub surprisal: Option<f64>,
}

/// Signed percentage improvement of `value` over `base` for `metric`.
pub fn improvement_percent(metric: Metric, value: f64, base: f64) -> Option<f64> {
    if base == 0.0 {
        return None;
    }
    let change = if metric.lower_is_better() {
        base - value
    } else {
        value - base
    };
    Some(100.0 * change / base)
}

impl Deltas {
    pub fn between(at: &Summary, baseline: &Summary) -> Deltas {
        let d = |m: Metric| improvement_percent(m, at.mean(m)?, baseline.mean(m)?);
        Deltas {
            r: d(Metric::R),
            e_p: d(Metric::EP),
            h: d(Metric::H),
            surprisal: d(Metric::Surprisal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub objective: Objective,
    pub variant: HybridVariant,
    pub lambda: f64,
    pub at_optimum: Summary,
    pub baseline: Summary,
    pub deltas: Deltas,
}

/// Grid search over the seed-mean objective; ties go to the larger λ.
pub fn optimize_lambda(sweep: &SweepResult, objective: &Objective) -> Result<OptimizationResult> {
    let baseline = sweep
        .point(1.0)
        .ok_or_else(|| Error::InvalidParameter("sweep lacks the lambda = 1 baseline".into()))?;
    let mut best: Option<(&SweepPoint, f64)> = None;
    for p in &sweep.points {
        let Some(v) = objective.score(&p.summary) else {
            continue;
        };
        if best.is_none_or(|(_, b)| v >= b) {
            best = Some((p, v));
        }
    }
    let (point, _) = best.ok_or_else(|| {
        Error::InvalidParameter(format!("objective '{objective}' is undefined on every grid point"))
    })?;
    Ok(OptimizationResult {
        objective: objective.clone(),
        variant: sweep.variant,
        lambda: point.lambda,
        deltas: Deltas::between(&point.summary, &baseline.summary),
        at_optimum: point.summary.clone(),
        baseline: baseline.summary.clone(),
    })
}

/// How much of the object space an algorithm reaches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub algorithm: Algorithm,
    /// Fraction of deleted links whose object scored zero for their user.
    pub zero_score_fraction: f64,
    /// Mean training degree of the objects in probe users' top lists.
    pub mean_top_degree: f64,
    pub list_len: usize,
}

pub fn coverage_probe(split: &ProbeSplit, algorithm: Algorithm, list_len: usize) -> Result<Coverage> {
    let g = &split.training;
    let scorer = Scorer::new(g, algorithm)?;
    let users = split.probe_users();
    if users.is_empty() {
        return Err(Error::EmptyProbe("coverage needs deleted links".into()));
    }
    let per_user: Vec<(usize, usize, usize, usize)> = users
        .par_iter()
        .map_init(
            || scorer.scratch(),
            |scratch, &u| {
                let sa = scorer.score_with(u, scratch);
                let zeros = split
                    .probe_objects(u)
                    .filter(|&a| sa.scores[a as usize] <= 0.0)
                    .count();
                let list = recommend(&sa, g, list_len);
                let deg: usize = list.iter().map(|(o, _)| g.object_degree(o.index())).sum();
                (zeros, split.probe_degree(u), deg, list.len())
            },
        )
        .collect();
    let (zeros, links, deg, entries) = per_user
        .iter()
        .fold((0, 0, 0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2, acc.3 + x.3));
    Ok(Coverage {
        algorithm,
        zero_score_fraction: zeros as f64 / links as f64,
        mean_top_degree: if entries > 0 { deg as f64 / entries as f64 } else { 0.0 },
        list_len,
    })
}
