//! Accuracy and diversity metrics over a probe split.
//!
//! Accuracy: relative rank `r` of deleted links, precision/recall and their
//! enhancement over random recommendation. Diversity: inter-list distance
//! `h(L)` (personalization) and mean self-information `I(L)` (surprisal).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{rank_uncollected, recommend, Algorithm, ScoreAssignment, Scorer};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::ingest::ProbeSplit;

/// Which users the diversity metrics are averaged over. Accuracy metrics
/// always use users with at least one deleted link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingMode {
    #[default]
    ProbeUsers,
    AllUsers,
}

impl fmt::Display for AveragingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AveragingMode::ProbeUsers => "probe-users",
            AveragingMode::AllUsers => "all-users",
        })
    }
}

impl FromStr for AveragingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probe-users" => Ok(AveragingMode::ProbeUsers),
            "all-users" => Ok(AveragingMode::AllUsers),
            _ => Err(Error::InvalidParameter(format!("unknown averaging mode '{s}'"))),
        }
    }
}

/// Relative rank of one deleted link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub user: u32,
    pub object: u32,
    pub rank: f64,
    pub tie_size: usize,
}

/// Rank rows of one user's deleted links.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRanks {
    pub rows: Vec<RankRow>,
    /// Uncollected objects with score zero (Z).
    pub zero_count: usize,
    /// `o - k_i` with the training degree.
    pub candidates: usize,
}

#[inline]
fn tie_rank(first_place: usize, last_place: usize, candidates: usize) -> f64 {
    ((first_place + last_place) as f64 * 0.5) / candidates as f64
}

/// Relative rank of every uncollected object, in rank order.
///
/// Objects sharing a score over places `p1..=p2` all get `(p1 + p2) / 2`
/// divided by the number of uncollected objects.
pub fn ranks_of_uncollected(sa: &ScoreAssignment) -> Vec<(u32, f64)> {
    let ranking = rank_uncollected(sa);
    let n = ranking.len();
    let mut out = Vec::with_capacity(n);
    for (s, e) in ranking.groups() {
        let r = tie_rank(s + 1, e, n);
        out.extend(ranking.order[s..e].iter().map(|&a| (a, r)));
    }
    out
}

/// Ranks of `user`'s deleted links; `None` when the user has none.
pub fn relative_ranks(split: &ProbeSplit, sa: &ScoreAssignment) -> Option<UserRanks> {
    let user = sa.user.index();
    if split.probe_degree(user) == 0 {
        return None;
    }
    let probe: Vec<u32> = split.probe_objects(user).collect();
    let ranking = rank_uncollected(sa);
    let n = ranking.len();
    let mut rows = Vec::with_capacity(probe.len());
    for (s, e) in ranking.groups() {
        for &a in &ranking.order[s..e] {
            if probe.binary_search(&a).is_ok() {
                rows.push(RankRow {
                    user: user as u32,
                    object: a,
                    rank: tie_rank(s + 1, e, n),
                    tie_size: e - s,
                });
            }
        }
    }
    rows.sort_unstable_by_key(|r| r.object);
    let zero_count = ranking
        .order
        .iter()
        .filter(|&&a| sa.scores[a as usize] <= 0.0)
        .count();
    Some(UserRanks {
        rows,
        zero_count,
        candidates: n,
    })
}

/// Mean relative rank over all deleted links.
pub fn recovery_r(rows: &[RankRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyProbe("no ranked probe links".into()));
    }
    Ok(rows.iter().map(|r| r.rank).sum::<f64>() / rows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub precision_enhancement: f64,
    pub recall_enhancement: f64,
}

/// Precision and recall of top-`len` lists and their enhancement over random
/// recommendation. `lists[i]` is user `i`'s list; only users with deleted
/// links are read.
pub fn precision_recall(split: &ProbeSplit, lists: &[Vec<u32>], len: usize) -> Result<PrecisionRecall> {
    if len == 0 {
        return Err(Error::InvalidParameter("list length must be >= 1".into()));
    }
    let d = split.probe_len();
    if d == 0 {
        return Err(Error::EmptyProbe("precision/recall need deleted links".into()));
    }
    let (mut p_sum, mut r_sum, mut count) = (0.0, 0.0, 0usize);
    for user in split.probe_users() {
        let hits = hit_count(split, user, &lists[user][..lists[user].len().min(len)]);
        p_sum += hits as f64 / len as f64;
        r_sum += hits as f64 / split.probe_degree(user) as f64;
        count += 1;
    }
    let precision = p_sum / count as f64;
    let recall = r_sum / count as f64;
    let g = &split.training;
    Ok(PrecisionRecall {
        precision,
        recall,
        precision_enhancement: precision * (g.objects() as f64 * g.users() as f64) / d as f64,
        recall_enhancement: recall * g.objects() as f64 / len as f64,
    })
}

fn hit_count(split: &ProbeSplit, user: usize, list: &[u32]) -> usize {
    let probe: Vec<u32> = split.probe_objects(user).collect();
    list.iter().filter(|a| probe.binary_search(a).is_ok()).count()
}

/// Personalization result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Personalization {
    pub h: f64,
    /// Number of user pairs in the population.
    pub pairs: u64,
    /// Number of sampled pairs, when sampling was used.
    pub sampled: Option<u64>,
    /// Standard error of the sampled estimate.
    pub std_err: Option<f64>,
}

/// Mean inter-list distance `1 - q_ij/len` over all pairs of `lists`.
///
/// The exact value is computed in O(Σ|list|) from per-object list counts:
/// the total overlap over all pairs is `Σ_α c_α (c_α - 1) / 2` where `c_α` is
/// the number of lists containing α. With `pair_budget = Some(b)` and more
/// than `b` pairs, `b` pairs are instead drawn uniformly with replacement.
pub fn personalization_h(
    lists: &[&[u32]],
    len: usize,
    pair_budget: Option<u64>,
    seed: u64,
) -> Result<Personalization> {
    if len == 0 {
        return Err(Error::InvalidParameter("list length must be >= 1".into()));
    }
    let n = lists.len() as u64;
    if n < 2 {
        return Err(Error::NotEnoughUsers(format!(
            "personalization needs >= 2 users, got {n}"
        )));
    }
    let pairs = n * (n - 1) / 2;
    match pair_budget {
        Some(budget) if budget > 0 && pairs > budget => Ok(sampled_h(lists, len, pairs, budget, seed)),
        _ => {
            let objects = lists
                .iter()
                .flat_map(|l| l.iter().take(len))
                .copied()
                .max()
                .map_or(0, |m| m as usize + 1);
            let mut counts = vec![0u64; objects];
            for l in lists {
                for &a in l.iter().take(len) {
                    counts[a as usize] += 1;
                }
            }
            let overlap: u64 = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
            Ok(Personalization {
                h: 1.0 - overlap as f64 / (pairs as f64 * len as f64),
                pairs,
                sampled: None,
                std_err: None,
            })
        }
    }
}

fn list_distance(a: &[u32], b: &[u32], len: usize) -> f64 {
    let a = &a[..a.len().min(len)];
    let b = &b[..b.len().min(len)];
    let common = a.iter().filter(|x| b.contains(x)).count();
    1.0 - common as f64 / len as f64
}

fn sampled_h(lists: &[&[u32]], len: usize, pairs: u64, budget: u64, seed: u64) -> Personalization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lists.len();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..budget {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let h = list_distance(lists[i], lists[j], len);
        sum += h;
        sq += h * h;
    }
    let m = budget as f64;
    let mean = sum / m;
    let var = if budget > 1 {
        ((sq - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Personalization {
        h: mean,
        pairs,
        sampled: Some(budget),
        std_err: Some((var / m).sqrt()),
    }
}

/// Surprisal result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surprisal {
    /// Mean over users of the mean `log2(u / k_α)` of their listed objects.
    pub mean: Option<f64>,
    pub users: usize,
    /// Users whose lists held only objects of training degree zero.
    pub skipped: usize,
}

/// Mean top-`len` self-information against training degrees. Objects with
/// degree zero have no defined surprisal and are left out.
pub fn surprisal_i(training: &BipartiteGraph, lists: &[&[u32]], len: usize) -> Surprisal {
    let u = training.users() as f64;
    let (mut sum, mut users, mut skipped) = (0.0, 0usize, 0usize);
    for l in lists {
        let (mut s, mut c) = (0.0, 0usize);
        for &a in l.iter().take(len) {
            let k = training.object_degree(a as usize);
            if k > 0 {
                s += (u / k as f64).log2();
                c += 1;
            }
        }
        if c == 0 {
            skipped += 1;
        } else {
            sum += s / c as f64;
            users += 1;
        }
    }
    Surprisal {
        mean: (users > 0).then(|| sum / users as f64),
        users,
        skipped,
    }
}

/// All metric values for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub lambda: Option<f64>,
    pub list_len: usize,
    pub seed: u64,
    pub averaging: AveragingMode,
    /// Mean relative rank of deleted links (lower is better).
    pub r: f64,
    pub precision: f64,
    pub recall: f64,
    pub e_p: f64,
    pub e_r: f64,
    /// Personalization; `None` with fewer than two eligible users.
    pub h: Option<f64>,
    /// Surprisal in bits; `None` when no eligible user had a scorable list.
    pub surprisal: Option<f64>,
    /// Users with at least one deleted link.
    pub probe_users: usize,
    /// Users entering the diversity averages.
    pub diversity_users: usize,
    pub surprisal_skipped: usize,
    /// Total deleted links D.
    pub probe_links: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl EvalReport {
    pub const TSV_COLUMNS: [&'static str; 16] = [
        "algorithm",
        "lambda",
        "L",
        "seed",
        "averaging",
        "r",
        "precision",
        "recall",
        "e_p",
        "e_r",
        "h",
        "surprisal",
        "probe_users",
        "diversity_users",
        "surprisal_skipped",
        "probe_links",
    ];

    pub fn tsv_header() -> String {
        Self::TSV_COLUMNS.join("\t")
    }

    pub fn tsv_row(&self) -> String {
        [
            self.algorithm.to_string(),
            fmt_opt(self.lambda),
            self.list_len.to_string(),
            self.seed.to_string(),
            self.averaging.to_string(),
            self.r.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.e_p.to_string(),
            self.e_r.to_string(),
            fmt_opt(self.h),
            fmt_opt(self.surprisal),
            self.probe_users.to_string(),
            self.diversity_users.to_string(),
            self.surprisal_skipped.to_string(),
            self.probe_links.to_string(),
        ]
        .join("\t")
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub list_len: usize,
    pub averaging: AveragingMode,
    /// See [`personalization_h`].
    pub pair_budget: Option<u64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            list_len: crate::DEFAULT_LIST_LEN,
            averaging: AveragingMode::ProbeUsers,
            pair_budget: None,
        }
    }
}

/// Per-user outcome of scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome {
    pub user: usize,
    pub ranks: Option<UserRanks>,
    pub list: Vec<u32>,
}

/// Scores every user of interest and returns their ranks and top lists, in
/// ascending user order.
pub fn score_users(split: &ProbeSplit, algorithm: Algorithm, list_len: usize, users: &[usize]) -> Result<Vec<UserOutcome>> {
    let scorer = Scorer::new(&split.training, algorithm)?;
    Ok(users
        .par_iter()
        .map_init(
            || scorer.scratch(),
            |scratch, &user| {
                let sa = scorer.score_with(user, scratch);
                let list = recommend(&sa, &split.training, list_len)
                    .into_iter()
                    .map(|(o, _)| o.0)
                    .collect();
                UserOutcome {
                    user,
                    ranks: relative_ranks(split, &sa),
                    list,
                }
            },
        )
        .collect())
}

/// Runs `algorithm` for every relevant user of `split` and computes all metrics.
pub fn evaluate(split: &ProbeSplit, algorithm: Algorithm, opts: EvalOptions) -> Result<EvalReport> {
    let len = opts.list_len;
    if len == 0 {
        return Err(Error::InvalidParameter("list length must be >= 1".into()));
    }
    let g = &split.training;
    let users: Vec<usize> = match opts.averaging {
        AveragingMode::ProbeUsers => split.probe_users(),
        AveragingMode::AllUsers => (0..g.users()).collect(),
    };
    let outcomes = score_users(split, algorithm, len, &users)?;

    let rows: Vec<RankRow> = outcomes
        .iter()
        .filter_map(|o| o.ranks.as_ref())
        .flat_map(|r| r.rows.iter().copied())
        .collect();
    let r = recovery_r(&rows)?;

    let mut lists = vec![Vec::new(); g.users()];
    for o in &outcomes {
        lists[o.user] = o.list.clone();
    }
    let pr = precision_recall(split, &lists, len)?;

    let eligible: Vec<&[u32]> = outcomes.iter().map(|o| o.list.as_slice()).collect();
    let h = match personalization_h(&eligible, len, opts.pair_budget, split.seed) {
        Ok(p) => Some(p.h),
        Err(Error::NotEnoughUsers(_)) => None,
        Err(e) => return Err(e),
    };
    let s = surprisal_i(g, &eligible, len);

    Ok(EvalReport {
        algorithm,
        lambda: algorithm.lambda(),
        list_len: len,
        seed: split.seed,
        averaging: opts.averaging,
        r,
        precision: pr.precision,
        recall: pr.recall,
        e_p: pr.precision_enhancement,
        e_r: pr.recall_enhancement,
        h,
        surprisal: s.mean,
        probe_users: split.probe_users().len(),
        diversity_users: eligible.len(),
        surprisal_skipped: s.skipped,
        probe_links: split.probe_len(),
    })
}
