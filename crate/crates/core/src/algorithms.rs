//! Per-user recommendation scores.
//!
//! HeatS, ProbS and their hybrids are evaluated as two matrix-free spreading
//! passes over the bipartite graph: objects send resource to their users,
//! users send it back to their objects. The only difference between the
//! variants is the degree weighting applied on the object send and on the
//! object receive:
//!
//! | algorithm | send weight of β | user weight of j | receive weight of α |
//! |-----------|------------------|------------------|---------------------|
//! | ProbS     | 1/k_β            | 1/k_j            | 1                   |
//! | HeatS     | 1                | 1/k_j            | 1/k_α               |
//! | hybrid λ  | k_β^(-λ)         | 1/k_j            | k_α^(-(1-λ))        |
//!
//! Nodes of degree zero neither send nor receive anything.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ObjectId, UserId};

/// Scores within `TIE_REL_TOL * max_score` of a neighbour are one tie group.
pub const TIE_REL_TOL: f64 = 1e-9;

/// The four stand-alone recommenders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    GRank,
    USim,
    ProbS,
    HeatS,
}

impl Base {
    pub const ALL: [Base; 4] = [Base::GRank, Base::USim, Base::ProbS, Base::HeatS];

    pub fn name(self) -> &'static str {
        match self {
            Base::GRank => "grank",
            Base::USim => "usim",
            Base::ProbS => "probs",
            Base::HeatS => "heats",
        }
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Base::ALL
            .into_iter()
            .find(|b| b.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}'")))
    }
}

/// How two recommenders are blended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum HybridVariant {
    /// `W_ab = k_a^-(1-λ) k_b^-λ Σ_j a_aj a_bj / k_j`.
    Eq6,
    /// `W'_ab = ((1-λ)/k_a + λ/k_b) Σ_j a_aj a_bj / k_j`.
    WPrime,
    /// `W''_ab = Σ_j a_aj a_bj / k_j / ((1-λ) k_a + λ k_b)`.
    WDoublePrime,
    /// `(1-λ) x/max(x) + λ y/max(y)`.
    Linear { x: Base, y: Base },
}

impl HybridVariant {
    fn prefix(&self) -> String {
        match self {
            HybridVariant::Eq6 => "hybrid-eq6".into(),
            HybridVariant::WPrime => "hybrid-wprime".into(),
            HybridVariant::WDoublePrime => "hybrid-wdoubleprime".into(),
            HybridVariant::Linear { x, y } => format!("linear-{}+{}", x.name(), y.name()),
        }
    }
}

impl fmt::Display for HybridVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.prefix())
    }
}

impl FromStr for HybridVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Ok(match s.as_str() {
            "hybrid-eq6" | "eq6" => HybridVariant::Eq6,
            "hybrid-wprime" | "wprime" | "w_prime" => HybridVariant::WPrime,
            "hybrid-wdoubleprime" | "wdoubleprime" | "w_doubleprime" => HybridVariant::WDoublePrime,
            other => {
                let pair = other
                    .strip_prefix("linear-")
                    .and_then(|p| p.split_once('+'))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown hybrid variant '{s}'")))?;
                HybridVariant::Linear {
                    x: pair.0.parse()?,
                    y: pair.1.parse()?,
                }
            }
        })
    }
}

impl From<HybridVariant> for String {
    fn from(v: HybridVariant) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for HybridVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSpec {
    pub variant: HybridVariant,
    pub lambda: f64,
}

impl HybridSpec {
    pub fn new(variant: HybridVariant, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(HybridSpec { variant, lambda })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")))
    }
}

/// A fully specified scorer.
///
/// Textual form: `grank`, `usim`, `probs`, `heats`, `hybrid-eq6:<λ>`,
/// `hybrid-wprime:<λ>`, `hybrid-wdoubleprime:<λ>`, `linear-<x>+<y>:<λ>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Algorithm {
    Base(Base),
    Hybrid(HybridSpec),
}

impl Algorithm {
    pub fn hybrid(variant: HybridVariant, lambda: f64) -> Result<Self> {
        Ok(Algorithm::Hybrid(HybridSpec::new(variant, lambda)?))
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Algorithm::Base(_) => None,
            Algorithm::Hybrid(h) => Some(h.lambda),
        }
    }

    /// Parses a name that may omit the `:<λ>` suffix, taking λ from `lambda`.
    pub fn parse_with_lambda(name: &str, lambda: Option<f64>) -> Result<Self> {
        if name.contains(':') {
            return name.parse();
        }
        if let Ok(b) = name.parse::<Base>() {
            return Ok(Algorithm::Base(b));
        }
        let variant: HybridVariant = name
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("unknown algorithm '{name}'")))?;
        let lambda = lambda
            .ok_or_else(|| Error::InvalidParameter(format!("'{name}' needs a lambda value")))?;
        Algorithm::hybrid(variant, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Base(_) => Ok(()),
            Algorithm::Hybrid(h) => check_lambda(h.lambda),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Base(b) => f.write_str(b.name()),
            Algorithm::Hybrid(h) => write!(f, "{}:{}", h.variant, h.lambda),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once(':') {
            None => Ok(Algorithm::Base(s.parse()?)),
            Some((name, lambda)) => {
                let lambda: f64 = lambda
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad lambda in '{s}'")))?;
                Algorithm::hybrid(name.parse()?, lambda)
            }
        }
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Scores of every object for one target user.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreAssignment {
    pub user: UserId,
    pub algorithm: Algorithm,
    pub scores: Vec<f64>,
    /// Objects already collected by the user in the graph the scores were
    /// computed on; never recommended.
    pub collected: Vec<u32>,
    /// Set by linear aggregation when both inputs were identically zero.
    pub degenerate: bool,
}

impl ScoreAssignment {
    pub fn is_collected(&self, object: u32) -> bool {
        self.collected.binary_search(&object).is_ok()
    }

    /// Uncollected objects, ascending.
    pub fn uncollected(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.scores.len() - self.collected.len());
        let mut c = self.collected.iter().peekable();
        for a in 0..self.scores.len() as u32 {
            if c.peek() == Some(&&a) {
                c.next();
            } else {
                out.push(a);
            }
        }
        out
    }
}

/// `k^exponent` for every degree `k` in `0..=max_degree`, with entry 0 unused
/// (set to 0). Exponents 0 and -1 are computed exactly.
fn degree_powers(max_degree: usize, exponent: f64) -> Vec<f64> {
    let mut table = Vec::with_capacity(max_degree + 1);
    table.push(0.0);
    for k in 1..=max_degree {
        let k = k as f64;
        table.push(if exponent == 0.0 {
            1.0
        } else if exponent == -1.0 {
            1.0 / k
        } else {
            k.powf(exponent)
        });
    }
    table
}

/// Send and receive weights for one two-pass spreading run, indexed by object degree.
#[derive(Debug, Clone)]
struct Weights {
    send: Vec<f64>,
    recv: Vec<f64>,
}

impl Weights {
    fn eq6(g: &BipartiteGraph, lambda: f64) -> Self {
        let kmax = g.max_object_degree();
        Weights {
            send: degree_powers(kmax, -lambda),
            recv: degree_powers(kmax, -(1.0 - lambda)),
        }
    }

    fn probs(g: &BipartiteGraph) -> Self {
        Self::eq6(g, 1.0)
    }

    fn heats(g: &BipartiteGraph) -> Self {
        Self::eq6(g, 0.0)
    }
}

/// Worker-local buffers reused across users.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    user_res: Vec<f64>,
    touched: Vec<u32>,
    aux: Vec<f64>,
}

impl Scratch {
    pub fn new(g: &BipartiteGraph) -> Self {
        Scratch {
            user_res: vec![0.0; g.users()],
            touched: Vec::new(),
            aux: Vec::new(),
        }
    }
}

/// Object→user pass. Fills `scratch.user_res` and `scratch.touched`
/// (first-touch order), weighting each collected object β by `send[k_β]`.
fn gather_users(g: &BipartiteGraph, user: usize, send: &[f64], scratch: &mut Scratch) {
    scratch.touched.clear();
    for &beta in g.user_objects(user) {
        let w = send[g.object_degree(beta as usize)];
        for &j in g.object_users(beta as usize) {
            let slot = &mut scratch.user_res[j as usize];
            if *slot == 0.0 {
                scratch.touched.push(j);
            }
            *slot += w;
        }
    }
}

/// Two-pass spreading with the given object weights; writes into `out`.
fn spread(g: &BipartiteGraph, user: usize, w: &Weights, scratch: &mut Scratch, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    gather_users(g, user, &w.send, scratch);
    for &j in &scratch.touched {
        let j = j as usize;
        let r = scratch.user_res[j] / g.user_degree(j) as f64;
        scratch.user_res[j] = 0.0;
        for &alpha in g.user_objects(j) {
            out[alpha as usize] += r;
        }
    }
    for (a, x) in out.iter_mut().enumerate() {
        if *x != 0.0 {
            *x *= w.recv[g.object_degree(a)];
        }
    }
}

/// W'' needs a normalization per (α, β) pair, so it walks every
/// β → j → α path of the target user explicitly.
fn spread_wdoubleprime(g: &BipartiteGraph, user: usize, lambda: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for &beta in g.user_objects(user) {
        let kb = g.object_degree(beta as usize) as f64;
        for &j in g.object_users(beta as usize) {
            let inv_kj = 1.0 / g.user_degree(j as usize) as f64;
            for &alpha in g.user_objects(j as usize) {
                let ka = g.object_degree(alpha as usize) as f64;
                out[alpha as usize] += inv_kj / ((1.0 - lambda) * ka + lambda * kb);
            }
        }
    }
}

fn usim_into(g: &BipartiteGraph, user: usize, include_self: bool, scratch: &mut Scratch, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let ki = g.user_degree(user);
    if ki == 0 {
        return;
    }
    // common-object counts
    let ones = vec![1.0; g.max_object_degree() + 1];
    gather_users(g, user, &ones, scratch);
    let mut denom = 0.0;
    for &j in &scratch.touched {
        let j = j as usize;
        let common = scratch.user_res[j];
        scratch.user_res[j] = 0.0;
        if j == user && !include_self {
            continue;
        }
        let s = common / ((ki * g.user_degree(j)) as f64).sqrt();
        denom += s;
        for &alpha in g.user_objects(j) {
            out[alpha as usize] += s;
        }
    }
    if denom > 0.0 {
        out.iter_mut().for_each(|x| *x /= denom);
    } else {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
}

fn grank_into(g: &BipartiteGraph, out: &mut [f64]) {
    for (a, x) in out.iter_mut().enumerate() {
        *x = g.object_degree(a) as f64;
    }
}

/// `(1-λ) x/max(x) + λ y/max(y)`; a term whose maximum is zero contributes
/// nothing. Returns true when both maxima are zero.
fn blend(x: &[f64], y: &[f64], lambda: f64, out: &mut [f64]) -> bool {
    let max = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    let (mx, my) = (max(x), max(y));
    let (cx, cy) = (
        if mx > 0.0 { (1.0 - lambda) / mx } else { 0.0 },
        if my > 0.0 { lambda / my } else { 0.0 },
    );
    for ((z, &a), &b) in out.iter_mut().zip(x).zip(y) {
        *z = cx * a + cy * b;
    }
    mx == 0.0 && my == 0.0
}

/// A scorer bound to one graph and algorithm, with degree-power tables
/// computed once per run.
#[derive(Debug, Clone)]
pub struct Scorer<'g> {
    graph: &'g BipartiteGraph,
    algorithm: Algorithm,
    weights: Option<Weights>,
    heats: Option<Weights>,
    probs: Option<Weights>,
}

impl<'g> Scorer<'g> {
    pub fn new(graph: &'g BipartiteGraph, algorithm: Algorithm) -> Result<Self> {
        algorithm.validate()?;
        let mut s = Scorer {
            graph,
            algorithm,
            weights: None,
            heats: None,
            probs: None,
        };
        let needs = |b: Base| match algorithm {
            Algorithm::Base(x) => x == b,
            Algorithm::Hybrid(HybridSpec {
                variant: HybridVariant::WPrime,
                ..
            }) => matches!(b, Base::HeatS | Base::ProbS),
            Algorithm::Hybrid(HybridSpec {
                variant: HybridVariant::Linear { x, y },
                ..
            }) => x == b || y == b,
            Algorithm::Hybrid(_) => false,
        };
        if needs(Base::HeatS) {
            s.heats = Some(Weights::heats(graph));
        }
        if needs(Base::ProbS) {
            s.probs = Some(Weights::probs(graph));
        }
        if let Algorithm::Hybrid(HybridSpec {
            variant: HybridVariant::Eq6,
            lambda,
        }) = algorithm
        {
            s.weights = Some(Weights::eq6(graph, lambda));
        }
        Ok(s)
    }

    pub fn graph(&self) -> &'g BipartiteGraph {
        self.graph
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self.graph)
    }

    fn base_into(&self, base: Base, user: usize, scratch: &mut Scratch, out: &mut [f64]) {
        let g = self.graph;
        match base {
            Base::GRank => grank_into(g, out),
            Base::USim => usim_into(g, user, true, scratch, out),
            Base::ProbS => spread(g, user, self.probs.as_ref().unwrap(), scratch, out),
            Base::HeatS => spread(g, user, self.heats.as_ref().unwrap(), scratch, out),
        }
    }

    /// Writes the scores of every object into `out` (length = object count).
    /// Returns the degenerate flag of linear aggregation.
    pub fn score_into(&self, user: usize, scratch: &mut Scratch, out: &mut [f64]) -> bool {
        debug_assert_eq!(out.len(), self.graph.objects());
        match self.algorithm {
            Algorithm::Base(b) => self.base_into(b, user, scratch, out),
            Algorithm::Hybrid(HybridSpec { variant, lambda }) => match variant {
                HybridVariant::Eq6 => spread(self.graph, user, self.weights.as_ref().unwrap(), scratch, out),
                HybridVariant::WPrime => {
                    let mut p = std::mem::take(&mut scratch.aux);
                    p.resize(out.len(), 0.0);
                    self.base_into(Base::HeatS, user, scratch, out);
                    self.base_into(Base::ProbS, user, scratch, &mut p);
                    for (h, &p) in out.iter_mut().zip(&p) {
                        *h = (1.0 - lambda) * *h + lambda * p;
                    }
                    scratch.aux = p;
                }
                HybridVariant::WDoublePrime => spread_wdoubleprime(self.graph, user, lambda, out),
                HybridVariant::Linear { x, y } => {
                    let mut xs = vec![0.0; out.len()];
                    let mut ys = vec![0.0; out.len()];
                    self.base_into(x, user, scratch, &mut xs);
                    self.base_into(y, user, scratch, &mut ys);
                    return blend(&xs, &ys, lambda, out);
                }
            },
        }
        false
    }

    pub fn score_with(&self, user: usize, scratch: &mut Scratch) -> ScoreAssignment {
        let mut scores = vec![0.0; self.graph.objects()];
        let degenerate = self.score_into(user, scratch, &mut scores);
        ScoreAssignment {
            user: UserId(user as u32),
            algorithm: self.algorithm,
            scores,
            collected: self.graph.user_objects(user).to_vec(),
            degenerate,
        }
    }

    pub fn score(&self, user: usize) -> ScoreAssignment {
        self.score_with(user, &mut self.scratch())
    }
}

fn score_one(g: &BipartiteGraph, user: usize, algorithm: Algorithm) -> ScoreAssignment {
    Scorer::new(g, algorithm)
        .expect("base algorithms are always valid")
        .score(user)
}

/// ProbS: resource spreads like a random walk and is conserved.
pub fn probs_scores(g: &BipartiteGraph, user: usize) -> ScoreAssignment {
    score_one(g, user, Algorithm::Base(Base::ProbS))
}

/// HeatS: each pass averages over neighbours.
pub fn heats_scores(g: &BipartiteGraph, user: usize) -> ScoreAssignment {
    score_one(g, user, Algorithm::Base(Base::HeatS))
}

/// Degree popularity of every object, identical for all users.
pub fn grank_scores(g: &BipartiteGraph, user: usize) -> ScoreAssignment {
    score_one(g, user, Algorithm::Base(Base::GRank))
}

/// Cosine user-similarity scores, with the target user included in both sums.
pub fn usim_scores(g: &BipartiteGraph, user: usize) -> ScoreAssignment {
    score_one(g, user, Algorithm::Base(Base::USim))
}

/// USim with the target user left out of both sums. Only the scale differs
/// from [`usim_scores`], so rankings coincide.
pub fn usim_scores_excluding_self(g: &BipartiteGraph, user: usize) -> ScoreAssignment {
    let mut sa = usim_scores(g, user);
    usim_into(g, user, false, &mut Scratch::new(g), &mut sa.scores);
    sa
}

/// HeatS+ProbS hybrid with degree exponents interpolated by λ.
pub fn hybrid_scores(g: &BipartiteGraph, user: usize, lambda: f64) -> Result<ScoreAssignment> {
    Ok(Scorer::new(g, Algorithm::hybrid(HybridVariant::Eq6, lambda)?)?.score(user))
}

/// The W' and W'' alternative hybrids.
pub fn hybrid_alt_scores(g: &BipartiteGraph, user: usize, variant: HybridVariant, lambda: f64) -> Result<ScoreAssignment> {
    if !matches!(variant, HybridVariant::WPrime | HybridVariant::WDoublePrime) {
        return Err(Error::InvalidParameter(format!("{variant} is not an alternative hybrid")));
    }
    Ok(Scorer::new(g, Algorithm::hybrid(variant, lambda)?)?.score(user))
}

/// Weighted linear aggregation of two score assignments for the same user.
pub fn linear_hybrid(x: &ScoreAssignment, y: &ScoreAssignment, lambda: f64) -> Result<ScoreAssignment> {
    check_lambda(lambda)?;
    if x.user != y.user || x.scores.len() != y.scores.len() {
        return Err(Error::InvalidParameter(
            "linear aggregation needs assignments for the same user and object set".into(),
        ));
    }
    let mut scores = vec![0.0; x.scores.len()];
    let degenerate = blend(&x.scores, &y.scores, lambda, &mut scores);
    let algorithm = match (x.algorithm, y.algorithm) {
        (Algorithm::Base(a), Algorithm::Base(b)) => Algorithm::hybrid(HybridVariant::Linear { x: a, y: b }, lambda)?,
        _ => x.algorithm,
    };
    Ok(ScoreAssignment {
        user: x.user,
        algorithm,
        scores,
        collected: x.collected.clone(),
        degenerate,
    })
}

/// Uncollected objects in rank order, partitioned into tie groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Objects by descending score; ascending id within a tie group.
    pub order: Vec<u32>,
    /// Exclusive end index in `order` of each tie group.
    pub group_ends: Vec<usize>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `(start, end)` index ranges of the tie groups.
    pub fn groups(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.group_ends.iter().copied());
        starts.zip(self.group_ends.iter().copied())
    }
}

/// Sorts `candidates` by score and groups ties.
///
/// Two neighbouring scores tie when they differ by at most
/// [`TIE_REL_TOL`] times the largest candidate score.
pub fn rank_candidates(scores: &[f64], candidates: &[u32]) -> Ranking {
    let mut order = candidates.to_vec();
    order.sort_unstable_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let tol = TIE_REL_TOL * order.first().map_or(0.0, |&a| scores[a as usize]);
    let mut group_ends = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        let split = i == order.len() || scores[order[i - 1] as usize] - scores[order[i] as usize] > tol;
        if split {
            order[start..i].sort_unstable();
            group_ends.push(i);
            start = i;
        }
    }
    Ranking { order, group_ends }
}

pub fn rank_uncollected(sa: &ScoreAssignment) -> Ranking {
    rank_candidates(&sa.scores, &sa.uncollected())
}

/// Top-`len` uncollected objects.
///
/// Positive scores come first in rank order (ties by ascending id). If fewer
/// than `len` objects score above zero the list is padded with zero-score
/// objects by descending degree in `g`, then ascending id.
pub fn recommend(sa: &ScoreAssignment, g: &BipartiteGraph, len: usize) -> Vec<(ObjectId, f64)> {
    let ranking = rank_uncollected(sa);
    let mut out: Vec<(ObjectId, f64)> = ranking
        .order
        .iter()
        .filter(|&&a| sa.scores[a as usize] > 0.0)
        .take(len)
        .map(|&a| (ObjectId(a), sa.scores[a as usize]))
        .collect();
    if out.len() < len {
        let mut zeros: Vec<u32> = ranking
            .order
            .iter()
            .copied()
            .filter(|&a| sa.scores[a as usize] <= 0.0)
            .collect();
        zeros.sort_unstable_by(|&a, &b| {
            g.object_degree(b as usize)
                .cmp(&g.object_degree(a as usize))
                .then(a.cmp(&b))
        });
        let need = len - out.len();
        out.extend(zeros.into_iter().take(need).map(|a| (ObjectId(a), sa.scores[a as usize])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::g0;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn probs_g0() {
        let sa = probs_scores(&g0(), 0);
        assert!(close(&sa.scores, &[0.75, 1.0, 0.25, 0.0], 1e-15));
        assert_eq!(sa.scores.iter().sum::<f64>(), 2.0);
        assert_eq!(sa.collected, vec![0, 1]);
    }

    #[test]
    fn heats_g0() {
        let sa = heats_scores(&g0(), 0);
        assert!(close(&sa.scores, &[1.0, 0.75, 0.25, 0.0], 1e-15));
        let middle = heats_scores(&g0(), 1);
        assert!(close(&middle.scores, &[0.5, 0.75, 0.75, 0.5], 1e-15));
        assert_eq!(middle.scores.iter().sum::<f64>(), 2.5);
    }

    #[test]
    fn heats_single_link() {
        let g = BipartiteGraph::build(&[(0, 0)], 2, 3).unwrap();
        assert_eq!(heats_scores(&g, 0).scores, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_profile_scores_zero() {
        let g = BipartiteGraph::build(&[(0, 0), (0, 1)], 2, 2).unwrap();
        for alg in ["probs", "heats", "usim", "hybrid-eq6:0.3", "hybrid-wprime:0.3", "hybrid-wdoubleprime:0.3"] {
            let sa = Scorer::new(&g, alg.parse().unwrap()).unwrap().score(1);
            assert_eq!(sa.scores, vec![0.0, 0.0], "{alg}");
        }
    }

    #[test]
    fn eq6_g0_half() {
        let sa = hybrid_scores(&g0(), 0, 0.5).unwrap();
        let expected = 0.5 + 0.5 / 2f64.sqrt();
        assert!(close(&sa.scores, &[expected, expected, 0.25, 0.0], 1e-12));
        assert!((expected - 0.85355).abs() < 1e-5);
    }

    #[test]
    fn eq6_endpoints_are_bit_identical() {
        let g = g0();
        for u in 0..3 {
            assert_eq!(hybrid_scores(&g, u, 0.0).unwrap().scores, heats_scores(&g, u).scores);
            assert_eq!(hybrid_scores(&g, u, 1.0).unwrap().scores, probs_scores(&g, u).scores);
        }
        assert!(hybrid_scores(&g, 0, 1.5).is_err());
        assert!(hybrid_scores(&g, 0, -0.1).is_err());
    }

    #[test]
    fn wprime_is_linear_mix() {
        let sa = hybrid_alt_scores(&g0(), 0, HybridVariant::WPrime, 0.5).unwrap();
        assert!(close(&sa.scores, &[0.875, 0.875, 0.25, 0.0], 1e-15));
    }

    #[test]
    fn wdoubleprime_g0_entry() {
        let sa = hybrid_alt_scores(&g0(), 0, HybridVariant::WDoublePrime, 0.5).unwrap();
        assert!((sa.scores[2] - 0.25).abs() < 1e-15);
        assert_eq!(sa.scores[3], 0.0);
        assert!(hybrid_alt_scores(&g0(), 0, HybridVariant::Eq6, 0.5).is_err());
    }

    #[test]
    fn grank_is_user_independent() {
        let g = g0();
        let a = grank_scores(&g, 0);
        let b = grank_scores(&g, 2);
        assert_eq!(a.scores, b.scores);
        assert_ne!(a.collected, b.collected);
        assert_eq!(a.scores[2], 2.0);
        assert_eq!(a.scores[3], 1.0);
        let empty = BipartiteGraph::build(&[], 1, 3).unwrap();
        assert_eq!(grank_scores(&empty, 0).scores, vec![0.0; 3]);
    }

    #[test]
    fn usim_g0() {
        let sa = usim_scores(&g0(), 0);
        assert!((sa.scores[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sa.scores[3], 0.0);
        // without the self term only U2 contributes
        let ex = usim_scores_excluding_self(&g0(), 0);
        assert!((ex.scores[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn usim_identical_profiles() {
        let g = BipartiteGraph::build(&[(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)], 3, 3).unwrap();
        let twins = BipartiteGraph::build(&[(0, 0), (0, 1), (1, 0), (1, 1)], 2, 3).unwrap();
        // s_01 = 1, s_00 = 1 → v(O) = 1 for both shared objects
        assert_eq!(usim_scores(&twins, 0).scores, vec![1.0, 1.0, 0.0]);
        let sa = usim_scores(&g, 0);
        let s01 = 2.0 / (2.0f64 * 3.0).sqrt();
        assert!((sa.scores[2] - s01 / (1.0 + s01)).abs() < 1e-15);
    }

    #[test]
    fn linear_blend() {
        let mk = |s: Vec<f64>, b| ScoreAssignment {
            user: UserId(0),
            algorithm: Algorithm::Base(b),
            scores: s,
            collected: vec![],
            degenerate: false,
        };
        let x = mk(vec![2.0, 4.0], Base::GRank);
        let y = mk(vec![1.0, 0.0], Base::ProbS);
        let z = linear_hybrid(&x, &y, 0.5).unwrap();
        assert_eq!(z.scores, vec![0.75, 0.5]);
        assert_eq!(z.algorithm.to_string(), "linear-grank+probs:0.5");
        assert!(!z.degenerate);

        let z0 = linear_hybrid(&x, &y, 0.0).unwrap();
        assert_eq!(z0.scores, vec![0.5, 1.0]);

        let zero = mk(vec![0.0, 0.0], Base::HeatS);
        let d = linear_hybrid(&zero, &zero, 0.3).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.scores, vec![0.0, 0.0]);
        // a zero-max term contributes nothing
        assert_eq!(linear_hybrid(&x, &zero, 0.5).unwrap().scores, vec![0.25, 0.5]);
    }

    #[test]
    fn linear_scorer_matches_manual_blend() {
        let g = g0();
        let alg: Algorithm = "linear-grank+probs:0.2".parse().unwrap();
        let z = Scorer::new(&g, alg).unwrap().score(0);
        let manual = linear_hybrid(&grank_scores(&g, 0), &probs_scores(&g, 0), 0.2).unwrap();
        assert_eq!(z, manual);
    }

    #[test]
    fn recommend_g0() {
        let g = g0();
        let list = recommend(&probs_scores(&g, 0), &g, 2);
        assert_eq!(list, vec![(ObjectId(2), 0.25), (ObjectId(3), 0.0)]);
        let full = recommend(&probs_scores(&g, 0), &g, 10);
        assert_eq!(full.len(), 2);
    }

    #[test]
    fn recommend_pads_by_degree() {
        // user 0 has nothing; objects 2 (deg 2) then 1 (deg 1) then 0, 3 (deg 0)
        let g = BipartiteGraph::build(&[(1, 2), (2, 2), (1, 1)], 3, 4).unwrap();
        let list = recommend(&probs_scores(&g, 0), &g, 4);
        let ids: Vec<u32> = list.iter().map(|(o, _)| o.0).collect();
        assert_eq!(ids, vec![2, 1, 0, 3]);
    }

    #[test]
    fn ranking_ties() {
        let scores = [0.5, 0.5 + 1e-13, 0.2, 0.0, 0.0];
        let r = rank_candidates(&scores, &[0, 1, 2, 3, 4]);
        assert_eq!(r.order, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.group_ends, vec![2, 3, 5]);
        assert_eq!(r.groups().collect::<Vec<_>>(), vec![(0, 2), (2, 3), (3, 5)]);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for s in [
            "grank",
            "usim",
            "probs",
            "heats",
            "hybrid-eq6:0.25",
            "hybrid-wprime:1",
            "hybrid-wdoubleprime:0",
            "linear-heats+usim:0.7",
        ] {
            let a: Algorithm = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Algorithm>(&json).unwrap(), a);
        }
        assert!("hybrid-eq6:2".parse::<Algorithm>().is_err());
        assert!("bogus".parse::<Algorithm>().is_err());
        assert_eq!(
            Algorithm::parse_with_lambda("hybrid-eq6", Some(1.0)).unwrap().to_string(),
            "hybrid-eq6:1"
        );
        assert!(Algorithm::parse_with_lambda("hybrid-eq6", None).is_err());
    }
}
