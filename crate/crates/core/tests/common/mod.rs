//! Dense-matrix and brute-force reference implementations used as oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spreadrec::algorithms::{recommend, ScoreAssignment, TIE_REL_TOL};
use spreadrec::{BipartiteGraph, ProbeSplit, SplitMethod};

pub type Dense = Vec<Vec<f64>>;

/// Random graph with up to `max_u` users and `max_o` objects and a density
/// drawn per graph.
pub fn random_graph(rng: &mut ChaCha8Rng, max_u: usize, max_o: usize) -> BipartiteGraph {
    let u = rng.gen_range(1..=max_u);
    let o = rng.gen_range(1..=max_o);
    let density = [0.03, 0.1, 0.25, 0.5, 0.9][rng.gen_range(0..5)];
    let mut links = Vec::new();
    for i in 0..u as u32 {
        for a in 0..o as u32 {
            if rng.gen_bool(density) {
                links.push((i, a));
            }
        }
    }
    BipartiteGraph::build(&links, u, o).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `a[i][α]`.
pub fn adjacency(g: &BipartiteGraph) -> Dense {
    let mut a = vec![vec![0.0; g.objects()]; g.users()];
    for (i, o) in g.edges() {
        a[i as usize][o as usize] = 1.0;
    }
    a
}

fn degrees(a: &Dense, objects: usize) -> (Vec<f64>, Vec<f64>) {
    let ku: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let ko: Vec<f64> = (0..objects).map(|o| a.iter().map(|r| r[o]).sum()).collect();
    (ku, ko)
}

/// `Σ_j a_jα a_jβ / k_j`.
fn co_weights(a: &Dense, objects: usize) -> Dense {
    let (ku, _) = degrees(a, objects);
    let mut c = vec![vec![0.0; objects]; objects];
    for (j, row) in a.iter().enumerate() {
        if ku[j] == 0.0 {
            continue;
        }
        for al in 0..objects {
            if row[al] == 0.0 {
                continue;
            }
            for be in 0..objects {
                c[al][be] += row[al] * row[be] / ku[j];
            }
        }
    }
    c
}

/// `W_αβ = norm(k_α, k_β) · Σ_j a_jα a_jβ / k_j`, with zero rows and
/// columns for degree-zero objects.
fn transition(g: &BipartiteGraph, norm: impl Fn(f64, f64) -> f64) -> Dense {
    let a = adjacency(g);
    let o = g.objects();
    let (_, ko) = degrees(&a, o);
    let c = co_weights(&a, o);
    let mut w = vec![vec![0.0; o]; o];
    for al in 0..o {
        for be in 0..o {
            if ko[al] > 0.0 && ko[be] > 0.0 {
                w[al][be] = norm(ko[al], ko[be]) * c[al][be];
            }
        }
    }
    w
}

pub fn w_heats(g: &BipartiteGraph) -> Dense {
    transition(g, |ka, _| 1.0 / ka)
}

pub fn w_probs(g: &BipartiteGraph) -> Dense {
    transition(g, |_, kb| 1.0 / kb)
}

pub fn w_eq6(g: &BipartiteGraph, lambda: f64) -> Dense {
    transition(g, |ka, kb| 1.0 / (ka.powf(1.0 - lambda) * kb.powf(lambda)))
}

pub fn w_prime(g: &BipartiteGraph, lambda: f64) -> Dense {
    transition(g, |ka, kb| (1.0 - lambda) / ka + lambda / kb)
}

pub fn w_double_prime(g: &BipartiteGraph, lambda: f64) -> Dense {
    transition(g, |ka, kb| 1.0 / ((1.0 - lambda) * ka + lambda * kb))
}

pub fn transpose(w: &Dense) -> Dense {
    let n = w.len();
    (0..n).map(|i| (0..n).map(|j| w[j][i]).collect()).collect()
}

/// `W f` with `f_β = a_iβ`.
pub fn apply(w: &Dense, g: &BipartiteGraph, user: usize) -> Vec<f64> {
    let a = adjacency(g);
    w.iter()
        .map(|row| row.iter().zip(&a[user]).map(|(x, f)| x * f).sum())
        .collect()
}

/// Cosine-similarity user scores with the target user included in the sums.
pub fn usim_dense(g: &BipartiteGraph, user: usize, include_self: bool) -> Vec<f64> {
    let a = adjacency(g);
    let (ku, _) = degrees(&a, g.objects());
    let sim: Vec<f64> = (0..g.users())
        .map(|j| {
            if ku[user] == 0.0 || ku[j] == 0.0 || (!include_self && j == user) {
                return 0.0;
            }
            let common: f64 = a[user].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
            common / (ku[user] * ku[j]).sqrt()
        })
        .collect();
    let total: f64 = sim.iter().sum();
    (0..g.objects())
        .map(|al| {
            if total == 0.0 {
                0.0
            } else {
                (0..g.users()).map(|j| sim[j] * a[j][al]).sum::<f64>() / total
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A random split with at least one deleted link, or `None` for graphs too
/// small to split.
pub fn random_split(g: &BipartiteGraph, seed: u64) -> Option<ProbeSplit> {
    if g.links() < 2 {
        return None;
    }
    spreadrec::ingest::split(g, &SplitMethod::Random { fraction: 0.25 }, seed).ok()
}

/// Tie groups by pairwise comparison: two uncollected objects share a group
/// when a chain of neighbours within tolerance connects them.
pub fn tie_components(sa: &ScoreAssignment) -> Vec<usize> {
    let cand = sa.uncollected();
    let max = cand.iter().map(|&a| sa.scores[a as usize]).fold(0.0, f64::max);
    let tol = TIE_REL_TOL * max;
    let n = cand.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    // Neighbours in sorted order decide single linkage, so compare every pair
    // with nothing strictly between them.
    for x in 0..n {
        for y in 0..n {
            let (sx, sy) = (sa.scores[cand[x] as usize], sa.scores[cand[y] as usize]);
            if sx < sy || x == y {
                continue;
            }
            let between = (0..n).any(|z| {
                let s = sa.scores[cand[z] as usize];
                z != x && z != y && s < sx && s > sy
            });
            if !between && sx - sy <= tol {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
    }
    let mut comp = vec![0; sa.scores.len()];
    for x in 0..n {
        comp[cand[x] as usize] = find(&mut parent, x);
    }
    comp
}

/// Relative rank of an uncollected object from first principles.
pub fn naive_rank(sa: &ScoreAssignment, comp: &[usize], object: u32) -> f64 {
    let cand = sa.uncollected();
    let s = sa.scores[object as usize];
    let c = comp[object as usize];
    let above = cand
        .iter()
        .filter(|&&b| comp[b as usize] != c && sa.scores[b as usize] > s)
        .count();
    let same = cand.iter().filter(|&&b| comp[b as usize] == c).count();
    let p1 = above + 1;
    let p2 = above + same;
    ((p1 + p2) as f64 * 0.5) / cand.len() as f64
}

/// Top list: positive scores by tie group then id, then zero scores by
/// degree and id.
pub fn naive_top(sa: &ScoreAssignment, comp: &[usize], g: &BipartiteGraph, len: usize) -> Vec<u32> {
    let cand = sa.uncollected();
    let group_max = |a: u32| {
        cand.iter()
            .filter(|&&b| comp[b as usize] == comp[a as usize])
            .map(|&b| sa.scores[b as usize])
            .fold(f64::MIN, f64::max)
    };
    let mut pos: Vec<u32> = cand.iter().copied().filter(|&a| sa.scores[a as usize] > 0.0).collect();
    pos.sort_by(|&a, &b| group_max(b).partial_cmp(&group_max(a)).unwrap().then(a.cmp(&b)));
    let mut zero: Vec<u32> = cand.iter().copied().filter(|&a| sa.scores[a as usize] <= 0.0).collect();
    zero.sort_by(|&a, &b| g.object_degree(b as usize).cmp(&g.object_degree(a as usize)).then(a.cmp(&b)));
    pos.into_iter().chain(zero).take(len).collect()
}

/// Checks [`naive_top`] against the library on the same assignment.
pub fn lists_agree(sa: &ScoreAssignment, g: &BipartiteGraph, len: usize) -> bool {
    let comp = tie_components(sa);
    let lib: Vec<u32> = recommend(sa, g, len).into_iter().map(|(o, _)| o.0).collect();
    lib == naive_top(sa, &comp, g, len)
}

/// All metric values computed naively.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveMetrics {
    pub r: f64,
    pub precision: f64,
    pub recall: f64,
    pub e_p: f64,
    pub e_r: f64,
    /// Total common objects over all pairs of lists.
    pub overlap: u64,
    pub h: Option<f64>,
    pub surprisal: Option<f64>,
}

pub fn naive_metrics(split: &ProbeSplit, assignments: &[ScoreAssignment], all_users: bool, len: usize) -> NaiveMetrics {
    let g = &split.training;
    let (u, o) = (g.users() as f64, g.objects() as f64);
    let mut rank_sum = 0.0;
    let mut rank_n = 0usize;
    let (mut p_sum, mut r_sum, mut pr_users) = (0.0, 0.0, 0usize);
    let mut lists: Vec<Vec<u32>> = Vec::new();
    for sa in assignments {
        let i = sa.user.index();
        let probe: Vec<u32> = split.probe().iter().filter(|l| l.0 as usize == i).map(|l| l.1).collect();
        if !all_users && probe.is_empty() {
            continue;
        }
        let comp = tie_components(sa);
        let top = naive_top(sa, &comp, g, len);
        if !probe.is_empty() {
            for &a in &probe {
                rank_sum += naive_rank(sa, &comp, a);
                rank_n += 1;
            }
            let hits = top.iter().filter(|a| probe.contains(a)).count() as f64;
            p_sum += hits / len as f64;
            r_sum += hits / probe.len() as f64;
            pr_users += 1;
        }
        lists.push(top);
    }
    let d = split.probe_len() as f64;
    let precision = p_sum / pr_users as f64;
    let recall = r_sum / pr_users as f64;

    let mut overlap = 0u64;
    let mut h_sum = 0.0;
    let mut pairs = 0u64;
    for x in 0..lists.len() {
        for y in x + 1..lists.len() {
            let q = lists[x].iter().filter(|a| lists[y].contains(a)).count();
            overlap += q as u64;
            h_sum += 1.0 - q as f64 / len as f64;
            pairs += 1;
        }
    }
    let mut s_sum = 0.0;
    let mut s_users = 0usize;
    for l in &lists {
        let ks: Vec<f64> = l
            .iter()
            .map(|&a| g.object_degree(a as usize) as f64)
            .filter(|&k| k > 0.0)
            .collect();
        if !ks.is_empty() {
            s_sum += ks.iter().map(|k| (u / k).log2()).sum::<f64>() / ks.len() as f64;
            s_users += 1;
        }
    }
    NaiveMetrics {
        r: rank_sum / rank_n as f64,
        precision,
        recall,
        e_p: precision * (o * u) / d,
        e_r: recall * o / len as f64,
        overlap,
        h: (pairs > 0).then(|| h_sum / pairs as f64),
        surprisal: (s_users > 0).then(|| s_sum / s_users as f64),
    }
}

/// Path to the bundled MovieLens 100k ratings.
pub fn movielens_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data")
}
