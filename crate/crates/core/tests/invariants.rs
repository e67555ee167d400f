mod common;

use common::*;
use proptest::prelude::*;
use spreadrec::algorithms::{
    grank_scores, heats_scores, hybrid_alt_scores, hybrid_scores, linear_hybrid, probs_scores, rank_uncollected,
    usim_scores, usim_scores_excluding_self, Base, ScoreAssignment, Scorer,
};
use spreadrec::metrics::{evaluate, ranks_of_uncollected, AveragingMode, EvalOptions};
use spreadrec::{Algorithm, BipartiteGraph, HybridVariant};

fn graph_strategy(max_u: usize, max_o: usize) -> impl Strategy<Value = BipartiteGraph> {
    (1..=max_u, 1..=max_o, 0.05f64..0.9).prop_flat_map(|(u, o, p)| {
        proptest::collection::vec(proptest::bool::weighted(p), u * o).prop_map(move |bits| {
            let links: Vec<(u32, u32)> = bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(k, _)| ((k / o) as u32, (k % o) as u32))
                .collect();
            BipartiteGraph::build(&links, u, o).unwrap()
        })
    })
}

fn all_algorithms(lambda: f64) -> Vec<Algorithm> {
    let mut v: Vec<Algorithm> = Base::ALL.iter().map(|&b| Algorithm::Base(b)).collect();
    for variant in [
        HybridVariant::Eq6,
        HybridVariant::WPrime,
        HybridVariant::WDoublePrime,
        HybridVariant::Linear { x: Base::HeatS, y: Base::ProbS },
        HybridVariant::Linear { x: Base::ProbS, y: Base::GRank },
    ] {
        v.push(Algorithm::hybrid(variant, lambda).unwrap());
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spreading_matches_dense_products(g in graph_strategy(12, 12), lambda in 0.0f64..=1.0) {
        let (wh, wp) = (w_heats(&g), w_probs(&g));
        let (we, w1, w2) = (w_eq6(&g, lambda), w_prime(&g, lambda), w_double_prime(&g, lambda));
        for i in 0..g.users() {
            prop_assert!(max_abs_diff(&heats_scores(&g, i).scores, &apply(&wh, &g, i)) <= 1e-10);
            prop_assert!(max_abs_diff(&probs_scores(&g, i).scores, &apply(&wp, &g, i)) <= 1e-10);
            prop_assert!(max_abs_diff(&hybrid_scores(&g, i, lambda).unwrap().scores, &apply(&we, &g, i)) <= 1e-10);
            let wp_scores = hybrid_alt_scores(&g, i, HybridVariant::WPrime, lambda).unwrap().scores;
            prop_assert!(max_abs_diff(&wp_scores, &apply(&w1, &g, i)) <= 1e-10);
            let wpp_scores = hybrid_alt_scores(&g, i, HybridVariant::WDoublePrime, lambda).unwrap().scores;
            prop_assert!(max_abs_diff(&wpp_scores, &apply(&w2, &g, i)) <= 1e-10);
            prop_assert!(max_abs_diff(&usim_scores(&g, i).scores, &usim_dense(&g, i, true)) <= 1e-12);
        }
    }

    #[test]
    fn probs_is_heats_transposed(g in graph_strategy(15, 15)) {
        let (wh, wp) = (w_heats(&g), w_probs(&g));
        prop_assert_eq!(transpose(&wh), wp);
    }

    #[test]
    fn probs_conserves_resource(g in graph_strategy(20, 20)) {
        for i in 0..g.users() {
            let total: f64 = probs_scores(&g, i).scores.iter().sum();
            prop_assert!((total - g.user_degree(i) as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn hybrid_endpoints(g in graph_strategy(15, 15)) {
        for i in 0..g.users() {
            let heats = heats_scores(&g, i).scores;
            let probs = probs_scores(&g, i).scores;
            prop_assert_eq!(&hybrid_scores(&g, i, 0.0).unwrap().scores, &heats);
            prop_assert_eq!(&hybrid_scores(&g, i, 1.0).unwrap().scores, &probs);
            for v in [HybridVariant::WPrime, HybridVariant::WDoublePrime] {
                prop_assert!(max_abs_diff(&hybrid_alt_scores(&g, i, v, 0.0).unwrap().scores, &heats) <= 1e-10);
                prop_assert!(max_abs_diff(&hybrid_alt_scores(&g, i, v, 1.0).unwrap().scores, &probs) <= 1e-10);
            }
        }
    }

    #[test]
    fn usim_self_term_keeps_ranking(g in graph_strategy(15, 15)) {
        for i in 0..g.users() {
            let with = usim_scores(&g, i);
            let without = usim_scores_excluding_self(&g, i);
            prop_assert!(max_abs_diff(&without.scores, &usim_dense(&g, i, false)) <= 1e-12);
            prop_assert_eq!(rank_uncollected(&with), rank_uncollected(&without));
        }
    }

    #[test]
    fn scores_nonnegative_and_finite(g in graph_strategy(15, 15), lambda in 0.0f64..=1.0) {
        for alg in all_algorithms(lambda) {
            let scorer = Scorer::new(&g, alg).unwrap();
            for i in 0..g.users() {
                let sa = scorer.score(i);
                prop_assert!(sa.scores.iter().all(|s| s.is_finite() && *s >= 0.0), "{alg} user {i}");
            }
        }
    }

    #[test]
    fn grank_ignores_user(g in graph_strategy(15, 15)) {
        let first = grank_scores(&g, 0).scores;
        for i in 1..g.users() {
            prop_assert_eq!(&grank_scores(&g, i).scores, &first);
        }
    }

    #[test]
    fn linear_blend_endpoints_rank_like_inputs(g in graph_strategy(12, 12)) {
        for i in 0..g.users() {
            let x = heats_scores(&g, i);
            let y = probs_scores(&g, i);
            let z0 = linear_hybrid(&x, &y, 0.0).unwrap();
            let z1 = linear_hybrid(&x, &y, 1.0).unwrap();
            prop_assert_eq!(rank_uncollected(&z0).order, rank_uncollected(&x).order);
            prop_assert_eq!(rank_uncollected(&z1).order, rank_uncollected(&y).order);
        }
    }

    #[test]
    fn rank_mass_is_conserved(g in graph_strategy(20, 20)) {
        for i in 0..g.users() {
            let sa = heats_scores(&g, i);
            let ranks = ranks_of_uncollected(&sa);
            if ranks.is_empty() {
                continue;
            }
            let n = ranks.len() as f64;
            let mean = ranks.iter().map(|r| r.1).sum::<f64>() / n;
            prop_assert!((mean - 0.5 * (1.0 + 1.0 / n)).abs() <= 1e-12);
            prop_assert!(ranks.iter().all(|r| r.1 > 0.0 && r.1 <= 1.0));
        }
    }

    #[test]
    fn top_lists_match_naive_ordering(g in graph_strategy(15, 20), len in 1usize..8) {
        for alg in all_algorithms(0.4) {
            let scorer = Scorer::new(&g, alg).unwrap();
            for i in 0..g.users() {
                prop_assert!(lists_agree(&scorer.score(i), &g, len), "{alg} user {i}");
            }
        }
    }

    #[test]
    fn metrics_invariant_under_rescaling(g in graph_strategy(12, 12), exp in -20i32..20) {
        let scale = 2f64.powi(exp);
        for i in 0..g.users() {
            let sa = probs_scores(&g, i);
            let scaled = ScoreAssignment { scores: sa.scores.iter().map(|s| s * scale).collect(), ..sa.clone() };
            prop_assert_eq!(ranks_of_uncollected(&sa), ranks_of_uncollected(&scaled));
            prop_assert!(lists_agree(&scaled, &g, 3));
        }
    }

    #[test]
    fn enhancement_round_trip(g in graph_strategy(20, 20), seed in any::<u64>(), len in 1usize..6) {
        if let Some(split) = random_split(&g, seed) {
            let rep = evaluate(&split, Algorithm::Base(Base::ProbS), EvalOptions { list_len: len, ..Default::default() }).unwrap();
            let (u, o) = (split.training.users() as f64, split.training.objects() as f64);
            prop_assert!((rep.e_r * len as f64 / o - rep.recall).abs() <= 1e-12);
            prop_assert!((rep.e_p * split.probe_len() as f64 / (o * u) - rep.precision).abs() <= 1e-12);
            prop_assert!(rep.r > 0.0 && rep.r <= 1.0);
            prop_assert!((0.0..=1.0).contains(&rep.precision) && (0.0..=1.0).contains(&rep.recall));
            if let Some(h) = rep.h {
                prop_assert!((0.0..=1.0).contains(&h));
            }
            if let Some(s) = rep.surprisal {
                prop_assert!(s >= 0.0);
            }
        }
    }
}

#[test]
fn all_users_mode_averages_every_list() {
    let mut r = rng(11);
    let g = random_graph(&mut r, 25, 25);
    let split = random_split(&g, 3).unwrap();
    let opts = |averaging| EvalOptions { list_len: 4, averaging, pair_budget: None };
    let probe = evaluate(&split, Algorithm::Base(Base::HeatS), opts(AveragingMode::ProbeUsers)).unwrap();
    let all = evaluate(&split, Algorithm::Base(Base::HeatS), opts(AveragingMode::AllUsers)).unwrap();
    assert_eq!(probe.r, all.r);
    assert_eq!(probe.precision, all.precision);
    assert_eq!(all.diversity_users, g.users());
    assert_eq!(probe.diversity_users, split.probe_users().len());
}
