mod common;

use spreadrec::algorithms::Base;
use spreadrec::harness::{derive_seeds, make_splits};
use spreadrec::metrics::{evaluate, AveragingMode, EvalOptions};
use spreadrec::{Algorithm, BipartiteGraph, Dataset, HybridVariant, ProbeSplit, Schema, SplitMethod};

fn splits(n: usize) -> Vec<ProbeSplit> {
    let ds = Dataset::load(&common::movielens_path(), &Schema::movielens(), Some(3.0)).unwrap();
    make_splits(&ds.graph, &SplitMethod::Random { fraction: 0.1 }, &derive_seeds(7, n)).unwrap()
}

#[test]
fn averaging_modes_differ_little() {
    let split = &splits(1)[0];
    for b in [Base::ProbS, Base::HeatS] {
        let opts = |averaging| EvalOptions { averaging, ..Default::default() };
        let probe = evaluate(split, Algorithm::Base(b), opts(AveragingMode::ProbeUsers)).unwrap();
        let all = evaluate(split, Algorithm::Base(b), opts(AveragingMode::AllUsers)).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / a;
        assert!(rel(probe.h.unwrap(), all.h.unwrap()) < 0.1, "{b:?} h");
        assert!(rel(probe.surprisal.unwrap(), all.surprisal.unwrap()) < 0.1, "{b:?} I");
    }
}

#[test]
fn grank_share_reorders_unreached_objects() {
    // User 0 reaches only object 6 through object 5; the deleted link points
    // at object 0, which ProbS leaves in the zero-score group.
    let mut training: Vec<(u32, u32)> = (1..=10).map(|u| (u, 0)).collect();
    training.extend([(0, 5), (11, 5), (11, 6), (12, 1), (13, 2)]);
    let g = BipartiteGraph::build(&training, 14, 8).unwrap();
    let split = ProbeSplit::new(g, vec![(0, 0)], SplitMethod::Random { fraction: 0.1 }, 0).unwrap();
    let opts = EvalOptions { list_len: 2, ..Default::default() };
    let probs = evaluate(&split, Algorithm::Base(Base::ProbS), opts).unwrap();
    let blend = Algorithm::hybrid(HybridVariant::Linear { x: Base::ProbS, y: Base::GRank }, 0.05).unwrap();
    let mixed = evaluate(&split, blend, opts).unwrap();
    // Seven candidates: object 6 first, then six tied zeros at (2 + 7) / 2.
    assert_eq!(probs.r, 4.5 / 7.0);
    assert_eq!(mixed.r, 2.0 / 7.0);
}

#[test]
fn sampled_personalization_tracks_exact() {
    let split = &splits(1)[0];
    let alg = Algorithm::Base(Base::HeatS);
    let exact = evaluate(split, alg, EvalOptions::default()).unwrap();
    let sampled = evaluate(split, alg, EvalOptions { pair_budget: Some(20_000), ..Default::default() }).unwrap();
    assert_eq!(exact.r, sampled.r);
    assert!((exact.h.unwrap() - sampled.h.unwrap()).abs() < 0.01);
}
