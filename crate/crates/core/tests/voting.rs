use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitd_core::ensemble::{
    ensemble_predict, hard_vote, search_weights, simplex_grid, simplex_grid_size, subset_ensembles, weighted_vote,
};
use vitd_core::metrics::macro_f1;
use vitd_core::{EnsembleConfig, LabelClass, PredictionMatrix, Priority, VoteMode, WeightVector};

fn lab(i: usize) -> LabelClass {
    LabelClass::ALL[i]
}

/// Straightforward reference: count, find the top count, walk the priority list.
fn oracle_vote(votes: &[usize], order: &[usize]) -> usize {
    let mut counts = [0usize; 3];
    for &v in votes {
        counts[v] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let winners: Vec<usize> = (0..3).filter(|&c| counts[c] == top).collect();
    if winners.len() == 1 {
        return winners[0];
    }
    for &m in order {
        if winners.contains(&votes[m]) {
            return votes[m];
        }
    }
    unreachable!()
}

#[test]
fn hard_vote_matches_oracle_on_every_five_model_tuple() {
    let priorities = [vec![0, 1, 2, 3, 4], vec![4, 3, 2, 1, 0], vec![2, 0, 4, 1, 3]];
    for order in &priorities {
        let prio = Priority::from_order(
            &order.iter().map(|i| format!("m{i}")).collect::<Vec<_>>(),
            &(0..5).map(|i| format!("m{i}")).collect::<Vec<_>>(),
        )
        .unwrap();
        for code in 0..243usize {
            let votes: Vec<usize> = (0..5).map(|k| code / 3usize.pow(k) % 3).collect();
            let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
            assert_eq!(hard_vote(&labels, &prio).index(), oracle_vote(&votes, order), "{votes:?} {order:?}");
        }
    }
}

#[test]
fn hard_vote_matches_oracle_on_random_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for m in [3usize, 7] {
        for _ in 0..10_000 {
            let votes: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
            let mut order: Vec<usize> = (0..m).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let ids: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
            let named: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
            let prio = Priority::from_order(&named, &ids).unwrap();
            let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
            assert_eq!(hard_vote(&labels, &prio).index(), oracle_vote(&votes, &order));
        }
    }
}

#[test]
fn three_way_split_goes_to_first_priority_model() {
    let v = [lab(2), lab(0), lab(1)];
    assert_eq!(hard_vote(&v, &Priority::identity(3)), lab(2));
    let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let prio = Priority::from_order(&["c".into(), "a".into(), "b".into()], &ids).unwrap();
    assert_eq!(hard_vote(&v, &prio), lab(1));
}

fn arb_votes(max_models: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..3, 1..=max_models)
}

proptest! {
    #[test]
    fn uniform_weights_equal_hard_vote(votes in arb_votes(9), w in 0.01f64..50.0) {
        let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
        let prio = Priority::identity(labels.len());
        let weights = vec![w; labels.len()];
        prop_assert_eq!(weighted_vote(&labels, &weights, &prio).unwrap(), hard_vote(&labels, &prio));
    }

    #[test]
    fn weighted_vote_is_scale_invariant(
        votes in arb_votes(7),
        raw in prop::collection::vec(0u32..=20, 7),
        k in prop::sample::select(vec![1e-6, 0.5, 3.0, 1e6]),
    ) {
        let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
        let mut weights: Vec<f64> = raw[..labels.len()].iter().map(|&r| r as f64 / 20.0).collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights[0] = 1.0;
        }
        let scaled: Vec<f64> = weights.iter().map(|w| w * k).collect();
        let prio = Priority::identity(labels.len());
        prop_assert_eq!(
            weighted_vote(&labels, &weights, &prio).unwrap(),
            weighted_vote(&labels, &scaled, &prio).unwrap()
        );
    }

    #[test]
    fn indicator_weights_equal_subset_hard_vote(votes in arb_votes(7), mask in 1u32..128) {
        let m = votes.len();
        let mask = mask & ((1 << m) - 1);
        prop_assume!(mask != 0);
        let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
        let weights: Vec<f64> = (0..m).map(|i| ((mask >> i) & 1) as f64).collect();
        let members: Vec<usize> = (0..m).filter(|i| (mask >> i) & 1 == 1).collect();
        let sub: Vec<LabelClass> = members.iter().map(|&i| labels[i]).collect();
        let prio = Priority::identity(m);
        prop_assert_eq!(
            weighted_vote(&labels, &weights, &prio).unwrap(),
            hard_vote(&sub, &prio.restrict(&members))
        );
    }

    #[test]
    fn dominant_weight_decides(votes in arb_votes(6), who in 0usize..6) {
        let m = votes.len();
        let who = who % m;
        let labels: Vec<LabelClass> = votes.iter().map(|&v| lab(v)).collect();
        let mut weights = vec![0.1; m];
        weights[who] = 1.0;
        prop_assert_eq!(weighted_vote(&labels, &weights, &Priority::identity(m)).unwrap(), labels[who]);
    }
}

#[test]
fn invalid_weights_are_rejected() {
    let v = [lab(0), lab(1)];
    let p = Priority::identity(2);
    assert!(weighted_vote(&v, &[0.0, 0.0], &p).is_err());
    assert!(weighted_vote(&v, &[-0.5, 1.0], &p).is_err());
    assert!(weighted_vote(&v, &[f64::NAN, 1.0], &p).is_err());
    assert!(weighted_vote(&v, &[1.0], &p).is_err());
}

fn random_matrix(m: usize, n: usize, seed: u64) -> (PredictionMatrix, Vec<LabelClass>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gold: Vec<LabelClass> = (0..n).map(|i| lab(i % 3)).collect();
    let rows: Vec<Vec<LabelClass>> = (0..m)
        .map(|k| {
            let acc = 0.45 + 0.08 * k as f64;
            gold.iter()
                .map(|&g| if rng.random_bool(acc) { g } else { lab(rng.random_range(0..3)) })
                .collect()
        })
        .collect();
    let matrix = PredictionMatrix::from_rows(
        (0..m).map(|k| format!("model-{k}")).collect(),
        (0..n).map(|i| format!("ex-{i}")).collect(),
        rows,
    )
    .unwrap();
    (matrix, gold)
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1u64, |acc, i| acc * (n + 1 - i) / i)
}

#[test]
fn grid_sizes_match_binomial_counts() {
    for m in 1..=6usize {
        for q in [1u32, 2, 5, 10, 20] {
            let expected = binomial(q as u64 + m as u64 - 1, m as u64 - 1);
            assert_eq!(simplex_grid_size(m, q), Some(expected));
            if expected <= 20_000 {
                let grid = simplex_grid(m, q);
                assert_eq!(grid.len() as u64, expected);
                assert!(grid.iter().all(|p| p.iter().sum::<u32>() == q && p.len() == m));
                assert!(grid.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
    assert_eq!(simplex_grid_size(5, 20), Some(10_626));
    assert_eq!(simplex_grid_size(2, 2), Some(3));
}

#[test]
fn five_model_search_scores_full_grid_and_beats_uniform() {
    let (matrix, gold) = random_matrix(5, 240, 3);
    let r = search_weights(&matrix, &gold, 20, &Priority::identity(5)).unwrap();
    assert_eq!(r.evaluations, 10_626);
    assert!(r.uniform_on_grid);
    assert!(r.best_dev_macro_f1 >= r.uniform_dev_macro_f1);
    let total: f64 = r.best_weights.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for (_, w) in r.best_weights.iter() {
        let scaled = w * 20.0;
        assert!((scaled - scaled.round()).abs() < 1e-9);
    }

    // the reported optimum is reproducible through the public ensemble path
    let config = EnsembleConfig { priority_order: None, mode: VoteMode::Weighted };
    let out = ensemble_predict(&matrix, &config, Some(&r.best_weights)).unwrap();
    assert_eq!(macro_f1(&out.labels, &gold).unwrap(), r.best_dev_macro_f1);

    let hard = ensemble_predict(&matrix, &EnsembleConfig { priority_order: None, mode: VoteMode::Hard }, None).unwrap();
    assert_eq!(macro_f1(&hard.labels, &gold).unwrap(), r.uniform_dev_macro_f1);
}

#[test]
fn search_is_exhaustive_against_brute_force() {
    let (matrix, gold) = random_matrix(3, 90, 11);
    let q = 6;
    let r = search_weights(&matrix, &gold, q, &Priority::identity(3)).unwrap();
    let prio = Priority::identity(3);
    let mut best = f64::MIN;
    for point in simplex_grid(3, q) {
        let w: Vec<f64> = point.iter().map(|&p| p as f64 / q as f64).collect();
        let pred: Vec<LabelClass> = (0..matrix.n_examples())
            .map(|e| weighted_vote(&matrix.column(e), &w, &prio).unwrap())
            .collect();
        best = best.max(macro_f1(&pred, &gold).unwrap());
    }
    assert_eq!(r.best_dev_macro_f1, best);
}

#[test]
fn off_grid_uniform_is_still_scored() {
    let (matrix, gold) = random_matrix(3, 60, 5);
    let r = search_weights(&matrix, &gold, 20, &Priority::identity(3)).unwrap();
    assert!(!r.uniform_on_grid);
    assert_eq!(r.evaluations, 231 + 1);
    assert!(r.best_dev_macro_f1 >= r.uniform_dev_macro_f1);
}

#[test]
fn search_is_deterministic() {
    let (matrix, gold) = random_matrix(4, 150, 8);
    let a = search_weights(&matrix, &gold, 12, &Priority::identity(4)).unwrap();
    let b = search_weights(&matrix, &gold, 12, &Priority::identity(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_models_prefer_uniform() {
    let gold: Vec<LabelClass> = (0..30).map(|i| lab(i % 3)).collect();
    let row: Vec<LabelClass> = (0..30).map(|i| lab((i * 7 + 1) % 3)).collect();
    let matrix = PredictionMatrix::from_rows(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        (0..30).map(|i| i.to_string()).collect(),
        vec![row.clone(), row.clone(), row.clone(), row],
    )
    .unwrap();
    let r = search_weights(&matrix, &gold, 8, &Priority::identity(4)).unwrap();
    for id in ["a", "b", "c", "d"] {
        assert_eq!(r.best_weights.get(id), Some(0.25));
    }
}

#[test]
fn subsets_cover_every_combination() {
    let (matrix, gold) = random_matrix(5, 120, 21);
    let prio = Priority::identity(5);
    let rows = subset_ensembles(&matrix, &gold, &prio).unwrap();
    assert_eq!(rows.len(), 31);
    let mut seen: Vec<Vec<String>> = rows.iter().map(|r| r.models.clone()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 31);
    for r in &rows {
        assert_eq!(r.size, r.models.len());
        let members: Vec<usize> = r
            .models
            .iter()
            .map(|id| matrix.model_ids().iter().position(|m| m == id).unwrap())
            .collect();
        let pred: Vec<LabelClass> = (0..matrix.n_examples())
            .map(|e| {
                let votes: Vec<LabelClass> = members.iter().map(|&k| matrix.label(k, e)).collect();
                hard_vote(&votes, &prio.restrict(&members))
            })
            .collect();
        assert_eq!(r.macro_f1, macro_f1(&pred, &gold).unwrap());
    }
    assert!(rows.windows(2).all(|w| w[0].macro_f1 >= w[1].macro_f1));
    // singletons equal the individual model scores
    for k in 0..5 {
        let single = rows.iter().find(|r| r.models == [matrix.model_ids()[k].clone()]).unwrap();
        assert_eq!(single.macro_f1, macro_f1(matrix.row(k), &gold).unwrap());
    }
}

#[test]
fn weight_vector_json_keeps_model_order() {
    let w = WeightVector::new([("zeta".to_string(), 0.7), ("alpha".to_string(), 0.3)]).unwrap();
    let json = serde_json::to_string(&w).unwrap();
    assert_eq!(json, r#"{"zeta":0.7,"alpha":0.3}"#);
    let back: WeightVector = serde_json::from_str(&json).unwrap();
    assert_eq!(back, w);
    assert!(serde_json::from_str::<WeightVector>(r#"{"a":-1.0}"#).is_err());
}
