mod support;

use cohortlens_core::sna::{
    build_matrix, influence, louvain, mediation, popularity, wave_churn, CentralityVector, Partition, DAMPING,
};
use cohortlens_core::{EdgeList, Score};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn nodes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

fn edge_list(n: usize, edges: &[(usize, usize)]) -> EdgeList<Score> {
    let ids = nodes(n);
    let mut e = EdgeList::new("r", "w");
    for &(a, b) in edges {
        e.push(ids[a].clone(), ids[b].clone(), Score::from_integer(1.into()));
    }
    e
}

#[test]
fn exhaustive_optimum_of_a_perfect_matching() {
    let a = symmetric(4, &[(0, 1), (2, 3)]);
    let best = best_modularity(&a);
    assert!((best - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn centralities_match_references(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8);
        let p = rng.gen_range(0.1..0.7);
        let edges = random_digraph(&mut rng, n, p);
        let m = build_matrix(&edge_list(n, &edges), &nodes(n)).unwrap();

        let pop: CentralityVector<f64> = popularity(&m).unwrap();
        let deg: Vec<f64> = in_degrees(n, &edges).into_iter().map(|d| d as f64).collect();
        prop_assert_eq!(pop.values, deg);

        let bc: CentralityVector<f64> = mediation(&m).unwrap();
        for (a, b) in bc.values.iter().zip(brute_betweenness(n, &edges)) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }

        let pr: CentralityVector<f64> = influence(&m).unwrap();
        let mut w = vec![vec![0.0; n]; n];
        for &(i, j) in &edges {
            w[i][j] = 1.0;
        }
        for (a, b) in pr.values.iter().zip(dense_pagerank(&w, DAMPING)) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn louvain_is_near_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=8);
        let p = rng.gen_range(0.2..0.6);
        let edges = random_digraph(&mut rng, n, p);
        prop_assume!(is_connected(n, &edges));
        let m = build_matrix(&edge_list(n, &edges), &nodes(n)).unwrap();
        let part: Partition<f64> = louvain(&m).unwrap();
        let a = symmetric(n, &edges);
        let q = modularity_direct(&a, &part.membership);
        prop_assert!((q - part.modularity).abs() < 1e-12);
        let best = best_modularity(&a);
        prop_assert!(q >= 0.95 * best - 1e-12, "louvain {} vs optimum {}", q, best);
    }

    #[test]
    fn matrix_round_trips_edge_list(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(0..=8);
        let edges = random_digraph(&mut rng, n, 0.3);
        let list = edge_list(n, &edges);
        let m = build_matrix(&list, &nodes(n)).unwrap();
        prop_assert_eq!(m.to_edge_list(), list);
    }

    #[test]
    fn churn_is_a_jaccard_index(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_digraph(&mut rng, 6, 0.3);
        let b = random_digraph(&mut rng, 6, 0.3);
        let c = wave_churn(&edge_list(6, &a), &edge_list(6, &b));
        let shared = a.iter().filter(|e| b.contains(e)).count();
        prop_assert_eq!(c.shared, shared);
        prop_assert_eq!(c.union, a.len() + b.len() - shared);
        prop_assert_eq!(c.added.len(), b.len() - shared);
        prop_assert_eq!(c.removed.len(), a.len() - shared);
        let same = wave_churn(&edge_list(6, &a), &edge_list(6, &a));
        prop_assert_eq!(same.jaccard(), num_rational::Ratio::from_integer(1));
    }
}

#[test]
fn barbell_splits_into_triangles() {
    let edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)];
    let m = build_matrix(&edge_list(6, &edges), &nodes(6)).unwrap();
    let part: Partition<f64> = louvain(&m).unwrap();
    assert_eq!(part.communities(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    assert!((modularity_direct(&symmetric(6, &edges), &part.membership) - part.modularity).abs() < 1e-12);
}
