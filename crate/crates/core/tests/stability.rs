use proptest::prelude::*;
use unidim::simulate::BASE_DIFFICULTIES;
use unidim::stability::{dendrogram_similarity, OrderAlgorithm};
use unidim::{
    agglomerate, gen_rasch, hcluster_marginal, misfit_scores, order_density, pairwise_similarity,
    preset, select_sequence, similarity_to_distance, subsample_orders, Error, FitConfig, Linkage,
    OrderMatrix, ResponseMatrix,
};

fn cfg() -> FitConfig {
    FitConfig::default()
}

fn rasch6(seed: u64) -> ResponseMatrix {
    gen_rasch(120, &BASE_DIFFICULTIES, 1.0, seed).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn full_subset_matches_selection() {
    let data = rasch6(1);
    let om = subsample_orders(&data, 1, 1.0, OrderAlgorithm::Sequential, 9, &cfg()).unwrap();
    let positions = select_sequence(&data, &cfg()).unwrap().positions();
    let column: Vec<usize> = om.orders.iter().map(|r| r[0]).collect();
    assert_eq!(column, positions);
    assert_eq!(om.subsets[0], (0..120).collect::<Vec<_>>());
}

#[test]
fn deterministic_and_schedule_independent() {
    let data = rasch6(2);
    let run = |threads| {
        in_pool(threads, || {
            subsample_orders(&data, 6, 0.5, OrderAlgorithm::Sequential, 4, &cfg()).unwrap()
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    let other = subsample_orders(&data, 6, 0.5, OrderAlgorithm::Sequential, 5, &cfg()).unwrap();
    assert_ne!(one.subsets, other.subsets);

    let sim = |threads| {
        in_pool(threads, || {
            pairwise_similarity(&data, 3, 0.5, 4, &cfg()).unwrap()
        })
    };
    assert_eq!(sim(1), sim(3));
}

#[test]
fn subsets_are_distinct_draws_of_the_right_size() {
    let data = rasch6(3);
    let om = subsample_orders(
        &data,
        5,
        0.5,
        OrderAlgorithm::HierarchicalFirstCluster,
        1,
        &cfg(),
    )
    .unwrap();
    for s in &om.subsets {
        assert_eq!(s.len(), 60);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
    assert_ne!(om.subsets[0], om.subsets[1]);
    for m in 0..5 {
        let mut col: Vec<usize> = om.orders.iter().map(|r| r[m]).collect();
        col.sort_unstable();
        assert_eq!(col, (1..=6).collect::<Vec<_>>());
    }
}

#[test]
fn first_cluster_order_starts_with_first_merge() {
    let data = rasch6(7);
    let den = hcluster_marginal(&data, &cfg()).unwrap();
    let orders = unidim::stability::first_cluster_orders(&den);
    let first = &den.merges[0].members;
    assert_eq!(orders[first[0]], 1);
    assert_eq!(orders[first[1]], 2);
}

#[test]
fn small_subsets_rejected() {
    let data = gen_rasch(19, &BASE_DIFFICULTIES, 1.0, 1).unwrap();
    let err = subsample_orders(&data, 2, 0.5, OrderAlgorithm::Sequential, 1, &cfg()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(subsample_orders(&rasch6(1), 0, 0.5, OrderAlgorithm::Sequential, 1, &cfg()).is_err());
}

#[test]
fn constant_subset_columns_are_redrawn() {
    // item 3 has a single success, so about half the subsets miss it
    let mut rows: Vec<Vec<u8>> = (0..40)
        .map(|p| vec![(p % 2) as u8, (p % 3 == 0) as u8, (p % 5 < 2) as u8, 0])
        .collect();
    rows[7][3] = 1;
    let data = ResponseMatrix::from_rows(&rows).unwrap();
    let om = subsample_orders(&data, 8, 0.5, OrderAlgorithm::Sequential, 2, &cfg()).unwrap();
    assert!(om.subsets.iter().all(|s| s.contains(&7)));
}

#[test]
fn hand_built_misfit() {
    let om = OrderMatrix::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![1, 1, 3, 2], vec![2, 3, 1, 1], vec![3, 2, 2, 3]],
        vec![vec![]; 4],
        0.5,
        0,
    )
    .unwrap();
    let r = misfit_scores(&om, 0.75);
    // 0.75 * 3 = 2.25, so only order 3 counts
    assert_eq!(r.misfit, vec![0.25, 0.25, 0.5]);
    assert_eq!(r.mean_std, vec![3.0 / 8.0, 3.0 / 8.0, 6.0 / 8.0]);
}

fn random_orders(items: usize, cols: &[Vec<usize>]) -> OrderMatrix {
    let m = cols.len();
    let orders = (0..items)
        .map(|i| cols.iter().map(|c| c[i] + 1).collect())
        .collect();
    OrderMatrix::new(
        unidim::data::default_labels(items),
        orders,
        vec![vec![]; m],
        0.5,
        0,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn misfit_bounded_and_monotone(
        cols in prop::collection::vec(Just((0..8).collect::<Vec<usize>>()).prop_shuffle(), 1..12),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let om = random_orders(8, &cols);
        let (lo, hi) = (a.min(b), a.max(b));
        let rl = misfit_scores(&om, lo);
        let rh = misfit_scores(&om, hi);
        for i in 0..8 {
            prop_assert!((0.0..=1.0).contains(&rl.misfit[i]));
            prop_assert!((0.0..=1.0).contains(&rl.mean_std[i]));
            prop_assert!(rh.misfit[i] <= rl.misfit[i]);
        }
    }

    #[test]
    fn density_integrates_to_one(cols in prop::collection::vec(Just((0..12).collect::<Vec<usize>>()).prop_shuffle(), 1..30), item in 0usize..12) {
        let om = random_orders(12, &cols);
        let curve = order_density(&om, item).unwrap();
        let area: f64 = curve.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        prop_assert!((area - 1.0).abs() <= 0.05, "{}", area);
        prop_assert!(curve.iter().all(|p| p.1 >= 0.0));
    }
}

#[test]
fn similarity_counting_convention() {
    let data = rasch6(8);
    let den = hcluster_marginal(&data, &cfg()).unwrap();
    let s = dendrogram_similarity(&den);
    let first = &den.merges[0].members;
    assert!((s[first[0]][first[1]] - 0.8).abs() < 1e-15);
    let last = &den.merges[4];
    let left = den.members(last.left);
    let right = den.members(last.right);
    assert_eq!(s[left[0]][right[0]], 0.0);
}

#[test]
fn similarity_matrix_properties() {
    let data = rasch6(9);
    let s = pairwise_similarity(&data, 4, 0.5, 1, &cfg()).unwrap();
    for i in 0..6 {
        assert_eq!(s.values[i][i], 1.0);
        for j in 0..6 {
            assert_eq!(s.values[i][j], s.values[j][i]);
            assert!((0.0..=1.0).contains(&s.values[i][j]));
            if i != j {
                assert!(s.values[i][j] <= 4.0 / 5.0 + 1e-12);
            }
        }
    }
    let d = similarity_to_distance(&s).unwrap();
    assert!((0..6).all(|i| d.get(i, i) == 0.0));
    assert!((d.get(0, 1) - (1.0 - s.values[0][1])).abs() < 1e-15);

    let full = pairwise_similarity(&data, 1, 1.0, 1, &cfg()).unwrap();
    assert_eq!(
        full.values,
        dendrogram_similarity(&hcluster_marginal(&data, &cfg()).unwrap())
    );
}

#[test]
fn blocks_show_in_similarities() {
    let scenario = preset("clusters6x6").unwrap();
    let data = scenario.generate(0).unwrap();
    let s = pairwise_similarity(&data, 6, 0.5, 3, &cfg()).unwrap();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..12 {
        for j in (i + 1)..12 {
            if (i < 6) == (j < 6) {
                within.push(s.values[i][j]);
            } else {
                between.push(s.values[i][j]);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) > mean(&between) + 0.1);
    let den = agglomerate(&similarity_to_distance(&s).unwrap(), Linkage::Average).unwrap();
    assert_eq!(den.cut(2).unwrap(), scenario.true_partition.unwrap());
}
