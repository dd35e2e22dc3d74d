use nalgebra::DMatrix;
use proptest::prelude::*;
use unidim::simulate::BASE_DIFFICULTIES;
use unidim::{
    agglomerate, gen_rasch, hit_false_rates, item_correlations, mean_conditional_covariance,
    mean_off_diagonal, permute_items, roc_curve, DistanceMatrix, Linkage, Partition,
};

fn brute(truth: &Partition, est: &Partition) -> (f64, f64) {
    let same = |p: &Partition, i: usize, j: usize| {
        p.clusters()
            .iter()
            .any(|c| c.contains(&i) && c.contains(&j))
    };
    let n = truth.items();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let within: Vec<_> = pairs.iter().filter(|&&(i, j)| same(truth, i, j)).collect();
    let between: Vec<_> = pairs.iter().filter(|&&(i, j)| !same(truth, i, j)).collect();
    let h = if within.is_empty() {
        1.0
    } else {
        within.iter().filter(|&&&(i, j)| same(est, i, j)).count() as f64 / within.len() as f64
    };
    let f = if between.is_empty() {
        0.0
    } else {
        between.iter().filter(|&&&(i, j)| same(est, i, j)).count() as f64 / between.len() as f64
    };
    (h, f)
}

fn partition_strategy(n: usize) -> impl Strategy<Value = Partition> {
    prop::collection::vec(0usize..n, n).prop_map(|a| Partition::from_assignment(&a))
}

fn pair_strategy() -> impl Strategy<Value = (Partition, Partition)> {
    (1usize..=12).prop_flat_map(|n| (partition_strategy(n), partition_strategy(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rates_match_enumeration((truth, est) in pair_strategy()) {
        prop_assert_eq!(hit_false_rates(&truth, &est).unwrap(), brute(&truth, &est));
    }

    #[test]
    fn rates_invariant_under_relabelling((truth, est) in pair_strategy(), seed in any::<u64>()) {
        let n = truth.items();
        let mut perm: Vec<usize> = (0..n).collect();
        // deterministic shuffle from the seed
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabel = |p: &Partition| {
            let a = p.assignment();
            let mut b = vec![0; n];
            for i in 0..n {
                b[perm[i]] = a[i];
            }
            Partition::from_assignment(&b)
        };
        prop_assert_eq!(
            hit_false_rates(&truth, &est).unwrap(),
            hit_false_rates(&relabel(&truth), &relabel(&est)).unwrap()
        );
    }

    #[test]
    fn curve_is_monotone(values in prop::collection::vec(0.1f64..10.0, 66), truth in partition_strategy(12)) {
        let mut d = vec![vec![0.0; 12]; 12];
        let mut k = 0;
        for i in 0..12 {
            for j in (i + 1)..12 {
                d[i][j] = values[k];
                d[j][i] = values[k];
                k += 1;
            }
        }
        let den = agglomerate(&DistanceMatrix::new(unidim::data::default_labels(12), d).unwrap(), Linkage::Average).unwrap();
        let curve = roc_curve(&truth, &den).unwrap();
        let f1 = if truth.len() == 1 { 0.0 } else { 1.0 };
        prop_assert_eq!(curve.points[0], (1.0, f1));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 <= w[0].0 && w[1].1 <= w[0].1);
        }
        prop_assert_eq!(curve.points[11].1, 0.0);
    }
}

#[test]
fn perfect_two_block_curve() {
    let truth = Partition::parse_compact("0,1,2,3,4,5;6,7,8,9,10,11").unwrap();
    let d: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            (0..12)
                .map(|j| {
                    if i == j {
                        0.0
                    } else if (i < 6) == (j < 6) {
                        1.0 + (i + j) as f64 * 0.01
                    } else {
                        9.0
                    }
                })
                .collect()
        })
        .collect();
    let den = agglomerate(
        &DistanceMatrix::new(unidim::data::default_labels(12), d).unwrap(),
        Linkage::Average,
    )
    .unwrap();
    let curve = roc_curve(&truth, &den).unwrap();
    assert_eq!(curve.labels, (1..=12).collect::<Vec<_>>());
    assert_eq!(curve.points[0], (1.0, 1.0));
    assert_eq!(curve.points[1], (1.0, 0.0));
    assert_eq!(curve.points[11], (0.0, 0.0));
}

#[test]
fn correlations_are_positive_semidefinite() {
    for seed in 0..5 {
        let data = gen_rasch(200, &BASE_DIFFICULTIES, 1.0, seed).unwrap();
        let r = item_correlations(&data).unwrap();
        let m = DMatrix::from_fn(6, 6, |i, j| r[i][j]);
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e >= -1e-10));
        assert!((0..6).all(|i| r[i][i] == 1.0));
    }
}

#[test]
fn independent_columns_uncorrelated() {
    let data = gen_rasch(5000, &BASE_DIFFICULTIES[..4], 1.0, 3).unwrap();
    let data = permute_items(&data, &[0, 1, 2, 3], 4).unwrap();
    let r = item_correlations(&data).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            assert!(r[i][j].abs() < 0.1, "{}", r[i][j]);
        }
    }
}

#[test]
fn rasch_items_correlate_but_covary_negatively_given_score() {
    let mut negative = 0;
    let mut positive = 0;
    for seed in 0..20 {
        let data = gen_rasch(200, &BASE_DIFFICULTIES[..4], 1.0, 40 + seed).unwrap();
        if mean_off_diagonal(&mean_conditional_covariance(&data).unwrap().values) < 0.0 {
            negative += 1;
        }
        if mean_off_diagonal(&item_correlations(&data).unwrap()) > 0.0 {
            positive += 1;
        }
    }
    assert!(negative >= 16 && positive >= 16, "{negative} {positive}");
}

#[test]
fn constant_column_rejected() {
    let data = unidim::ResponseMatrix::from_rows(&[vec![1, 0], vec![1, 1]]).unwrap();
    assert!(matches!(
        item_correlations(&data),
        Err(unidim::Error::DegenerateItem { .. })
    ));
}
