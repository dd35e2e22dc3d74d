use proptest::prelude::*;
use unidim::simulate::BASE_DIFFICULTIES;
use unidim::{
    fit_mml, gauss_hermite_rule, gen_rasch, irf, log_marginal_likelihood, permute_items, FitConfig,
    ResponseMatrix,
};

/// Dense trapezoid integration of each person's pattern probability over
/// θ ∈ [−8σ, 8σ] with 4001 points.
fn brute_force_loglik(data: &ResponseMatrix, deltas: &[f64], sigma: f64) -> f64 {
    let points = 4001;
    let lo = -8.0 * sigma;
    let h = 16.0 * sigma / (points - 1) as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    (0..data.persons())
        .map(|p| {
            let row = data.row(p);
            let mut acc = 0.0;
            for k in 0..points {
                let theta = lo + h * k as f64;
                let mut lik = norm * (-0.5 * (theta / sigma).powi(2)).exp();
                for (&y, &d) in row.iter().zip(deltas) {
                    let pr = 1.0 / (1.0 + (d - theta).exp());
                    lik *= if y == 1 { pr } else { 1.0 - pr };
                }
                let wt = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
                acc += wt * lik;
            }
            (acc * h).ln()
        })
        .sum()
}

fn random_matrix(persons: usize, items: usize, bits: &[bool]) -> ResponseMatrix {
    let values = bits[..persons * items]
        .iter()
        .map(|&b| u8::from(b))
        .collect();
    ResponseMatrix::new(values, persons, unidim::data::default_labels(items)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_matches_dense_integration(
        persons in 1usize..=20,
        items in 1usize..=4,
        bits in prop::collection::vec(any::<bool>(), 80),
        deltas in prop::collection::vec(-2.5f64..2.5, 4),
        sigma in 0.2f64..2.0,
    ) {
        let data = random_matrix(persons, items, &bits);
        let rule = gauss_hermite_rule(60).unwrap();
        let got = log_marginal_likelihood(&data, &deltas[..items], sigma, &rule).unwrap();
        let want = brute_force_loglik(&data, &deltas[..items], sigma);
        prop_assert!(((got - want) / want).abs() <= 1e-6, "got {got} want {want}");
    }

    #[test]
    fn irf_complement(theta in -50f64..50.0, delta in -50f64..50.0) {
        let s = irf(theta, delta).unwrap() + irf(delta, theta).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn em_loglik_never_decreases(seed in 0u64..10_000, sigma in 0.3f64..3.0, pollute in any::<bool>()) {
        let mut data = gen_rasch(80, &BASE_DIFFICULTIES[..4], sigma, seed).unwrap();
        if pollute {
            data = permute_items(&data, &[1, 3], seed).unwrap();
        }
        if data.check_no_constant_items().is_ok() {
            let fit = fit_mml(&data, &FitConfig::default()).unwrap();
            for w in fit.loglik_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn person_order_does_not_change_anything() {
    let data = gen_rasch(150, &BASE_DIFFICULTIES, 1.0, 11).unwrap();
    let mut rows: Vec<usize> = (0..150).collect();
    rows.reverse();
    rows.swap(3, 77);
    let shuffled = data.select_persons(&rows).unwrap();
    let rule = gauss_hermite_rule(30).unwrap();
    let d = [0.1, -1.2, -0.7, 0.4, 1.0, 1.3];
    assert_eq!(
        log_marginal_likelihood(&data, &d, 1.3, &rule).unwrap(),
        log_marginal_likelihood(&shuffled, &d, 1.3, &rule).unwrap()
    );
    let cfg = FitConfig::default();
    assert_eq!(
        fit_mml(&data, &cfg).unwrap(),
        fit_mml(&shuffled, &cfg).unwrap()
    );
}

#[test]
fn item_relabelling_permutes_difficulties_exactly() {
    let data = gen_rasch(200, &BASE_DIFFICULTIES, 1.0, 5).unwrap();
    let perm = [3usize, 0, 5, 1, 4, 2];
    let relabelled = data.select_items(&perm).unwrap();
    let cfg = FitConfig::default();
    let a = fit_mml(&data, &cfg).unwrap();
    let b = fit_mml(&relabelled, &cfg).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.sigma_theta.to_bits(), b.sigma_theta.to_bits());
    assert_eq!(
        a.log_marginal_likelihood.to_bits(),
        b.log_marginal_likelihood.to_bits()
    );
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(a.difficulties[i].to_bits(), b.difficulties[k].to_bits());
    }
}

#[test]
fn fit_recovers_parameters_on_large_sample() {
    let data = gen_rasch(4000, &BASE_DIFFICULTIES, 1.5, 2).unwrap();
    let fit = fit_mml(&data, &FitConfig::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.sigma_theta - 1.5).abs() < 0.15, "{}", fit.sigma_theta);
    for (est, truth) in fit.difficulties.iter().zip(BASE_DIFFICULTIES) {
        assert!((est - truth).abs() < 0.15, "{est} vs {truth}");
    }
    // the fitted point beats small perturbations of it
    let rule = gauss_hermite_rule(30).unwrap();
    let ll = log_marginal_likelihood(&data, &fit.difficulties, fit.sigma_theta, &rule).unwrap();
    assert!((ll - fit.log_marginal_likelihood).abs() < 1e-9);
    for bump in [-0.05, 0.05] {
        let other =
            log_marginal_likelihood(&data, &fit.difficulties, fit.sigma_theta + bump, &rule)
                .unwrap();
        assert!(other < ll);
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn sigma_bands_over_seeds() {
    let cfg = FitConfig::default();
    for (sigma, lo, hi) in [(1.0, 0.8, 1.2), (2.0, 1.7, 2.3)] {
        let est: Vec<f64> = (0..50)
            .map(|s| {
                let data = gen_rasch(200, &BASE_DIFFICULTIES, sigma, 100 + s).unwrap();
                fit_mml(&data, &cfg).unwrap().sigma_theta
            })
            .collect();
        let m = median(est);
        assert!((lo..=hi).contains(&m), "sigma={sigma}: median {m}");
    }
}

#[test]
fn shuffled_partner_collapses_two_item_fit() {
    // A two-item fit is saturated, so σ̂ tracks the sample log odds ratio.
    // With a shuffled partner that ratio is centred on zero and σ̂ sits on
    // the lower bound in a majority of samples, not all of them.
    let cfg = FitConfig::default();
    let mut shuffled = Vec::new();
    let mut intact = Vec::new();
    for s in 0..50 {
        let data = gen_rasch(200, &BASE_DIFFICULTIES[..2], 1.0, 500 + s).unwrap();
        intact.push(fit_mml(&data, &cfg).unwrap().sigma_theta);
        let data = permute_items(&data, &[1], s).unwrap();
        shuffled.push(fit_mml(&data, &cfg).unwrap().sigma_theta);
    }
    let small = shuffled.iter().filter(|&&s| s < 0.2).count();
    let large = intact.iter().filter(|&&s| s > 0.4).count();
    assert!(small > 25, "{small}/50 shuffled pairs below 0.2");
    assert!(large >= 40, "{large}/50 intact pairs above 0.4");
    assert!(median(shuffled) + 0.4 < median(intact));
}
