//! Monte-Carlo studies over simulated designs. Each study returns an
//! aggregate summary that serializes to JSON.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{config, Result};
use crate::estimation::{fit_mml, FitConfig};
use crate::evaluation::{
    item_correlations, mean_conditional_covariance, mean_off_diagonal, roc_curve,
};
use crate::hierarchy::{
    agglomerate, euclidean_item_distances, hcluster_marginal, Dendrogram, Linkage,
};
use crate::partition::Partition;
use crate::rng::derive_seed;
use crate::selection::{select, Criterion};
use crate::simulate::{gen_rasch, permute_items, Scenario, BASE_DIFFICULTIES};
use crate::stability::{
    misfit_scores, pairwise_similarity, similarity_to_distance, subsample_orders, OrderAlgorithm,
};

/// Seed for subsampling within replication `rep`, separate from the data seed.
fn subsample_seed(scenario: &Scenario, rep: u64) -> u64 {
    derive_seed(derive_seed(scenario.seed, rep), 0x5b5)
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

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn reps_range(reps: usize) -> Result<std::ops::Range<u64>> {
    if reps == 0 {
        return config("need at least one replication");
    }
    Ok(0..reps as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub sigma: f64,
    pub items: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
}

/// σ̂ from the first `k` of six items, `k = 2..=6`, for each true σ.
pub fn sigma_recovery(
    sigmas: &[f64],
    persons: usize,
    reps: usize,
    seed: u64,
    cfg: &FitConfig,
) -> Result<Vec<RecoveryRow>> {
    let mut rows = Vec::new();
    for (s, &sigma) in sigmas.iter().enumerate() {
        let fits: Vec<Vec<f64>> = reps_range(reps)?
            .into_par_iter()
            .map(|rep| {
                let data = gen_rasch(
                    persons,
                    &BASE_DIFFICULTIES,
                    sigma,
                    derive_seed(derive_seed(seed, s as u64), rep),
                )?;
                (2..=BASE_DIFFICULTIES.len())
                    .map(|k| {
                        let items: Vec<usize> = (0..k).collect();
                        Ok(fit_mml(&data.select_items(&items)?, cfg)?.sigma_theta)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (col, k) in (2..=BASE_DIFFICULTIES.len()).enumerate() {
            let mut v: Vec<f64> = fits.iter().map(|f| f[col]).collect();
            v.sort_by(f64::total_cmp);
            let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
            rows.push(RecoveryRow {
                sigma,
                items: k,
                median: median(v.clone()),
                lower_quartile: q(0.25),
                upper_quartile: q(0.75),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseSummary {
    pub fits_per_kind: usize,
    /// Pairs of one intact item with the shuffled sixth item.
    pub shuffled_below_02: f64,
    /// Pairs of two intact items.
    pub intact_above_04: f64,
    pub median_shuffled: f64,
    pub median_intact: f64,
}

/// Two-item fits on six items with σ = 1, the sixth shuffled. Each
/// replication contributes the pairs (1,6), (2,6), (5,6) and (1,2), (2,5),
/// (1,5).
pub fn pollution_collapse(
    persons: usize,
    reps: usize,
    seed: u64,
    cfg: &FitConfig,
) -> Result<CollapseSummary> {
    let shuffled_pairs = [[0, 5], [1, 5], [4, 5]];
    let intact_pairs = [[0, 1], [1, 4], [0, 4]];
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| {
            let s = derive_seed(seed, rep);
            let data = gen_rasch(persons, &BASE_DIFFICULTIES, 1.0, s)?;
            let data = permute_items(&data, &[5], derive_seed(s, u64::MAX))?;
            let fit = |pair: &[usize; 2]| -> Result<f64> {
                Ok(fit_mml(&data.select_items(pair)?, cfg)?.sigma_theta)
            };
            Ok((
                shuffled_pairs.iter().map(fit).collect::<Result<_>>()?,
                intact_pairs.iter().map(fit).collect::<Result<_>>()?,
            ))
        })
        .collect::<Result<_>>()?;
    let shuffled: Vec<f64> = per_rep.iter().flat_map(|r| r.0.iter().copied()).collect();
    let intact: Vec<f64> = per_rep.iter().flat_map(|r| r.1.iter().copied()).collect();
    let share = |v: &[f64], f: &dyn Fn(f64) -> bool| {
        v.iter().filter(|&&x| f(x)).count() as f64 / v.len() as f64
    };
    Ok(CollapseSummary {
        fits_per_kind: shuffled.len(),
        shuffled_below_02: share(&shuffled, &|x| x < 0.2),
        intact_above_04: share(&intact, &|x| x > 0.4),
        median_shuffled: median(shuffled),
        median_intact: median(intact),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub scenario: String,
    pub criterion: Criterion,
    pub reps: usize,
    /// Share of runs where the shuffled items fill the last positions.
    pub polluted_last: f64,
    /// Share of runs whose first pair contains a shuffled item.
    pub polluted_in_first_pair: f64,
    /// Mean σ̂ per step (index 0 is step 1).
    pub mean_step_sigma: Vec<f64>,
    pub nonconverged_fits: usize,
}

impl SelectionSummary {
    /// Relative drop of the mean step σ̂ from `step − 1` to `step` (1-based).
    pub fn drop_at(&self, step: usize) -> f64 {
        let before = self.mean_step_sigma[step - 2];
        (before - self.mean_step_sigma[step - 1]) / before
    }
}

pub fn selection_study(
    scenario: &Scenario,
    reps: usize,
    criterion: Criterion,
    cfg: &FitConfig,
) -> Result<SelectionSummary> {
    let n = scenario.items();
    let polluted = &scenario.polluted_items;
    let traces: Vec<_> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| select(&scenario.generate(rep)?, criterion, None, cfg))
        .collect::<Result<_>>()?;
    let last = |order: &[usize]| {
        let tail = &order[n - polluted.len()..];
        polluted.iter().all(|p| tail.contains(p))
    };
    let r = traces.len() as f64;
    Ok(SelectionSummary {
        scenario: scenario.name.clone(),
        criterion,
        reps,
        polluted_last: traces.iter().filter(|t| last(&t.order)).count() as f64 / r,
        polluted_in_first_pair: traces
            .iter()
            .filter(|t| t.order[..2].iter().any(|i| polluted.contains(i)))
            .count() as f64
            / r,
        mean_step_sigma: (0..n - 1)
            .map(|s| mean(traces.iter().map(|t| t.step_sigma[s])))
            .collect(),
        nonconverged_fits: traces.iter().map(|t| t.nonconverged_fits).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisfitSummary {
    pub scenario: String,
    pub reps: usize,
    pub subsets: usize,
    pub proportion: f64,
    pub threshold: f64,
    pub algorithm: OrderAlgorithm,
    pub labels: Vec<String>,
    pub mean_misfit: Vec<f64>,
    pub mean_std: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn misfit_study(
    scenario: &Scenario,
    reps: usize,
    subsets: usize,
    proportion: f64,
    threshold: f64,
    algorithm: OrderAlgorithm,
    cfg: &FitConfig,
) -> Result<MisfitSummary> {
    let reports: Vec<_> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| {
            let data = scenario.generate(rep)?;
            let orders = subsample_orders(
                &data,
                subsets,
                proportion,
                algorithm,
                subsample_seed(scenario, rep),
                cfg,
            )?;
            Ok(misfit_scores(&orders, threshold))
        })
        .collect::<Result<_>>()?;
    let n = scenario.items();
    Ok(MisfitSummary {
        scenario: scenario.name.clone(),
        reps,
        subsets,
        proportion,
        threshold,
        algorithm,
        labels: reports[0].labels.clone(),
        mean_misfit: (0..n)
            .map(|i| mean(reports.iter().map(|r| r.misfit[i])))
            .collect(),
        mean_std: (0..n)
            .map(|i| mean(reports.iter().map(|r| r.mean_std[i])))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    Marginal,
    Average,
    Centroid,
}

impl ClusterMethod {
    pub fn dendrogram(self, data: &ResponseMatrix, cfg: &FitConfig) -> Result<Dendrogram> {
        match self {
            Self::Marginal => hcluster_marginal(data, cfg),
            Self::Average => agglomerate(&euclidean_item_distances(data), Linkage::Average),
            Self::Centroid => agglomerate(&euclidean_item_distances(data), Linkage::Centroid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: ClusterMethod,
    /// Mean `(h, f)` per cluster count `k = 1..=I`.
    pub mean_points: Vec<(f64, f64)>,
    /// Share of replications whose cut at the true cluster count is exact.
    pub exact_at_true_k: f64,
}

impl CurveSummary {
    pub fn at(&self, k: usize) -> (f64, f64) {
        self.mean_points[k - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub scenario: String,
    pub reps: usize,
    pub true_k: usize,
    pub curves: Vec<CurveSummary>,
}

impl ClusteringSummary {
    pub fn curve(&self, method: ClusterMethod) -> Option<&CurveSummary> {
        self.curves.iter().find(|c| c.method == method)
    }
}

fn truth_of(scenario: &Scenario) -> Result<&Partition> {
    match &scenario.true_partition {
        Some(p) => Ok(p),
        None => config(format!(
            "scenario '{}' has no true partition",
            scenario.name
        )),
    }
}

pub fn clustering_study(
    scenario: &Scenario,
    reps: usize,
    methods: &[ClusterMethod],
    cfg: &FitConfig,
) -> Result<ClusteringSummary> {
    let truth = truth_of(scenario)?;
    let true_k = truth.len();
    let curves: Vec<Vec<Vec<(f64, f64)>>> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| {
            let data = scenario.generate(rep)?;
            methods
                .iter()
                .map(|m| Ok(roc_curve(truth, &m.dendrogram(&data, cfg)?)?.points))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = scenario.items();
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| CurveSummary {
            method,
            mean_points: (0..n)
                .map(|k| {
                    (
                        mean(curves.iter().map(|c| c[mi][k].0)),
                        mean(curves.iter().map(|c| c[mi][k].1)),
                    )
                })
                .collect(),
            exact_at_true_k: curves
                .iter()
                .filter(|c| c[mi][true_k - 1] == (1.0, 0.0))
                .count() as f64
                / curves.len() as f64,
        })
        .collect();
    Ok(ClusteringSummary {
        scenario: scenario.name.clone(),
        reps,
        true_k,
        curves: summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub scenario: String,
    pub reps: usize,
    pub subsets: usize,
    pub proportion: f64,
    pub labels: Vec<String>,
    pub mean_similarity: Vec<Vec<f64>>,
    pub within_mean: f64,
    pub between_mean: f64,
    /// Share of datasets where average linkage on `1 − s` cut at the true
    /// cluster count reproduces the truth.
    pub stability_exact: f64,
}

pub fn similarity_study(
    scenario: &Scenario,
    reps: usize,
    subsets: usize,
    proportion: f64,
    cfg: &FitConfig,
) -> Result<SimilaritySummary> {
    let truth = truth_of(scenario)?;
    let k = truth.len();
    let runs: Vec<(Vec<Vec<f64>>, bool)> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| {
            let data = scenario.generate(rep)?;
            let s = pairwise_similarity(
                &data,
                subsets,
                proportion,
                subsample_seed(scenario, rep),
                cfg,
            )?;
            let den = agglomerate(&similarity_to_distance(&s)?, Linkage::Average)?;
            Ok((s.values, den.cut(k)? == *truth))
        })
        .collect::<Result<_>>()?;
    let n = scenario.items();
    let mut mean_similarity = vec![vec![0.0; n]; n];
    for (s, _) in &runs {
        for i in 0..n {
            for j in 0..n {
                mean_similarity[i][j] += s[i][j] / runs.len() as f64;
            }
        }
    }
    let assign = truth.assignment();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in (i + 1)..n {
            if assign[i] == assign[j] {
                within.push(mean_similarity[i][j]);
            } else {
                between.push(mean_similarity[i][j]);
            }
        }
    }
    Ok(SimilaritySummary {
        scenario: scenario.name.clone(),
        reps,
        subsets,
        proportion,
        labels: crate::data::default_labels(n),
        mean_similarity,
        within_mean: mean(within),
        between_mean: mean(between),
        stability_exact: runs.iter().filter(|r| r.1).count() as f64 / runs.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub reps: usize,
    pub negative_conditional_covariance: f64,
    pub positive_correlation: f64,
    pub mean_conditional_covariance: f64,
    pub mean_correlation: f64,
}

/// Correlations and conditional covariances of the first four items.
pub fn diagnostics_study(persons: usize, reps: usize, seed: u64) -> Result<DiagnosticsSummary> {
    let rows: Vec<(f64, f64)> = reps_range(reps)?
        .into_par_iter()
        .map(|rep| {
            let data = gen_rasch(
                persons,
                &BASE_DIFFICULTIES[..4],
                1.0,
                derive_seed(seed, rep),
            )?;
            Ok((
                mean_off_diagonal(&mean_conditional_covariance(&data)?.values),
                mean_off_diagonal(&item_correlations(&data)?),
            ))
        })
        .collect::<Result<_>>()?;
    let r = rows.len() as f64;
    Ok(DiagnosticsSummary {
        reps,
        negative_conditional_covariance: rows.iter().filter(|x| x.0 < 0.0).count() as f64 / r,
        positive_correlation: rows.iter().filter(|x| x.1 > 0.0).count() as f64 / r,
        mean_conditional_covariance: mean(rows.iter().map(|x| x.0)),
        mean_correlation: mean(rows.iter().map(|x| x.1)),
    })
}
