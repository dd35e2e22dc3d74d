//! Person subsampling: inclusion orders, misfit scores and co-clustering
//! similarities.

use log::info;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{config, domain, Error, Result};
use crate::estimation::FitConfig;
use crate::hierarchy::{hcluster_marginal, Dendrogram, DistanceMatrix};
use crate::rng::stream_rng;
use crate::selection::select_sequence;

const MAX_REDRAWS: u64 = 10;
const MIN_SUBSET: usize = 10;
const DENSITY_POINTS: usize = 200;
const MIN_BANDWIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderAlgorithm {
    Sequential,
    HierarchicalFirstCluster,
}

impl std::str::FromStr for OrderAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "hierarchical-first-cluster" => Ok(Self::HierarchicalFirstCluster),
            other => Err(Error::Config(format!("unknown order algorithm '{other}'"))),
        }
    }
}

/// Inclusion orders per item and subset. `orders[i][m]` is the 1-based
/// position of item `i` in the sequence built on subset `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMatrix {
    pub labels: Vec<String>,
    pub orders: Vec<Vec<usize>>,
    pub subsets: Vec<Vec<usize>>,
    pub proportion: f64,
    pub base_seed: u64,
}

impl OrderMatrix {
    pub fn new(
        labels: Vec<String>,
        orders: Vec<Vec<usize>>,
        subsets: Vec<Vec<usize>>,
        proportion: f64,
        base_seed: u64,
    ) -> Result<Self> {
        let items = labels.len();
        if orders.len() != items {
            return domain(format!("{} order rows for {items} items", orders.len()));
        }
        let m = subsets.len();
        if m == 0 {
            return domain("order matrix needs at least one subset");
        }
        if orders.iter().any(|row| row.len() != m) {
            return domain(format!("every order row needs {m} entries"));
        }
        for col in 0..m {
            let mut seen = vec![false; items];
            for row in &orders {
                let o = row[col];
                if o == 0 || o > items || std::mem::replace(&mut seen[o - 1], true) {
                    return domain(format!("column {col} is not a permutation of 1..{items}"));
                }
            }
        }
        Ok(Self {
            labels,
            orders,
            subsets,
            proportion,
            base_seed,
        })
    }

    pub fn items(&self) -> usize {
        self.labels.len()
    }

    pub fn subsets(&self) -> usize {
        self.subsets.len()
    }
}

fn subset_size(persons: usize, proportion: f64) -> Result<usize> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return config(format!("proportion must be in (0, 1], got {proportion}"));
    }
    let n = (proportion * persons as f64).floor() as usize;
    if n < MIN_SUBSET {
        return config(format!(
            "subsets of {n} persons are too small (need at least {MIN_SUBSET})"
        ));
    }
    Ok(n)
}

/// Draws subset `m`, redrawing on constant columns, and applies `run`.
fn on_subsets<T: Send>(
    data: &ResponseMatrix,
    subsets: usize,
    proportion: f64,
    seed: u64,
    run: impl Fn(&ResponseMatrix) -> Result<T> + Sync,
) -> Result<Vec<(Vec<usize>, T)>> {
    if subsets == 0 {
        return config("need at least one subset");
    }
    let n = subset_size(data.persons(), proportion)?;
    (0..subsets as u64)
        .into_par_iter()
        .map(|m| {
            for retry in 0..=MAX_REDRAWS {
                let mut rng = stream_rng(seed, m | (retry << 32));
                let mut rows = sample(&mut rng, data.persons(), n).into_vec();
                rows.sort_unstable();
                let sub = data.select_persons(&rows)?;
                match sub.check_no_constant_items() {
                    Ok(()) => return Ok((rows, run(&sub)?)),
                    Err(e) => info!("subset {m} redraw {}: {e}", retry + 1),
                }
            }
            config(format!(
                "subset {m} still has a constant item after {MAX_REDRAWS} redraws"
            ))
        })
        .collect()
}

/// Inclusion order of each item (1-based) from a marginal dendrogram: the
/// first pair leads, then items in the order they join that cluster. Items
/// joining together are ranked by when they first merged anywhere, then by
/// index.
pub fn first_cluster_orders(dendrogram: &Dendrogram) -> Vec<usize> {
    let n = dendrogram.leaves();
    let join = dendrogram.join_steps();
    let first = &dendrogram.merges[0].members;
    let (a, b) = (first[0], first[1]);
    let own_first = |i: usize| {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| join[i][j])
            .min()
            .unwrap_or(0)
    };
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by_key(|&i| {
        let entry = if i == a || i == b { 0 } else { join[i][a] };
        (entry, if i == a || i == b { 0 } else { own_first(i) }, i)
    });
    let mut orders = vec![0; n];
    for (pos, &i) in ranked.iter().enumerate() {
        orders[i] = pos + 1;
    }
    orders
}

/// Runs the chosen selection on `subsets` random person subsets.
pub fn subsample_orders(
    data: &ResponseMatrix,
    subsets: usize,
    proportion: f64,
    algorithm: OrderAlgorithm,
    seed: u64,
    cfg: &FitConfig,
) -> Result<OrderMatrix> {
    let runs = on_subsets(data, subsets, proportion, seed, |sub| match algorithm {
        OrderAlgorithm::Sequential => Ok(select_sequence(sub, cfg)?.positions()),
        OrderAlgorithm::HierarchicalFirstCluster => {
            Ok(first_cluster_orders(&hcluster_marginal(sub, cfg)?))
        }
    })?;
    let items = data.items();
    let mut orders = vec![Vec::with_capacity(runs.len()); items];
    let mut rows = Vec::with_capacity(runs.len());
    for (subset, positions) in runs {
        for (i, o) in positions.into_iter().enumerate() {
            orders[i].push(o);
        }
        rows.push(subset);
    }
    OrderMatrix::new(data.labels().to_vec(), orders, rows, proportion, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisfitReport {
    pub labels: Vec<String>,
    pub misfit: Vec<f64>,
    pub mean_std: Vec<f64>,
    pub threshold: f64,
}

/// Share of subsets placing each item strictly beyond `threshold · I`, plus
/// the mean order rescaled to [0, 1].
pub fn misfit_scores(orders: &OrderMatrix, threshold: f64) -> MisfitReport {
    let items = orders.items() as f64;
    let m = orders.subsets() as f64;
    let cut = threshold * items;
    let misfit = orders
        .orders
        .iter()
        .map(|row| row.iter().filter(|&&o| o as f64 > cut).count() as f64 / m)
        .collect();
    let mean_std = orders
        .orders
        .iter()
        .map(|row| {
            if items <= 1.0 {
                0.0
            } else {
                row.iter().map(|&o| (o - 1) as f64).sum::<f64>() / (m * (items - 1.0))
            }
        })
        .collect();
    MisfitReport {
        labels: orders.labels.clone(),
        misfit,
        mean_std,
        threshold,
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian kernel density of one item's orders on 200 points over [1, I],
/// reflected at both ends so mass stays inside the range.
pub fn order_density(orders: &OrderMatrix, item: usize) -> Result<Vec<(f64, f64)>> {
    let Some(row) = orders.orders.get(item) else {
        return domain(format!("item {item} out of range"));
    };
    let mut xs: Vec<f64> = row.iter().map(|&o| o as f64).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let iqr = quantile(&xs, 0.75) - quantile(&xs, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH);

    let (lo, hi) = (1.0, orders.items() as f64);
    let kernel = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let points = if hi > lo { DENSITY_POINTS } else { 1 };
    Ok((0..points)
        .map(|k| {
            let x = if points == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            };
            let d = xs
                .iter()
                .map(|&o| {
                    let mut v = kernel((x - o) / h);
                    if hi > lo {
                        v += kernel((x - (2.0 * lo - o)) / h) + kernel((x - (2.0 * hi - o)) / h);
                    }
                    v
                })
                .sum::<f64>()
                / (n * h);
            (x, d)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Share of non-final partitions in which two items co-cluster. A pair
/// joined at step `t` co-clusters in partitions `t..=I−2`.
pub fn dendrogram_similarity(dendrogram: &Dendrogram) -> Vec<Vec<f64>> {
    let n = dendrogram.leaves();
    let join = dendrogram.join_steps();
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        (n - 1).saturating_sub(join[i][j]) as f64 / denom
                    }
                })
                .collect()
        })
        .collect()
}

/// Averages [`dendrogram_similarity`] of the marginal clustering over
/// random person subsets.
pub fn pairwise_similarity(
    data: &ResponseMatrix,
    subsets: usize,
    proportion: f64,
    seed: u64,
    cfg: &FitConfig,
) -> Result<SimilarityMatrix> {
    let runs = on_subsets(data, subsets, proportion, seed, |sub| {
        Ok(dendrogram_similarity(&hcluster_marginal(sub, cfg)?))
    })?;
    let n = data.items();
    let mut values = vec![vec![0.0; n]; n];
    for (_, s) in &runs {
        for i in 0..n {
            for j in 0..n {
                values[i][j] += s[i][j];
            }
        }
    }
    let m = runs.len() as f64;
    for (i, row) in values.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { *v / m };
        }
    }
    Ok(SimilarityMatrix {
        labels: data.labels().to_vec(),
        values,
    })
}

pub fn similarity_to_distance(s: &SimilarityMatrix) -> Result<DistanceMatrix> {
    let values = s
        .values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| if i == j { 0.0 } else { 1.0 - v })
                .collect()
        })
        .collect();
    DistanceMatrix::new(s.labels.clone(), values)
}
