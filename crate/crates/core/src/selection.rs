//! Greedy growth of one Rasch cluster (forward item selection).
//!
//! Starting from the pair of items whose joint fit has the largest mixing
//! standard deviation, items are added one at a time. Each candidate
//! cluster is fitted from scratch, so a step's result does not depend on
//! the order in which candidates are evaluated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{domain, Error, Result};
use crate::estimation::{fit_mml, FitConfig, RaschFit};

/// Rule used to pick the next item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Largest σ̂ of the fused cluster.
    MaxSigma,
    /// Smallest drop `σ̂(C) − σ̂(C ∪ {j})`.
    SigmaChange,
    /// Smallest total absolute shift of the current items' difficulties.
    DeltaChange,
    /// `MaxSigma` for the first pair, `DeltaChange` afterwards.
    Hybrid,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-sigma" => Ok(Self::MaxSigma),
            "sigma-change" => Ok(Self::SigmaChange),
            "delta-change" => Ok(Self::DeltaChange),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::Config(format!(
                "unknown criterion '{other}' (max-sigma, sigma-change, delta-change, hybrid)"
            ))),
        }
    }
}

/// Inclusion sequence of a greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub labels: Vec<String>,
    /// Item indices in order of inclusion; the first two form the initial pair.
    pub order: Vec<usize>,
    /// σ̂ of the fused cluster after each of the `I − 1` fusions.
    pub step_sigma: Vec<f64>,
    pub criterion: Criterion,
    pub anchor: Option<usize>,
    /// Candidate fits that hit `max_iter` without converging (their σ̂ was still used).
    pub nonconverged_fits: usize,
}

impl SelectionTrace {
    /// 1-based inclusion position of every item.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (k, &i) in self.order.iter().enumerate() {
            pos[i] = k + 1;
        }
        pos
    }

    /// Items of the cluster after fusion `step` (1-based), i.e. the first `step + 1`.
    pub fn cluster_at(&self, step: usize) -> &[usize] {
        &self.order[..=step]
    }
}

/// σ̂ of the Rasch fit restricted to `cluster`.
pub fn fusion_homogeneity(
    data: &ResponseMatrix,
    cluster: &[usize],
    cfg: &FitConfig,
) -> Result<f64> {
    fit_cluster(data, cluster, cfg).map(|f| f.sigma_theta)
}

pub(crate) fn fit_cluster(
    data: &ResponseMatrix,
    cluster: &[usize],
    cfg: &FitConfig,
) -> Result<RaschFit> {
    if cluster.len() < 2 {
        return domain(format!(
            "cluster needs at least 2 items, got {}",
            cluster.len()
        ));
    }
    let mut items = cluster.to_vec();
    items.sort_unstable();
    fit_mml(&data.select_items(&items)?, cfg)
}

/// Clustering I: unanchored, largest fused σ̂ at every step.
pub fn select_sequence(data: &ResponseMatrix, cfg: &FitConfig) -> Result<SelectionTrace> {
    run(data, cfg, Criterion::MaxSigma, None)
}

/// As [`select_sequence`], but the first fusion must contain `anchor`.
pub fn select_with_anchor(
    data: &ResponseMatrix,
    anchor: usize,
    cfg: &FitConfig,
) -> Result<SelectionTrace> {
    if anchor >= data.items() {
        return domain(format!("anchor {anchor} out of range 0..{}", data.items()));
    }
    run(data, cfg, Criterion::MaxSigma, Some(anchor))
}

/// Selection driven by how much the current cluster's estimates move.
pub fn change_sequence(
    data: &ResponseMatrix,
    criterion: Criterion,
    cfg: &FitConfig,
) -> Result<SelectionTrace> {
    run(data, cfg, criterion, None)
}

/// Greedy selection with any criterion and optional anchor.
pub fn select(
    data: &ResponseMatrix,
    criterion: Criterion,
    anchor: Option<usize>,
    cfg: &FitConfig,
) -> Result<SelectionTrace> {
    if let Some(a) = anchor {
        if a >= data.items() {
            return domain(format!("anchor {a} out of range 0..{}", data.items()));
        }
    }
    run(data, cfg, criterion, anchor)
}

struct Candidate {
    items: Vec<usize>,
    fit: RaschFit,
}

fn evaluate(
    data: &ResponseMatrix,
    sets: Vec<Vec<usize>>,
    cfg: &FitConfig,
) -> Result<Vec<Candidate>> {
    sets.into_par_iter()
        .map(|items| {
            let fit = fit_cluster(data, &items, cfg).map_err(|e| {
                Error::Domain(format!("fit failed for candidate cluster {items:?}: {e}"))
            })?;
            Ok(Candidate { items, fit })
        })
        .collect()
}

/// Difficulty of a lone item when the mixing distribution is degenerate.
fn single_item_difficulty(data: &ResponseMatrix, item: usize) -> f64 {
    let p = data.persons() as f64;
    let s = data.column(item).map(f64::from).sum::<f64>();
    ((p - s) / s).ln()
}

fn delta_shift(before: &RaschFit, before_items: &[usize], after: &Candidate) -> f64 {
    before_items
        .iter()
        .zip(&before.difficulties)
        .map(|(i, d)| {
            let k = after
                .items
                .binary_search(i)
                .expect("candidate contains current items");
            (d - after.fit.difficulties[k]).abs()
        })
        .sum()
}

/// Index of the best candidate under "smaller key wins"; ties keep the first.
fn argmin_by<F: Fn(&Candidate) -> (f64, f64)>(cands: &[Candidate], key: F) -> usize {
    let mut best = 0;
    let mut best_key = key(&cands[0]);
    for (k, c) in cands.iter().enumerate().skip(1) {
        let ck = key(c);
        if ck.0 < best_key.0 || (ck.0 == best_key.0 && ck.1 < best_key.1) {
            best = k;
            best_key = ck;
        }
    }
    best
}

fn run(
    data: &ResponseMatrix,
    cfg: &FitConfig,
    criterion: Criterion,
    anchor: Option<usize>,
) -> Result<SelectionTrace> {
    let n = data.items();
    if n < 3 {
        return domain(format!("selection needs at least 3 items, got {n}"));
    }
    cfg.validate()?;
    data.check_no_constant_items()?;

    let mut nonconverged = 0;

    // initial pair, lexicographic candidate order
    let pairs: Vec<Vec<usize>> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| vec![i, j]))
        .filter(|p| anchor.is_none_or(|a| p.contains(&a)))
        .collect();
    let cands = evaluate(data, pairs, cfg)?;
    nonconverged += cands.iter().filter(|c| !c.fit.converged).count();
    let first = match criterion {
        Criterion::DeltaChange => {
            let single: Vec<f64> = (0..n).map(|i| single_item_difficulty(data, i)).collect();
            argmin_by(&cands, |c| {
                let shift = c
                    .items
                    .iter()
                    .zip(&c.fit.difficulties)
                    .map(|(&i, d)| (single[i] - d).abs())
                    .sum::<f64>();
                (shift, 0.0)
            })
        }
        _ => argmin_by(&cands, |c| (-c.fit.sigma_theta, 0.0)),
    };
    let chosen = cands.into_iter().nth(first).expect("non-empty candidates");
    let mut order = match anchor {
        Some(a) => {
            let other = *chosen.items.iter().find(|&&i| i != a).expect("pair");
            vec![a, other]
        }
        None => chosen.items.clone(),
    };
    let mut step_sigma = vec![chosen.fit.sigma_theta];
    let mut current = chosen;

    while order.len() < n {
        let sets: Vec<Vec<usize>> = (0..n)
            .filter(|j| !order.contains(j))
            .map(|j| {
                let mut s = current.items.clone();
                s.push(j);
                s.sort_unstable();
                s
            })
            .collect();
        let joined: Vec<usize> = (0..n).filter(|j| !order.contains(j)).collect();
        let cands = evaluate(data, sets, cfg)?;
        nonconverged += cands.iter().filter(|c| !c.fit.converged).count();
        let base_sigma = current.fit.sigma_theta;
        let pick = match criterion {
            Criterion::MaxSigma => argmin_by(&cands, |c| (-c.fit.sigma_theta, 0.0)),
            // ties in the rounded difference fall back to the larger σ̂
            Criterion::SigmaChange => argmin_by(&cands, |c| {
                (base_sigma - c.fit.sigma_theta, -c.fit.sigma_theta)
            }),
            Criterion::DeltaChange | Criterion::Hybrid => argmin_by(&cands, |c| {
                (delta_shift(&current.fit, &current.items, c), 0.0)
            }),
        };
        order.push(joined[pick]);
        let chosen = cands.into_iter().nth(pick).expect("pick in range");
        step_sigma.push(chosen.fit.sigma_theta);
        current = chosen;
    }

    if nonconverged > 0 {
        log::debug!("{nonconverged} candidate fits reached max_iter");
    }
    Ok(SelectionTrace {
        labels: data.labels().to_vec(),
        order,
        step_sigma,
        criterion,
        anchor,
        nonconverged_fits: nonconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_rasch, BASE_DIFFICULTIES};

    #[test]
    fn structure_on_pure_rasch_data() {
        let data = gen_rasch(200, &BASE_DIFFICULTIES, 1.0, 3).unwrap();
        let t = select_sequence(&data, &FitConfig::default()).unwrap();
        let mut sorted = t.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        assert_eq!(t.step_sigma.len(), 5);
        assert!(t.order[0] < t.order[1]);
        assert_eq!(t.criterion, Criterion::MaxSigma);
        let (lo, hi) = FitConfig::default().sigma_bounds;
        assert!(t.step_sigma.iter().all(|s| (lo..=hi).contains(s)));
    }

    #[test]
    fn anchor_comes_first() {
        let data = gen_rasch(200, &BASE_DIFFICULTIES, 1.0, 4).unwrap();
        for anchor in [0, 3, 5] {
            let t = select_with_anchor(&data, anchor, &FitConfig::default()).unwrap();
            assert_eq!(t.order[0], anchor);
            assert_eq!(t.anchor, Some(anchor));
        }
        assert!(select_with_anchor(&data, 6, &FitConfig::default()).is_err());
    }

    #[test]
    fn rejects_small_or_degenerate_inputs() {
        let data = gen_rasch(50, &BASE_DIFFICULTIES[..2], 1.0, 1).unwrap();
        assert!(select_sequence(&data, &FitConfig::default()).is_err());
        let rows = vec![vec![1, 0, 1], vec![1, 1, 0], vec![1, 0, 0]];
        let data = ResponseMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            select_sequence(&data, &FitConfig::default()),
            Err(Error::DegenerateItem { .. })
        ));
        assert!(fusion_homogeneity(&data, &[1], &FitConfig::default()).is_err());
    }

    #[test]
    fn criterion_names() {
        assert_eq!("hybrid".parse::<Criterion>().unwrap(), Criterion::Hybrid);
        assert!("max".parse::<Criterion>().is_err());
        assert_eq!(
            serde_json::to_string(&Criterion::SigmaChange).unwrap(),
            "\"sigma-change\""
        );
    }
}
