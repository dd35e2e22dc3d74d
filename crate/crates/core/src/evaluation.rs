//! Agreement with a known partition and classical item diagnostics.

use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{domain, Result};
use crate::hierarchy::Dendrogram;
use crate::partition::Partition;

/// Pair-counting agreement `(h, f)` between a true and an estimated
/// partition. `h` is the share of truly co-clustered pairs that the
/// estimate co-clusters; `f` is the share of truly separated pairs that it
/// co-clusters. Without pairs of a kind, `h = 1` and `f = 0`.
pub fn hit_false_rates(truth: &Partition, estimate: &Partition) -> Result<(f64, f64)> {
    if truth.items() != estimate.items() {
        return domain(format!(
            "partitions cover {} and {} items",
            truth.items(),
            estimate.items()
        ));
    }
    let t = truth.assignment();
    let e = estimate.assignment();
    let (mut within, mut hits, mut between, mut false_) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..t.len() {
        for j in (i + 1)..t.len() {
            let together = e[i] == e[j];
            if t[i] == t[j] {
                within += 1;
                hits += together as u64;
            } else {
                between += 1;
                false_ += together as u64;
            }
        }
    }
    let h = if within == 0 {
        1.0
    } else {
        hits as f64 / within as f64
    };
    let f = if between == 0 {
        0.0
    } else {
        false_ as f64 / between as f64
    };
    Ok((h, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    /// Cluster count of each point.
    pub labels: Vec<usize>,
    pub points: Vec<(f64, f64)>,
}

/// `(h, f)` for every cut `k = 1..=I` of a dendrogram.
pub fn roc_curve(truth: &Partition, dendrogram: &Dendrogram) -> Result<EvalCurve> {
    let n = dendrogram.leaves();
    if truth.items() != n {
        return domain(format!(
            "truth covers {} items, dendrogram {n}",
            truth.items()
        ));
    }
    let points = (1..=n)
        .map(|k| hit_false_rates(truth, &dendrogram.cut(k)?))
        .collect::<Result<_>>()?;
    Ok(EvalCurve {
        labels: (1..=n).collect(),
        points,
    })
}

fn column_f64(data: &ResponseMatrix, item: usize) -> Vec<f64> {
    data.column(item).map(f64::from).collect()
}

/// Pearson correlations between item columns.
pub fn item_correlations(data: &ResponseMatrix) -> Result<Vec<Vec<f64>>> {
    data.check_no_constant_items()?;
    let n = data.items();
    let p = data.persons() as f64;
    let centred: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let col = column_f64(data, i);
            let mean = col.iter().sum::<f64>() / p;
            col.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centred
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut out = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCovariance {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Score groups that entered the average.
    pub scores_used: Vec<usize>,
    pub conditioning: String,
    pub weighting: String,
}

/// Sample covariances among persons with equal total score on all items,
/// averaged without weights over scores `1..I−1`. Groups of fewer than two
/// persons, or where every item is constant, are skipped.
pub fn mean_conditional_covariance(data: &ResponseMatrix) -> Result<ConditionalCovariance> {
    let n = data.items();
    if data.persons() < 2 {
        return domain("conditional covariance needs at least 2 persons");
    }
    let scores = data.person_scores();
    let mut sum = vec![vec![0.0; n]; n];
    let mut used = Vec::new();
    for r in 1..n {
        let rows: Vec<usize> = (0..data.persons()).filter(|&p| scores[p] == r).collect();
        if rows.len() < 2 {
            continue;
        }
        let k = rows.len() as f64;
        let means: Vec<f64> = (0..n)
            .map(|i| rows.iter().map(|&p| data.get(p, i) as f64).sum::<f64>() / k)
            .collect();
        if means.iter().all(|&m| m == 0.0 || m == 1.0) {
            continue;
        }
        for i in 0..n {
            for j in i..n {
                let c = rows
                    .iter()
                    .map(|&p| {
                        (data.get(p, i) as f64 - means[i]) * (data.get(p, j) as f64 - means[j])
                    })
                    .sum::<f64>()
                    / (k - 1.0);
                sum[i][j] += c;
            }
        }
        used.push(r);
    }
    if used.is_empty() {
        return domain("no score group has two or more persons with varying responses");
    }
    let m = used.len() as f64;
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            values[i][j] = sum[i][j] / m;
            values[j][i] = values[i][j];
        }
    }
    Ok(ConditionalCovariance {
        labels: data.labels().to_vec(),
        values,
        scores_used: used,
        conditioning: "sum over all items".into(),
        weighting: "unweighted mean over score groups".into(),
    })
}

/// Mean of the strictly upper triangle.
pub fn mean_off_diagonal(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut s = 0.0;
    let mut c = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            s += m[i][j];
            c += 1;
        }
    }
    if c == 0 {
        0.0
    } else {
        s / c as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_endpoints() {
        let truth = Partition::parse_compact("0,1,2,3,4,5;6,7,8,9,10,11").unwrap();
        assert_eq!(hit_false_rates(&truth, &truth).unwrap(), (1.0, 0.0));
        let one = Partition::new(vec![(0..12).collect()]).unwrap();
        assert_eq!(hit_false_rates(&truth, &one).unwrap(), (1.0, 1.0));
        assert_eq!(
            hit_false_rates(&truth, &Partition::singletons(12)).unwrap(),
            (0.0, 0.0)
        );
        assert!(hit_false_rates(&truth, &Partition::singletons(11)).is_err());
    }

    #[test]
    fn degenerate_truths() {
        let singles = Partition::singletons(4);
        let one = Partition::new(vec![(0..4).collect()]).unwrap();
        assert_eq!(hit_false_rates(&singles, &one).unwrap(), (1.0, 1.0));
        assert_eq!(hit_false_rates(&one, &singles).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn duplicated_column() {
        let rows = vec![
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 1, 1, 0],
            vec![0, 0, 0, 1],
            vec![0, 0, 1, 0],
        ];
        let data = ResponseMatrix::from_rows(&rows).unwrap();
        let r = item_correlations(&data).unwrap();
        assert!((r[0][1] - 1.0).abs() < 1e-15);
        let c = mean_conditional_covariance(&data).unwrap();
        assert!((c.values[0][1] - c.values[0][0]).abs() < 1e-15);
        assert!(c.values[0][0] >= 0.0);
    }

    #[test]
    fn identical_rows_rejected() {
        let data = ResponseMatrix::from_rows(&vec![vec![1, 0, 1]; 5]).unwrap();
        assert!(mean_conditional_covariance(&data).is_err());
    }
}
