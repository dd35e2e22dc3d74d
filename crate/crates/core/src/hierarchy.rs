//! Agglomerative item clustering and dendrograms.
//!
//! Two families: the marginal method fuses the pair of clusters whose
//! union has the largest fitted σ̂; the classical baselines use
//! Lance–Williams updates on a distance matrix.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{domain, Error, Result};
use crate::estimation::FitConfig;
use crate::partition::Partition;
use crate::selection::fit_cluster;

/// A symmetric matrix of pairwise item dissimilarities with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return domain(format!("distance matrix must be {n} x {n}"));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return domain(format!("distance diagonal at {i} is {}", values[i][i]));
            }
            for j in 0..i {
                let (a, b) = (values[i][j], values[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return domain(format!("distance ({i}, {j}) is not finite"));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return domain(format!(
                        "distance matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    ));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightMode {
    StepIndex,
    LinkageDistance,
}

/// One fusion. Leaves have ids `0..I`; the cluster created at step `s`
/// (1-based) has id `I + s − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub step: usize,
    pub left: usize,
    pub right: usize,
    pub members: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    #[serde(rename = "leaves")]
    pub labels: Vec<String>,
    pub merges: Vec<MergeStep>,
    pub height_mode: HeightMode,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.labels.len()
    }

    /// Height of merge `k` (0-based): its step number, or its linkage distance.
    pub fn height(&self, k: usize) -> f64 {
        let m = &self.merges[k];
        match self.height_mode {
            HeightMode::StepIndex => m.step as f64,
            HeightMode::LinkageDistance => m.distance.unwrap_or(m.step as f64),
        }
    }

    /// Members of cluster `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        if id < self.leaves() {
            vec![id]
        } else {
            self.merges[id - self.leaves()].members.clone()
        }
    }

    /// Checks that merges form a binary tree over the leaves.
    pub fn validate(&self) -> Result<()> {
        let n = self.leaves();
        if self.merges.len() + 1 != n.max(1) {
            return domain(format!("{} merges for {n} leaves", self.merges.len()));
        }
        let mut used = vec![false; 2 * n];
        for (k, m) in self.merges.iter().enumerate() {
            let id = n + k;
            for child in [m.left, m.right] {
                if child >= id || std::mem::replace(&mut used[child], true) {
                    return domain(format!(
                        "merge {} reuses or forward-references {child}",
                        m.step
                    ));
                }
            }
            let mut expect = self.members(m.left);
            expect.extend(self.members(m.right));
            expect.sort_unstable();
            if expect != m.members || m.step != k + 1 {
                return domain(format!("merge {} has inconsistent members", m.step));
            }
        }
        Ok(())
    }

    /// The partition into exactly `k` clusters obtained by undoing the last
    /// `k − 1` merges.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let n = self.leaves();
        if k == 0 || k > n {
            return domain(format!("cannot cut {n} leaves into {k} clusters"));
        }
        let mut assignment: Vec<usize> = (0..n).collect();
        for m in &self.merges[..n - k] {
            let target = m.members[0];
            for &i in &m.members {
                assignment[i] = target;
            }
        }
        Ok(Partition::from_assignment(&assignment))
    }

    /// For every pair, the first step (1-based) at which both items share a
    /// cluster. The diagonal is 0.
    pub fn join_steps(&self) -> Vec<Vec<usize>> {
        let n = self.leaves();
        let mut out = vec![vec![0; n]; n];
        for m in &self.merges {
            let left = self.members(m.left);
            let right = self.members(m.right);
            for &a in &left {
                for &b in &right {
                    out[a][b] = m.step;
                    out[b][a] = m.step;
                }
            }
        }
        out
    }

    /// Newick text with branch lengths taken from merge heights.
    pub fn to_newick(&self) -> String {
        let n = self.leaves();
        if self.merges.is_empty() {
            return format!(
                "{};",
                newick_label(self.labels.first().map_or("", String::as_str))
            );
        }
        let node_height = |id: usize| if id < n { 0.0 } else { self.height(id - n) };
        fn render(d: &Dendrogram, id: usize, h: &dyn Fn(usize) -> f64, out: &mut String) {
            let n = d.leaves();
            if id < n {
                out.push_str(&newick_label(&d.labels[id]));
                return;
            }
            let m = &d.merges[id - n];
            out.push('(');
            for (k, child) in [m.left, m.right].into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render(d, child, h, out);
                out.push_str(&format!(":{}", h(id) - h(child)));
            }
            out.push(')');
        }
        let mut out = String::new();
        render(self, n + self.merges.len() - 1, &node_height, &mut out);
        out.push(';');
        out
    }
}

fn newick_label(label: &str) -> String {
    if label.chars().any(|c| "()[]':;, \t".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Free function form of [`Dendrogram::cut`].
pub fn cut_k(dendrogram: &Dendrogram, k: usize) -> Result<Partition> {
    dendrogram.cut(k)
}

struct Active {
    id: usize,
    members: Vec<usize>,
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u
}

/// Clustering II: repeatedly fuse the two clusters whose union has the
/// largest σ̂. Ties go to the lexicographically smallest pair of cluster
/// minima. σ̂ is recorded per merge; heights are step indices.
///
/// Fits are cached by member set for the duration of the run.
pub fn hcluster_marginal(data: &ResponseMatrix, cfg: &FitConfig) -> Result<Dendrogram> {
    let n = data.items();
    if n < 3 {
        return domain(format!(
            "hierarchical clustering needs at least 3 items, got {n}"
        ));
    }
    cfg.validate()?;
    data.check_no_constant_items()?;

    let mut active: Vec<Active> = (0..n)
        .map(|i| Active {
            id: i,
            members: vec![i],
        })
        .collect();
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 1..n {
        // active is kept sorted by smallest member, so pair order is lexicographic
        let mut pairs: Vec<(usize, usize, Vec<usize>)> = (0..active.len())
            .flat_map(|a| ((a + 1)..active.len()).map(move |b| (a, b)))
            .map(|(a, b)| (a, b, union(&active[a].members, &active[b].members)))
            .collect();
        let missing: Vec<&Vec<usize>> = pairs
            .iter()
            .map(|p| &p.2)
            .filter(|s| !cache.contains_key(*s))
            .collect();
        let fitted: Vec<(Vec<usize>, f64)> = missing
            .into_par_iter()
            .map(|set| {
                fit_cluster(data, set, cfg)
                    .map(|f| (set.clone(), f.sigma_theta))
                    .map_err(|e| Error::Domain(format!("fit failed for cluster {set:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        cache.extend(fitted);

        let mut best = 0;
        for k in 1..pairs.len() {
            if cache[&pairs[k].2] > cache[&pairs[best].2] {
                best = k;
            }
        }
        let (a, b, members) = pairs.swap_remove(best);
        let sigma = cache[&members];
        merges.push(MergeStep {
            step,
            left: active[a].id,
            right: active[b].id,
            members: members.clone(),
            sigma: Some(sigma),
            distance: None,
        });
        active.remove(b);
        active[a] = Active {
            id: n + step - 1,
            members,
        };
    }

    Ok(Dendrogram {
        labels: data.labels().to_vec(),
        merges,
        height_mode: HeightMode::StepIndex,
    })
}

/// Euclidean distances between item response vectors.
pub fn euclidean_item_distances(data: &ResponseMatrix) -> DistanceMatrix {
    let n = data.items();
    let mut values = vec![vec![0.0f64; n]; n];
    for p in 0..data.persons() {
        let row = data.row(p);
        for i in 0..n {
            for j in (i + 1)..n {
                if row[i] != row[j] {
                    values[i][j] += 1.0;
                }
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = values[i][j].sqrt();
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    DistanceMatrix {
        labels: data.labels().to_vec(),
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    Average,
    /// Lance–Williams centroid update on squared distances; heights are
    /// reported back on the distance scale and may decrease (inversions).
    Centroid,
}

impl std::str::FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Self::Average),
            "centroid" => Ok(Self::Centroid),
            other => Err(Error::Config(format!("unknown linkage '{other}'"))),
        }
    }
}

/// Classical agglomerative clustering. Ties go to the lexicographically
/// smallest pair of cluster minima.
pub fn agglomerate(dist: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let dist = DistanceMatrix::new(dist.labels.clone(), dist.values.clone())?;
    let n = dist.len();
    let mut work: Vec<Vec<f64>> = match linkage {
        Linkage::Average => dist.values.clone(),
        Linkage::Centroid => dist
            .values
            .iter()
            .map(|r| r.iter().map(|d| d * d).collect())
            .collect(),
    };
    // slot index = smallest member's original index; slots stay sorted
    let mut active: Vec<(usize, Active)> = (0..n)
        .map(|i| {
            (
                i,
                Active {
                    id: i,
                    members: vec![i],
                },
            )
        })
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 1..n {
        let mut best = (0, 1);
        let mut best_d = f64::INFINITY;
        for a in 0..active.len() {
            for b in (a + 1)..active.len() {
                let d = work[active[a].0][active[b].0];
                if d < best_d {
                    best_d = d;
                    best = (a, b);
                }
            }
        }
        let (a, b) = best;
        let (sa, sb) = (active[a].0, active[b].0);
        let (na, nb) = (
            active[a].1.members.len() as f64,
            active[b].1.members.len() as f64,
        );
        let dab = work[sa][sb];
        for (sc, _) in active.iter().filter(|(s, _)| *s != sa && *s != sb) {
            let sc = *sc;
            let updated = match linkage {
                Linkage::Average => (na * work[sa][sc] + nb * work[sb][sc]) / (na + nb),
                Linkage::Centroid => {
                    (na * work[sa][sc] + nb * work[sb][sc]) / (na + nb)
                        - na * nb * dab / ((na + nb) * (na + nb))
                }
            };
            work[sa][sc] = updated;
            work[sc][sa] = updated;
        }
        let height = match linkage {
            Linkage::Average => dab,
            Linkage::Centroid => dab.max(0.0).sqrt(),
        };
        let members = union(&active[a].1.members, &active[b].1.members);
        merges.push(MergeStep {
            step,
            left: active[a].1.id,
            right: active[b].1.id,
            members: members.clone(),
            sigma: None,
            distance: Some(height),
        });
        active.remove(b);
        active[a].1 = Active {
            id: n + step - 1,
            members,
        };
    }

    Ok(Dendrogram {
        labels: dist.labels,
        merges,
        height_mode: HeightMode::LinkageDistance,
    })
}
