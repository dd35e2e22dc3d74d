//! Disjoint covers of an item index set.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Disjoint, non-empty clusters of item indices covering `0..n`.
///
/// Stored in canonical form: members sorted within each cluster, clusters
/// ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut clusters: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = clusters.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for c in &clusters {
            if c.is_empty() {
                return domain("partition contains an empty cluster");
            }
            for &i in c {
                if i >= n {
                    return domain(format!("item {i} out of range for {n} items"));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return domain(format!("item {i} appears in two clusters"));
                }
            }
        }
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Ok(Self { clusters })
    }

    /// One cluster per item.
    pub fn singletons(n: usize) -> Self {
        Self {
            clusters: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Builds a partition from a cluster id per item.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (item, &g) in assignment.iter().enumerate() {
            groups.entry(g).or_default().push(item);
        }
        Self::new(groups.into_values().collect()).expect("assignment covers its items")
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn items(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Cluster position of every item.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.items()];
        for (g, c) in self.clusters.iter().enumerate() {
            for &i in c {
                out[i] = g;
            }
        }
        out
    }

    /// True if every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let a = coarser.assignment();
        self.items() == coarser.items()
            && self
                .clusters
                .iter()
                .all(|c| c.iter().all(|&i| a[i] == a[c[0]]))
    }

    /// `"0,1,2;3,4"` form used in key=value files.
    pub fn to_compact(&self) -> String {
        self.clusters
            .iter()
            .map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_compact(s: &str) -> Result<Self> {
        let mut clusters = Vec::new();
        for part in s.split(';') {
            let c = part
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>();
            match c {
                Ok(c) => clusters.push(c),
                Err(e) => return domain(format!("bad partition '{s}': {e}")),
            }
        }
        Self::new(clusters)
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = crate::Error;
    fn try_from(v: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.clusters
    }
}
