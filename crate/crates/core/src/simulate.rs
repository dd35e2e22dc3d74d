//! Response generators and the named simulation designs.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{default_labels, ResponseMatrix};
use crate::error::{config, domain, Result};
use crate::estimation::logistic;
use crate::partition::Partition;
use crate::rng::{derive_seed, stream_rng};

/// Difficulties of the first six items in every design.
pub const BASE_DIFFICULTIES: [f64; 6] = [0.0, -1.5, -1.0, 0.5, 1.2, 1.5];

/// The twelve-item difficulty vector.
pub const TWELVE_DIFFICULTIES: [f64; 12] = [
    0.0, -1.5, -1.0, 0.5, 1.2, 1.5, 0.2, -1.3, -0.8, 0.7, 1.4, 1.7,
];

pub const PRESET_NAMES: [&str; 8] = [
    "pollute12-s1",
    "pollute12-s2",
    "pollute12-s3",
    "pollute12-small",
    "clusters6x6",
    "clusters8x4",
    "clusters4-6-2",
    "pollute24",
];

/// Simulates `persons` Rasch respondents with abilities `N(0, sigma²)`.
///
/// Abilities and responses come from stream `(seed, 0)`; each person draws
/// θ and then one uniform per item, in item order.
pub fn gen_rasch(persons: usize, deltas: &[f64], sigma: f64, seed: u64) -> Result<ResponseMatrix> {
    gen_rasch_stream(persons, deltas, sigma, seed, 0)
}

fn gen_rasch_stream(
    persons: usize,
    deltas: &[f64],
    sigma: f64,
    seed: u64,
    stream: u64,
) -> Result<ResponseMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if persons < 2 {
        return domain(format!("need at least 2 persons, got {persons}"));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return domain("difficulties must be non-empty and finite");
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| crate::Error::Domain(e.to_string()))?;
    let mut rng = stream_rng(seed, stream);
    let mut values = Vec::with_capacity(persons * deltas.len());
    for _ in 0..persons {
        let theta: f64 = normal.sample(&mut rng);
        for &d in deltas {
            let u: f64 = rng.random();
            values.push(u8::from(u < logistic(theta - d)));
        }
    }
    ResponseMatrix::new(values, persons, default_labels(deltas.len()))
}

/// Shuffles each listed column independently across persons.
///
/// Column `j` is shuffled with stream `(seed, j)`, so the result does not
/// depend on the order in which items are listed.
pub fn permute_items(data: &ResponseMatrix, items: &[usize], seed: u64) -> Result<ResponseMatrix> {
    let n = data.items();
    for (k, &j) in items.iter().enumerate() {
        if j >= n {
            return domain(format!("item index {j} out of range 0..{n}"));
        }
        if items[..k].contains(&j) {
            return domain(format!("item index {j} listed twice"));
        }
    }
    let mut out = data.clone();
    let persons = data.persons();
    for &j in items {
        let mut col: Vec<u8> = data.column(j).collect();
        col.shuffle(&mut stream_rng(seed, j as u64));
        let cells = out.values_mut();
        for (p, v) in col.into_iter().enumerate() {
            cells[p * n + j] = v;
        }
    }
    debug_assert_eq!(out.persons(), persons);
    Ok(out)
}

/// A simulation design: difficulties, trait structure and pollution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub deltas: Vec<f64>,
    pub sigma_theta: f64,
    pub persons: usize,
    /// Items whose responses are shuffled after generation (0-based).
    pub polluted_items: Vec<usize>,
    /// Items sharing one trait; abilities are independent across clusters.
    pub true_partition: Option<Partition>,
    pub seed: u64,
}

impl Scenario {
    pub fn items(&self) -> usize {
        self.deltas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.items();
        if n < 2 {
            return config("scenario needs at least 2 items");
        }
        if !(self.sigma_theta > 0.0) {
            return config("scenario sigma must be positive");
        }
        if self.persons < 2 {
            return config("scenario needs at least 2 persons");
        }
        if let Some(&j) = self.polluted_items.iter().find(|&&j| j >= n) {
            return config(format!("polluted item {j} out of range"));
        }
        if let Some(p) = &self.true_partition {
            if p.items() != n {
                return config("true partition does not cover the scenario's items");
            }
        }
        Ok(())
    }

    /// The dataset for replication `rep`.
    ///
    /// Replication data use seed `derive_seed(seed, rep)`; trait block `b`
    /// draws from stream `b`, and the pollution shuffle from a separate
    /// child seed.
    pub fn generate(&self, rep: u64) -> Result<ResponseMatrix> {
        self.validate()?;
        let seed = derive_seed(self.seed, rep);
        let n = self.items();
        let data = match &self.true_partition {
            None => gen_rasch(self.persons, &self.deltas, self.sigma_theta, seed)?,
            Some(partition) => {
                let mut cells = vec![0u8; self.persons * n];
                for (b, block) in partition.clusters().iter().enumerate() {
                    let deltas: Vec<f64> = block.iter().map(|&i| self.deltas[i]).collect();
                    let part =
                        gen_rasch_stream(self.persons, &deltas, self.sigma_theta, seed, b as u64)?;
                    for p in 0..self.persons {
                        for (k, &i) in block.iter().enumerate() {
                            cells[p * n + i] = part.get(p, k);
                        }
                    }
                }
                ResponseMatrix::new(cells, self.persons, default_labels(n))?
            }
        };
        permute_items(&data, &self.polluted_items, derive_seed(seed, u64::MAX))
    }

    /// Serialises to `key=value` lines (indices 0-based).
    pub fn to_kv(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut out = String::new();
        out.push_str(&format!("name={}\n", self.name));
        out.push_str(&format!("description={}\n", self.description));
        out.push_str(&format!(
            "deltas={}\n",
            join(&self.deltas.iter().map(f64::to_string).collect::<Vec<_>>())
        ));
        out.push_str(&format!("sigma_theta={}\n", self.sigma_theta));
        out.push_str(&format!("persons={}\n", self.persons));
        out.push_str(&format!(
            "polluted_items={}\n",
            join(
                &self
                    .polluted_items
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
            )
        ));
        if let Some(p) = &self.true_partition {
            out.push_str(&format!("true_partition={}\n", p.to_compact()));
        }
        out.push_str(&format!("seed={}\n", self.seed));
        out
    }

    /// Parses the output of [`Scenario::to_kv`]. Blank lines and `#` comments are ignored.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut s = Scenario {
            name: String::new(),
            description: String::new(),
            deltas: Vec::new(),
            sigma_theta: 1.0,
            persons: 200,
            polluted_items: Vec::new(),
            true_partition: None,
            seed: 1,
        };
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config(format!("expected key=value, got '{line}'"));
            };
            let value = value.trim();
            let bad = |e: &dyn std::fmt::Display| crate::Error::Config(format!("{key}: {e}"));
            match key.trim() {
                "name" => s.name = value.to_string(),
                "description" => s.description = value.to_string(),
                "deltas" => {
                    s.deltas = parse_list(value).map_err(|e| bad(&e))?;
                }
                "sigma_theta" => s.sigma_theta = value.parse().map_err(|e| bad(&e))?,
                "persons" => s.persons = value.parse().map_err(|e| bad(&e))?,
                "polluted_items" => {
                    s.polluted_items = parse_list(value).map_err(|e| bad(&e))?;
                }
                "true_partition" => s.true_partition = Some(Partition::parse_compact(value)?),
                "seed" => s.seed = value.parse().map_err(|e| bad(&e))?,
                other => return config(format!("unknown scenario key '{other}'")),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|t| t.trim().parse()).collect()
}

fn blocks(sizes: &[usize]) -> Partition {
    let mut start = 0;
    let clusters = sizes
        .iter()
        .map(|&s| {
            let c: Vec<usize> = (start..start + s).collect();
            start += s;
            c
        })
        .collect();
    Partition::new(clusters).expect("consecutive blocks")
}

/// Looks up a named design.
pub fn preset(name: &str) -> Result<Scenario> {
    let pollute12 = |sigma: f64, persons: usize| Scenario {
        name: name.to_string(),
        description: format!(
            "12 items, items 11 and 12 shuffled (non-Rasch), sigma={sigma}, P={persons}"
        ),
        deltas: TWELVE_DIFFICULTIES.to_vec(),
        sigma_theta: sigma,
        persons,
        polluted_items: vec![10, 11],
        true_partition: None,
        seed: 1,
    };
    let clusters = |sizes: &[usize]| Scenario {
        name: name.to_string(),
        description: format!(
            "12 items in independent Rasch blocks of sizes {sizes:?}, sigma=1, P=200"
        ),
        deltas: TWELVE_DIFFICULTIES.to_vec(),
        sigma_theta: 1.0,
        persons: 200,
        polluted_items: Vec::new(),
        true_partition: Some(blocks(sizes)),
        seed: 1,
    };
    let scenario = match name {
        "pollute12-s1" => pollute12(1.0, 200),
        "pollute12-s2" => pollute12(2.0, 200),
        "pollute12-s3" => pollute12(3.0, 200),
        "pollute12-small" => pollute12(0.6, 100),
        "clusters6x6" => clusters(&[6, 6]),
        "clusters8x4" => clusters(&[8, 4]),
        "clusters4-6-2" => clusters(&[4, 6, 2]),
        "pollute24" => {
            let deltas = [0.0, 0.3, -0.3, 0.4]
                .iter()
                .flat_map(|shift| BASE_DIFFICULTIES.iter().map(move |d| d + shift))
                .collect();
            Scenario {
                name: name.to_string(),
                description: "24 items: base six difficulties, then the base shifted by +0.3, \
                              -0.3 and +0.4 (each shift applied to all six); items 19-24 shuffled, \
                              sigma=1, P=200"
                    .to_string(),
                deltas,
                sigma_theta: 1.0,
                persons: 200,
                polluted_items: (18..24).collect(),
                true_partition: None,
                seed: 1,
            }
        }
        other => {
            return config(format!(
                "unknown scenario '{other}', expected one of {}",
                PRESET_NAMES.join(", ")
            ))
        }
    };
    Ok(scenario)
}
