//! Marginal maximum likelihood for the binary Rasch model.
//!
//! Abilities are integrated out against a zero-mean normal mixing density
//! whose standard deviation is estimated along with the item difficulties.
//! Under the Rasch model the likelihood of a response pattern factorises
//! into a term depending only on the observed item totals and a term
//! depending only on the person's sum score, so every pass here works on
//! `(item totals, score frequencies)` rather than on individual rows.

use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{config, domain, Result};
use crate::quadrature::{gauss_hermite_rule, QuadratureRule};

/// Controls the EM run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub quad_points: usize,
    pub max_iter: usize,
    /// Stop once the largest absolute parameter change falls below this.
    pub tol: f64,
    pub sigma_bounds: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            quad_points: 30,
            max_iter: 500,
            tol: 1e-5,
            sigma_bounds: (1e-3, 10.0),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sigma_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return config(format!("invalid sigma bounds [{lo}, {hi}]"));
        }
        if !(self.tol > 0.0) {
            return config(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return config("max_iter must be positive");
        }
        gauss_hermite_rule(self.quad_points).map(|_| ())
    }
}

/// Result of [`fit_mml`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaschFit {
    pub labels: Vec<String>,
    pub difficulties: Vec<f64>,
    pub sigma_theta: f64,
    pub log_marginal_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log marginal likelihood at the start and after every iteration.
    pub loglik_trace: Vec<f64>,
}

/// Rasch success probability `exp(θ−δ) / (1 + exp(θ−δ))`.
pub fn irf(theta: f64, delta: f64) -> Result<f64> {
    if !theta.is_finite() || !delta.is_finite() {
        return domain(format!(
            "irf needs finite inputs, got theta={theta}, delta={delta}"
        ));
    }
    Ok(logistic(theta - delta))
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Sufficient statistics of a response matrix, with items in a canonical
/// order (ascending total, stable) so that column relabelling does not
/// change the arithmetic.
struct Summary {
    /// `order[k]` is the original column of the `k`-th canonical item.
    order: Vec<usize>,
    totals: Vec<f64>,
    /// `(score, frequency)` for every score that occurs.
    scores: Vec<(f64, f64)>,
    persons: f64,
}

impl Summary {
    fn new(data: &ResponseMatrix) -> Self {
        let raw = data.item_totals();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&i| raw[i]);
        let totals = order.iter().map(|&i| raw[i] as f64).collect();
        let mut freq = vec![0usize; data.items() + 1];
        for s in data.person_scores() {
            freq[s] += 1;
        }
        let scores = freq
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(r, &n)| (r as f64, n as f64))
            .collect();
        Self {
            order,
            totals,
            scores,
            persons: data.persons() as f64,
        }
    }

    fn to_canonical(&self, deltas: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| deltas[i]).collect()
    }

    fn to_original(&self, canonical: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; canonical.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = canonical[k];
        }
        out
    }
}

/// Per-node log of `w_k / Π_i (1 + exp(θ_k − δ_i))`.
fn node_log_terms(rule: &QuadratureRule, deltas: &[f64], sigma: f64) -> Vec<f64> {
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&x, &w)| {
            let theta = sigma * x;
            w.ln() - deltas.iter().map(|&d| softplus(theta - d)).sum::<f64>()
        })
        .collect()
}

fn loglik(summary: &Summary, rule: &QuadratureRule, deltas: &[f64], sigma: f64) -> f64 {
    let base = node_log_terms(rule, deltas, sigma);
    let mut buf = vec![0.0; rule.len()];
    let mut total: f64 = -summary
        .totals
        .iter()
        .zip(deltas)
        .map(|(&s, &d)| s * d)
        .sum::<f64>();
    for &(r, n) in &summary.scores {
        for ((b, &a), &x) in buf.iter_mut().zip(&base).zip(rule.nodes()) {
            *b = a + r * sigma * x;
        }
        total += n * log_sum_exp(&buf);
    }
    total
}

/// Log of the quadrature-approximated marginal likelihood
/// `Π_p Σ_k w_k Π_i P(Y_pi = y_pi | σ x_k, δ_i)`.
pub fn log_marginal_likelihood(
    data: &ResponseMatrix,
    difficulties: &[f64],
    sigma: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if difficulties.len() != data.items() {
        return domain(format!(
            "{} difficulties for {} items",
            difficulties.len(),
            data.items()
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive and finite, got {sigma}"));
    }
    if difficulties.iter().any(|d| !d.is_finite()) {
        return domain("difficulties must be finite");
    }
    let summary = Summary::new(data);
    Ok(loglik(
        &summary,
        rule,
        &summary.to_canonical(difficulties),
        sigma,
    ))
}

/// Expected person counts at each node and the posterior mean of θ².
fn e_step(summary: &Summary, rule: &QuadratureRule, deltas: &[f64], sigma: f64) -> (Vec<f64>, f64) {
    let base = node_log_terms(rule, deltas, sigma);
    let mut counts = vec![0.0; rule.len()];
    let mut post = vec![0.0; rule.len()];
    for &(r, n) in &summary.scores {
        for ((p, &a), &x) in post.iter_mut().zip(&base).zip(rule.nodes()) {
            *p = a + r * sigma * x;
        }
        let norm = log_sum_exp(&post);
        for (c, &p) in counts.iter_mut().zip(&post) {
            *c += n * (p - norm).exp();
        }
    }
    let second: f64 = counts
        .iter()
        .zip(rule.nodes())
        .map(|(&c, &x)| c * (sigma * x).powi(2))
        .sum::<f64>()
        / summary.persons;
    (counts, second)
}

/// Solves `Σ_k n_k P(θ_k − δ) = total` for δ by guarded Newton.
fn solve_difficulty(start: f64, total: f64, counts: &[f64], thetas: &[f64]) -> f64 {
    let score = |d: f64| -> (f64, f64) {
        let mut g = -total;
        let mut h = 0.0;
        for (&n, &t) in counts.iter().zip(thetas) {
            let p = logistic(t - d);
            g += n * p;
            h += n * p * (1.0 - p);
        }
        (g, h)
    };
    let mut delta = start;
    let (mut g, mut h) = score(delta);
    for _ in 0..50 {
        if g == 0.0 || h <= 0.0 {
            break;
        }
        let mut step = g / h;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = delta + step;
            let (gc, hc) = score(cand);
            if gc.abs() < g.abs() {
                delta = cand;
                g = gc;
                h = hc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < 1e-13 * delta.abs().max(1.0) {
            break;
        }
    }
    delta
}

/// One EM update. Returns the new parameters and their log-likelihood,
/// which is never below `ll`.
fn em_step(
    summary: &Summary,
    rule: &QuadratureRule,
    deltas: &[f64],
    sigma: f64,
    bounds: (f64, f64),
) -> (Vec<f64>, f64, f64) {
    let (counts, second) = e_step(summary, rule, deltas, sigma);
    let thetas: Vec<f64> = rule.nodes().iter().map(|&x| sigma * x).collect();
    let new_deltas: Vec<f64> = deltas
        .iter()
        .zip(&summary.totals)
        .map(|(&d, &s)| solve_difficulty(d, s, &counts, &thetas))
        .collect();

    let proposal = second.sqrt().clamp(bounds.0, bounds.1);
    let proposed_ll = loglik(summary, rule, &new_deltas, proposal);
    let held = loglik(summary, rule, &new_deltas, sigma);
    if proposed_ll >= held {
        return (new_deltas, proposal, proposed_ll);
    }
    let mut step = proposal - sigma;
    for _ in 0..30 {
        step *= 0.5;
        let cand = sigma + step;
        let cand_ll = loglik(summary, rule, &new_deltas, cand);
        if cand_ll >= held {
            return (new_deltas, cand, cand_ll);
        }
    }
    (new_deltas, sigma, held)
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fits the Rasch model with normal mixing by EM over a Gauss–Hermite grid.
///
/// E-step: posterior node weights per score group. M-step: each difficulty
/// solves its weighted score equation; σ moves to the root posterior second
/// moment, clamped to the configured bounds. A σ proposal that would lower
/// the quadrature likelihood is pulled back toward the previous value by
/// halving, so every EM step is monotone.
///
/// Steps are grouped in pairs and extrapolated (SQUAREM); the extrapolated
/// point is kept only when one further EM step from it beats the plain pair.
/// `iterations` counts EM steps.
pub fn fit_mml(data: &ResponseMatrix, cfg: &FitConfig) -> Result<RaschFit> {
    cfg.validate()?;
    if data.persons() < 2 {
        return domain(format!("need at least 2 persons, got {}", data.persons()));
    }
    if data.items() < 2 {
        return domain(format!("need at least 2 items, got {}", data.items()));
    }
    data.check_no_constant_items()?;

    let rule = gauss_hermite_rule(cfg.quad_points)?;
    let summary = Summary::new(data);
    let bounds = cfg.sigma_bounds;
    let n = data.items();

    // parameter vector: canonical difficulties followed by sigma
    let mut x: Vec<f64> = summary
        .totals
        .iter()
        .map(|&s| {
            let fail = (summary.persons - s) / summary.persons;
            (fail / (1.0 - fail)).ln()
        })
        .collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|d| *d -= mean);
    x.push(1.0f64.clamp(bounds.0, bounds.1));

    let step = |x: &[f64]| -> (Vec<f64>, f64) {
        let (mut d, s, ll) = em_step(&summary, &rule, &x[..n], x[n], bounds);
        d.push(s);
        (d, ll)
    };

    let mut ll = loglik(&summary, &rule, &x[..n], x[n]);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        let (x1, ll1) = step(&x);
        iterations += 1;
        trace.push(ll1);
        if max_change(&x, &x1) < cfg.tol || iterations == cfg.max_iter {
            converged = max_change(&x, &x1) < cfg.tol;
            x = x1;
            ll = ll1;
            break;
        }
        let (x2, ll2) = step(&x1);
        iterations += 1;
        trace.push(ll2);

        let r: Vec<f64> = x1.iter().zip(&x).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = x2
            .iter()
            .zip(&x1)
            .zip(&r)
            .map(|((c, b), r)| c - b - r)
            .collect();
        let rr: f64 = r.iter().map(|a| a * a).sum();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let mut next = (x2, ll2);
        if vv > 0.0 && iterations < cfg.max_iter {
            let alpha = -(rr / vv).sqrt().max(1.0);
            let mut jump: Vec<f64> = x
                .iter()
                .zip(&r)
                .zip(&v)
                .map(|((x0, r), v)| x0 - 2.0 * alpha * r + alpha * alpha * v)
                .collect();
            jump[n] = jump[n].clamp(bounds.0, bounds.1);
            if jump.iter().all(|a| a.is_finite()) {
                let (x3, ll3) = step(&jump);
                iterations += 1;
                if ll3.is_finite() && ll3 >= next.1 {
                    next = (x3, ll3);
                }
                trace.push(next.1);
            }
        }
        let change = max_change(&x, &next.0);
        x = next.0;
        ll = next.1;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    if !ll.is_finite() {
        return domain("log marginal likelihood is not finite");
    }
    Ok(RaschFit {
        labels: data.labels().to_vec(),
        difficulties: summary.to_original(&x[..n]),
        sigma_theta: x[n],
        log_marginal_likelihood: ll,
        iterations,
        converged,
        loglik_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_labels;
    use crate::error::Error;

    #[test]
    fn irf_values() {
        assert_eq!(irf(0.0, 0.0).unwrap(), 0.5);
        assert!((irf(3f64.ln(), 0.0).unwrap() - 0.75).abs() < 1e-15);
        let (a, b) = (1.7, -0.4);
        assert!((irf(a, b).unwrap() + irf(b, a).unwrap() - 1.0).abs() < 1e-15);
        assert!(irf(f64::NAN, 0.0).is_err());
        assert!(irf(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn degenerate_mixing_single_cell() {
        let data = ResponseMatrix::new(vec![1], 1, default_labels(1)).unwrap();
        for n in [1, 5, 30] {
            let rule = gauss_hermite_rule(n).unwrap();
            let ll = log_marginal_likelihood(&data, &[0.0], 1e-3, &rule).unwrap();
            assert!((ll - 0.5f64.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let data = ResponseMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let rule = gauss_hermite_rule(5).unwrap();
        assert!(matches!(
            log_marginal_likelihood(&data, &[0.0], 1.0, &rule),
            Err(Error::Domain(_))
        ));
        assert!(log_marginal_likelihood(&data, &[0.0, 0.0], 0.0, &rule).is_err());
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let one = ResponseMatrix::from_rows(&[vec![1, 0]]).unwrap();
        assert!(matches!(
            fit_mml(&one, &FitConfig::default()),
            Err(Error::Domain(_))
        ));
        let constant = ResponseMatrix::from_rows(&[vec![1, 0], vec![1, 1]]).unwrap();
        match fit_mml(&constant, &FitConfig::default()) {
            Err(Error::DegenerateItem { label, .. }) => assert_eq!(label, "item1"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = FitConfig {
            sigma_bounds: (2.0, 1.0),
            ..FitConfig::default()
        };
        let ok = ResponseMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(fit_mml(&ok, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn newton_solves_score_equation() {
        let counts = [10.0, 30.0, 10.0];
        let thetas = [-1.0, 0.0, 1.0];
        let d = solve_difficulty(0.0, 12.0, &counts, &thetas);
        let fitted: f64 = counts
            .iter()
            .zip(&thetas)
            .map(|(&n, &t)| n * logistic(t - d))
            .sum();
        assert!((fitted - 12.0).abs() < 1e-9);
        // extreme totals stay finite
        let d = solve_difficulty(0.0, 0.001, &counts, &thetas);
        assert!(d.is_finite() && d > 5.0);
    }
}
