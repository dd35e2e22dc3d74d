//! Gauss–Hermite rules normalised to the standard normal density.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub const MAX_NODES: usize = 200;

/// Nodes and weights for integrating against the standard normal density.
///
/// `Σ w_k g(σ x_k)` approximates `E[g(T)]` for `T ~ N(0, σ²)`, exactly when
/// `g` is a polynomial of degree at most `2n − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[g(T)]` for `T ~ N(0, sigma²)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, sigma: f64, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(sigma * x))
            .sum()
    }
}

/// Builds the `n`-point rule.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the probabilists'
/// Hermite polynomials (implicit QL), polished by Newton steps on the
/// orthonormal recurrence; weights are the Christoffel numbers
/// `1 / Σ_j p_j(x)²`, which stay accurate for the far tail nodes.
pub fn gauss_hermite_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_NODES {
        return config(format!("quadrature size {n} outside 1..={MAX_NODES}"));
    }
    if n == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }

    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    off.push(0.0);
    tridiagonal_ql(&mut diag, &mut off);
    diag.sort_by(f64::total_cmp);

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x0 in &diag {
        let mut x = x0;
        for _ in 0..3 {
            let (pn, pn1, _) = orthonormal_hermite(n, x);
            let step = pn / ((n as f64).sqrt() * pn1);
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        let (_, _, sum_sq) = orthonormal_hermite(n, x);
        nodes.push(x);
        weights.push(1.0 / sum_sq);
    }
    // exact symmetry about zero
    for k in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        let w = 0.5 * (weights[k] + weights[n - 1 - k]);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

/// Returns `(p_n(x), p_{n-1}(x), Σ_{j<n} p_j(x)²)` for the orthonormal
/// probabilists' Hermite polynomials.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for j in 0..n {
        sum_sq += cur * cur;
        let jf = j as f64;
        let next = (x * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with shifts).
/// `off[i]` couples rows `i` and `i+1`; `off[n-1]` must be zero.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        for _ in 0..200 {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}
