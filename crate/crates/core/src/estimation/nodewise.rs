//! L1-penalized node-conditional logistic regressions.
//!
//! For node `i` with outcome `t`, the conditional law is
//! `P(t | rest) = sigma(2 t eta)` with
//! `eta = intercept + sum_j b_j y_j + g a_i (+ q c_i)`, the same scale as the
//! joint model's `h`, `k`, `gamma`, `kappa`. The fitted objective is the
//! mean log-likelihood minus `lambda * sum_j |b_j|`; only neighbor
//! coefficients are penalized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{log_sigmoid, COEFFICIENT_CAP};
use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::sampler::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodewiseFit {
    pub node: String,
    pub intercept: f64,
    /// One coefficient per other node, in dataset column order.
    pub neighbor_coeffs: Vec<(String, f64)>,
    pub treatment_coeff: f64,
    pub covariate_coeff: Option<f64>,
    pub penalty: f64,
    /// Summed (unpenalized) node-conditional log-likelihood.
    pub log_likelihood: f64,
    /// Penalized mean objective at the estimate.
    pub objective: f64,
    pub iterations: usize,
    /// True when some coefficient ended on the magnitude cap.
    pub capped: bool,
}

impl NodewiseFit {
    /// Labels of neighbors with `|coefficient| > tol`.
    pub fn neighborhood(&self, tol: f64) -> Vec<String> {
        self.neighbor_coeffs.iter().filter(|(_, b)| b.abs() > tol).map(|(l, _)| l.clone()).collect()
    }
}

/// Collapsed design for one node: features `[1, y_j (j != i)..., a_i, c_i?]`.
pub(crate) struct NodeDesign {
    node: usize,
    others: Vec<usize>,
    has_c: bool,
    rows: Vec<(Vec<f64>, f64, f64)>,
    total: f64,
}

impl NodeDesign {
    pub(crate) fn new(data: &CaseDataset, node: usize) -> Result<Self> {
        let n = data.n_nodes();
        if node >= n {
            return Err(Error::shape(format!("node index {node} out of range for {n} nodes")));
        }
        let others: Vec<usize> = (0..n).filter(|&j| j != node).collect();
        let has_c = data.has_covariates();
        let mut groups: BTreeMap<(u64, u64, u64), f64> = BTreeMap::new();
        for r in data.weighted_rows() {
            *groups.entry((r.y, r.a >> node & 1, r.c >> node & 1)).or_insert(0.0) += r.weight;
        }
        let spin = |m: u64, j: usize| if m >> j & 1 == 1 { 1.0 } else { -1.0 };
        let rows: Vec<_> = groups
            .into_iter()
            .map(|((y, a, c), w)| {
                let mut x = Vec::with_capacity(others.len() + 3);
                x.push(1.0);
                x.extend(others.iter().map(|&j| spin(y, j)));
                x.push(a as f64);
                if has_c {
                    x.push(c as f64);
                }
                (x, spin(y, node), w)
            })
            .collect();
        let pos: f64 = rows.iter().filter(|r| r.1 > 0.0).map(|r| r.2).sum();
        let total: f64 = rows.iter().map(|r| r.2).sum();
        if pos == 0.0 || pos == total {
            return Err(Error::DegenerateNode { node: data.labels()[node].clone() });
        }
        Ok(Self { node, others, has_c, rows, total })
    }

    fn dim(&self) -> usize {
        self.others.len() + 2 + usize::from(self.has_c)
    }

    fn penalized(&self, p: usize) -> bool {
        p >= 1 && p <= self.others.len()
    }

    fn loglik(&self, beta: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(x, t, w)| {
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                w * log_sigmoid(2.0 * t * eta)
            })
            .sum()
    }

    fn l1(&self, beta: &[f64]) -> f64 {
        (1..=self.others.len()).map(|p| beta[p].abs()).sum()
    }

    fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        self.loglik(beta) / self.total - lambda * self.l1(beta)
    }

    /// Gradient and Hessian of the mean negative log-likelihood.
    fn derivatives(&self, beta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let mut g = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; d];
        for (x, t, w) in &self.rows {
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let d1 = -w * 2.0 * t * sigmoid(-2.0 * t * eta) / self.total;
            let s = sigmoid(2.0 * eta);
            let d2 = w * 4.0 * s * (1.0 - s) / self.total;
            for p in 0..d {
                g[p] += d1 * x[p];
                for q in p..d {
                    h[p][q] += d2 * x[p] * x[q];
                }
            }
        }
        for p in 1..d {
            let (upper, lower) = h.split_at_mut(p);
            for (q, row) in upper.iter().enumerate() {
                lower[0][q] = row[p];
            }
        }
        (g, h)
    }

    /// Proximal Newton: each step minimizes the penalized quadratic model by
    /// cyclic coordinate descent, then backtracks on the true objective.
    pub(crate) fn fit(&self, lambda: f64, start: Option<&[f64]>) -> Result<(Vec<f64>, usize)> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::config(format!("penalty must be a nonnegative number, got {lambda}")));
        }
        let d = self.dim();
        let mut beta = start.map_or_else(|| vec![0.0; d], <[f64]>::to_vec);
        let mut obj = self.objective(&beta, lambda);
        for iter in 1..=500 {
            let (g, h) = self.derivatives(&beta);
            let target = self.quadratic_step(&beta, &g, &h, lambda);
            let dir: Vec<f64> = target.iter().zip(&beta).map(|(t, b)| t - b).collect();
            // predicted decrease of the composite (minimization) objective
            let mut next: Vec<f64> = target.clone();
            let pred =
                g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() + lambda * (self.l1(&target) - self.l1(&beta));
            if pred > -1e-14 {
                return Ok((self.extend_to_cap(beta, lambda), iter));
            }
            let mut t = 1.0;
            let mut new_obj = self.objective(&next, lambda);
            let mut halvings = 0;
            while new_obj < obj + 1e-4 * t * -pred - 1e-15 {
                halvings += 1;
                if halvings > 60 {
                    return Ok((self.extend_to_cap(beta, lambda), iter));
                }
                t *= 0.5;
                next = beta.iter().zip(&dir).map(|(b, s)| b + t * s).collect();
                new_obj = self.objective(&next, lambda);
            }
            let max_change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let change = (new_obj - obj).abs();
            beta = next;
            obj = new_obj;
            if change < 1e-8 && max_change < 1e-6 {
                return Ok((self.extend_to_cap(beta, lambda), iter));
            }
        }
        Err(Error::NonConvergence(format!("node {} logistic fit did not converge", self.node)))
    }

    /// Under separation the likelihood keeps increasing along the current
    /// direction and Newton creeps outward; jump straight to the cap when
    /// that does not lower the objective.
    fn extend_to_cap(&self, beta: Vec<f64>, lambda: f64) -> Vec<f64> {
        let top = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if top <= 10.0 || top >= COEFFICIENT_CAP {
            return beta;
        }
        let scaled: Vec<f64> = beta.iter().map(|b| b * COEFFICIENT_CAP / top).collect();
        if self.objective(&scaled, lambda) >= self.objective(&beta, lambda) {
            scaled
        } else {
            beta
        }
    }

    fn quadratic_step(&self, beta: &[f64], g: &[f64], h: &[Vec<f64>], lambda: f64) -> Vec<f64> {
        let d = beta.len();
        let mut z = beta.to_vec();
        // hd = H (z - beta)
        let mut hd = vec![0.0; d];
        for _ in 0..2000 {
            let mut max_move: f64 = 0.0;
            for p in 0..d {
                let hpp = h[p][p] + 1e-10;
                let r = g[p] + hd[p] - h[p][p] * (z[p] - beta[p]);
                let raw = beta[p] - r / hpp;
                let mut v = if self.penalized(p) { soft_threshold(raw, lambda / hpp) } else { raw };
                v = v.clamp(-COEFFICIENT_CAP, COEFFICIENT_CAP);
                let delta = v - z[p];
                if delta != 0.0 {
                    for q in 0..d {
                        hd[q] += h[q][p] * delta;
                    }
                    z[p] = v;
                    max_move = max_move.max(delta.abs());
                }
            }
            if max_move < 1e-12 {
                break;
            }
        }
        z
    }

    pub(crate) fn to_fit(&self, data: &CaseDataset, beta: &[f64], lambda: f64, iterations: usize) -> NodewiseFit {
        let labels = data.labels();
        let m = self.others.len();
        let capped = beta.iter().any(|b| b.abs() >= COEFFICIENT_CAP - 1e-9);
        if capped {
            log::warn!(
                "node {}: coefficients reached the magnitude cap {COEFFICIENT_CAP} (separated data)",
                labels[self.node]
            );
        }
        NodewiseFit {
            node: labels[self.node].clone(),
            intercept: beta[0],
            neighbor_coeffs: self.others.iter().zip(&beta[1..=m]).map(|(&j, &b)| (labels[j].clone(), b)).collect(),
            treatment_coeff: beta[m + 1],
            covariate_coeff: self.has_c.then(|| beta[m + 2]),
            penalty: lambda,
            log_likelihood: self.loglik(beta),
            objective: self.objective(beta, lambda),
            iterations,
            capped,
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Penalized logistic regression of node `node` on all other outcomes, its
/// treatment and (when present) its confounder, from a zero start.
pub fn node_logistic_fit(data: &CaseDataset, node: usize, l1_penalty: f64) -> Result<NodewiseFit> {
    let design = NodeDesign::new(data, node)?;
    let (beta, iters) = design.fit(l1_penalty, None)?;
    Ok(design.to_fit(data, &beta, l1_penalty, iters))
}

/// Fits along `penalties` in the given order, warm-starting each fit from the
/// previous one.
pub fn node_logistic_path(data: &CaseDataset, node: usize, penalties: &[f64]) -> Result<Vec<NodewiseFit>> {
    let design = NodeDesign::new(data, node)?;
    let mut out = Vec::with_capacity(penalties.len());
    let mut prev: Option<Vec<f64>> = None;
    for &lambda in penalties {
        let (beta, iters) = design.fit(lambda, prev.as_deref())?;
        out.push(design.to_fit(data, &beta, lambda, iters));
        prev = Some(beta);
    }
    Ok(out)
}
