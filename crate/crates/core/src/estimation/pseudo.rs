//! Maximum pseudo-likelihood: the sum over nodes of node-conditional
//! log-likelihoods, with each coupling shared by the two conditionals that
//! contain it.

use nalgebra::DMatrix;

use super::optimize::{maximize, Evaluation, NewtonOptions};
use super::{check_data_graph, check_outcome_variation, log_sigmoid, FitMeta, FitMethod, FittedModel, Layout};
use crate::data::{CaseDataset, WeightedRow};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::ChainGraphModel;
use crate::sampler::sigmoid;

struct Problem<'g> {
    graph: &'g NetworkGraph,
    layout: Layout,
    rows: Vec<WeightedRow>,
}

fn spin(mask: u64, i: usize) -> f64 {
    if mask >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl<'g> Problem<'g> {
    /// Linear predictor of node `i` and its (parameter, feature) pairs.
    fn features(&self, row: &WeightedRow, i: usize, out: &mut Vec<(usize, f64)>) {
        let l = &self.layout;
        out.clear();
        out.push((l.h(i), 1.0));
        if row.a >> i & 1 == 1 {
            out.push((l.gamma(i), 1.0));
        }
        if l.has_kappa && row.c >> i & 1 == 1 {
            out.push((l.kappa(i), 1.0));
        }
        for &(j, e) in self.graph.neighbors(i) {
            out.push((l.k(e), spin(row.y, j)));
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut feats = Vec::new();
        let mut total = 0.0;
        for row in &self.rows {
            for i in 0..self.layout.n {
                self.features(row, i, &mut feats);
                let eta: f64 = feats.iter().map(|&(p, v)| x[p] * v).sum();
                total += row.weight * log_sigmoid(2.0 * spin(row.y, i) * eta);
            }
        }
        total
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let d = self.layout.len();
        let mut grad = vec![0.0; d];
        let mut hess = DMatrix::zeros(d, d);
        let mut value = 0.0;
        let mut feats = Vec::new();
        for row in &self.rows {
            for i in 0..self.layout.n {
                self.features(row, i, &mut feats);
                let eta: f64 = feats.iter().map(|&(p, v)| x[p] * v).sum();
                let t = spin(row.y, i);
                value += row.weight * log_sigmoid(2.0 * t * eta);
                let d1 = row.weight * 2.0 * t * sigmoid(-2.0 * t * eta);
                let s = sigmoid(2.0 * eta);
                let d2 = -row.weight * 4.0 * s * (1.0 - s);
                for &(p, vp) in &feats {
                    grad[p] += d1 * vp;
                    for &(q, vq) in &feats {
                        hess[(p, q)] += d2 * vp * vq;
                    }
                }
            }
        }
        Evaluation { value, gradient: grad, hessian: hess }
    }
}

fn problem<'g>(data: &CaseDataset, graph: &'g NetworkGraph) -> Result<Problem<'g>> {
    check_data_graph(data, graph)?;
    Ok(Problem { graph, layout: Layout::new(graph, data.has_covariates()), rows: data.weighted_rows() })
}

/// Summed pseudo-log-likelihood of the data under `model`.
pub fn pseudo_log_likelihood(model: &ChainGraphModel, data: &CaseDataset) -> Result<f64> {
    if model.mode() != data.mode() || model.has_kappa() != data.has_covariates() {
        return Err(Error::config("model and dataset disagree on treatment mode or confounders"));
    }
    let p = problem(data, model.graph())?;
    Ok(p.value(&p.layout.pack(model)))
}

pub(crate) fn fit(data: &CaseDataset, graph: &NetworkGraph) -> Result<FittedModel> {
    let p = problem(data, graph)?;
    check_outcome_variation(data)?;
    let r = maximize(vec![0.0; p.layout.len()], |x| p.evaluate(x), |x| p.value(x), &NewtonOptions::default())?;
    let names = p.layout.names(graph);
    let capped: Vec<String> = r.capped.iter().map(|&i| names[i].clone()).collect();
    if !capped.is_empty() {
        log::warn!("pseudo-likelihood estimates reached the magnitude cap: {}", capped.join(", "));
    }
    Ok(FittedModel {
        model: p.layout.unpack(graph, data.mode(), &r.x)?,
        meta: FitMeta {
            method: FitMethod::Pseudo,
            iterations: r.iterations,
            objective: r.value,
            gradient_norm: r.gradient_norm,
            converged: true,
            capped,
        },
    })
}

/// Maximum pseudo-likelihood fit on a fixed graph. Needs no enumeration, so
/// it works for graphs of any size.
pub fn fit_pseudolikelihood(data: &CaseDataset, graph: &NetworkGraph) -> Result<ChainGraphModel> {
    fit(data, graph).map(|f| f.model)
}
