//! Exact maximum likelihood. Cases sharing a treatment/confounder pattern
//! form a stratum; each stratum contributes its normalizer and, through a
//! Walsh-Hadamard transform of its state probabilities, every moment the
//! gradient and Hessian need.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::optimize::{maximize, Evaluation, NewtonOptions};
use super::{check_data_graph, FitMeta, FitMethod, FittedModel, Layout};
use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::exact::{check_limit, log_sum_exp, log_weights, parity_moments, DEFAULT_ENUMERATION_LIMIT};
use crate::graph::NetworkGraph;
use crate::model::ChainGraphModel;

struct Stratum {
    a: u64,
    c: u64,
    weight: f64,
}

/// Sufficient statistics of a dataset for a fixed graph.
struct Problem<'g> {
    graph: &'g NetworkGraph,
    layout: Layout,
    strata: Vec<Stratum>,
    /// Empirical totals of every sufficient statistic, in layout order.
    totals: Vec<f64>,
    /// Parity mask and indicator of which stratum bits switch it on.
    stats: Vec<(usize, Stat)>,
}

#[derive(Clone, Copy)]
enum Stat {
    Always,
    Treatment(usize),
    Covariate(usize),
}

impl Stat {
    fn active(self, s: &Stratum) -> bool {
        match self {
            Stat::Always => true,
            Stat::Treatment(i) => s.a >> i & 1 == 1,
            Stat::Covariate(i) => s.c >> i & 1 == 1,
        }
    }
}

impl<'g> Problem<'g> {
    fn new(data: &CaseDataset, graph: &'g NetworkGraph) -> Result<Self> {
        check_data_graph(data, graph)?;
        check_limit(graph.len(), DEFAULT_ENUMERATION_LIMIT)?;
        let layout = Layout::new(graph, data.has_covariates());
        let n = graph.len();
        let mut stats = Vec::with_capacity(layout.len());
        stats.extend((0..n).map(|i| (1usize << i, Stat::Always)));
        stats.extend(graph.edges().iter().map(|&(i, j)| ((1usize << i) | (1 << j), Stat::Always)));
        stats.extend((0..n).map(|i| (1usize << i, Stat::Treatment(i))));
        if layout.has_kappa {
            stats.extend((0..n).map(|i| (1usize << i, Stat::Covariate(i))));
        }
        let mut groups: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut totals = vec![0.0; layout.len()];
        for row in data.weighted_rows() {
            *groups.entry((row.a, row.c)).or_insert(0.0) += row.weight;
            let s = Stratum { a: row.a, c: row.c, weight: row.weight };
            for (p, &(mask, stat)) in stats.iter().enumerate() {
                if stat.active(&s) {
                    let parity = (mask as u64 & !row.y).count_ones() % 2;
                    totals[p] += if parity == 0 { row.weight } else { -row.weight };
                }
            }
        }
        let strata = groups.into_iter().map(|((a, c), weight)| Stratum { a, c, weight }).collect();
        Ok(Self { graph, layout, strata, totals, stats })
    }

    fn stratum_log_weights(&self, x: &[f64], s: &Stratum) -> Vec<f64> {
        let l = &self.layout;
        let fields: Vec<f64> = (0..l.n)
            .map(|i| {
                let mut f = x[l.h(i)];
                if s.a >> i & 1 == 1 {
                    f += x[l.gamma(i)];
                }
                if l.has_kappa && s.c >> i & 1 == 1 {
                    f += x[l.kappa(i)];
                }
                f
            })
            .collect();
        let adj: Vec<Vec<(usize, f64)>> =
            (0..l.n).map(|i| self.graph.neighbors(i).iter().map(|&(j, e)| (j, x[l.k(e)])).collect()).collect();
        log_weights(&fields, &adj)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let linear: f64 = x.iter().zip(&self.totals).map(|(a, b)| a * b).sum();
        let norm: f64 =
            self.strata.iter().map(|s| s.weight * log_sum_exp(self.stratum_log_weights(x, s).into_iter())).sum();
        linear - norm
    }

    fn gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = self.totals.clone();
        let mut value: f64 = x.iter().zip(&self.totals).map(|(a, b)| a * b).sum();
        for s in &self.strata {
            let (lz, mom) = parity_moments(&self.stratum_log_weights(x, s));
            value -= s.weight * lz;
            for (p, &(mask, stat)) in self.stats.iter().enumerate() {
                if stat.active(s) {
                    grad[p] -= s.weight * mom[mask];
                }
            }
        }
        (value, grad)
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let d = self.layout.len();
        let mut grad = self.totals.clone();
        let mut value: f64 = x.iter().zip(&self.totals).map(|(a, b)| a * b).sum();
        let mut hess = DMatrix::zeros(d, d);
        let mut on = Vec::with_capacity(d);
        for s in &self.strata {
            let (lz, mom) = parity_moments(&self.stratum_log_weights(x, s));
            value -= s.weight * lz;
            on.clear();
            on.extend((0..d).filter(|&p| self.stats[p].1.active(s)));
            for &p in &on {
                let mp = self.stats[p].0;
                grad[p] -= s.weight * mom[mp];
                for &q in &on {
                    if q < p {
                        continue;
                    }
                    let mq = self.stats[q].0;
                    let cov = mom[mp ^ mq] - mom[mp] * mom[mq];
                    hess[(p, q)] -= s.weight * cov;
                }
            }
        }
        for p in 0..d {
            for q in 0..p {
                hess[(p, q)] = hess[(q, p)];
            }
        }
        Evaluation { value, gradient: grad, hessian: hess }
    }
}

/// Summed exact log-likelihood `sum_cases log p(y | a, c)`.
pub fn mle_log_likelihood(model: &ChainGraphModel, data: &CaseDataset) -> Result<f64> {
    let problem = Problem::new(data, model.graph())?;
    check_mode(model, data)?;
    Ok(problem.value(&problem.layout.pack(model)))
}

/// Gradient of [`mle_log_likelihood`] in the parameter layout
/// `[h, k, gamma, kappa]`.
pub fn mle_gradient(model: &ChainGraphModel, data: &CaseDataset) -> Result<Vec<f64>> {
    let problem = Problem::new(data, model.graph())?;
    check_mode(model, data)?;
    Ok(problem.gradient(&problem.layout.pack(model)).1)
}

fn check_mode(model: &ChainGraphModel, data: &CaseDataset) -> Result<()> {
    if model.mode() != data.mode() || model.has_kappa() != data.has_covariates() {
        return Err(Error::config("model and dataset disagree on treatment mode or confounders"));
    }
    Ok(())
}

pub(crate) fn fit(data: &CaseDataset, graph: &NetworkGraph) -> Result<FittedModel> {
    let problem = Problem::new(data, graph)?;
    let layout = problem.layout;
    let r =
        maximize(vec![0.0; layout.len()], |x| problem.evaluate(x), |x| problem.value(x), &NewtonOptions::default())?;
    let names = layout.names(graph);
    let capped: Vec<String> = r.capped.iter().map(|&p| names[p].clone()).collect();
    if !capped.is_empty() {
        log::warn!("maximum likelihood estimates reached the magnitude cap: {}", capped.join(", "));
    }
    Ok(FittedModel {
        model: layout.unpack(graph, data.mode(), &r.x)?,
        meta: FitMeta {
            method: FitMethod::Mle,
            iterations: r.iterations,
            objective: r.value,
            gradient_norm: r.gradient_norm,
            converged: true,
            capped,
        },
    })
}

/// Exact maximum-likelihood fit of `h, k, gamma` (and `kappa` when the data
/// carry confounders) on a fixed graph, from a zero start.
pub fn fit_exact_mle(data: &CaseDataset, graph: &NetworkGraph) -> Result<ChainGraphModel> {
    fit(data, graph).map(|f| f.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Case;
    use crate::exact::joint_prob;
    use crate::model::{Outcome, Treatment, TreatmentMode};
    use crate::reference;

    fn small_data() -> CaseDataset {
        let rows = [(0b011u64, 1u8), (0b111, 1), (0b000, 0), (0b100, 0), (0b110, 1), (0b001, 0), (0b111, 0)];
        let cases = rows
            .iter()
            .enumerate()
            .map(|(i, &(y, a))| Case {
                id: i.to_string(),
                y: Outcome::from_mask(3, y),
                a: Treatment::Shared(a),
                c: None,
            })
            .collect();
        CaseDataset::new(vec!["a".into(), "b".into(), "c".into()], TreatmentMode::Shared, false, cases).unwrap()
    }

    #[test]
    fn log_likelihood_matches_sum_of_log_joints() {
        let g = NetworkGraph::from_labels(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let m = ChainGraphModel::new(
            g,
            TreatmentMode::Shared,
            vec![0.2, -0.4, 0.1],
            vec![0.3, -0.2],
            vec![0.5, 0.0, -0.3],
            None,
        )
        .unwrap();
        let d = small_data();
        let direct: f64 = d.cases().iter().map(|c| joint_prob(&m, &c.y, &c.a, None).unwrap().ln()).sum();
        assert!((mle_log_likelihood(&m, &d).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn fit_is_stationary() {
        let g = NetworkGraph::from_labels(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let d = small_data();
        let m = fit_exact_mle(&d, &g).unwrap();
        let grad = mle_gradient(&m, &d).unwrap();
        let capped = |p: usize| Layout::new(&g, false).pack(&m)[p].abs() >= 20.0;
        for (p, v) in grad.iter().enumerate() {
            assert!(capped(p) || v.abs() < 1e-6, "component {p}: {v}");
        }
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let d = small_data();
        assert!(matches!(fit_exact_mle(&d, &reference::court_graph()), Err(Error::Configuration(_))));
    }
}
