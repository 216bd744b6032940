//! Nonparametric case bootstrap for counterfactual effects.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use super::structure::{default_penalty_grid, learn_structure, SymmetrizationRule};
use super::{fit_model, FitMethod};
use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::exact::{CovariateLaw, EffectEstimate, EffectScale, EventPredicate, ExactEngine};
use crate::graph::NetworkGraph;
use crate::model::{ChainGraphModel, Treatment};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub nb: usize,
    pub seed: u64,
    /// Relearn the edge set on every resample instead of holding it fixed.
    pub refit_structure: bool,
    pub method: FitMethod,
    /// Used only when `refit_structure` is set.
    pub penalty_grid: Vec<f64>,
    pub rule: SymmetrizationRule,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            nb: 500,
            seed: 0,
            refit_structure: false,
            method: FitMethod::Mle,
            penalty_grid: default_penalty_grid(),
            rule: SymmetrizationRule::And,
        }
    }
}

/// Contrast of interest: `a1` against `a0` for `event` on `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectQuery {
    pub a1: Treatment,
    pub a0: Treatment,
    pub event: EventPredicate,
    pub scale: EffectScale,
}

/// Largest fraction of replicates that may fail before the bootstrap errors.
const MAX_DROP_FRACTION: f64 = 0.1;

fn covariate_law(data: &CaseDataset) -> Option<CovariateLaw> {
    data.has_covariates().then(|| CovariateLaw::empirical_from_masks(data.n_nodes(), &data.covariate_frequencies()))
}

fn effects(model: &ChainGraphModel, data: &CaseDataset, queries: &[EffectQuery]) -> Vec<Result<EffectEstimate>> {
    let law = covariate_law(data);
    let engine = ExactEngine::default();
    queries.iter().map(|q| engine.causal_effect(model, &q.a1, &q.a0, &q.event, q.scale, law.as_ref())).collect()
}

fn fit_on(data: &CaseDataset, graph: &NetworkGraph, spec: &BootstrapSpec) -> Result<ChainGraphModel> {
    if spec.refit_structure {
        let learned = learn_structure(data, &spec.penalty_grid, spec.rule)?;
        fit_model(data, &learned.graph, spec.method).map(|f| f.model)
    } else {
        fit_model(data, graph, spec.method).map(|f| f.model)
    }
}

/// Bootstrap several effects from shared refits. Point estimates come from
/// the full-data fit on `graph`; each replicate resamples cases with
/// replacement, refits and recomputes every effect. With confounders the
/// covariate law is the empirical law of the (resampled) data.
pub fn bootstrap_effects(
    data: &CaseDataset,
    graph: &NetworkGraph,
    queries: &[EffectQuery],
    spec: &BootstrapSpec,
) -> Result<Vec<EffectEstimate>> {
    if spec.nb < 2 {
        return Err(Error::config("bootstrap needs nb >= 2"));
    }
    let base = fit_model(data, graph, spec.method)?.model;
    let points = effects(&base, data, queries).into_iter().collect::<Result<Vec<_>>>()?;
    let n_obs = data.len();
    let replicates: Vec<Option<Vec<Option<[f64; 3]>>>> = (0..spec.nb)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(spec.seed, &[r as u64]);
            let idx: Vec<usize> = (0..n_obs).map(|_| rng.random_range(0..n_obs)).collect();
            let sample = data.resample(&idx).ok()?;
            match fit_on(&sample, graph, spec) {
                Ok(model) => Some(
                    effects(&model, &sample, queries)
                        .into_iter()
                        .map(|e| e.ok().map(|e| [e.point, e.p1, e.p0]))
                        .collect(),
                ),
                Err(e) => {
                    log::debug!("bootstrap replicate {r} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    let mut out = Vec::with_capacity(queries.len());
    for (qi, point) in points.into_iter().enumerate() {
        let draws: Vec<[f64; 3]> = replicates.iter().filter_map(|r| r.as_ref().and_then(|v| v[qi])).collect();
        let values: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let dropped = spec.nb - values.len();
        if dropped as f64 > MAX_DROP_FRACTION * spec.nb as f64 || values.len() < 2 {
            return Err(Error::BootstrapFailure { dropped, requested: spec.nb });
        }
        if dropped > 0 {
            log::warn!("bootstrap dropped {dropped} of {} replicates", spec.nb);
        }
        let se = values.iter().std_dev();
        let p1_se = draws.iter().map(|d| d[1]).std_dev();
        let p0_se = draws.iter().map(|d| d[2]).std_dev();
        let mut sorted = Data::new(values);
        // percentile interval, widened if needed so it contains the point
        let lo = sorted.quantile(0.025).min(point.point);
        let hi = sorted.quantile(0.975).max(point.point);
        out.push(EffectEstimate {
            se: Some(se),
            ci_low: Some(lo),
            ci_high: Some(hi),
            p1_se: Some(p1_se),
            p0_se: Some(p0_se),
            ..point
        });
    }
    Ok(out)
}

pub fn bootstrap_effect(
    data: &CaseDataset,
    graph: &NetworkGraph,
    query: &EffectQuery,
    spec: &BootstrapSpec,
) -> Result<EffectEstimate> {
    Ok(bootstrap_effects(data, graph, std::slice::from_ref(query), spec)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Case;
    use crate::model::{Outcome, TreatmentMode};

    #[test]
    fn repeated_case_has_zero_spread() {
        let cases = (0..20)
            .map(|i| Case {
                id: i.to_string(),
                y: Outcome::new(vec![1, -1, 1]).unwrap(),
                a: Treatment::Shared(1),
                c: None,
            })
            .collect();
        let d =
            CaseDataset::new(vec!["x".into(), "y".into(), "z".into()], TreatmentMode::Shared, false, cases).unwrap();
        let g = NetworkGraph::from_labels(&["x", "y", "z"], &[("x", "y")]).unwrap();
        let q = EffectQuery {
            a1: Treatment::Shared(1),
            a0: Treatment::Shared(0),
            event: EventPredicate::count(2),
            scale: EffectScale::RiskDifference,
        };
        let spec = BootstrapSpec { nb: 5, seed: 3, ..BootstrapSpec::default() };
        let e = bootstrap_effect(&d, &g, &q, &spec).unwrap();
        assert_eq!(e.se, Some(0.0));
        assert_eq!(e.ci_low, Some(e.point));
        assert_eq!(e.ci_high, Some(e.point));
    }

    #[test]
    fn nb_below_two_is_rejected() {
        let d = crate::sampler::generate_dataset(
            &crate::reference::simulation_model(1.0, 1.0, 0.5, 0.3),
            &crate::sampler::SimulationScaling::new(&crate::reference::court_graph(), 1.0, 1.0),
            5,
            1,
        )
        .unwrap();
        let q = EffectQuery {
            a1: Treatment::treating(9, &[0]),
            a0: Treatment::treating(9, &[]),
            event: EventPredicate::count(9),
            scale: EffectScale::RiskDifference,
        };
        let spec = BootstrapSpec { nb: 1, ..BootstrapSpec::default() };
        assert!(matches!(
            bootstrap_effect(&d, &crate::reference::court_graph(), &q, &spec),
            Err(Error::Configuration(_))
        ));
    }
}
