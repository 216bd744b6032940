//! Structure learning, parameter fitting and bootstrap uncertainty.
//!
//! Fitted parameter vectors use one layout everywhere:
//! `[h (n), k (one per edge, in graph edge order), gamma (n), kappa (n, if present)]`.

mod bootstrap;
mod citest;
mod mle;
mod nodewise;
mod optimize;
mod pseudo;
mod structure;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_effect, bootstrap_effects, BootstrapSpec, EffectQuery};
pub use citest::{likelihood_ratio_ci_test, Column};
pub use mle::{fit_exact_mle, mle_gradient, mle_log_likelihood};
pub use nodewise::{node_logistic_fit, node_logistic_path, NodewiseFit};
pub use pseudo::{fit_pseudolikelihood, pseudo_log_likelihood};
pub use structure::{default_penalty_grid, learn_structure, StructureResult, SymmetrizationRule};

use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::{ChainGraphModel, TreatmentMode};

/// Largest parameter magnitude the optimizers will produce. Perfectly
/// separated data push estimates to this cap instead of diverging.
pub const COEFFICIENT_CAP: f64 = 20.0;

/// Stationarity tolerance on the gradient of the summed log-likelihood.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Exact maximum likelihood.
    #[default]
    Mle,
    /// Maximum pseudo-likelihood.
    Pseudo,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMethod::Mle => "mle",
            FitMethod::Pseudo => "pseudo",
        })
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(FitMethod::Mle),
            "pseudo" | "pl" => Ok(FitMethod::Pseudo),
            _ => Err(Error::Parse(format!("unknown fit method {s:?}"))),
        }
    }
}

/// Optimizer diagnostics attached to a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub method: FitMethod,
    pub iterations: usize,
    /// Summed log-likelihood (or pseudo-log-likelihood) at the estimate.
    pub objective: f64,
    /// Infinity norm of the projected gradient at the estimate.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Parameters that ended on the magnitude cap.
    pub capped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    pub model: ChainGraphModel,
    pub meta: FitMeta,
}

impl FittedModel {
    /// Model JSON with a `fit_meta` block.
    pub fn to_json(&self) -> String {
        let mut doc = self.model.to_document();
        doc.fit_meta = Some(serde_json::to_value(&self.meta).expect("fit metadata serializes"));
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }
}

/// Fit by the chosen method on a fixed graph.
pub fn fit_model(data: &CaseDataset, graph: &NetworkGraph, method: FitMethod) -> Result<FittedModel> {
    match method {
        FitMethod::Mle => mle::fit(data, graph),
        FitMethod::Pseudo => pseudo::fit(data, graph),
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub n: usize,
    pub edges: usize,
    pub has_kappa: bool,
}

impl Layout {
    pub fn new(graph: &NetworkGraph, has_kappa: bool) -> Self {
        Self { n: graph.len(), edges: graph.edge_count(), has_kappa }
    }

    pub fn len(&self) -> usize {
        2 * self.n + self.edges + if self.has_kappa { self.n } else { 0 }
    }

    pub fn h(&self, i: usize) -> usize {
        i
    }

    pub fn k(&self, e: usize) -> usize {
        self.n + e
    }

    pub fn gamma(&self, i: usize) -> usize {
        self.n + self.edges + i
    }

    pub fn kappa(&self, i: usize) -> usize {
        2 * self.n + self.edges + i
    }

    pub fn pack(&self, model: &ChainGraphModel) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend_from_slice(model.h());
        x.extend_from_slice(model.k());
        x.extend_from_slice(model.gamma());
        if let Some(kappa) = model.kappa() {
            x.extend_from_slice(kappa);
        }
        x
    }

    pub fn unpack(&self, graph: &NetworkGraph, mode: TreatmentMode, x: &[f64]) -> Result<ChainGraphModel> {
        let (n, m) = (self.n, self.edges);
        ChainGraphModel::new(
            graph.clone(),
            mode,
            x[..n].to_vec(),
            x[n..n + m].to_vec(),
            x[n + m..2 * n + m].to_vec(),
            self.has_kappa.then(|| x[2 * n + m..3 * n + m].to_vec()),
        )
    }

    pub fn names(&self, graph: &NetworkGraph) -> Vec<String> {
        let mut out: Vec<String> = graph.labels().iter().map(|l| format!("h[{l}]")).collect();
        out.extend((0..self.edges).map(|e| format!("k[{}]", graph.edge_key(e))));
        out.extend(graph.labels().iter().map(|l| format!("gamma[{l}]")));
        if self.has_kappa {
            out.extend(graph.labels().iter().map(|l| format!("kappa[{l}]")));
        }
        out
    }
}

pub(crate) fn check_data_graph(data: &CaseDataset, graph: &NetworkGraph) -> Result<()> {
    if data.labels() != graph.labels() {
        return Err(Error::config("dataset columns do not match the graph's node labels"));
    }
    Ok(())
}

/// Fails with `DegenerateNode` for the first node whose outcome never varies.
pub(crate) fn check_outcome_variation(data: &CaseDataset) -> Result<()> {
    let rows = data.weighted_rows();
    for i in 0..data.n_nodes() {
        let first = rows[0].y >> i & 1;
        if rows.iter().all(|r| r.y >> i & 1 == first) {
            return Err(Error::DegenerateNode { node: data.labels()[i].clone() });
        }
    }
    Ok(())
}

pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
