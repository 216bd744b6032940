//! Neighborhood selection: one penalized logistic path per node, the
//! penalty chosen by extended BIC, neighborhoods symmetrized into edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nodewise::NodeDesign;
use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;

/// Neighbor coefficients at or below this magnitude count as zero.
pub const SELECTION_THRESHOLD: f64 = 1e-6;
/// Extended-BIC prior exponent.
pub const EBIC_GAMMA: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SymmetrizationRule {
    /// Edge iff each endpoint selects the other.
    #[default]
    And,
    /// Edge iff either endpoint selects the other.
    Or,
}

impl std::str::FromStr for SymmetrizationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(SymmetrizationRule::And),
            "or" => Ok(SymmetrizationRule::Or),
            _ => Err(Error::Parse(format!("unknown symmetrization rule {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSelection {
    pub node: String,
    pub neighborhood: Vec<String>,
    pub penalty: f64,
    pub ebic: f64,
    /// EBIC at every grid value, in grid order.
    pub ebic_path: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureResult {
    pub graph: NetworkGraph,
    /// `None` for nodes excluded as degenerate.
    pub selections: Vec<Option<NodeSelection>>,
    pub rule: SymmetrizationRule,
    pub excluded: Vec<String>,
}

impl StructureResult {
    pub fn edges(&self) -> Vec<(String, String)> {
        self.graph.label_pairs()
    }

    /// Summary suitable for a `fit_meta` block.
    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "rule": self.rule,
            "excluded": self.excluded,
            "nodes": self.selections.iter().flatten().collect::<Vec<_>>(),
        })
    }
}

/// 25 penalties from 0.5 down to 0.0005, log-spaced (mean-log-likelihood scale).
pub fn default_penalty_grid() -> Vec<f64> {
    let (hi, lo, m) = (0.5f64, 0.0005f64, 25);
    (0..m).map(|s| hi * (lo / hi).powf(s as f64 / (m - 1) as f64)).collect()
}

/// Selects each node's neighborhood over `penalty_grid` by extended BIC and
/// combines neighborhoods with `rule`. Nodes whose outcome never varies are
/// left out with a warning.
pub fn learn_structure(data: &CaseDataset, penalty_grid: &[f64], rule: SymmetrizationRule) -> Result<StructureResult> {
    if penalty_grid.is_empty() {
        return Err(Error::config("penalty grid is empty"));
    }
    if penalty_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::config("penalties must be finite and nonnegative"));
    }
    let mut grid = penalty_grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    grid.dedup();
    let n = data.n_nodes();
    let n_obs = data.len() as f64;
    let candidates = (n.max(2) - 1) as f64;
    let per_node: Vec<Result<Option<NodeSelection>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let design = match NodeDesign::new(data, i) {
                Ok(d) => d,
                Err(Error::DegenerateNode { node }) => {
                    log::warn!("node {node} has a single observed outcome; excluded from structure learning");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let mut prev: Option<Vec<f64>> = None;
            let mut best: Option<NodeSelection> = None;
            let mut path = Vec::with_capacity(grid.len());
            for &lambda in &grid {
                let (beta, iters) = design.fit(lambda, prev.as_deref())?;
                let fit = design.to_fit(data, &beta, lambda, iters);
                let nbhd = fit.neighborhood(SELECTION_THRESHOLD);
                let df = nbhd.len() as f64;
                let ebic = -2.0 * fit.log_likelihood + df * n_obs.ln() + 2.0 * EBIC_GAMMA * df * candidates.ln();
                path.push(ebic);
                if best.as_ref().is_none_or(|b| ebic < b.ebic) {
                    best = Some(NodeSelection {
                        node: fit.node.clone(),
                        neighborhood: nbhd,
                        penalty: lambda,
                        ebic,
                        ebic_path: Vec::new(),
                    });
                }
                prev = Some(beta);
            }
            Ok(best.map(|b| NodeSelection { ebic_path: path, ..b }))
        })
        .collect();
    let selections: Vec<Option<NodeSelection>> = per_node.into_iter().collect::<Result<_>>()?;
    let chosen = |i: usize, j: usize| {
        selections[i].as_ref().is_some_and(|s| s.neighborhood.iter().any(|l| l == &data.labels()[j]))
    };
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let keep = match rule {
                SymmetrizationRule::And => chosen(i, j) && chosen(j, i),
                SymmetrizationRule::Or => chosen(i, j) || chosen(j, i),
            };
            if keep {
                pairs.push((i, j));
            }
        }
    }
    let excluded = (0..n).filter(|&i| selections[i].is_none()).map(|i| data.labels()[i].clone()).collect();
    Ok(StructureResult { graph: NetworkGraph::new(data.labels().to_vec(), pairs)?, selections, rule, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_descending_and_positive() {
        let g = default_penalty_grid();
        assert_eq!(g.len(), 25);
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[24] - 0.0005).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }
}
