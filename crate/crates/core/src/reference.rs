//! The nine-justice court panel, the judicial-power network among them and
//! an illustrative parameter set used by examples, simulations and tests.
//!
//! The edge set is the estimated judicial-power network. Parameter values
//! are illustrative: couplings are proportional to the drawn edge weights
//! and the node fields follow the drawn liberal/conservative shading. They
//! are not fitted values.

use crate::graph::NetworkGraph;
use crate::model::{ChainGraphModel, Treatment, TreatmentMode};

/// Canonical justice order.
pub const COURT: [&str; 9] =
    ["Rehnquist", "Stevens", "O'Connor", "Scalia", "Kennedy", "Souter", "Thomas", "Ginsburg", "Breyer"];

/// Judicial-power network with relative edge weights.
pub const JUDICIAL_EDGES: [(&str, &str, f64); 18] = [
    ("Rehnquist", "O'Connor", 1.2308982),
    ("Rehnquist", "Scalia", 0.6905832),
    ("Rehnquist", "Kennedy", 1.0626196),
    ("Rehnquist", "Thomas", 0.7584730),
    ("Stevens", "Souter", 0.6888480),
    ("Stevens", "Ginsburg", 0.7816874),
    ("Stevens", "Breyer", 0.7099157),
    ("O'Connor", "Kennedy", 0.6298417),
    ("O'Connor", "Souter", 0.6776570),
    ("O'Connor", "Breyer", 1.0187295),
    ("Scalia", "Kennedy", 0.5025447),
    ("Scalia", "Thomas", 2.0160801),
    ("Kennedy", "Souter", 0.5637078),
    ("Kennedy", "Thomas", 0.5575171),
    ("Kennedy", "Ginsburg", 0.5045031),
    ("Souter", "Ginsburg", 1.2431446),
    ("Souter", "Breyer", 0.6058508),
    ("Ginsburg", "Breyer", 1.0313114),
];

/// Shading rank per justice in `COURT` order, 1 = most conservative,
/// 9 = most liberal.
const LEANING_RANK: [f64; 9] = [2.0, 9.0, 2.0, 4.0, 5.0, 8.0, 1.0, 7.0, 6.0];

/// Signed relative treatment weights per justice in `COURT` order.
const JUDICIAL_TREATMENT: [f64; 9] =
    [0.32402724, -2.22082220, 0.84974616, -1.22317942, 0.62502044, -0.26354494, 1.48718375, -1.14375875, 0.05223488];

const COUPLING_SCALE: f64 = 0.4;
const LEANING_SCALE: f64 = 0.04;
const LEANING_OFFSET: f64 = -0.08;
const TREATMENT_SCALE: f64 = 0.15;

pub fn court_labels() -> Vec<String> {
    COURT.iter().map(|s| s.to_string()).collect()
}

pub fn court_graph() -> NetworkGraph {
    let pairs: Vec<(&str, &str)> = JUDICIAL_EDGES.iter().map(|&(a, b, _)| (a, b)).collect();
    NetworkGraph::from_labels(&COURT, &pairs).expect("reference network is valid")
}

/// Illustrative couplings `k` aligned with `court_graph().edges()`.
pub fn reference_couplings(graph: &NetworkGraph) -> Vec<f64> {
    (0..graph.edge_count())
        .map(|e| {
            let (i, j) = graph.edges()[e];
            let (a, b) = (graph.label(i), graph.label(j));
            let w = JUDICIAL_EDGES
                .iter()
                .find(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a))
                .map(|t| t.2)
                .expect("edge from the reference list");
            COUPLING_SCALE * w
        })
        .collect()
}

pub fn reference_fields() -> Vec<f64> {
    LEANING_RANK.iter().map(|r| LEANING_OFFSET + LEANING_SCALE * (r - 5.0)).collect()
}

/// Shared-treatment model in the shape of the judicial-power analysis.
pub fn judicial_model() -> ChainGraphModel {
    let g = court_graph();
    let k = reference_couplings(&g);
    let gamma = JUDICIAL_TREATMENT.iter().map(|w| TREATMENT_SCALE * w).collect();
    ChainGraphModel::new(g, TreatmentMode::Shared, reference_fields(), k, gamma, None)
        .expect("reference model is valid")
}

/// Per-node model with confounders: fields scaled by `alpha`, couplings by
/// `beta`, one `gamma` and one `kappa` replicated across justices.
pub fn simulation_model(alpha: f64, beta: f64, gamma: f64, kappa: f64) -> ChainGraphModel {
    let g = court_graph();
    let k = reference_couplings(&g).into_iter().map(|x| beta * x).collect();
    let h = reference_fields().into_iter().map(|x| alpha * x).collect();
    ChainGraphModel::new(g, TreatmentMode::PerNode, h, k, vec![gamma; 9], Some(vec![kappa; 9]))
        .expect("reference model is valid")
}

/// The six intervention sets of the simulated court study, with names.
pub fn court_assignments() -> Vec<(&'static str, Treatment)> {
    let idx =
        |names: &[&str]| -> Vec<usize> { names.iter().map(|n| COURT.iter().position(|c| c == n).unwrap()).collect() };
    vec![
        ("O'Connor, Scalia, Kennedy, Thomas", idx(&["O'Connor", "Scalia", "Kennedy", "Thomas"])),
        ("Stevens, Souter, Ginsburg, Breyer", idx(&["Stevens", "Souter", "Ginsburg", "Breyer"])),
        ("Rehnquist", idx(&["Rehnquist"])),
        ("Thomas", idx(&["Thomas"])),
        ("Stevens", idx(&["Stevens"])),
        ("Scalia", idx(&["Scalia"])),
    ]
    .into_iter()
    .map(|(name, nodes)| (name, Treatment::treating(9, &nodes)))
    .collect()
}
