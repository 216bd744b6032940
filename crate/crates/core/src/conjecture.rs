//! Temporal contagion experiments: outcomes evolve over discrete time with
//! each unit responding to its own treatment, its own previous outcome and
//! its neighbors' previous outcomes. Only the final snapshot is observed,
//! and a battery of (conditional) independence tests checks how closely the
//! snapshot behaves like a chain graph model on the same network.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Case, CaseDataset};
use crate::error::{Error, Result};
use crate::estimation::{likelihood_ratio_ci_test, Column};
use crate::graph::NetworkGraph;
use crate::model::{Outcome, Treatment, TreatmentMode};
use crate::sampler::sigmoid;
use crate::seed;

/// Erdos-Renyi graph on nodes `v0..v{n-1}`.
pub fn random_network(n: usize, p: f64, seed: u64) -> Result<NetworkGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("edge probability {p} is outside [0,1]")));
    }
    let mut rng = seed::stream(seed, &[]);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    NetworkGraph::new((0..n).map(|i| format!("v{i}")).collect(), pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalParams {
    pub intercepts: Vec<f64>,
    pub treatment_effect: f64,
    pub self_persistence: f64,
    /// One influence per network edge (graph edge order), acting both ways.
    pub neighbor_influence: Vec<f64>,
    pub horizon: usize,
    pub treatment_prob: f64,
}

pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_TREATMENT_PROB: f64 = 0.5;
pub const DEFAULT_SELF_PERSISTENCE: f64 = 1.5;
pub const DEFAULT_NEIGHBOR_INFLUENCE: f64 = 0.3;
pub const DEFAULT_TREATMENT_EFFECT: f64 = 0.5;

impl TemporalParams {
    /// Slow-evolution defaults: zero intercepts, treatment effect 0.5,
    /// persistence 1.5, influence 0.3 on every edge, 50 steps, treatment
    /// probability 0.5.
    pub fn defaults(network: &NetworkGraph) -> Self {
        Self {
            intercepts: vec![0.0; network.len()],
            treatment_effect: DEFAULT_TREATMENT_EFFECT,
            self_persistence: DEFAULT_SELF_PERSISTENCE,
            neighbor_influence: vec![DEFAULT_NEIGHBOR_INFLUENCE; network.edge_count()],
            horizon: DEFAULT_HORIZON,
            treatment_prob: DEFAULT_TREATMENT_PROB,
        }
    }

    pub fn validate(&self, network: &NetworkGraph) -> Result<()> {
        if self.intercepts.len() != network.len() {
            return Err(Error::shape("one intercept per node is required"));
        }
        if self.neighbor_influence.len() != network.edge_count() {
            return Err(Error::shape("one neighbor influence per edge is required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if !(self.treatment_prob > 0.0 && self.treatment_prob < 1.0) {
            return Err(Error::config("treatment probability must lie in (0,1)"));
        }
        let finite = self.intercepts.iter().chain(&self.neighbor_influence).all(|v| v.is_finite())
            && self.treatment_effect.is_finite()
            && self.self_persistence.is_finite();
        if !finite {
            return Err(Error::config("temporal parameters must be finite"));
        }
        Ok(())
    }
}

/// One synchronous update: `P(Y_i^t = +1) = sigma(2 (b_i + e a_i + s y_i^{t-1}
/// + sum_j w_ij y_j^{t-1}))`, deciding node `i` by `uniforms[i]`.
pub fn temporal_step(
    network: &NetworkGraph,
    params: &TemporalParams,
    a: &[u8],
    prev: &Outcome,
    uniforms: &[f64],
) -> Outcome {
    let y = prev.values();
    let next = (0..network.len())
        .map(|i| {
            let mut eta =
                params.intercepts[i] + params.treatment_effect * a[i] as f64 + params.self_persistence * y[i] as f64;
            for &(j, e) in network.neighbors(i) {
                eta += params.neighbor_influence[e] * y[j] as f64;
            }
            if uniforms[i] < sigmoid(2.0 * eta) {
                1
            } else {
                -1
            }
        })
        .collect();
    Outcome::new(next).expect("entries are +-1")
}

/// Treatments and the full trajectory `Y^0..Y^T` of one replicate.
pub fn temporal_trajectory(
    network: &NetworkGraph,
    params: &TemporalParams,
    seed: u64,
    replicate: u64,
) -> Result<(Vec<u8>, Vec<Outcome>)> {
    params.validate(network)?;
    let n = network.len();
    let mut rng = seed::stream(seed, &[replicate]);
    let a: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < params.treatment_prob)).collect();
    let y0 = (0..n).map(|i| if rng.random::<f64>() < sigmoid(2.0 * params.intercepts[i]) { 1 } else { -1 }).collect();
    let mut path = Vec::with_capacity(params.horizon + 1);
    path.push(Outcome::new(y0)?);
    let mut u = vec![0.0; n];
    for _ in 0..params.horizon {
        for v in u.iter_mut() {
            *v = rng.random();
        }
        let next = temporal_step(network, params, &a, path.last().expect("non-empty"), &u);
        path.push(next);
    }
    Ok((a, path))
}

/// Final-time snapshots `(Y^T, A)` of `n_reps` independent replicates, as a
/// per-node-treatment dataset.
pub fn simulate_temporal(
    network: &NetworkGraph,
    params: &TemporalParams,
    n_reps: usize,
    seed: u64,
) -> Result<CaseDataset> {
    params.validate(network)?;
    if n_reps == 0 {
        return Err(Error::config("n_reps must be positive"));
    }
    let cases = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let (a, mut path) = temporal_trajectory(network, params, seed, r as u64)?;
            Ok(Case { id: (r + 1).to_string(), y: path.pop().expect("non-empty"), a: Treatment::PerNode(a), c: None })
        })
        .collect::<Result<Vec<_>>>()?;
    CaseDataset::new(network.labels().to_vec(), TreatmentMode::PerNode, false, cases)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    /// `Y_i` independent of `Y_m`.
    #[serde(rename = "a")]
    Marginal,
    /// `Y_i` independent of `Y_m` given the outcomes of `i`'s neighbors.
    #[serde(rename = "b")]
    GivenNeighbors,
    /// As (b), also given `A_i`.
    #[serde(rename = "c")]
    GivenNeighborsAndTreatment,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] =
        [Hypothesis::Marginal, Hypothesis::GivenNeighbors, Hypothesis::GivenNeighborsAndTreatment];

    pub fn code(self) -> &'static str {
        match self {
            Hypothesis::Marginal => "a",
            Hypothesis::GivenNeighbors => "b",
            Hypothesis::GivenNeighborsAndTreatment => "c",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub pair_i: String,
    pub pair_m: String,
    pub hypothesis: Hypothesis,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryRates {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub alpha: f64,
    pub tests: Vec<PairTest>,
    pub rates: BatteryRates,
}

impl BatteryReport {
    pub fn rate(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::Marginal => self.rates.a,
            Hypothesis::GivenNeighbors => self.rates.b,
            Hypothesis::GivenNeighborsAndTreatment => self.rates.c,
        }
    }

    /// CSV with columns `pair_i,pair_m,hypothesis,p_value,reject`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pair_i", "pair_m", "hypothesis", "p_value", "reject"])?;
        for t in &self.tests {
            out.write_record([
                t.pair_i.clone(),
                t.pair_m.clone(),
                t.hypothesis.code().to_string(),
                format!("{:e}", t.p_value),
                t.reject.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-hypothesis rates without the individual tests.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "alpha": self.alpha, "tests": self.tests.len(), "rates": self.rates })
    }
}

/// Runs hypotheses (a), (b), (c) for every ordered pair `(i, m)` of
/// nonadjacent nodes. Conditioning sets use the neighbors of `i` only.
pub fn run_battery(data: &CaseDataset, network: &NetworkGraph, alpha: f64) -> Result<BatteryReport> {
    if data.labels() != network.labels() {
        return Err(Error::config("dataset columns do not match the network's node labels"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} is outside (0,1)")));
    }
    let pairs = network.nonadjacent_pairs();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let ordered: Vec<(usize, usize)> = pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
    let jobs: Vec<(usize, usize, Hypothesis)> =
        ordered.iter().flat_map(|&(i, m)| Hypothesis::ALL.map(|h| (i, m, h))).collect();
    let tests = jobs
        .par_iter()
        .map(|&(i, m, h)| {
            let mut cond: Vec<Column> = Vec::new();
            if h != Hypothesis::Marginal {
                cond.extend(network.neighbors(i).iter().map(|&(j, _)| Column::Outcome(j)));
            }
            if h == Hypothesis::GivenNeighborsAndTreatment {
                cond.push(Column::Treatment(i));
            }
            let p_value = likelihood_ratio_ci_test(data, i, m, &cond)?;
            Ok(PairTest {
                pair_i: network.label(i).to_string(),
                pair_m: network.label(m).to_string(),
                hypothesis: h,
                p_value,
                reject: p_value < alpha,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = |h: Hypothesis| {
        let sel: Vec<&PairTest> = tests.iter().filter(|t| t.hypothesis == h).collect();
        sel.iter().filter(|t| t.reject).count() as f64 / sel.len() as f64
    };
    let rates = BatteryRates {
        a: rate(Hypothesis::Marginal),
        b: rate(Hypothesis::GivenNeighbors),
        c: rate(Hypothesis::GivenNeighborsAndTreatment),
    };
    Ok(BatteryReport { alpha, tests, rates })
}
