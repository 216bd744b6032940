//! Gibbs sampling from the outcome block and synthetic (Y, A, C) datasets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Case, CaseDataset};
use crate::error::{Error, Result};
use crate::exact::CovariateLaw;
use crate::graph::NetworkGraph;
use crate::model::{ChainGraphModel, Covariates, Outcome, Treatment, TreatmentMode};
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    #[default]
    Fixed,
    RandomPermutationPerSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub scan_order: ScanOrder,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { sweeps: 11_000, burn_in: 1000, thin: 10, seed: 0, scan_order: ScanOrder::Fixed }
    }
}

impl GibbsConfig {
    /// Config keeping `kept` samples after the default burn-in and thinning.
    pub fn keeping(kept: usize, seed: u64) -> Self {
        let d = Self::default();
        Self { sweeps: d.burn_in + kept * d.thin, seed, ..d }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::config(format!("sweeps ({}) must exceed burn_in ({})", self.sweeps, self.burn_in)));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.sweeps - self.burn_in) / self.thin
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Single-site heat-bath sampler for `exp(sum f_i s_i + sum k_ij s_i s_j)`
/// over spins in {-1, +1}.
pub(crate) struct SpinChain<'a> {
    fields: Vec<f64>,
    adj: &'a [Vec<(usize, f64)>],
    state: Vec<i8>,
    order: Vec<usize>,
}

impl<'a> SpinChain<'a> {
    pub(crate) fn new(fields: Vec<f64>, adj: &'a [Vec<(usize, f64)>], rng: &mut ChaCha8Rng) -> Self {
        let n = fields.len();
        let state = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self { fields, adj, state, order: (0..n).collect() }
    }

    fn update(&mut self, i: usize, rng: &mut ChaCha8Rng) {
        let mut eta = self.fields[i];
        for &(j, k) in &self.adj[i] {
            eta += k * self.state[j] as f64;
        }
        self.state[i] = if rng.random::<f64>() < sigmoid(2.0 * eta) { 1 } else { -1 };
    }

    pub(crate) fn sweep(&mut self, scan: ScanOrder, rng: &mut ChaCha8Rng) {
        if scan == ScanOrder::RandomPermutationPerSweep {
            self.order.shuffle(rng);
        }
        for idx in 0..self.order.len() {
            let i = self.order[idx];
            self.update(i, rng);
        }
    }

    pub(crate) fn mask(&self) -> u64 {
        self.state.iter().enumerate().filter(|(_, &s)| s > 0).fold(0, |m, (i, _)| m | 1 << i)
    }
}

/// `P(Y_i = +1 | y_{-i}, a, c)`. The entry `y[i]` is ignored.
pub fn node_conditional_prob(
    model: &ChainGraphModel,
    i: usize,
    y: &Outcome,
    a: &Treatment,
    c: Option<&Covariates>,
) -> Result<f64> {
    model.check_outcome(y)?;
    if i >= model.n() {
        return Err(Error::shape(format!("node index {i} out of range for {} nodes", model.n())));
    }
    let fields = model.node_fields(a, c)?;
    let mut eta = fields[i];
    for &(j, e) in model.graph().neighbors(i) {
        eta += model.k()[e] * y.values()[j] as f64;
    }
    Ok(sigmoid(2.0 * eta))
}

/// Kept states of one chain as bit masks (bit `i` set means `y_i = +1`).
pub fn gibbs_masks(
    model: &ChainGraphModel,
    a: &Treatment,
    c: Option<&Covariates>,
    config: &GibbsConfig,
) -> Result<Vec<u64>> {
    config.validate()?;
    let fields = model.node_fields(a, c)?;
    let adj = model.coupling_lists();
    let mut rng = seed::stream(config.seed, &[]);
    let mut chain = SpinChain::new(fields, &adj, &mut rng);
    let mut out = Vec::with_capacity(config.kept());
    for t in 0..config.sweeps {
        chain.sweep(config.scan_order, &mut rng);
        if t >= config.burn_in && (t + 1 - config.burn_in).is_multiple_of(config.thin) {
            out.push(chain.mask());
        }
    }
    Ok(out)
}

pub fn gibbs_chain(
    model: &ChainGraphModel,
    a: &Treatment,
    c: Option<&Covariates>,
    config: &GibbsConfig,
) -> Result<Vec<Outcome>> {
    let n = model.n();
    Ok(gibbs_masks(model, a, c, config)?.into_iter().map(|m| Outcome::from_mask(n, m)).collect())
}

/// Logistic law of each `A_i` given its own confounder `C_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentLaw {
    pub intercept: f64,
    pub slope: f64,
}

impl Default for TreatmentLaw {
    fn default() -> Self {
        Self { intercept: -0.5, slope: 1.0 }
    }
}

impl TreatmentLaw {
    pub fn prob(&self, c: u8) -> f64 {
        sigmoid(self.intercept + self.slope * c as f64)
    }
}

/// How a base model is scaled and extended for synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationScaling {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_value: f64,
    pub kappa_value: f64,
    pub treatment_law: TreatmentLaw,
    pub confounder_law: CovariateLaw,
    /// Gibbs sweeps per observation chain (for Y and for an Ising C).
    pub chain_sweeps: usize,
}

pub const DEFAULT_CONFOUNDER_COUPLING: f64 = 0.3;

impl SimulationScaling {
    /// Defaults: gamma 0.5, kappa 0.3, confounders from a zero-field Ising law
    /// with coupling 0.3 on `graph`, 1000 sweeps per chain.
    pub fn new(graph: &NetworkGraph, alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma_value: 0.5,
            kappa_value: 0.3,
            treatment_law: TreatmentLaw::default(),
            confounder_law: CovariateLaw::uniform_ising(graph, DEFAULT_CONFOUNDER_COUPLING),
            chain_sweeps: 1000,
        }
    }

    fn validate(&self, graph: &NetworkGraph) -> Result<()> {
        let vals = [
            self.alpha,
            self.beta,
            self.gamma_value,
            self.kappa_value,
            self.treatment_law.intercept,
            self.treatment_law.slope,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("simulation scaling values must be finite"));
        }
        for c in [0, 1] {
            let p = self.treatment_law.prob(c);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!("treatment probability {p} given C={c} is not inside (0,1)")));
            }
        }
        if self.chain_sweeps == 0 {
            return Err(Error::config("chain_sweeps must be positive"));
        }
        self.confounder_law.validate(graph)
    }

    /// Per-node model with `h * alpha`, `k * beta` and replicated gamma/kappa.
    pub fn model(&self, base: &ChainGraphModel) -> Result<ChainGraphModel> {
        self.validate(base.graph())?;
        let n = base.n();
        ChainGraphModel::new(
            base.graph().clone(),
            TreatmentMode::PerNode,
            base.h().iter().map(|x| self.alpha * x).collect(),
            base.k().iter().map(|x| self.beta * x).collect(),
            vec![self.gamma_value; n],
            Some(vec![self.kappa_value; n]),
        )
    }
}

/// Draws one confounder vector from `law`.
fn draw_covariates(law: &CovariateLaw, adj: &[Vec<(usize, f64)>], sweeps: usize, rng: &mut ChaCha8Rng) -> u64 {
    match law {
        CovariateLaw::Empirical(atoms) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (c, w) in atoms {
                acc += w;
                if u < acc {
                    return c.mask();
                }
            }
            atoms.last().expect("validated non-empty").0.mask()
        }
        CovariateLaw::ProductBernoulli(p) => {
            p.iter().enumerate().fold(0, |m, (i, &pi)| if rng.random::<f64>() < pi { m | 1 << i } else { m })
        }
        CovariateLaw::Ising { fields, .. } => {
            let mut chain = SpinChain::new(fields.clone(), adj, rng);
            for _ in 0..sweeps {
                chain.sweep(ScanOrder::Fixed, rng);
            }
            chain.mask()
        }
    }
}

/// Synthetic per-node dataset: for each observation draw C, then each
/// `A_i | C_i`, then Y from its own Gibbs chain (final state kept).
pub fn generate_dataset(
    base_model: &ChainGraphModel,
    scaling: &SimulationScaling,
    n_obs: usize,
    seed: u64,
) -> Result<CaseDataset> {
    if n_obs == 0 {
        return Err(Error::config("n_obs must be positive"));
    }
    let model = scaling.model(base_model)?;
    let n = model.n();
    if n > 63 {
        return Err(Error::Capacity { nodes: n, limit: 63 });
    }
    let y_adj = model.coupling_lists();
    let c_adj: Vec<Vec<(usize, f64)>> = match &scaling.confounder_law {
        CovariateLaw::Ising { couplings, .. } => {
            (0..n).map(|i| model.graph().neighbors(i).iter().map(|&(j, e)| (j, couplings[e])).collect()).collect()
        }
        _ => Vec::new(),
    };
    let sweeps = scaling.chain_sweeps;
    let cases: Vec<Case> = (0..n_obs)
        .into_par_iter()
        .map(|obs| {
            let mut rng = seed::stream(seed, &[obs as u64]);
            let c_mask = draw_covariates(&scaling.confounder_law, &c_adj, sweeps, &mut rng);
            let a: Vec<u8> = (0..n)
                .map(|i| {
                    let ci = (c_mask >> i & 1) as u8;
                    u8::from(rng.random::<f64>() < scaling.treatment_law.prob(ci))
                })
                .collect();
            let a_mask = a.iter().enumerate().fold(0u64, |m, (i, &v)| m | (v as u64) << i);
            let mut chain = SpinChain::new(model.fields_unchecked(a_mask, c_mask), &y_adj, &mut rng);
            for _ in 0..sweeps {
                chain.sweep(ScanOrder::Fixed, &mut rng);
            }
            Case {
                id: (obs + 1).to_string(),
                y: Outcome::from_mask(n, chain.mask()),
                a: Treatment::PerNode(a),
                c: Some(Covariates::from_mask(n, c_mask)),
            }
        })
        .collect();
    CaseDataset::new(model.graph().labels().to_vec(), TreatmentMode::PerNode, true, cases)
}
