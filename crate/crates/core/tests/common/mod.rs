//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use chaingraph::{ChainGraphModel, Covariates, NetworkGraph, Outcome, Treatment, TreatmentMode};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

pub fn random_graph(r: &mut ChaCha8Rng, n: usize, p: f64) -> NetworkGraph {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    NetworkGraph::new(labels(n), pairs).unwrap()
}

pub fn uniform(r: &mut ChaCha8Rng, bound: f64) -> f64 {
    r.random_range(-bound..=bound)
}

pub fn random_model(
    r: &mut ChaCha8Rng,
    n: usize,
    mode: TreatmentMode,
    with_kappa: bool,
    bound: f64,
) -> ChainGraphModel {
    let g = random_graph(r, n, 0.5);
    let h = (0..n).map(|_| uniform(r, bound)).collect();
    let k = (0..g.edge_count()).map(|_| uniform(r, bound)).collect();
    let gamma = (0..n).map(|_| uniform(r, bound)).collect();
    let kappa = with_kappa.then(|| (0..n).map(|_| uniform(r, bound)).collect());
    ChainGraphModel::new(g, mode, h, k, gamma, kappa).unwrap()
}

pub fn random_treatment(r: &mut ChaCha8Rng, n: usize, mode: TreatmentMode) -> Treatment {
    match mode {
        TreatmentMode::Shared => Treatment::Shared(r.random_range(0..2)),
        TreatmentMode::PerNode => Treatment::PerNode((0..n).map(|_| r.random_range(0..2)).collect()),
    }
}

pub fn random_covariates(r: &mut ChaCha8Rng, n: usize) -> Covariates {
    Covariates::new((0..n).map(|_| r.random_range(0..2)).collect()).unwrap()
}

/// Spin of node `i` in outcome mask `m`.
pub fn spin(m: u64, i: usize) -> f64 {
    if m >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Unnormalized log weight computed term by term from the parameters.
pub fn potential(model: &ChainGraphModel, m: u64, a: &Treatment, c: Option<&Covariates>) -> f64 {
    let n = model.n();
    let mut s = 0.0;
    for i in 0..n {
        s += model.h()[i] * spin(m, i);
        s += model.gamma()[i] * a.at(i) as f64 * spin(m, i);
        if let (Some(kp), Some(c)) = (model.kappa(), c) {
            s += kp[i] * c.values()[i] as f64 * spin(m, i);
        }
    }
    for (e, &(i, j)) in model.graph().edges().iter().enumerate() {
        s += model.k()[e] * spin(m, i) * spin(m, j);
    }
    s
}

pub fn partition(model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>) -> f64 {
    (0..1u64 << model.n()).map(|m| potential(model, m, a, c).exp()).sum()
}

pub fn joint(model: &ChainGraphModel, m: u64, a: &Treatment, c: Option<&Covariates>) -> f64 {
    potential(model, m, a, c).exp() / partition(model, a, c)
}

pub fn event_prob(model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>, event: impl Fn(u64) -> bool) -> f64 {
    (0..1u64 << model.n()).filter(|&m| event(m)).map(|m| joint(model, m, a, c)).sum()
}

pub fn popcount_in(counts: &[usize]) -> impl Fn(u64) -> bool + Copy + '_ {
    move |m| counts.contains(&(m.count_ones() as usize))
}

/// Sum over covariate atoms of `p(c) P(event | a, c)`.
pub fn counterfactual(
    model: &ChainGraphModel,
    a: &Treatment,
    atoms: &[(Covariates, f64)],
    event: impl Fn(u64) -> bool + Copy,
) -> f64 {
    atoms.iter().map(|(c, w)| w * event_prob(model, a, Some(c), event)).sum()
}

/// All covariate vectors under independent Bernoulli(p_i) coordinates.
pub fn bernoulli_atoms(p: &[f64]) -> Vec<(Covariates, f64)> {
    let n = p.len();
    (0..1u64 << n)
        .map(|m| {
            let w = (0..n).map(|i| if m >> i & 1 == 1 { p[i] } else { 1.0 - p[i] }).product();
            (Covariates::from_mask(n, m), w)
        })
        .collect()
}

pub fn outcome(n: usize, m: u64) -> Outcome {
    Outcome::from_mask(n, m)
}

/// F1 agreement between two edge sets on the same labels.
pub fn edge_f1(truth: &NetworkGraph, est: &NetworkGraph) -> f64 {
    let key =
        |g: &NetworkGraph| -> std::collections::BTreeSet<(String, String)> { g.label_pairs().into_iter().collect() };
    let (t, e) = (key(truth), key(est));
    if t.is_empty() && e.is_empty() {
        return 1.0;
    }
    2.0 * t.intersection(&e).count() as f64 / (t.len() + e.len()) as f64
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Shared-treatment dataset: half the cases at `a = 0`, half at `a = 1`,
/// each half thinned from its own long Gibbs chain.
pub fn shared_dataset(model: &ChainGraphModel, n_obs: usize, seed: u64) -> chaingraph::CaseDataset {
    use chaingraph::sampler::{gibbs_chain, GibbsConfig};
    let mut cases = Vec::with_capacity(n_obs);
    for a in [0u8, 1] {
        let kept = n_obs / 2 + (n_obs % 2) * a as usize;
        let ys =
            gibbs_chain(model, &Treatment::Shared(a), None, &GibbsConfig::keeping(kept, seed * 2 + a as u64)).unwrap();
        for y in ys {
            cases.push(chaingraph::Case { id: (cases.len() + 1).to_string(), y, a: Treatment::Shared(a), c: None });
        }
    }
    chaingraph::CaseDataset::new(model.graph().labels().to_vec(), TreatmentMode::Shared, false, cases).unwrap()
}

/// Independent fair coins on `n` nodes, shared treatment ignored.
pub fn coin_dataset(n: usize, n_obs: usize, seed: u64) -> chaingraph::CaseDataset {
    let mut r = rng(seed);
    let cases = (0..n_obs)
        .map(|i| chaingraph::Case {
            id: (i + 1).to_string(),
            y: Outcome::from_mask(n, r.random_range(0..1u64 << n)),
            a: Treatment::Shared(r.random_range(0..2)),
            c: None,
        })
        .collect();
    chaingraph::CaseDataset::new(labels(n), TreatmentMode::Shared, false, cases).unwrap()
}

/// Parameters flattened as h, k, gamma, kappa.
pub fn flat_params(m: &ChainGraphModel) -> Vec<f64> {
    m.h().iter().chain(m.k()).chain(m.gamma()).chain(m.kappa().unwrap_or(&[])).copied().collect()
}
