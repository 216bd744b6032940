//! Exact probabilities, counterfactual distributions and causal effects by
//! enumerating all `2^n` outcome configurations in log space.
//!
//! States are bit masks: bit `i` set means `y_i = +1`. Log-weights for every
//! state are built by a one-bit-at-a-time recurrence (each state extends the
//! state with its lowest set bit cleared), so the table costs `O(2^n * deg)`.
//!
//! Marginalizing over confounders uses the fact that `exp(sum_i kappa_i c_i y_i)`
//! factorizes over nodes: a per-node log-space butterfly turns the table of
//! `log w(y)` into `log sum_y w(y) exp(sum_i kappa_i c_i y_i)` for every `c`
//! at once, in `O(n 2^n)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::{ChainGraphModel, Covariates, Outcome, Treatment};

pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

/// Set of outcome configurations over which probabilities are aggregated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventPredicate {
    /// Outcomes whose number of +1 entries is in the set.
    LiberalCounts(BTreeSet<usize>),
    Explicit(BTreeSet<Outcome>),
}

impl EventPredicate {
    pub fn count(m: usize) -> Self {
        EventPredicate::LiberalCounts([m].into_iter().collect())
    }

    pub fn counts(ms: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = ms.into_iter().collect();
        if set.is_empty() {
            return Err(Error::config("event has no liberal counts"));
        }
        Ok(EventPredicate::LiberalCounts(set))
    }

    pub fn explicit(outcomes: impl IntoIterator<Item = Outcome>) -> Result<Self> {
        let set: BTreeSet<Outcome> = outcomes.into_iter().collect();
        if set.is_empty() {
            return Err(Error::config("event has no outcomes"));
        }
        Ok(EventPredicate::Explicit(set))
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            EventPredicate::LiberalCounts(s) if s.is_empty() => Err(Error::config("empty event")),
            EventPredicate::Explicit(s) if s.is_empty() => Err(Error::config("empty event")),
            EventPredicate::Explicit(s) => match s.iter().find(|y| y.len() != n) {
                Some(y) => Err(Error::shape(format!("event outcome has {} entries, expected {n}", y.len()))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Indicator over state masks, for an `n`-node block.
    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let size = 1usize << n;
        match self {
            EventPredicate::LiberalCounts(s) => (0..size).map(|m| s.contains(&(m.count_ones() as usize))).collect(),
            EventPredicate::Explicit(s) => {
                let mut out = vec![false; size];
                for y in s {
                    out[y.mask() as usize] = true;
                }
                out
            }
        }
    }

    /// Complement within `{-1,+1}^n`.
    pub fn complement(&self, n: usize) -> Self {
        match self {
            EventPredicate::LiberalCounts(s) => {
                EventPredicate::LiberalCounts((0..=n).filter(|m| !s.contains(m)).collect())
            }
            EventPredicate::Explicit(s) => EventPredicate::Explicit(
                (0..1u64 << n).map(|m| Outcome::from_mask(n, m)).filter(|y| !s.contains(y)).collect(),
            ),
        }
    }
}

impl fmt::Display for EventPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventPredicate::LiberalCounts(s) if s.len() == 1 => write!(f, "count={}", s.iter().next().unwrap()),
            EventPredicate::LiberalCounts(s) => {
                let items: Vec<String> = s.iter().map(|m| m.to_string()).collect();
                write!(f, "count in {{{}}}", items.join(","))
            }
            EventPredicate::Explicit(s) => {
                let items: Vec<String> = s
                    .iter()
                    .map(|y| y.values().iter().map(|v| if *v > 0 { "+1" } else { "-1" }).collect::<Vec<_>>().join(","))
                    .collect();
                write!(f, "y in {{{}}}", items.join(";"))
            }
        }
    }
}

impl FromStr for EventPredicate {
    type Err = Error;

    /// Accepts `count=9`, `count in {4,5}` and `y in {+1,-1,+1;-1,-1,-1}`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("cannot parse event {s:?}"));
        if let Some(v) = compact.strip_prefix("count=") {
            return Ok(EventPredicate::count(v.parse().map_err(|_| bad())?));
        }
        let braces = |rest: &str| -> Option<String> {
            rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')).map(str::to_string)
        };
        if let Some(rest) = compact.strip_prefix("countin") {
            let inner = braces(rest).ok_or_else(bad)?;
            let ms = inner.split(',').map(|t| t.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            return Self::counts(ms);
        }
        if let Some(rest) = compact.strip_prefix("yin") {
            let inner = braces(rest).ok_or_else(bad)?;
            let outcomes = inner
                .split(';')
                .map(|row| {
                    let vals =
                        row.split(',').map(|t| t.parse::<i8>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
                    Outcome::new(vals)
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::explicit(outcomes);
        }
        Err(bad())
    }
}

/// Distribution of the confounder vector `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Atoms with weights summing to one.
    Empirical(Vec<(Covariates, f64)>),
    /// Independent `C_i ~ Bernoulli(p_i)`.
    ProductBernoulli(Vec<f64>),
    /// Ising law on the model graph over spins `s_i = 2 c_i - 1`:
    /// `p(c) ∝ exp(sum_i fields_i s_i + sum_{i~j} couplings_ij s_i s_j)`,
    /// couplings aligned with the graph's edge order.
    Ising { fields: Vec<f64>, couplings: Vec<f64> },
}

impl CovariateLaw {
    /// Empirical law putting mass on the supplied masks.
    pub fn empirical_from_masks(n: usize, freqs: &[(u64, f64)]) -> Self {
        CovariateLaw::Empirical(freqs.iter().map(|&(m, w)| (Covariates::from_mask(n, m), w)).collect())
    }

    pub fn uniform_ising(graph: &NetworkGraph, coupling: f64) -> Self {
        CovariateLaw::Ising { fields: vec![0.0; graph.len()], couplings: vec![coupling; graph.edge_count()] }
    }

    pub fn validate(&self, graph: &NetworkGraph) -> Result<()> {
        let n = graph.len();
        match self {
            CovariateLaw::Empirical(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::config("empirical covariate law has no atoms"));
                }
                if atoms.iter().any(|(c, w)| c.len() != n || w.is_nan() || *w < 0.0) {
                    return Err(Error::config("empirical covariate law has a malformed atom"));
                }
                let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("covariate weights sum to {total}, not 1")));
                }
            }
            CovariateLaw::ProductBernoulli(p) => {
                if p.len() != n || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::config("Bernoulli covariate probabilities must be n values in [0,1]"));
                }
            }
            CovariateLaw::Ising { fields, couplings } => {
                if fields.len() != n || couplings.len() != graph.edge_count() {
                    return Err(Error::config("Ising covariate law does not match the graph"));
                }
                if fields.iter().chain(couplings).any(|x| !x.is_finite()) {
                    return Err(Error::config("Ising covariate law has non-finite parameters"));
                }
            }
        }
        Ok(())
    }

    /// Support points and probabilities as `(mask, p)`.
    pub fn atoms(&self, graph: &NetworkGraph, limit: usize) -> Result<Vec<(u64, f64)>> {
        self.validate(graph)?;
        let n = graph.len();
        match self {
            CovariateLaw::Empirical(atoms) => Ok(atoms.iter().map(|(c, w)| (c.mask(), *w)).collect()),
            CovariateLaw::ProductBernoulli(p) => {
                check_limit(n, limit)?;
                Ok((0..1u64 << n)
                    .map(|m| {
                        let prob = (0..n).map(|i| if m >> i & 1 == 1 { p[i] } else { 1.0 - p[i] }).product::<f64>();
                        (m, prob)
                    })
                    .filter(|&(_, prob)| prob > 0.0)
                    .collect())
            }
            CovariateLaw::Ising { fields, couplings } => {
                check_limit(n, limit)?;
                let adj: Vec<Vec<(usize, f64)>> =
                    (0..n).map(|i| graph.neighbors(i).iter().map(|&(j, e)| (j, couplings[e])).collect()).collect();
                let lw = log_weights(fields, &adj);
                let lz = log_sum_exp(lw.iter().copied());
                Ok(lw.iter().enumerate().map(|(m, w)| (m as u64, (w - lz).exp())).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScale {
    RiskDifference,
    RiskRatio,
    OddsRatio,
}

impl EffectScale {
    /// Contrast of `p1` against `p0` on this scale.
    pub fn contrast(self, p1: f64, p0: f64) -> Result<f64> {
        match self {
            EffectScale::RiskDifference => Ok(p1 - p0),
            EffectScale::RiskRatio => {
                if p0 <= 0.0 || p1 <= 0.0 {
                    return Err(Error::UndefinedScale(format!("risk ratio with p1={p1}, p0={p0}")));
                }
                Ok(p1 / p0)
            }
            EffectScale::OddsRatio => {
                if p0 <= 0.0 || p0 >= 1.0 || p1 <= 0.0 || p1 >= 1.0 {
                    return Err(Error::UndefinedScale(format!("odds ratio with p1={p1}, p0={p0}")));
                }
                Ok(p1 * (1.0 - p0) / (p0 * (1.0 - p1)))
            }
        }
    }
}

impl fmt::Display for EffectScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectScale::RiskDifference => "risk_difference",
            EffectScale::RiskRatio => "risk_ratio",
            EffectScale::OddsRatio => "odds_ratio",
        })
    }
}

impl FromStr for EffectScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rd" | "risk_difference" => Ok(EffectScale::RiskDifference),
            "rr" | "risk_ratio" => Ok(EffectScale::RiskRatio),
            "or" | "odds_ratio" => Ok(EffectScale::OddsRatio),
            _ => Err(Error::Parse(format!("unknown effect scale {s:?}"))),
        }
    }
}

/// Counterfactual contrast between two treatment assignments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub scale: EffectScale,
    pub point: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    pub a1: Treatment,
    pub a0: Treatment,
    pub event: String,
    pub model_fingerprint: String,
    /// Counterfactual event probability under `a1`.
    pub p1: f64,
    /// Counterfactual event probability under `a0`.
    pub p0: f64,
    /// Bootstrap standard errors of `p1` and `p0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_se: Option<f64>,
}

/// Exact enumeration with a configurable node limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactEngine {
    limit: usize,
}

impl Default for ExactEngine {
    fn default() -> Self {
        Self { limit: DEFAULT_ENUMERATION_LIMIT }
    }
}

impl ExactEngine {
    pub fn with_limit(limit: usize) -> Self {
        Self { limit: limit.min(30) }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Log-weights of every outcome state under `(a, c)`.
    pub fn log_weights(&self, model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>) -> Result<Vec<f64>> {
        check_limit(model.n(), self.limit)?;
        let fields = model.node_fields(a, c)?;
        Ok(log_weights(&fields, &model.coupling_lists()))
    }

    pub fn log_partition(&self, model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>) -> Result<f64> {
        Ok(log_sum_exp(self.log_weights(model, a, c)?.into_iter()))
    }

    pub fn joint_prob(
        &self,
        model: &ChainGraphModel,
        y: &Outcome,
        a: &Treatment,
        c: Option<&Covariates>,
    ) -> Result<f64> {
        model.check_outcome(y)?;
        let lw = self.log_weights(model, a, c)?;
        let lz = log_sum_exp(lw.iter().copied());
        Ok((lw[y.mask() as usize] - lz).exp())
    }

    /// Probability of every state, indexed by mask.
    pub fn distribution(&self, model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>) -> Result<Vec<f64>> {
        let lw = self.log_weights(model, a, c)?;
        let lz = log_sum_exp(lw.iter().copied());
        Ok(lw.into_iter().map(|w| (w - lz).exp()).collect())
    }

    pub fn event_prob(
        &self,
        model: &ChainGraphModel,
        a: &Treatment,
        c: Option<&Covariates>,
        event: &EventPredicate,
    ) -> Result<f64> {
        event.check(model.n())?;
        let lw = self.log_weights(model, a, c)?;
        Ok(event_prob_from_log_weights(&lw, &event.indicator(model.n())))
    }

    /// `P(Y_i = +1)` for every node.
    pub fn liberal_marginals(
        &self,
        model: &ChainGraphModel,
        a: &Treatment,
        c: Option<&Covariates>,
    ) -> Result<Vec<f64>> {
        let p = self.distribution(model, a, c)?;
        let n = model.n();
        let mut out = vec![0.0; n];
        for (m, pm) in p.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                if m >> i & 1 == 1 {
                    *o += pm;
                }
            }
        }
        Ok(out)
    }

    /// `sum_c P(Y in event | A = a, C = c) p(c)`; without confounder effects
    /// this is `event_prob`.
    pub fn counterfactual_event_prob(
        &self,
        model: &ChainGraphModel,
        a: &Treatment,
        event: &EventPredicate,
        law: Option<&CovariateLaw>,
    ) -> Result<f64> {
        let n = model.n();
        let kappa = match (model.kappa(), law) {
            (None, None) => return self.event_prob(model, a, None, event),
            (None, Some(_)) => return Err(Error::config("covariate law given to a model without confounder effects")),
            (Some(_), None) => return Err(Error::config("model has confounder effects; a covariate law is required")),
            (Some(kappa), Some(_)) => kappa,
        };
        let law = law.expect("checked above");
        check_limit(n, self.limit)?;
        event.check(n)?;
        a.check(model.mode(), n)?;
        let atoms = law.atoms(model.graph(), self.limit)?;
        let base = log_weights(&model.fields_unchecked(a.mask(n), 0), &model.coupling_lists());
        let inside = event.indicator(n);
        let restricted: Vec<f64> =
            base.iter().zip(&inside).map(|(&w, &keep)| if keep { w } else { f64::NEG_INFINITY }).collect();
        let all = covariate_transform(base, kappa);
        let hit = covariate_transform(restricted, kappa);
        let mut total = 0.0;
        for (mask, p) in atoms {
            let m = mask as usize;
            total += p * (hit[m] - all[m]).exp();
        }
        Ok(total.clamp(0.0, 1.0))
    }

    pub fn causal_effect(
        &self,
        model: &ChainGraphModel,
        a1: &Treatment,
        a0: &Treatment,
        event: &EventPredicate,
        scale: EffectScale,
        law: Option<&CovariateLaw>,
    ) -> Result<EffectEstimate> {
        let p1 = self.counterfactual_event_prob(model, a1, event, law)?;
        let p0 = self.counterfactual_event_prob(model, a0, event, law)?;
        Ok(EffectEstimate {
            scale,
            point: scale.contrast(p1, p0)?,
            se: None,
            ci_low: None,
            ci_high: None,
            a1: a1.clone(),
            a0: a0.clone(),
            event: event.to_string(),
            model_fingerprint: model.fingerprint(),
            p1,
            p0,
            p1_se: None,
            p0_se: None,
        })
    }
}

pub fn log_partition(model: &ChainGraphModel, a: &Treatment, c: Option<&Covariates>) -> Result<f64> {
    ExactEngine::default().log_partition(model, a, c)
}

pub fn joint_prob(model: &ChainGraphModel, y: &Outcome, a: &Treatment, c: Option<&Covariates>) -> Result<f64> {
    ExactEngine::default().joint_prob(model, y, a, c)
}

pub fn event_prob(
    model: &ChainGraphModel,
    a: &Treatment,
    c: Option<&Covariates>,
    event: &EventPredicate,
) -> Result<f64> {
    ExactEngine::default().event_prob(model, a, c, event)
}

pub fn counterfactual_event_prob(
    model: &ChainGraphModel,
    a: &Treatment,
    event: &EventPredicate,
    law: Option<&CovariateLaw>,
) -> Result<f64> {
    ExactEngine::default().counterfactual_event_prob(model, a, event, law)
}

pub fn causal_effect(
    model: &ChainGraphModel,
    a1: &Treatment,
    a0: &Treatment,
    event: &EventPredicate,
    scale: EffectScale,
    law: Option<&CovariateLaw>,
) -> Result<EffectEstimate> {
    ExactEngine::default().causal_effect(model, a1, a0, event, scale, law)
}

pub(crate) fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::Capacity { nodes: n, limit })
    } else {
        Ok(())
    }
}

/// Log-weight `sum_i f_i y_i + sum_{i~j} k_ij y_i y_j` of every state.
pub(crate) fn log_weights(fields: &[f64], adj: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = fields.len();
    let size = 1usize << n;
    let mut w = vec![0.0; size];
    // all spins -1
    let mut start = -fields.iter().sum::<f64>();
    for (i, nbrs) in adj.iter().enumerate() {
        for &(j, k) in nbrs {
            if j > i {
                start += k;
            }
        }
    }
    w[0] = start;
    for s in 1..size {
        let i = s.trailing_zeros() as usize;
        let prev = s & (s - 1);
        // raising y_i from -1 to +1 with the other spins as in `s`
        let mut local = fields[i];
        for &(j, k) in &adj[i] {
            local += if s >> j & 1 == 1 { k } else { -k };
        }
        w[s] = w[prev] + 2.0 * local;
    }
    w
}

/// Single-pass max-shifted log-sum-exp.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for v in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if v <= max {
            acc += (v - max).exp();
        } else {
            acc = acc * (max - v).exp() + 1.0;
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + acc.ln()
    }
}

pub(crate) fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn event_prob_from_log_weights(lw: &[f64], inside: &[bool]) -> f64 {
    let lz = log_sum_exp(lw.iter().copied());
    let le = log_sum_exp(lw.iter().zip(inside).filter(|(_, &b)| b).map(|(&w, _)| w));
    (le - lz).exp().clamp(0.0, 1.0)
}

/// Map `log w(y)` (indexed by outcome mask) to
/// `log sum_y w(y) exp(sum_i kappa_i c_i y_i)` (indexed by covariate mask).
pub(crate) fn covariate_transform(mut v: Vec<f64>, kappa: &[f64]) -> Vec<f64> {
    let size = v.len();
    for (i, &kp) in kappa.iter().enumerate() {
        let bit = 1usize << i;
        for s in 0..size {
            if s & bit != 0 {
                continue;
            }
            let lo = v[s];
            let hi = v[s | bit];
            v[s] = log_add_exp(lo, hi);
            v[s | bit] = log_add_exp(lo - kp, hi + kp);
        }
    }
    v
}

/// In-place unnormalized Walsh-Hadamard transform.
pub(crate) fn walsh_hadamard(v: &mut [f64]) {
    let size = v.len();
    let mut h = 1;
    while h < size {
        for start in (0..size).step_by(2 * h) {
            for s in start..start + h {
                let x = v[s];
                let y = v[s + h];
                v[s] = x + y;
                v[s + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Normalized state probabilities and all parity moments
/// `E[prod_{i in S} y_i]`, indexed by the mask of `S`. Also returns `log Z`.
pub(crate) fn parity_moments(lw: &[f64]) -> (f64, Vec<f64>) {
    let lz = log_sum_exp(lw.iter().copied());
    let mut p: Vec<f64> = lw.iter().map(|w| (w - lz).exp()).collect();
    walsh_hadamard(&mut p);
    for (s, x) in p.iter_mut().enumerate() {
        if s.count_ones() % 2 == 1 {
            *x = -*x;
        }
    }
    (lz, p)
}
