//! Chain graph model parameters, outcome/treatment/covariate vectors and the
//! un-normalized log-potential shared by inference, sampling and fitting.
//!
//! The outcome block is an Ising-type log-linear model whose node fields are
//! shifted by the treatments and confounders pointing into it:
//!
//! ```text
//! log phi(y; a, c) = sum_i h_i y_i + sum_{i~j} k_ij y_i y_j + sum_i gamma_i a_i y_i + sum_i kappa_i c_i y_i
//! ```
//!
//! In shared mode a single scalar treatment is broadcast to every node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{edge_key, NetworkGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentMode {
    /// One binary treatment acting on every node.
    Shared,
    /// One binary treatment per node.
    PerNode,
}

impl fmt::Display for TreatmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreatmentMode::Shared => f.write_str("shared"),
            TreatmentMode::PerNode => f.write_str("per_node"),
        }
    }
}

/// Outcome configuration with entries in {-1, +1} (+1 = liberal).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome(Vec<i8>);

impl Outcome {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::shape(format!("outcome entry {v} is not +1 or -1")));
        }
        Ok(Self(values))
    }

    /// Decode a state index: bit `i` set means `y_i = +1`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn all(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        Self(vec![value; n])
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().enumerate().fold(0u64, |m, (i, &v)| if v == 1 { m | 1 << i } else { m })
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of +1 (liberal) entries.
    pub fn liberal_count(&self) -> usize {
        self.0.iter().filter(|&&v| v == 1).count()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

/// Binary treatment assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Treatment {
    Shared(u8),
    PerNode(Vec<u8>),
}

impl Treatment {
    pub fn shared(a: u8) -> Result<Self> {
        if a > 1 {
            return Err(Error::shape(format!("treatment value {a} is not 0 or 1")));
        }
        Ok(Treatment::Shared(a))
    }

    pub fn per_node(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::shape(format!("treatment entry {v} is not 0 or 1")));
        }
        Ok(Treatment::PerNode(values))
    }

    /// Per-node treatment with the given node indices set to 1.
    pub fn treating(n: usize, nodes: &[usize]) -> Self {
        let mut v = vec![0; n];
        for &i in nodes {
            v[i] = 1;
        }
        Treatment::PerNode(v)
    }

    pub fn mode(&self) -> TreatmentMode {
        match self {
            Treatment::Shared(_) => TreatmentMode::Shared,
            Treatment::PerNode(_) => TreatmentMode::PerNode,
        }
    }

    /// Treatment value seen by node `i` (the scalar in shared mode).
    pub fn at(&self, i: usize) -> u8 {
        match self {
            Treatment::Shared(a) => *a,
            Treatment::PerNode(v) => v[i],
        }
    }

    /// Treatment broadcast to `n` nodes, as a bit mask.
    pub fn mask(&self, n: usize) -> u64 {
        (0..n).fold(0u64, |m, i| if self.at(i) == 1 { m | 1 << i } else { m })
    }

    pub(crate) fn check(&self, mode: TreatmentMode, n: usize) -> Result<()> {
        if self.mode() != mode {
            return Err(Error::config(format!("treatment is {} but the model expects {mode}", self.mode())));
        }
        if let Treatment::PerNode(v) = self {
            if v.len() != n {
                return Err(Error::shape(format!("treatment has {} entries, expected {n}", v.len())));
            }
            if v.iter().any(|&x| x > 1) {
                return Err(Error::shape("treatment entries must be 0 or 1"));
            }
        } else if self.at(0) > 1 {
            return Err(Error::shape("treatment must be 0 or 1"));
        }
        Ok(())
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Treatment::Shared(a) => write!(f, "{a}"),
            Treatment::PerNode(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", s.join(","))
            }
        }
    }
}

/// Binary confounder vector, one entry per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Covariates(Vec<u8>);

impl Covariates {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::shape(format!("covariate entry {v} is not 0 or 1")));
        }
        Ok(Self(values))
    }

    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|i| (mask >> i & 1) as u8).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().enumerate().fold(0u64, |m, (i, &v)| if v == 1 { m | 1 << i } else { m })
    }
}

/// Parameters of the two-block chain graph model bound to a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainGraphModel {
    graph: NetworkGraph,
    mode: TreatmentMode,
    h: Vec<f64>,
    k: Vec<f64>,
    gamma: Vec<f64>,
    kappa: Option<Vec<f64>>,
}

impl ChainGraphModel {
    /// `k` is aligned with `graph.edges()`.
    pub fn new(
        graph: NetworkGraph,
        mode: TreatmentMode,
        h: Vec<f64>,
        k: Vec<f64>,
        gamma: Vec<f64>,
        kappa: Option<Vec<f64>>,
    ) -> Result<Self> {
        let model = Self { graph, mode, h, k, gamma, kappa };
        let violations = model.violations();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// All parameters zero.
    pub fn zeros(graph: NetworkGraph, mode: TreatmentMode, with_kappa: bool) -> Self {
        let n = graph.len();
        let m = graph.edge_count();
        Self {
            graph,
            mode,
            h: vec![0.0; n],
            k: vec![0.0; m],
            gamma: vec![0.0; n],
            kappa: with_kappa.then(|| vec![0.0; n]),
        }
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.len()
    }

    pub fn mode(&self) -> TreatmentMode {
        self.mode
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn kappa(&self) -> Option<&[f64]> {
        self.kappa.as_deref()
    }

    pub fn has_kappa(&self) -> bool {
        self.kappa.is_some()
    }

    pub fn with_h(mut self, h: Vec<f64>) -> Result<Self> {
        self.h = h;
        Self::revalidate(self)
    }

    pub fn with_k(mut self, k: Vec<f64>) -> Result<Self> {
        self.k = k;
        Self::revalidate(self)
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Result<Self> {
        self.gamma = gamma;
        Self::revalidate(self)
    }

    pub fn with_kappa(mut self, kappa: Option<Vec<f64>>) -> Result<Self> {
        self.kappa = kappa;
        Self::revalidate(self)
    }

    fn revalidate(model: Self) -> Result<Self> {
        let v = model.violations();
        if v.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// Coupling between `i` and `j`, zero when they are not adjacent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.graph.edge_index(i, j).map_or(0.0, |e| self.k[e])
    }

    fn violations(&self) -> Vec<String> {
        let n = self.graph.len();
        let mut out = Vec::new();
        let mut check = |name: &str, v: &[f64], want: usize| {
            if v.len() != want {
                out.push(format!("{name} length mismatch: expected {want}, got {}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                out.push(format!("{name} has non-finite entries"));
            }
        };
        check("h", &self.h, n);
        check("k", &self.k, self.graph.edge_count());
        check("gamma", &self.gamma, n);
        if let Some(kappa) = &self.kappa {
            check("kappa", kappa, n);
        }
        out
    }

    pub(crate) fn check_inputs(&self, a: &Treatment, c: Option<&Covariates>) -> Result<()> {
        a.check(self.mode, self.n())?;
        match (&self.kappa, c) {
            (Some(_), None) => Err(Error::config("model has confounder effects but no covariates were given")),
            (None, Some(_)) => Err(Error::config("covariates given to a model without confounder effects")),
            (Some(_), Some(c)) if c.len() != self.n() => {
                Err(Error::shape(format!("covariates have {} entries, expected {}", c.len(), self.n())))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn check_outcome(&self, y: &Outcome) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::shape(format!("outcome has {} entries, expected {}", y.len(), self.n())));
        }
        Ok(())
    }

    /// Effective node fields `h_i + gamma_i a_i + kappa_i c_i`.
    pub fn node_fields(&self, a: &Treatment, c: Option<&Covariates>) -> Result<Vec<f64>> {
        self.check_inputs(a, c)?;
        Ok(self.fields_unchecked(a.mask(self.n()), c.map(Covariates::mask).unwrap_or(0)))
    }

    pub(crate) fn fields_unchecked(&self, a_mask: u64, c_mask: u64) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let mut f = self.h[i];
                if a_mask >> i & 1 == 1 {
                    f += self.gamma[i];
                }
                if let Some(kappa) = &self.kappa {
                    if c_mask >> i & 1 == 1 {
                        f += kappa[i];
                    }
                }
                f
            })
            .collect()
    }

    /// Adjacency lists carrying couplings: `adj[i] = [(j, k_ij), ...]`.
    pub(crate) fn coupling_lists(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n()).map(|i| self.graph.neighbors(i).iter().map(|&(j, e)| (j, self.k[e])).collect()).collect()
    }

    pub fn to_document(&self) -> ModelDocument {
        let by_label = |v: &[f64]| -> BTreeMap<String, f64> {
            self.graph.labels().iter().cloned().zip(v.iter().copied()).collect()
        };
        ModelDocument {
            nodes: self.graph.labels().to_vec(),
            edges: self.graph.label_pairs().into_iter().map(|(a, b)| [a, b]).collect(),
            h: by_label(&self.h),
            gamma: by_label(&self.gamma),
            kappa: self.kappa.as_deref().map(by_label),
            k: (0..self.graph.edge_count()).map(|e| (self.graph.edge_key(e), self.k[e])).collect(),
            treatment_mode: self.mode,
            fit_meta: None,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let violations = validate_model(doc);
        if !violations.is_empty() {
            return Err(Error::InvalidModel(violations));
        }
        let pairs: Vec<(String, String)> = doc.edges.iter().map(|[a, b]| (a.clone(), b.clone())).collect();
        let graph = NetworkGraph::from_labels(&doc.nodes, &pairs)?;
        let pick = |m: &BTreeMap<String, f64>| -> Vec<f64> { doc.nodes.iter().map(|l| m[l]).collect() };
        let k = (0..graph.edge_count()).map(|e| doc.k[&graph.edge_key(e)]).collect();
        Self::new(graph, doc.treatment_mode, pick(&doc.h), k, pick(&doc.gamma), doc.kappa.as_ref().map(pick))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }

    /// Short content hash of the parameter document (fit metadata excluded).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.to_document()).expect("model document serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }
}

/// Un-normalized log-probability of outcome `y` under treatment `a` and
/// optional confounders `c`.
pub fn log_potential(model: &ChainGraphModel, y: &Outcome, a: &Treatment, c: Option<&Covariates>) -> Result<f64> {
    model.check_outcome(y)?;
    model.check_inputs(a, c)?;
    let yv = y.values();
    let yf = |i: usize| f64::from(yv[i]);
    let mut total = 0.0;
    for (i, &h) in model.h.iter().enumerate() {
        total += h * yf(i);
    }
    for (e, &(i, j)) in model.graph.edges().iter().enumerate() {
        total += model.k[e] * yf(i) * yf(j);
    }
    for (i, &g) in model.gamma.iter().enumerate() {
        total += g * f64::from(a.at(i)) * yf(i);
    }
    if let (Some(kappa), Some(c)) = (&model.kappa, c) {
        for (i, &kp) in kappa.iter().enumerate() {
            total += kp * f64::from(c.values()[i]) * yf(i);
        }
    }
    Ok(total)
}

/// Serialized form of a model: parameters keyed by node label and by
/// `"label1|label2"` edge keys (labels in lexicographic order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub h: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<BTreeMap<String, f64>>,
    pub k: BTreeMap<String, f64>,
    pub treatment_mode: TreatmentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_meta: Option<serde_json::Value>,
}

/// Check every model invariant on an unvalidated document. An empty list
/// means the document describes a well-formed model.
pub fn validate_model(doc: &ModelDocument) -> Vec<String> {
    let mut out = Vec::new();
    let n = doc.nodes.len();
    if n == 0 {
        out.push("graph has no nodes".to_string());
    }
    let mut seen = BTreeSet::new();
    for l in &doc.nodes {
        if l.is_empty() || l.contains('|') {
            out.push(format!("invalid node label {l:?}"));
        }
        if !seen.insert(l.as_str()) {
            out.push(format!("duplicate node label {l:?}"));
        }
    }
    let mut edge_keys = BTreeSet::new();
    for [a, b] in &doc.edges {
        if a == b {
            out.push(format!("self-loop on {a:?}"));
            continue;
        }
        for l in [a, b] {
            if !seen.contains(l.as_str()) {
                out.push(format!("edge endpoint {l:?} is not a node"));
            }
        }
        if !edge_keys.insert(edge_key(a, b)) {
            out.push(format!("duplicate edge ({a},{b})"));
        }
    }
    let mut per_node = |name: &str, m: &BTreeMap<String, f64>| {
        if m.len() != n {
            out.push(format!("{name} length mismatch: expected {n}, got {}", m.len()));
        }
        for l in m.keys() {
            if !seen.contains(l.as_str()) {
                out.push(format!("{name} indexed by unknown node {l:?}"));
            }
        }
        for l in &doc.nodes {
            match m.get(l) {
                None => out.push(format!("{name} missing node {l:?}")),
                Some(v) if !v.is_finite() => out.push(format!("{name}[{l}] is not finite")),
                _ => {}
            }
        }
    };
    per_node("h", &doc.h);
    per_node("gamma", &doc.gamma);
    if let Some(kappa) = &doc.kappa {
        per_node("kappa", kappa);
    }
    for (key, v) in &doc.k {
        match key.split_once('|') {
            Some((a, b)) if edge_keys.contains(key) && a <= b => {
                if !v.is_finite() {
                    out.push(format!("k[{key}] is not finite"));
                }
            }
            Some((a, b)) if edge_keys.contains(&edge_key(a, b)) => {
                out.push(format!("k key {key:?} is not in lexicographic order"));
            }
            Some((a, b)) => out.push(format!("k indexed by non-edge ({a},{b})")),
            None => out.push(format!("k key {key:?} is not of the form \"a|b\"")),
        }
    }
    for key in &edge_keys {
        if !doc.k.contains_key(key) {
            out.push(format!("k missing edge {key:?}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn two_node(k: f64) -> ChainGraphModel {
        let g = NetworkGraph::from_labels(&["a", "b"], &[("a", "b")]).unwrap();
        ChainGraphModel::new(g, TreatmentMode::PerNode, vec![0.0; 2], vec![k], vec![0.0; 2], None).unwrap()
    }

    #[test]
    fn zero_model_has_zero_potential() {
        let g = reference::court_graph();
        let m = ChainGraphModel::zeros(g, TreatmentMode::Shared, false);
        for mask in [0u64, 5, 511] {
            let y = Outcome::from_mask(9, mask);
            for a in [0, 1] {
                assert_eq!(log_potential(&m, &y, &Treatment::Shared(a), None).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn single_coupling_term() {
        let m = two_node(0.5);
        let y = Outcome::new(vec![1, 1]).unwrap();
        let a = Treatment::PerNode(vec![0, 0]);
        assert_eq!(log_potential(&m, &y, &a, None).unwrap(), 0.5);
    }

    #[test]
    fn all_liberal_term_sum_matches_block_sums() {
        let m = reference::judicial_model();
        let y = Outcome::all(9, 1);
        let got = log_potential(&m, &y, &Treatment::Shared(1), None).unwrap();
        // independent route: sum each block directly
        let want: f64 = m.h().iter().sum::<f64>() + m.k().iter().sum::<f64>() + m.gamma().iter().sum::<f64>();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn shape_and_configuration_errors() {
        let m = two_node(0.5);
        let y = Outcome::new(vec![1, 1]).unwrap();
        let short = Outcome::new(vec![1]).unwrap();
        let a = Treatment::PerNode(vec![0, 0]);
        assert!(matches!(log_potential(&m, &short, &a, None), Err(Error::Shape(_))));
        assert!(matches!(log_potential(&m, &y, &Treatment::PerNode(vec![0]), None), Err(Error::Shape(_))));
        assert!(matches!(log_potential(&m, &y, &Treatment::Shared(1), None), Err(Error::Configuration(_))));
        let c = Covariates::zeros(2);
        assert!(matches!(log_potential(&m, &y, &a, Some(&c)), Err(Error::Configuration(_))));
        assert!(Outcome::new(vec![0, 1]).is_err());
    }

    #[test]
    fn validate_reports_named_violations() {
        let m = reference::judicial_model();
        assert!(validate_model(&m.to_document()).is_empty());

        let mut doc = m.to_document();
        doc.k.insert("Breyer|Thomas".into(), 0.1);
        assert_eq!(validate_model(&doc), vec!["k indexed by non-edge (Breyer,Thomas)".to_string()]);

        let mut doc = m.to_document();
        doc.h.remove("Breyer");
        let v = validate_model(&doc);
        assert!(v.iter().any(|s| s.starts_with("h length mismatch")), "{v:?}");

        let mut doc = m.to_document();
        doc.gamma.insert("Souter".into(), f64::NAN);
        assert!(!validate_model(&doc).is_empty());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let m = reference::simulation_model(1.0, 1.0, 0.5, 0.3);
        let m =
            m.with_h(vec![0.1 + 1e-17, -1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.5, 0.0, 1.0 / 7.0, 3.0, -0.25]).unwrap();
        let back = ChainGraphModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }

    #[test]
    fn constructor_rejects_bad_lengths() {
        let g = reference::court_graph();
        let r = ChainGraphModel::new(g, TreatmentMode::Shared, vec![0.0; 8], vec![0.0; 18], vec![0.0; 9], None);
        match r {
            Err(Error::InvalidModel(v)) => assert!(v[0].starts_with("h length mismatch")),
            other => panic!("{other:?}"),
        }
    }
}
