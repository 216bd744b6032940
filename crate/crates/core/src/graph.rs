//! Labeled undirected graph over the units of the outcome block.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Undirected simple graph with string-labeled nodes.
///
/// Edges are unordered pairs stored once as `(i, j)` with `i < j` in node
/// index order, sorted. Edge indices are stable and are used to address
/// per-edge parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkGraph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl NetworkGraph {
    /// Build a graph from labels and index pairs. Duplicate pairs (in either
    /// orientation) collapse to one edge.
    pub fn new(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Graph("empty node label".into()));
            }
            if label.contains('|') {
                return Err(Error::Graph(format!("node label {label:?} contains '|'")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Graph(format!("duplicate node label {label:?}")));
            }
        }
        let n = labels.len();
        let mut set = BTreeSet::new();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i},{j}) references a missing node")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop on {:?}", labels[i])));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        Ok(Self { labels, index, edges, adjacency })
    }

    /// Build a graph from labels and label pairs.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], pairs: &[(S, S)]) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let lookup: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut idx = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            let i = *lookup.get(a).ok_or_else(|| Error::Graph(format!("unknown node {a:?}")))?;
            let j = *lookup.get(b).ok_or_else(|| Error::Graph(format!("unknown node {b:?}")))?;
            idx.push((i, j));
        }
        Self::new(labels, idx)
    }

    pub fn empty(labels: Vec<String>) -> Result<Self> {
        Self::new(labels, std::iter::empty())
    }

    pub fn complete(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        let pairs: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::new(labels, pairs)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors of `i` as `(neighbor, edge index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    /// Canonical `"a|b"` key for an edge, labels in lexicographic order.
    pub fn edge_key(&self, e: usize) -> String {
        let (i, j) = self.edges[e];
        edge_key(&self.labels[i], &self.labels[j])
    }

    /// Unordered node pairs that do not share an edge.
    pub fn nonadjacent_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| !self.has_edge(i, j)).collect()
    }

    /// Same node set with a different edge set.
    pub fn with_edges(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(self.labels.clone(), pairs)
    }

    /// Edge set as label pairs, each pair and the list lexicographically sorted.
    pub fn label_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (&self.labels[i], &self.labels[j]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect();
        out.sort();
        out
    }
}

pub fn edge_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}|{b}")
    } else {
        format!("{b}|{a}")
    }
}
