//! Path corpora: ingestion from ngram text, train/validation splitting,
//! summary statistics and the network topology implied by the observed paths.
//!
//! The ngram format has one path per line, tokens joined by a separator:
//!
//! ```text
//! A,C,D,E
//! B,C,D,F,10
//! ```
//!
//! In weighted mode the trailing token is the observation count of the path.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a first-order node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between node labels and contiguous ids, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from labels in id order. Duplicate labels are rejected.
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for label in labels {
            let label = label.into();
            if vocab.index.contains_key(&label) {
                return Err(Error::InvalidArgument(format!("duplicate label {label:?}")));
            }
            vocab.intern(&label);
        }
        Ok(vocab)
    }

    /// Returns the id of `label`, assigning the next free id on first sight.
    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = NodeId(self.labels.len() as u32);
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.labels.get(id.index()).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Resolves a sequence of labels to ids.
    pub fn resolve<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<NodeId>> {
        labels
            .iter()
            .map(|l| {
                self.id(l.as_ref())
                    .ok_or_else(|| Error::UnknownNode(l.as_ref().to_owned()))
            })
            .collect()
    }
}

/// One observed node sequence together with how often it was observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub frequency: u64,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>, frequency: u64) -> Self {
        Self { nodes, frequency }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// A frequency-weighted multiset of paths over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMultiset {
    paths: Vec<Path>,
    vocabulary: Arc<Vocabulary>,
    total_observations: u64,
    max_length: usize,
}

impl PathMultiset {
    /// Validates and wraps `paths`. Every path must be non-empty, have a
    /// positive frequency and use ids from `vocabulary`.
    pub fn new(vocabulary: Arc<Vocabulary>, paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut total = 0u64;
        let mut max_length = 0;
        for (i, p) in paths.iter().enumerate() {
            if p.nodes.is_empty() {
                return Err(Error::InvalidArgument(format!("path {i} is empty")));
            }
            if p.frequency == 0 {
                return Err(Error::InvalidArgument(format!(
                    "path {i} has zero frequency"
                )));
            }
            if let Some(bad) = p.nodes.iter().find(|n| n.index() >= vocabulary.len()) {
                return Err(Error::UnknownNode(format!("id {bad}")));
            }
            total = total
                .checked_add(p.frequency)
                .ok_or_else(|| Error::InvalidArgument("observation count overflow".into()))?;
            max_length = max_length.max(p.nodes.len());
        }
        Ok(Self {
            paths,
            vocabulary,
            total_observations: total,
            max_length,
        })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocabulary
    }

    /// Sum of all path frequencies (the number of observations `m`).
    pub fn total_observations(&self) -> u64 {
        self.total_observations
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn node_count(&self) -> usize {
        self.vocabulary.len()
    }

    /// Writes the multiset as ngram text. In weighted mode each path becomes
    /// one line with a trailing count; otherwise each observation is a line.
    pub fn write_ngram<W: Write>(&self, mut out: W, separator: &str, weighted: bool) -> Result<()> {
        let mut line = String::new();
        for p in &self.paths {
            line.clear();
            for (i, n) in p.nodes.iter().enumerate() {
                if i > 0 {
                    line.push_str(separator);
                }
                line.push_str(self.vocabulary.label(*n).expect("validated id"));
            }
            if weighted {
                line.push_str(separator);
                line.push_str(&p.frequency.to_string());
                writeln!(out, "{line}")?;
            } else {
                for _ in 0..p.frequency {
                    writeln!(out, "{line}")?;
                }
            }
        }
        Ok(())
    }
}

/// Parses ngram text. Vocabulary ids follow first appearance in the input.
pub fn parse_ngram<R: BufRead>(source: R, separator: &str, weighted: bool) -> Result<PathMultiset> {
    if separator.is_empty() {
        return Err(Error::InvalidArgument("separator must not be empty".into()));
    }
    let mut vocab = Vocabulary::new();
    let mut paths = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = line.split(separator).map(str::trim).collect();
        let frequency = if weighted {
            if tokens.len() < 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "weighted line needs at least one node and a count".into(),
                });
            }
            let raw = tokens.pop().unwrap();
            match raw.parse::<u64>() {
                Ok(0) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "count must be positive".into(),
                    })
                }
                Ok(c) => c,
                Err(_) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("invalid count {raw:?}"),
                    })
                }
            }
        } else {
            1
        };
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                message: "empty token".into(),
            });
        }
        let nodes = tokens.iter().map(|t| vocab.intern(t)).collect();
        paths.push(Path::new(nodes, frequency));
    }
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    PathMultiset::new(Arc::new(vocab), paths)
}

pub fn parse_ngram_str(source: &str, separator: &str, weighted: bool) -> Result<PathMultiset> {
    parse_ngram(source.as_bytes(), separator, weighted)
}

/// Directed binary adjacency over first-order nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    n: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
    successors: Vec<Vec<NodeId>>,
}

impl NetworkTopology {
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| a.index() >= n || b.index() >= n) {
            return Err(Error::InvalidArgument(format!(
                "edge ({a}, {b}) outside node range 0..{n}"
            )));
        }
        let mut successors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            successors[a.index()].push(b);
        }
        Ok(Self {
            n,
            edges,
            successors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn contains(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Out-neighbours of `node`, in ascending id order.
    pub fn successors(&self, node: NodeId) -> &[NodeId] {
        &self.successors[node.index()]
    }

    /// True when every consecutive pair of `nodes` is an edge.
    pub fn is_walk(&self, nodes: &[NodeId]) -> bool {
        nodes.windows(2).all(|w| self.contains(w[0], w[1]))
    }

    pub fn accepts(&self, path: &Path) -> bool {
        path.nodes.iter().all(|n| n.index() < self.n) && self.is_walk(&path.nodes)
    }
}

/// The topology consisting of exactly the links traversed in `s`.
pub fn derive_topology(s: &PathMultiset) -> NetworkTopology {
    let edges = s
        .paths()
        .iter()
        .flat_map(|p| p.nodes.windows(2).map(|w| (w[0], w[1])));
    NetworkTopology::from_edges(s.node_count(), edges).expect("path ids are validated")
}

/// Splits `s` at the level of individual observations: a path with
/// frequency `f` contributes `f` independent draws. Both parts keep the
/// parent vocabulary and the parent's path order.
pub fn split_train_validation(
    s: &PathMultiset,
    train_fraction: f64,
    seed: u64,
) -> Result<(PathMultiset, PathMultiset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let m = s.total_observations();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "need at least two observations to split".into(),
        ));
    }
    let n_train = ((m as f64 * train_fraction).round() as u64).clamp(1, m - 1);
    let n_validation = (m - n_train) as usize;

    // Cumulative frequencies map an observation index to its path.
    let mut cumulative = Vec::with_capacity(s.paths().len());
    let mut acc = 0u64;
    for p in s.paths() {
        acc += p.frequency;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, m as usize, n_validation);
    let mut validation_counts = vec![0u64; s.paths().len()];
    for obs in picked.iter() {
        let path_idx = cumulative.partition_point(|&c| c <= obs as u64);
        validation_counts[path_idx] += 1;
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (p, &v) in s.paths().iter().zip(&validation_counts) {
        if v > 0 {
            validation.push(Path::new(p.nodes.clone(), v));
        }
        if p.frequency > v {
            train.push(Path::new(p.nodes.clone(), p.frequency - v));
        }
    }
    Ok((
        PathMultiset::new(Arc::clone(s.vocabulary()), train)?,
        PathMultiset::new(Arc::clone(s.vocabulary()), validation)?,
    ))
}

/// Corpus summary in the layout of a dataset statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total_paths: u64,
    pub unique_paths: usize,
    pub mean_length: f64,
    pub median_length: f64,
    pub min_length: usize,
    pub max_length: usize,
    pub nodes: usize,
    pub links: usize,
    pub density: f64,
}

/// Length statistics are frequency-weighted; `unique_paths` counts distinct
/// node sequences.
pub fn summary_stats(s: &PathMultiset) -> CorpusStats {
    let m = s.total_observations();
    let unique: HashSet<&[NodeId]> = s.paths().iter().map(|p| p.nodes.as_slice()).collect();

    let mut by_length: Vec<(usize, u64)> =
        s.paths().iter().map(|p| (p.len(), p.frequency)).collect();
    by_length.sort_unstable();
    let weighted_sum: f64 = by_length.iter().map(|&(l, f)| l as f64 * f as f64).sum();

    // Order statistic of rank `r` (0-based) in the expanded observation list.
    let nth = |r: u64| -> usize {
        let mut seen = 0u64;
        for &(l, f) in &by_length {
            seen += f;
            if r < seen {
                return l;
            }
        }
        by_length.last().map(|x| x.0).unwrap_or(0)
    };
    let median = if m % 2 == 1 {
        nth(m / 2) as f64
    } else {
        (nth(m / 2 - 1) + nth(m / 2)) as f64 / 2.0
    };

    let topo = derive_topology(s);
    let n = s.node_count();
    let links = topo.edge_count();
    let density = if n > 1 {
        links as f64 / (n as f64 * (n as f64 - 1.0))
    } else {
        0.0
    };

    CorpusStats {
        total_paths: m,
        unique_paths: unique.len(),
        mean_length: weighted_sum / m as f64,
        median_length: median,
        min_length: by_length.first().map(|x| x.0).unwrap_or(0),
        max_length: s.max_length(),
        nodes: n,
        links,
        density,
    }
}
