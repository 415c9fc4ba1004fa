//! Multi-order generative model of paths.
//!
//! A path `v1 -> ... -> vl` is expanded into the state sequence
//! `* -> (v1) -> (v1,v2) -> ... -> (v_{l-K+1},...,v_l) -> †`: memory grows by
//! one node per step until it reaches the maximum order `K`, after which the
//! window slides. Counting these transitions over a corpus gives the sparse
//! multi-order adjacency structure; normalizing each row gives the transition
//! structure used for likelihoods, prediction and sampling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, UnseenKind};
use crate::parallel;
use crate::path_data::{NetworkTopology, NodeId, Path, PathMultiset, Vocabulary};
use crate::prediction::{NodeFrequencies, Target};

/// A state of the multi-order model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateId {
    Initial,
    /// A higher-order node: the last `1..=K` nodes of the path so far.
    Prefix(Vec<NodeId>),
    Terminal,
}

impl StateId {
    pub fn prefix(nodes: &[NodeId]) -> Self {
        StateId::Prefix(nodes.to_vec())
    }

    /// Memory length of the state; 0 for the special states.
    pub fn order(&self) -> usize {
        match self {
            StateId::Prefix(p) => p.len(),
            _ => 0,
        }
    }

    pub fn last_node(&self) -> Option<NodeId> {
        match self {
            StateId::Prefix(p) => p.last().copied(),
            _ => None,
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Labeled(self, vocab)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateId::Initial => f.write_str("*"),
            StateId::Terminal => f.write_str("†"),
            StateId::Prefix(p) => {
                f.write_str("(")?;
                for (i, n) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{n}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Labeled<'a>(&'a StateId, &'a Vocabulary);

impl fmt::Display for Labeled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            StateId::Prefix(p) => {
                f.write_str("(")?;
                for (i, n) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(self.1.label(*n).unwrap_or("?"))?;
                }
                f.write_str(")")
            }
            other => write!(f, "{other}"),
        }
    }
}

/// Expands a node sequence into the `l + 2` states it visits under maximum
/// order `max_order`.
pub fn expand_path(nodes: &[NodeId], max_order: usize) -> Vec<StateId> {
    assert!(max_order >= 1, "maximum order must be at least 1");
    let mut states = Vec::with_capacity(nodes.len() + 2);
    states.push(StateId::Initial);
    for end in 1..=nodes.len() {
        states.push(StateId::prefix(&nodes[end.saturating_sub(max_order)..end]));
    }
    states.push(StateId::Terminal);
    states
}

/// True when `from -> to` has one of the shapes a multi-order model admits.
pub fn is_admissible_transition(from: &StateId, to: &StateId, max_order: usize) -> bool {
    let within = |p: &[NodeId]| !p.is_empty() && p.len() <= max_order;
    match (from, to) {
        (StateId::Initial, StateId::Prefix(t)) => t.len() == 1,
        (StateId::Prefix(s), StateId::Terminal) => within(s),
        (StateId::Prefix(s), StateId::Prefix(t)) => {
            if !within(s) || !within(t) {
                return false;
            }
            if s.len() < max_order {
                t.len() == s.len() + 1 && t[..s.len()] == s[..]
            } else {
                t.len() == max_order && t[..max_order - 1] == s[1..]
            }
        }
        _ => false,
    }
}

type CountMap = HashMap<StateId, HashMap<StateId, u64>>;

/// Sparse transition counts of a multi-order model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiOrderCounts {
    max_order: usize,
    vocabulary: Arc<Vocabulary>,
    rows: CountMap,
}

impl MultiOrderCounts {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocabulary
    }

    pub fn get(&self, from: &StateId, to: &StateId) -> u64 {
        self.rows
            .get(from)
            .and_then(|r| r.get(to))
            .copied()
            .unwrap_or(0)
    }

    pub fn row(&self, from: &StateId) -> Option<&HashMap<StateId, u64>> {
        self.rows.get(from)
    }

    /// Number of distinct source states.
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of non-zero entries.
    pub fn entry_count(&self) -> usize {
        self.rows.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All entries ordered by source then target.
    pub fn sorted_entries(&self) -> Vec<(&StateId, &StateId, u64)> {
        let mut out: Vec<_> = self
            .rows
            .iter()
            .flat_map(|(f, r)| r.iter().map(move |(t, &c)| (f, t, c)))
            .collect();
        out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn outflow_from_initial(&self) -> u64 {
        self.rows
            .get(&StateId::Initial)
            .map(|r| r.values().sum())
            .unwrap_or(0)
    }

    pub fn inflow_to_terminal(&self) -> u64 {
        self.rows
            .values()
            .filter_map(|r| r.get(&StateId::Terminal))
            .sum()
    }

    /// Checks the block structure, node ranges and mass balance.
    pub fn validate(&self) -> Result<()> {
        let n = self.vocabulary.len();
        for (from, row) in &self.rows {
            for (to, &count) in row {
                if count == 0 {
                    return Err(Error::Model(format!("zero count {from} -> {to}")));
                }
                for s in [from, to] {
                    if let StateId::Prefix(p) = s {
                        if p.iter().any(|x| x.index() >= n) {
                            return Err(Error::Model(format!("state {s} uses unknown node")));
                        }
                    }
                }
                if !is_admissible_transition(from, to, self.max_order) {
                    return Err(Error::Model(format!(
                        "transition {from} -> {to} violates the block structure for K={}",
                        self.max_order
                    )));
                }
            }
        }
        // Every partial sum taken later is bounded by the grand total.
        self.rows
            .values()
            .flat_map(|r| r.values())
            .try_fold(0u64, |a, &c| a.checked_add(c))
            .ok_or_else(|| Error::Model("total count overflows".into()))?;
        let out = self.outflow_from_initial();
        let inn = self.inflow_to_terminal();
        if out != inn {
            return Err(Error::Model(format!(
                "initial outflow {out} differs from terminal inflow {inn}"
            )));
        }
        Ok(())
    }

    /// Serializes counts to the versioned JSON model format. Output is
    /// canonical: rows and targets are sorted.
    pub fn to_json(&self) -> Result<String> {
        let mut grouped: BTreeMap<&StateId, Vec<(&StateId, u64)>> = BTreeMap::new();
        for (f, t, c) in self.sorted_entries() {
            grouped.entry(f).or_default().push((t, c));
        }
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            max_order: self.max_order,
            vocabulary: self.vocabulary.labels().to_vec(),
            rows: grouped
                .into_iter()
                .map(|(from, targets)| RowRecord {
                    from: StateRecord::from(from),
                    to: targets
                        .into_iter()
                        .map(|(t, c)| (StateRecord::from(t), c))
                        .collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses the JSON model format and validates its structure.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unexpected format tag {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.max_order == 0 {
            return Err(Error::Model("max_order must be at least 1".into()));
        }
        let vocabulary = Arc::new(
            Vocabulary::from_labels(file.vocabulary).map_err(|e| Error::Model(e.to_string()))?,
        );
        let mut rows: CountMap = HashMap::new();
        for rec in file.rows {
            let from = rec.from.into_state()?;
            if rows.contains_key(&from) {
                return Err(Error::Model(format!("duplicate row {from}")));
            }
            let mut row = HashMap::with_capacity(rec.to.len());
            for (t, c) in rec.to {
                let to = t.into_state()?;
                if row.insert(to.clone(), c).is_some() {
                    return Err(Error::Model(format!("duplicate entry {from} -> {to}")));
                }
            }
            if !row.is_empty() {
                rows.insert(from, row);
            }
        }
        let counts = Self {
            max_order: file.max_order,
            vocabulary,
            rows,
        };
        if counts.is_empty() {
            return Err(Error::Model("model has no transitions".into()));
        }
        counts.validate()?;
        Ok(counts)
    }
}

const MODEL_FORMAT: &str = "mogen-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    max_order: usize,
    vocabulary: Vec<String>,
    rows: Vec<RowRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowRecord {
    from: StateRecord,
    to: Vec<(StateRecord, u64)>,
}

/// `"*"`, `"†"` or an array of node ids.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StateRecord {
    Special(String),
    Prefix(Vec<NodeId>),
}

impl From<&StateId> for StateRecord {
    fn from(s: &StateId) -> Self {
        match s {
            StateId::Initial => StateRecord::Special("*".into()),
            StateId::Terminal => StateRecord::Special("†".into()),
            StateId::Prefix(p) => StateRecord::Prefix(p.clone()),
        }
    }
}

impl StateRecord {
    fn into_state(self) -> Result<StateId> {
        match self {
            StateRecord::Special(s) if s == "*" => Ok(StateId::Initial),
            StateRecord::Special(s) if s == "†" => Ok(StateId::Terminal),
            StateRecord::Special(s) => Err(Error::Model(format!("unknown special state {s:?}"))),
            StateRecord::Prefix(p) if p.is_empty() => {
                Err(Error::Model("empty prefix state".into()))
            }
            StateRecord::Prefix(p) => Ok(StateId::Prefix(p)),
        }
    }
}

fn count_chunk(paths: &[Path], max_order: usize) -> CountMap {
    let mut rows: CountMap = HashMap::new();
    for p in paths {
        let states = expand_path(&p.nodes, max_order);
        for pair in states.windows(2) {
            *rows
                .entry(pair[0].clone())
                .or_default()
                .entry(pair[1].clone())
                .or_insert(0) += p.frequency;
        }
    }
    rows
}

fn merge(mut a: CountMap, mut b: CountMap) -> CountMap {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    for (from, row) in b {
        let dst = a.entry(from).or_default();
        for (to, c) in row {
            *dst.entry(to).or_insert(0) += c;
        }
    }
    a
}

const FIT_CHUNK: usize = 2048;

/// Counts all multi-order transitions of `s` using the ambient rayon pool.
pub fn fit_counts(s: &PathMultiset, max_order: usize) -> Result<MultiOrderCounts> {
    if max_order == 0 {
        return Err(Error::InvalidArgument(
            "maximum order must be at least 1".into(),
        ));
    }
    let rows = s
        .paths()
        .par_chunks(FIT_CHUNK)
        .map(|chunk| count_chunk(chunk, max_order))
        .reduce(HashMap::new, merge);
    Ok(MultiOrderCounts {
        max_order,
        vocabulary: Arc::clone(s.vocabulary()),
        rows,
    })
}

/// [`fit_counts`] on a dedicated pool of `workers` threads.
pub fn fit_counts_with_workers(
    s: &PathMultiset,
    max_order: usize,
    workers: usize,
) -> Result<MultiOrderCounts> {
    parallel::with_workers(workers, || fit_counts(s, max_order))?
}

/// One normalized row: targets sorted, with exact counts kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    targets: Vec<StateId>,
    counts: Vec<u64>,
    probabilities: Vec<f64>,
    cumulative: Vec<u64>,
    total: u64,
}

impl Row {
    fn from_counts(row: &HashMap<StateId, u64>) -> Option<Self> {
        let mut entries: Vec<_> = row.iter().filter(|(_, &c)| c > 0).collect();
        if entries.is_empty() {
            return None;
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let total: u64 = entries.iter().map(|(_, &c)| c).sum();
        let mut acc = 0;
        let mut cumulative = Vec::with_capacity(entries.len());
        for (_, &c) in &entries {
            acc += c;
            cumulative.push(acc);
        }
        Some(Self {
            targets: entries.iter().map(|(t, _)| (*t).clone()).collect(),
            counts: entries.iter().map(|(_, &c)| c).collect(),
            probabilities: entries
                .iter()
                .map(|(_, &c)| c as f64 / total as f64)
                .collect(),
            cumulative,
            total,
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateId, f64)> {
        self.targets.iter().zip(self.probabilities.iter().copied())
    }

    pub fn counts(&self) -> impl Iterator<Item = (&StateId, u64)> {
        self.targets.iter().zip(self.counts.iter().copied())
    }

    pub fn probability(&self, target: &StateId) -> Option<f64> {
        self.targets
            .binary_search(target)
            .ok()
            .map(|i| self.probabilities[i])
    }

    /// Picks the target whose cumulative count interval contains `ticket`,
    /// where `ticket` is uniform in `0..total`.
    pub(crate) fn pick(&self, ticket: u64) -> &StateId {
        let i = self.cumulative.partition_point(|&c| c <= ticket);
        &self.targets[i]
    }
}

/// Row-stochastic multi-order transition structure.
#[derive(Debug, Clone)]
pub struct MultiOrderModel {
    max_order: usize,
    vocabulary: Arc<Vocabulary>,
    rows: HashMap<StateId, Row>,
    topology: NetworkTopology,
    node_frequencies: NodeFrequencies,
    /// Target counts pooled over all states sharing a suffix shorter than K.
    pooled: OnceLock<PooledRows>,
}

type PooledRows = HashMap<Vec<NodeId>, Vec<(Target, u64)>>;

/// Row-normalizes `counts`. Rows without mass are left out.
pub fn normalize(counts: &MultiOrderCounts) -> Result<MultiOrderModel> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot normalize empty counts".into(),
        ));
    }
    let rows: HashMap<StateId, Row> = counts
        .rows
        .iter()
        .filter_map(|(from, r)| Row::from_counts(r).map(|row| (from.clone(), row)))
        .collect();
    let mut edges = HashSet::new();
    let mut visits = vec![0u64; counts.vocabulary.len()];
    let mut terminal = 0u64;
    for (from, row) in &rows {
        for (to, c) in row.counts() {
            match to.last_node() {
                Some(v) => visits[v.index()] += c,
                None => terminal += c,
            }
        }
        for to in &row.targets {
            for s in [from, to] {
                if let StateId::Prefix(p) = s {
                    edges.extend(p.windows(2).map(|w| (w[0], w[1])));
                }
            }
        }
    }
    let topology = NetworkTopology::from_edges(counts.vocabulary.len(), edges)?;
    Ok(MultiOrderModel {
        max_order: counts.max_order,
        vocabulary: Arc::clone(&counts.vocabulary),
        rows,
        topology,
        node_frequencies: NodeFrequencies::from_parts(visits, terminal),
        pooled: OnceLock::new(),
    })
}

impl MultiOrderModel {
    /// Fits counts and normalizes in one step.
    pub fn fit(s: &PathMultiset, max_order: usize) -> Result<Self> {
        normalize(&fit_counts(s, max_order)?)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocabulary
    }

    /// Links appearing in any state of the model.
    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn row(&self, from: &StateId) -> Option<&Row> {
        self.rows.get(from)
    }

    /// Next-element counts summed over every state whose node tuple ends
    /// with `suffix` (`1 <= suffix.len() < K`).
    pub fn pooled_targets(&self, suffix: &[NodeId]) -> Option<&[(Target, u64)]> {
        self.pooled
            .get_or_init(|| self.build_pooled())
            .get(suffix)
            .map(Vec::as_slice)
    }

    fn build_pooled(&self) -> PooledRows {
        let mut acc: HashMap<Vec<NodeId>, BTreeMap<Target, u64>> = HashMap::new();
        for (from, row) in &self.rows {
            let StateId::Prefix(nodes) = from else {
                continue;
            };
            for len in 1..self.max_order.min(nodes.len() + 1) {
                let entry = acc.entry(nodes[nodes.len() - len..].to_vec()).or_default();
                for (to, c) in row.counts() {
                    let t = match to.last_node() {
                        Some(v) => Target::Node(v),
                        None => Target::Terminal,
                    };
                    *entry.entry(t).or_insert(0) += c;
                }
            }
        }
        acc.into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect()
    }

    /// Node visit counts and path count implied by the transition counts.
    pub fn node_frequencies(&self) -> &NodeFrequencies {
        &self.node_frequencies
    }

    pub fn rows(&self) -> impl Iterator<Item = (&StateId, &Row)> {
        self.rows.iter()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn transition_probability(&self, from: &StateId, to: &StateId) -> f64 {
        self.rows
            .get(from)
            .and_then(|r| r.probability(to))
            .unwrap_or(0.0)
    }

    /// Recovers the exact counts the model was normalized from.
    pub fn to_counts(&self) -> MultiOrderCounts {
        let rows = self
            .rows
            .iter()
            .map(|(f, r)| (f.clone(), r.counts().map(|(t, c)| (t.clone(), c)).collect()))
            .collect();
        MultiOrderCounts {
            max_order: self.max_order,
            vocabulary: Arc::clone(&self.vocabulary),
            rows,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_counts().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        normalize(&MultiOrderCounts::from_json(text)?)
    }

    pub(crate) fn check_nodes(&self, nodes: &[NodeId]) -> Result<()> {
        match nodes.iter().find(|n| n.index() >= self.vocabulary.len()) {
            Some(bad) => Err(Error::UnknownNode(format!("id {bad}"))),
            None => Ok(()),
        }
    }

    fn classify_missing(&self, from: &StateId, to: &StateId) -> UnseenKind {
        match (from.last_node(), to.last_node()) {
            (Some(a), Some(b)) if !self.topology.contains(a, b) => UnseenKind::StructuralZero,
            _ => UnseenKind::Unobserved,
        }
    }

    /// The `l + 1` transition probabilities a path of length `l` consumes.
    pub fn transition_probabilities(&self, nodes: &[NodeId]) -> Result<Vec<f64>> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("path must contain a node".into()));
        }
        self.check_nodes(nodes)?;
        let states = expand_path(nodes, self.max_order);
        states
            .windows(2)
            .map(|w| {
                let p = self.transition_probability(&w[0], &w[1]);
                if p > 0.0 {
                    Ok(p)
                } else {
                    Err(Error::UnseenTransition {
                        from: w[0].clone(),
                        to: w[1].clone(),
                        kind: self.classify_missing(&w[0], &w[1]),
                    })
                }
            })
            .collect()
    }

    /// Natural-log probability of a single path, or an unseen-transition error.
    pub fn path_log_likelihood(&self, nodes: &[NodeId]) -> Result<f64> {
        Ok(self
            .transition_probabilities(nodes)?
            .into_iter()
            .map(f64::ln)
            .sum())
    }

    /// Frequency-weighted log-likelihood of `s`. Per-path terms are computed
    /// in parallel and summed in path order, so the result does not depend on
    /// the number of workers.
    pub fn dataset_log_likelihood(&self, s: &PathMultiset) -> Result<f64> {
        let terms: Vec<f64> = s
            .paths()
            .par_iter()
            .map(|p| Ok(p.frequency as f64 * self.path_log_likelihood(&p.nodes)?))
            .collect::<Result<_>>()?;
        Ok(terms.into_iter().sum())
    }
}
