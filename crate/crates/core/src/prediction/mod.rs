//! Next-element prediction, cross-entropy evaluation, path generation and
//! the out-of-sample top-path experiment.
//!
//! Every predictor (the multi-order model as well as the baselines) answers
//! [`Predictor::lookup`] for prefixes it has a row for. Prefixes without a row
//! are resolved by the shared [`FallbackPolicy`]:
//!
//! 1. the longest suffix of the prefix the predictor knows, dropping one node
//!    at a time;
//! 2. the start row (the empty prefix);
//! 3. training node frequencies, with termination weighted by the number of
//!    observed paths.

mod evaluate;
mod roc;
mod sampling;

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{MultiOrderModel, Row, StateId};
use crate::path_data::{NodeId, PathMultiset};

pub use evaluate::{
    cross_entropy_eval, observation_records, EvalConfig, EvaluationRecord, EvaluationReport,
};
pub use roc::{roc_from_ranking, top_path_roc, RocConfig, RocCurve, TopPathRoc};
pub use sampling::{sample_path, sample_paths, SampledPath};

/// What a prediction ranges over: a node, or the end of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Node(NodeId),
    Terminal,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(n) => write!(f, "{n}"),
            Target::Terminal => f.write_str("†"),
        }
    }
}

/// Which step of the fallback chain produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    /// The predictor's own row for the (memory-truncated) prefix.
    InModel,
    /// A row for a shorter suffix; `dropped` nodes were removed.
    Suffix { dropped: usize },
    /// The row of the empty prefix.
    Start,
    /// Training node frequencies including termination.
    NodeFrequency,
}

impl Tier {
    pub fn is_fallback(self) -> bool {
        self != Tier::InModel
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FallbackPolicy {
    /// Only the predictor's own rows; missing rows give no prediction.
    Disabled,
    #[default]
    Tiered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution {
    support: Vec<(Target, f64)>,
    tier: Tier,
    /// Length of the prefix the answering row is keyed by.
    order: usize,
}

impl PredictionDistribution {
    /// Builds a distribution from non-negative weights. Zero weights are dropped.
    pub fn from_weights<I>(weights: I, tier: Tier, order: usize) -> Option<Self>
    where
        I: IntoIterator<Item = (Target, u64)>,
    {
        let weights: Vec<(Target, u64)> = weights.into_iter().filter(|w| w.1 > 0).collect();
        let total: u64 = weights.iter().map(|w| w.1).sum();
        if total == 0 {
            return None;
        }
        let mut support: Vec<(Target, f64)> = weights
            .into_iter()
            .map(|(t, w)| (t, w as f64 / total as f64))
            .collect();
        support.sort_unstable_by_key(|a| a.0);
        Some(Self {
            support,
            tier,
            order,
        })
    }

    fn from_row(row: &Row, tier: Tier, order: usize) -> Self {
        let mut support: Vec<(Target, f64)> = row
            .iter()
            .map(|(state, p)| (state_target(state), p))
            .collect();
        support.sort_unstable_by_key(|a| a.0);
        Self {
            support,
            tier,
            order,
        }
    }

    pub fn support(&self) -> &[(Target, f64)] {
        &self.support
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn probability(&self, target: Target) -> f64 {
        self.support
            .binary_search_by(|probe| probe.0.cmp(&target))
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|s| s.1).sum()
    }

    /// The most probable target, lowest target on ties.
    pub fn argmax(&self) -> Target {
        let mut best = self.support[0];
        for &s in &self.support[1..] {
            if s.1 > best.1 {
                best = s;
            }
        }
        best.0
    }

    fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }
}

fn state_target(state: &StateId) -> Target {
    match state {
        StateId::Terminal => Target::Terminal,
        other => Target::Node(
            other
                .last_node()
                .expect("transition targets are prefixes or terminal"),
        ),
    }
}

/// Occurrence counts of nodes in a training corpus, plus the number of paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeFrequencies {
    counts: Vec<u64>,
    terminal: u64,
}

impl NodeFrequencies {
    pub fn from_paths(s: &PathMultiset) -> Self {
        let mut counts = vec![0u64; s.node_count()];
        for p in s.paths() {
            for n in &p.nodes {
                counts[n.index()] += p.frequency;
            }
        }
        Self {
            counts,
            terminal: s.total_observations(),
        }
    }

    pub(crate) fn from_parts(counts: Vec<u64>, terminal: u64) -> Self {
        Self { counts, terminal }
    }

    /// Size of the vocabulary the counts range over.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn node_count(&self, node: NodeId) -> u64 {
        self.counts.get(node.index()).copied().unwrap_or(0)
    }

    pub fn total_nodes(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn terminal(&self) -> u64 {
        self.terminal
    }

    /// Relative node frequencies without a termination outcome.
    pub fn nodes_only(&self, tier: Tier) -> Option<PredictionDistribution> {
        PredictionDistribution::from_weights(self.node_weights(), tier, 0)
    }

    /// Node frequencies with termination mass `m / (m + total node visits)`.
    pub fn with_terminal(&self) -> Option<PredictionDistribution> {
        PredictionDistribution::from_weights(
            self.node_weights()
                .chain([(Target::Terminal, self.terminal)]),
            Tier::NodeFrequency,
            0,
        )
    }

    pub fn terminal_probability(&self) -> f64 {
        let total = self.total_nodes() + self.terminal;
        if total == 0 {
            0.0
        } else {
            self.terminal as f64 / total as f64
        }
    }

    fn node_weights(&self) -> impl Iterator<Item = (Target, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (Target::Node(NodeId(i as u32)), c))
    }
}

/// Common interface of next-element predictors.
pub trait Predictor: Sync {
    fn name(&self) -> &str;

    /// Order reported alongside evaluation results.
    fn order(&self) -> usize;

    /// Number of nodes in the predictor's vocabulary.
    fn vocabulary_size(&self) -> usize;

    /// Longest prefix suffix the predictor can condition on.
    fn memory(&self) -> usize;

    /// Whether in-model rows can predict the end of a path.
    fn models_termination(&self) -> bool;

    /// The predictor's own distribution for `prefix`, or `None` when it has
    /// no row. `from_start` is true when `prefix` is the whole path so far
    /// rather than its most recent nodes.
    fn lookup(&self, prefix: &[NodeId], from_start: bool) -> Option<PredictionDistribution>;

    fn node_frequencies(&self) -> &NodeFrequencies;
}

fn check_prefix(p: &dyn Predictor, prefix: &[NodeId]) -> Result<()> {
    match prefix.iter().find(|n| n.index() >= p.vocabulary_size()) {
        Some(bad) => Err(Error::UnknownNode(format!("id {bad}"))),
        None => Ok(()),
    }
}

/// Distributions of the fallback chain for `prefix`, in the order they are consulted.
fn chain<'a>(
    p: &'a dyn Predictor,
    prefix: &'a [NodeId],
    from_start: bool,
    policy: FallbackPolicy,
) -> impl Iterator<Item = PredictionDistribution> + 'a {
    let start = prefix.len().saturating_sub(p.memory());
    let rows = (start..=prefix.len()).filter_map(move |drop| {
        let d = p.lookup(&prefix[drop..], from_start && drop == 0)?;
        Some(if drop == start {
            d.with_tier(Tier::InModel)
        } else if drop == prefix.len() {
            d.with_tier(Tier::Start)
        } else {
            d.with_tier(Tier::Suffix {
                dropped: drop - start,
            })
        })
    });
    let tiered = policy == FallbackPolicy::Tiered;
    rows.take(if tiered { usize::MAX } else { 1 })
        .filter(move |d| tiered || d.tier == Tier::InModel)
        .chain(
            tiered
                .then(|| p.node_frequencies().with_terminal())
                .flatten(),
        )
}

/// Predicts the element following `prefix`, taken as the whole path so far.
pub fn predict(
    p: &dyn Predictor,
    prefix: &[NodeId],
    policy: FallbackPolicy,
) -> Result<PredictionDistribution> {
    predict_in_context(p, prefix, true, policy)
}

/// Predicts the element following the most recent nodes `recent` of a path
/// whose beginning is unknown.
pub fn predict_recent(
    p: &dyn Predictor,
    recent: &[NodeId],
    policy: FallbackPolicy,
) -> Result<PredictionDistribution> {
    predict_in_context(p, recent, false, policy)
}

fn predict_in_context(
    p: &dyn Predictor,
    prefix: &[NodeId],
    from_start: bool,
    policy: FallbackPolicy,
) -> Result<PredictionDistribution> {
    check_prefix(p, prefix)?;
    chain(p, prefix, from_start, policy)
        .next()
        .ok_or_else(|| Error::NoPrediction(format!("{prefix:?}")))
}

/// Next-element distribution of a fitted multi-order model.
pub fn next_element_distribution(
    model: &MultiOrderModel,
    prefix: &[NodeId],
    policy: FallbackPolicy,
) -> Result<PredictionDistribution> {
    predict(model, prefix, policy)
}

/// Probability assigned to `target` after `prefix`, and the tier that
/// supplied it. Under [`FallbackPolicy::Tiered`], a tier that gives the
/// target zero mass passes the query on to the next tier. Predictors that
/// cannot express termination score terminal targets against the
/// node-frequency tier.
pub(crate) fn score_target(
    p: &dyn Predictor,
    prefix: &[NodeId],
    from_start: bool,
    target: Target,
    policy: FallbackPolicy,
) -> (f64, Tier) {
    if target == Target::Terminal && !p.models_termination() {
        return match policy {
            FallbackPolicy::Disabled => (0.0, Tier::InModel),
            FallbackPolicy::Tiered => (
                p.node_frequencies().terminal_probability(),
                Tier::NodeFrequency,
            ),
        };
    }
    let mut last_tier = Tier::InModel;
    for d in chain(p, prefix, from_start, policy) {
        let q = d.probability(target);
        last_tier = d.tier;
        if q > 0.0 {
            return (q, d.tier);
        }
    }
    (0.0, last_tier)
}

impl Predictor for MultiOrderModel {
    fn name(&self) -> &str {
        "mogen"
    }

    fn order(&self) -> usize {
        self.max_order()
    }

    fn vocabulary_size(&self) -> usize {
        self.vocabulary().len()
    }

    fn memory(&self) -> usize {
        self.max_order()
    }

    fn models_termination(&self) -> bool {
        true
    }

    /// A whole-path prefix of up to `K` nodes is a growing-memory state and
    /// is answered by its own row, as is any prefix of at least `K` nodes.
    /// Recent nodes shorter than `K` do not identify a state; they are
    /// answered by pooling the rows of every state ending in them.
    fn lookup(&self, prefix: &[NodeId], from_start: bool) -> Option<PredictionDistribution> {
        let suffix = &prefix[prefix.len().saturating_sub(self.max_order())..];
        if suffix.is_empty() {
            return self
                .row(&StateId::Initial)
                .map(|row| PredictionDistribution::from_row(row, Tier::InModel, 0));
        }
        if from_start || suffix.len() == self.max_order() {
            return self
                .row(&StateId::prefix(suffix))
                .map(|row| PredictionDistribution::from_row(row, Tier::InModel, suffix.len()));
        }
        let pooled = self.pooled_targets(suffix)?;
        PredictionDistribution::from_weights(pooled.iter().copied(), Tier::InModel, suffix.len())
    }

    fn node_frequencies(&self) -> &NodeFrequencies {
        self.node_frequencies()
    }
}
