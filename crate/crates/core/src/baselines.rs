//! Baseline next-element predictors: node frequencies (RND), a single
//! higher-order network (NET) and all-k-order Markov tables (AKOM).
//!
//! None of them has a termination event. Terminal targets are scored
//! against the residual mass of the node-frequency tier.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::path_data::{NodeId, PathMultiset};
use crate::prediction::{NodeFrequencies, PredictionDistribution, Predictor, Target, Tier};

type Table = HashMap<Vec<NodeId>, HashMap<NodeId, u64>>;

fn distribution(row: &HashMap<NodeId, u64>, order: usize) -> Option<PredictionDistribution> {
    PredictionDistribution::from_weights(
        row.iter().map(|(&n, &c)| (Target::Node(n), c)),
        Tier::InModel,
        order,
    )
}

/// Counts `window -> next node` for every window of length `k` followed by a node.
fn window_table(s: &PathMultiset, k: usize) -> Table {
    let mut table = Table::new();
    for p in s.paths() {
        for w in p.nodes.windows(k + 1) {
            *table
                .entry(w[..k].to_vec())
                .or_default()
                .entry(w[k])
                .or_insert(0) += p.frequency;
        }
    }
    table
}

fn check_order(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    Ok(())
}

/// Relative frequency of nodes in the training data, regardless of prefix.
#[derive(Debug, Clone)]
pub struct FrequencyBaseline {
    freqs: NodeFrequencies,
}

pub fn fit_rnd(train: &PathMultiset) -> FrequencyBaseline {
    FrequencyBaseline {
        freqs: NodeFrequencies::from_paths(train),
    }
}

impl FrequencyBaseline {
    pub fn probability(&self, node: NodeId) -> f64 {
        self.freqs.node_count(node) as f64 / self.freqs.total_nodes() as f64
    }
}

impl Predictor for FrequencyBaseline {
    fn name(&self) -> &str {
        "rnd"
    }
    fn order(&self) -> usize {
        0
    }
    fn vocabulary_size(&self) -> usize {
        self.freqs.len()
    }
    fn memory(&self) -> usize {
        0
    }
    fn models_termination(&self) -> bool {
        false
    }
    fn lookup(&self, _prefix: &[NodeId], _from_start: bool) -> Option<PredictionDistribution> {
        self.freqs.nodes_only(Tier::InModel)
    }
    fn node_frequencies(&self) -> &NodeFrequencies {
        &self.freqs
    }
}

/// Memoryless random walk in a `k`-th order network whose nodes are the
/// length-`k` windows seen in the training paths.
#[derive(Debug, Clone)]
pub struct HigherOrderNetwork {
    order: usize,
    table: Table,
    freqs: NodeFrequencies,
}

pub fn fit_net(train: &PathMultiset, k: usize) -> Result<HigherOrderNetwork> {
    check_order(k)?;
    Ok(HigherOrderNetwork {
        order: k,
        table: window_table(train, k),
        freqs: NodeFrequencies::from_paths(train),
    })
}

impl HigherOrderNetwork {
    /// Transition counts between higher-order nodes, sorted.
    pub fn transitions(&self) -> Vec<(Vec<NodeId>, Vec<NodeId>, u64)> {
        let mut out: Vec<_> = self
            .table
            .iter()
            .flat_map(|(from, row)| {
                row.iter().map(move |(&next, &c)| {
                    let mut to = from[1..].to_vec();
                    to.push(next);
                    (from.clone(), to, c)
                })
            })
            .collect();
        out.sort();
        out
    }
}

impl Predictor for HigherOrderNetwork {
    fn name(&self) -> &str {
        "net"
    }
    fn order(&self) -> usize {
        self.order
    }
    fn vocabulary_size(&self) -> usize {
        self.freqs.len()
    }
    fn memory(&self) -> usize {
        self.order
    }
    fn models_termination(&self) -> bool {
        false
    }
    fn lookup(&self, prefix: &[NodeId], _from_start: bool) -> Option<PredictionDistribution> {
        if prefix.len() != self.order {
            return None;
        }
        distribution(self.table.get(prefix)?, self.order)
    }
    fn node_frequencies(&self) -> &NodeFrequencies {
        &self.freqs
    }
}

/// Markov tables of every order `1..=k`, answered by the longest matching suffix.
#[derive(Debug, Clone)]
pub struct AkomModel {
    order: usize,
    /// `tables[j - 1]` is keyed by suffixes of length `j`.
    tables: Vec<Table>,
    freqs: NodeFrequencies,
}

pub fn fit_akom(train: &PathMultiset, k: usize) -> Result<AkomModel> {
    check_order(k)?;
    Ok(AkomModel {
        order: k,
        tables: (1..=k).map(|j| window_table(train, j)).collect(),
        freqs: NodeFrequencies::from_paths(train),
    })
}

impl Predictor for AkomModel {
    fn name(&self) -> &str {
        "akom"
    }
    fn order(&self) -> usize {
        self.order
    }
    fn vocabulary_size(&self) -> usize {
        self.freqs.len()
    }
    fn memory(&self) -> usize {
        self.order
    }
    fn models_termination(&self) -> bool {
        false
    }
    fn lookup(&self, prefix: &[NodeId], _from_start: bool) -> Option<PredictionDistribution> {
        let suffix = &prefix[prefix.len().saturating_sub(self.order)..];
        for start in 0..suffix.len() {
            let s = &suffix[start..];
            if let Some(row) = self.tables[s.len() - 1].get(s) {
                return distribution(row, s.len());
            }
        }
        self.freqs.nodes_only(Tier::InModel)
    }
    fn node_frequencies(&self) -> &NodeFrequencies {
        &self.freqs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_data::parse_ngram_str;
    use crate::prediction::{predict, FallbackPolicy};

    fn ids(s: &PathMultiset, labels: &[&str]) -> Vec<NodeId> {
        s.vocabulary().resolve(labels).unwrap()
    }

    fn node(s: &PathMultiset, l: &str) -> Target {
        Target::Node(s.vocabulary().id(l).unwrap())
    }

    #[test]
    fn rnd_counts_nodes() {
        let s = parse_ngram_str("A,B\nA,C", ",", false).unwrap();
        let r = fit_rnd(&s);
        let d = predict(&r, &ids(&s, &["B"]), FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.probability(node(&s, "A")), 0.5);
        assert_eq!(d.probability(node(&s, "B")), 0.25);
        assert_eq!(d.probability(node(&s, "C")), 0.25);
        assert_eq!(d.probability(Target::Terminal), 0.0);
        let s = parse_ngram_str("A,7", ",", true).unwrap();
        assert_eq!(fit_rnd(&s).probability(NodeId(0)), 1.0);
    }

    #[test]
    fn net_windows() {
        let s = parse_ngram_str("A,C,D", ",", false).unwrap();
        let n = fit_net(&s, 1).unwrap();
        assert_eq!(
            n.transitions(),
            vec![
                (ids(&s, &["A"]), ids(&s, &["C"]), 1),
                (ids(&s, &["C"]), ids(&s, &["D"]), 1)
            ]
        );
        let s = parse_ngram_str("A,C,D,E", ",", false).unwrap();
        let n = fit_net(&s, 2).unwrap();
        assert_eq!(
            n.transitions(),
            vec![
                (ids(&s, &["A", "C"]), ids(&s, &["C", "D"]), 1),
                (ids(&s, &["C", "D"]), ids(&s, &["D", "E"]), 1)
            ]
        );
        assert!(fit_net(&s, 0).is_err());
    }

    #[test]
    fn net_prediction_and_fallback() {
        let s = parse_ngram_str("A,C\nA,D", ",", false).unwrap();
        let n = fit_net(&s, 1).unwrap();
        let d = predict(&n, &ids(&s, &["A"]), FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.probability(node(&s, "C")), 0.5);
        assert_eq!(d.probability(node(&s, "D")), 0.5);
        assert_eq!(d.probability(Target::Terminal), 0.0);
        let d = predict(&n, &ids(&s, &["C"]), FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.tier(), Tier::NodeFrequency);
        assert!(d.probability(Target::Terminal) > 0.0);
        assert!(predict(&n, &[NodeId(9)], FallbackPolicy::Tiered).is_err());
    }

    #[test]
    fn akom_longest_suffix() {
        let s = parse_ngram_str("A,B,C,2\nX,B,D,1", ",", true).unwrap();
        let a = fit_akom(&s, 2).unwrap();
        let d = predict(&a, &ids(&s, &["A", "B"]), FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.support(), &[(node(&s, "C"), 1.0)]);
        assert_eq!(d.order(), 2);
        // Q is a node whose window with B was never observed.
        let s = parse_ngram_str("A,B,C,2\nX,B,D,1\nQ,1", ",", true).unwrap();
        let a = fit_akom(&s, 2).unwrap();
        let d = predict(&a, &ids(&s, &["Q", "B"]), FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.order(), 1);
        assert!((d.probability(node(&s, "C")) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.probability(node(&s, "D")) - 1.0 / 3.0).abs() < 1e-15);
        let d = predict(&a, &[], FallbackPolicy::Tiered).unwrap();
        assert_eq!(d.probability(node(&s, "B")), 3.0 / 10.0);
    }

    #[test]
    fn akom_order_one_matches_net_order_one() {
        let s = parse_ngram_str("A,B,C,2\nX,B,D,1\nB,A,B,4", ",", true).unwrap();
        let a = fit_akom(&s, 1).unwrap();
        let n = fit_net(&s, 1).unwrap();
        for l in ["A", "B", "X"] {
            let q = ids(&s, &[l]);
            assert_eq!(
                predict(&a, &q, FallbackPolicy::Tiered).unwrap().support(),
                predict(&n, &q, FallbackPolicy::Tiered).unwrap().support()
            );
        }
    }
}
