//! Degrees of freedom, AIC and selection of the maximum order.
//!
//! The number of free parameters of a model with maximum order `K` is the
//! number of length-`k` walks in the binary adjacency matrix, summed over
//! `k = 1..=K`, plus `|V| - 1` for the start distribution. Walks of length
//! `k` are counted as the entry sum of the `k`-th matrix power, which equals
//! `1ᵀ Aᵏ 1` and is evaluated with repeated sparse matrix-vector products.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::MultiOrderModel;
use crate::parallel;
use crate::path_data::{NetworkTopology, NodeId, PathMultiset};

/// How entries of the adjacency powers are aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WalkCounting {
    /// Sum the integer walk counts of `Aᵏ`.
    #[default]
    Walks,
    /// Count the non-zero entries of `Aᵏ` (each reachable endpoint pair once).
    Reachable,
}

/// Entry sums of `A¹ … A^max_order`, index `k - 1` holding the sum for `Aᵏ`.
/// Overflowing `u64` is an error.
pub fn walk_counts(
    topo: &NetworkTopology,
    max_order: usize,
    counting: WalkCounting,
) -> Result<Vec<u64>> {
    match counting {
        WalkCounting::Walks => walk_sums(topo, max_order),
        WalkCounting::Reachable => Ok(reachable_pairs(topo, max_order)),
    }
}

fn walk_sums(topo: &NetworkTopology, max_order: usize) -> Result<Vec<u64>> {
    let n = topo.node_count();
    // ways[i] = number of walks of the current length starting at i
    let mut ways = vec![1u64; n];
    let mut sums = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        let mut next = vec![0u64; n];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = 0u64;
            for j in topo.successors(NodeId(i as u32)) {
                acc = acc
                    .checked_add(ways[j.index()])
                    .ok_or(Error::Overflow { order })?;
            }
            *slot = acc;
        }
        let total = next
            .iter()
            .try_fold(0u64, |a, &b| a.checked_add(b))
            .ok_or(Error::Overflow { order })?;
        sums.push(total);
        ways = next;
    }
    Ok(sums)
}

fn reachable_pairs(topo: &NetworkTopology, max_order: usize) -> Vec<u64> {
    let n = topo.node_count();
    let mut sums = vec![0u64; max_order];
    let mut frontier = vec![false; n];
    let mut next = vec![false; n];
    for source in 0..n {
        frontier.iter_mut().for_each(|x| *x = false);
        frontier[source] = true;
        for sum in sums.iter_mut() {
            next.iter_mut().for_each(|x| *x = false);
            for (i, _) in frontier.iter().enumerate().filter(|(_, &on)| on) {
                for j in topo.successors(NodeId(i as u32)) {
                    next[j.index()] = true;
                }
            }
            *sum += next.iter().filter(|&&x| x).count() as u64;
            std::mem::swap(&mut frontier, &mut next);
        }
    }
    sums
}

pub fn degrees_of_freedom(topo: &NetworkTopology, max_order: usize) -> Result<u64> {
    degrees_of_freedom_with(topo, max_order, WalkCounting::Walks)
}

pub fn degrees_of_freedom_with(
    topo: &NetworkTopology,
    max_order: usize,
    counting: WalkCounting,
) -> Result<u64> {
    if max_order == 0 {
        return Err(Error::InvalidArgument(
            "maximum order must be at least 1".into(),
        ));
    }
    let walks = walk_counts(topo, max_order, counting)?;
    walks
        .iter()
        .try_fold(topo.node_count().saturating_sub(1) as u64, |a, &b| {
            a.checked_add(b)
        })
        .ok_or(Error::Overflow { order: max_order })
}

/// `2d - 2 ln L` of `model` on `s`.
pub fn aic(model: &MultiOrderModel, s: &PathMultiset, topo: &NetworkTopology) -> Result<f64> {
    let d = degrees_of_freedom(topo, model.max_order())?;
    let ll = model.dataset_log_likelihood(s)?;
    Ok(2.0 * d as f64 - 2.0 * ll)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRecord {
    pub max_order: usize,
    pub degrees_of_freedom: u64,
    pub log_likelihood: f64,
    pub aic: f64,
    /// AIC with the order-independent constants dropped and halved:
    /// `Σ walks - ln L`.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelectionReport {
    pub records: Vec<OrderRecord>,
    pub selected: usize,
}

impl OrderSelectionReport {
    pub fn selected_record(&self) -> &OrderRecord {
        self.records
            .iter()
            .find(|r| r.max_order == self.selected)
            .expect("selected order is among the records")
    }

    /// Order minimizing the full AIC, smaller order on ties.
    pub fn selected_by_aic(&self) -> usize {
        argmin(self.records.iter().map(|r| (r.max_order, r.aic)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,dof,log_likelihood_nats,aic,objective,selected\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.max_order,
                r.degrees_of_freedom,
                r.log_likelihood,
                r.aic,
                r.objective,
                u8::from(r.max_order == self.selected)
            );
        }
        out
    }
}

fn argmin(values: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((k, v)),
        }
    }
    best.map(|b| b.0).unwrap_or(1)
}

/// `min(l_max, 6)`, at least 1.
pub fn default_max_order(s: &PathMultiset) -> usize {
    s.max_length().clamp(1, 6)
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionConfig {
    pub max_order: usize,
    pub counting: WalkCounting,
    pub workers: Option<usize>,
}

impl SelectionConfig {
    pub fn new(max_order: usize) -> Self {
        Self {
            max_order,
            counting: WalkCounting::Walks,
            workers: None,
        }
    }
}

/// Fits and scores every order `1..=max_order` on `s` and picks the one
/// minimizing the objective, preferring smaller orders on ties.
pub fn select_order(
    s: &PathMultiset,
    topo: &NetworkTopology,
    max_order: usize,
) -> Result<OrderSelectionReport> {
    select_order_with(s, topo, &SelectionConfig::new(max_order))
}

pub fn select_order_with(
    s: &PathMultiset,
    topo: &NetworkTopology,
    config: &SelectionConfig,
) -> Result<OrderSelectionReport> {
    match config.workers {
        Some(w) => parallel::with_workers(w, || run_selection(s, topo, config))?,
        None => run_selection(s, topo, config),
    }
}

fn run_selection(
    s: &PathMultiset,
    topo: &NetworkTopology,
    config: &SelectionConfig,
) -> Result<OrderSelectionReport> {
    if config.max_order == 0 {
        return Err(Error::InvalidArgument(
            "maximum order must be at least 1".into(),
        ));
    }
    let walks = walk_counts(topo, config.max_order, config.counting)?;
    let constant = topo.node_count().saturating_sub(1) as u64;
    let mut records = Vec::with_capacity(config.max_order);
    let mut walk_total = 0u64;
    for k in 1..=config.max_order {
        walk_total = walk_total
            .checked_add(walks[k - 1])
            .ok_or(Error::Overflow { order: k })?;
        let dof = walk_total
            .checked_add(constant)
            .ok_or(Error::Overflow { order: k })?;
        let model = MultiOrderModel::fit(s, k)?;
        let ll = model.dataset_log_likelihood(s)?;
        records.push(OrderRecord {
            max_order: k,
            degrees_of_freedom: dof,
            log_likelihood: ll,
            aic: 2.0 * dof as f64 - 2.0 * ll,
            objective: walk_total as f64 - ll,
        });
    }
    let selected = argmin(records.iter().map(|r| (r.max_order, r.objective)));
    Ok(OrderSelectionReport { records, selected })
}
