//! Out-of-sample prediction of the most frequent paths.
//!
//! A set of paths is generated from the model and its distinct paths are
//! ranked by how often they were generated. Growing the predicted set one
//! ranked path at a time traces a ROC curve against the ground truth: the
//! most frequent fraction of distinct validation paths.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampling::sample_path;
use crate::error::{Error, Result};
use crate::model::MultiOrderModel;
use crate::path_data::{NodeId, PathMultiset};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x},{y}");
        }
        let _ = writeln!(out, "auc,{}", self.auc);
        out
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// ROC curve of a ranking. `ranked` holds the labels (positive or not) of the
/// ranked items, best first. Items of the universe missing from the ranking
/// share the lowest score and form a single final step.
pub fn roc_from_ranking(ranked: &[bool], positives: usize, negatives: usize) -> Result<RocCurve> {
    let ranked_pos = ranked.iter().filter(|&&b| b).count();
    if positives == 0 {
        return Err(Error::InvalidArgument(
            "ROC needs at least one positive".into(),
        ));
    }
    if ranked_pos > positives || ranked.len() - ranked_pos > negatives {
        return Err(Error::InvalidArgument(
            "ranking is larger than the universe".into(),
        ));
    }
    let rate = |hit: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    };
    let mut points = Vec::with_capacity(ranked.len() + 2);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0, 0);
    for &is_pos in ranked {
        if is_pos {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((rate(fp, negatives), rate(tp, positives)));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    let auc = trapezoid(&points);
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy)]
pub struct RocConfig {
    /// Number of generated paths.
    pub n_samples: usize,
    /// Fraction of distinct validation paths that count as frequent.
    pub top_fraction: f64,
    pub seed: u64,
    /// Length guard for generated paths; truncated samples are discarded.
    pub max_len: usize,
}

impl RocConfig {
    /// Ten generated paths per validation observation.
    pub fn for_validation(validation: &PathMultiset, seed: u64) -> Self {
        Self {
            n_samples: (validation.total_observations() as usize)
                .saturating_mul(10)
                .max(1),
            top_fraction: 0.10,
            seed,
            max_len: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopPathRoc {
    pub curve: RocCurve,
    pub positives: usize,
    pub negatives: usize,
    pub distinct_generated: usize,
    pub truncated_samples: usize,
}

fn rank_by_frequency(counts: HashMap<Vec<NodeId>, u64>) -> Vec<(Vec<NodeId>, u64)> {
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Predicts the most frequent validation paths from paths generated by `model`.
pub fn top_path_roc(
    model: &MultiOrderModel,
    validation: &PathMultiset,
    config: &RocConfig,
) -> Result<TopPathRoc> {
    if config.n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    if !(config.top_fraction > 0.0 && config.top_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top fraction {} outside (0, 1]",
            config.top_fraction
        )));
    }

    let mut truth: HashMap<Vec<NodeId>, u64> = HashMap::new();
    for p in validation.paths() {
        *truth.entry(p.nodes.clone()).or_insert(0) += p.frequency;
    }
    let truth = rank_by_frequency(truth);
    let n_pos = ((truth.len() as f64 * config.top_fraction).ceil() as usize).clamp(1, truth.len());
    let positives: HashSet<&[NodeId]> = truth[..n_pos].iter().map(|(p, _)| p.as_slice()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut generated: HashMap<Vec<NodeId>, u64> = HashMap::new();
    let mut truncated = 0;
    for _ in 0..config.n_samples {
        let s = sample_path(model, &mut rng, config.max_len)?;
        if s.truncated {
            truncated += 1;
        } else {
            *generated.entry(s.path.nodes).or_insert(0) += 1;
        }
    }
    let generated = rank_by_frequency(generated);

    let universe: HashSet<&[NodeId]> = truth
        .iter()
        .chain(generated.iter())
        .map(|(p, _)| p.as_slice())
        .collect();
    let labels: Vec<bool> = generated
        .iter()
        .map(|(p, _)| positives.contains(p.as_slice()))
        .collect();
    let negatives = universe.len() - n_pos;
    let curve = roc_from_ranking(&labels, n_pos, negatives)?;
    Ok(TopPathRoc {
        curve,
        positives: n_pos,
        negatives,
        distinct_generated: generated.len(),
        truncated_samples: truncated,
    })
}
