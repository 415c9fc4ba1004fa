use rayon::prelude::*;

use super::{score_target, FallbackPolicy, Predictor, Target, Tier};
use crate::error::{Error, Result};
use crate::parallel;
use crate::path_data::{Path, PathMultiset};

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Longest prefix used for any query.
    pub max_prefix: usize,
    pub policy: FallbackPolicy,
    /// Dedicated pool size; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_prefix: 6,
            policy: FallbackPolicy::Tiered,
            workers: None,
        }
    }
}

/// One scored query: a target position of one observation, seen through one
/// prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    /// 1-based position of the target; `len + 1` is the termination.
    pub target_position: usize,
    pub target: Target,
    pub prefix_length: usize,
    /// Weight within the target; the weights of one target sum to 1.
    pub weight: f64,
    /// `-log2 q(target)`, infinite when the target had zero probability.
    pub loss_bits: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: String,
    pub order: usize,
    /// Weighted mean loss per target in bits.
    pub loss_bits: f64,
    /// Scored targets, counting each observation of a path.
    pub n_targets: u64,
    /// Queries answered by a fallback tier.
    pub n_fallbacks: u64,
    /// Queries whose target received zero probability.
    pub n_infinite: u64,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "method,K,loss_bits,n_targets,n_fallbacks,n_infinite";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.order,
            self.loss_bits,
            self.n_targets,
            self.n_fallbacks,
            self.n_infinite
        )
    }
}

/// Scores every target of a single path. Position `i` (1-based) is queried
/// with the prefixes of length `1..=min(max_prefix, i - 1)` that end right
/// before it; the first position is queried with the empty prefix.
pub fn observation_records(
    p: &dyn Predictor,
    path: &Path,
    max_prefix: usize,
    policy: FallbackPolicy,
) -> Result<Vec<EvaluationRecord>> {
    if let Some(bad) = path.nodes.iter().find(|n| n.index() >= p.vocabulary_size()) {
        return Err(Error::UnknownNode(format!("id {bad}")));
    }
    let l = path.nodes.len();
    let mut out = Vec::new();
    for position in 1..=l + 1 {
        let target = if position <= l {
            Target::Node(path.nodes[position - 1])
        } else {
            Target::Terminal
        };
        let history = &path.nodes[..position - 1];
        let lengths: Vec<usize> = if history.is_empty() {
            vec![0]
        } else {
            (1..=max_prefix.min(history.len())).collect()
        };
        let weight = 1.0 / lengths.len() as f64;
        for len in lengths {
            let prefix = &history[history.len() - len..];
            let (q, tier) = score_target(p, prefix, len == history.len(), target, policy);
            out.push(EvaluationRecord {
                target_position: position,
                target,
                prefix_length: len,
                weight,
                loss_bits: -q.log2(),
                tier,
            });
        }
    }
    Ok(out)
}

struct Partial {
    loss: f64,
    targets: u64,
    fallbacks: u64,
    infinite: u64,
}

fn evaluate_path(p: &dyn Predictor, path: &Path, config: &EvalConfig) -> Result<Partial> {
    let records = observation_records(p, path, config.max_prefix, config.policy)?;
    let f = path.frequency;
    let mut loss = 0.0;
    let mut fallbacks = 0;
    let mut infinite = 0;
    for r in &records {
        if r.loss_bits.is_infinite() {
            infinite += 1;
        }
        loss += r.weight * r.loss_bits;
        if r.tier.is_fallback() {
            fallbacks += 1;
        }
    }
    Ok(Partial {
        loss: loss * f as f64,
        targets: (path.nodes.len() as u64 + 1) * f,
        fallbacks: fallbacks * f,
        infinite: infinite * f,
    })
}

/// Multi-prefix cross-entropy of `p` on `validation`, in bits per target.
///
/// Each observation is evaluated independently; the per-observation sums are
/// combined in corpus order so the result does not depend on the pool size.
pub fn cross_entropy_eval(
    p: &dyn Predictor,
    validation: &PathMultiset,
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    if config.max_prefix == 0 {
        return Err(Error::InvalidArgument(
            "max prefix must be at least 1".into(),
        ));
    }
    let run = || -> Result<Vec<Partial>> {
        validation
            .paths()
            .par_iter()
            .map(|path| evaluate_path(p, path, config))
            .collect()
    };
    let partials = match config.workers {
        Some(w) => parallel::with_workers(w, run)??,
        None => run()?,
    };
    let mut loss = 0.0;
    let mut targets = 0;
    let mut fallbacks = 0;
    let mut infinite = 0;
    for part in partials {
        loss += part.loss;
        targets += part.targets;
        fallbacks += part.fallbacks;
        infinite += part.infinite;
    }
    Ok(EvaluationReport {
        method: p.name().to_owned(),
        order: p.order(),
        loss_bits: if infinite > 0 {
            f64::INFINITY
        } else {
            loss / targets as f64
        },
        n_targets: targets,
        n_fallbacks: fallbacks,
        n_infinite: infinite,
    })
}
