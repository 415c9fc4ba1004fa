use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MultiOrderModel, StateId};
use crate::path_data::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledPath {
    pub path: Path,
    /// The walk hit the length guard before reaching the terminal state.
    pub truncated: bool,
}

/// Walks the model from the initial state until the terminal state is drawn.
/// At most `max_len` nodes are emitted; a walk that would continue beyond
/// that is cut and flagged as truncated.
pub fn sample_path<R: Rng + ?Sized>(
    model: &MultiOrderModel,
    rng: &mut R,
    max_len: usize,
) -> Result<SampledPath> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    let mut state = StateId::Initial;
    let mut nodes = Vec::new();
    loop {
        let row = model
            .row(&state)
            .ok_or_else(|| Error::Model(format!("state {state} has no outgoing transitions")))?;
        let next = row.pick(rng.random_range(0..row.total()));
        match next {
            StateId::Terminal => {
                return Ok(SampledPath {
                    path: Path::new(nodes, 1),
                    truncated: false,
                })
            }
            _ if nodes.len() == max_len => {
                return Ok(SampledPath {
                    path: Path::new(nodes, 1),
                    truncated: true,
                })
            }
            s => {
                nodes.push(s.last_node().expect("prefix state"));
                state = s.clone();
            }
        }
    }
}

/// Draws `n` paths from a single random stream.
pub fn sample_paths<R: Rng + ?Sized>(
    model: &MultiOrderModel,
    rng: &mut R,
    n: usize,
    max_len: usize,
) -> Result<Vec<SampledPath>> {
    (0..n).map(|_| sample_path(model, rng, max_len)).collect()
}
