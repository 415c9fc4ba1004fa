//! Multi-order generative models for paths in networks.
//!
//! The crate learns a single generative model that stacks Markov chains of
//! orders `1..=K` together with explicit start and end transitions, picks the
//! maximum order `K` with an information criterion, and uses the fitted model
//! for next-element prediction, full-path generation and likelihood scoring.
//!
//! ```
//! use mogen::path_data::{derive_topology, parse_ngram_str};
//! use mogen::model::MultiOrderModel;
//! use mogen::selection::select_order;
//!
//! let paths = parse_ngram_str("A,C,D,E,20\nB,C,D,F,20\nA,C,10", ",", true).unwrap();
//! let topo = derive_topology(&paths);
//! let report = select_order(&paths, &topo, 3).unwrap();
//! assert_eq!(report.selected, 3);
//! let model = MultiOrderModel::fit(&paths, report.selected).unwrap();
//! assert!(model.dataset_log_likelihood(&paths).unwrap() <= 0.0);
//! ```

pub mod baselines;
pub mod error;
pub mod model;
pub mod parallel;
pub mod path_data;
pub mod prediction;
pub mod selection;

pub use error::{Error, Result, UnseenKind};
pub use model::{expand_path, fit_counts, normalize, MultiOrderCounts, MultiOrderModel, StateId};
pub use path_data::{NetworkTopology, NodeId, Path, PathMultiset, Vocabulary};
