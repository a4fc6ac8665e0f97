//! Feedforward neural networks as nonlinear weighted DAGs.
//!
//! The crate represents a network as a strictly lower-triangular adjacency
//! operator over nodes `1..=N` with trainable, fixed, and nonlinear (ReLU)
//! edges, and builds everything else on top of that single data model:
//!
//! - [`dag`]: the graph data model, validation, canonical parameter order;
//! - [`adjacency`]: numeric symbols, nilpotency, the forward pass as an
//!   exact fixed-point iteration;
//! - [`pathnorm`]: the weighted path norm by Neumann summation and by path
//!   enumeration, plus edge counts;
//! - [`builders`]: two-layer / fully-connected / ResNet / DenseNet
//!   constructors, shortcut-form recognition, padding, sink decomposition;
//! - [`approx`]: finite-atom Barron targets, the Monte Carlo two-layer
//!   construction, and the block embedding;
//! - [`learn`]: truncated loss, risks, reverse-mode gradients, path-norm
//!   regularized training, Rademacher estimation, and bound calculators;
//! - [`experiments`]: seeded experiment runners with CSV ledgers;
//! - [`io`]: the plain-text DAG interchange format.
//!
//! Data-parallel inner loops (batched forwards, Monte Carlo risks,
//! Rademacher trials) run on rayon by default; building with
//! `--no-default-features` swaps in a sequential backend that produces
//! bit-identical results.

pub mod adjacency;
pub mod approx;
pub mod builders;
pub mod dag;
pub mod experiments;
pub mod io;
pub mod learn;
pub mod par;
pub mod pathnorm;

pub use adjacency::{
    apply_operator, forward_batch, forward_fixed_point, matrix_power_is_zero, nilpotency_index,
    symbol, EvalError, ForwardRun, IOVectors, StateVector, SymbolMatrix,
};
pub use dag::{Edge, EdgeKind, InvalidDag, NodeId, NonlinearDag, ParamVector, Violation};
pub use pathnorm::{
    edge_counts, path_norm_enumerate, path_norm_neumann, EdgeCounts, PathNormError,
    PathNormMethod, PathNormReport,
};
