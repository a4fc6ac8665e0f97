//! Weighted path norm: sum over source-to-sink paths of `3^p` times the
//! product of absolute edge weights, where `p` counts nonlinear connections
//! on the path.
//!
//! Two independent algorithms are provided. The Neumann form
//! `1_out^T sum_s A^s(|theta|, 3) 1_in` truncates at the nilpotency index
//! and is the production path; explicit path enumeration is exponential and
//! serves as its oracle on small graphs.

use thiserror::Error;

use crate::adjacency::{check_theta, nilpotency_index, symbol, EvalError};
use crate::dag::{EdgeKind, NodeId, NonlinearDag, ParamVector};

/// Weight applied per nonlinearity on a path. Baked in; every bound in this
/// crate assumes it.
pub(crate) const NONLINEARITY_WEIGHT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathNormMethod {
    Enumeration,
    Neumann,
}

#[derive(Debug, Clone)]
pub struct PathNormReport {
    pub value: f64,
    pub method: PathNormMethod,
    /// Number of complete source-to-sink paths visited (enumeration only).
    pub paths_counted: Option<u64>,
    /// Number of nonzero powers summed before truncation (Neumann only).
    pub terms: Option<usize>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PathNormError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("path count exceeds budget of {budget}; use the Neumann method")]
    BudgetExceeded { budget: u64 },
}

/// Default enumeration budget; beyond it the Neumann method is the answer.
pub const DEFAULT_MAX_PATHS: u64 = 1_000_000;

/// `1_out^T sum_{s>=0} A^s(|theta|, 3) 1_in` by repeated sparse application
/// of the absolute symbol to the source indicator.
pub fn path_norm_neumann(
    dag: &NonlinearDag,
    theta: &ParamVector,
) -> Result<PathNormReport, PathNormError> {
    let sym = symbol(dag, theta, NONLINEARITY_WEIGHT, true)?;
    let n = dag.node_count();
    let sink = n - 1;
    let mut v = vec![0.0; n];
    for slot in v.iter_mut().take(dag.input_dim()) {
        *slot = 1.0;
    }
    let mut total = 0.0;
    let mut terms = 0;
    for _ in 0..nilpotency_index(dag) {
        if v.iter().all(|&x| x == 0.0) {
            break;
        }
        terms += 1;
        total += v[sink];
        v = sym.apply(&v);
    }
    Ok(PathNormReport {
        value: total,
        method: PathNormMethod::Neumann,
        paths_counted: None,
        terms: Some(terms),
    })
}

/// Depth-first enumeration of every source-to-sink path. Each path
/// contributes `3^p * prod |w|` where nonlinear edges contribute a factor of
/// one to the product but increment `p`. Errors out past `max_paths`.
pub fn path_norm_enumerate(
    dag: &NonlinearDag,
    theta: &ParamVector,
    max_paths: u64,
) -> Result<PathNormReport, PathNormError> {
    check_theta(dag, theta)?;
    let sink = dag.sink();
    let mut total = 0.0;
    let mut paths: u64 = 0;

    // Iterative DFS: stack of (node, incoming partial product).
    let mut stack: Vec<(NodeId, f64)> = (1..=dag.input_dim())
        .rev()
        .map(|i| (NodeId::new(i), 1.0))
        .collect();
    while let Some((node, acc)) = stack.pop() {
        if node == sink {
            paths += 1;
            if paths > max_paths {
                return Err(PathNormError::BudgetExceeded { budget: max_paths });
            }
            total += acc;
            continue;
        }
        for (idx, e) in dag.outgoing_indexed(node) {
            let factor = match e.kind {
                EdgeKind::Param | EdgeKind::Fixed => {
                    dag.effective_weight(idx, theta).unwrap().abs()
                }
                EdgeKind::Nonlinear => NONLINEARITY_WEIGHT,
            };
            stack.push((e.dst, acc * factor));
        }
    }
    Ok(PathNormReport {
        value: total,
        method: PathNormMethod::Enumeration,
        paths_counted: Some(paths),
        terms: None,
    })
}

/// Edge counts by kind; equivalently the entrywise L11 norms of the
/// indicator symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCounts {
    pub n_para: usize,
    pub n_fix: usize,
    pub n_non: usize,
}

impl EdgeCounts {
    pub fn total(&self) -> usize {
        self.n_para + self.n_fix + self.n_non
    }
}

pub fn edge_counts(dag: &NonlinearDag) -> EdgeCounts {
    let mut c = EdgeCounts {
        n_para: 0,
        n_fix: 0,
        n_non: 0,
    };
    for e in dag.edges() {
        match e.kind {
            EdgeKind::Param => c.n_para += 1,
            EdgeKind::Fixed => c.n_fix += 1,
            EdgeKind::Nonlinear => c.n_non += 1,
        }
    }
    c
}
