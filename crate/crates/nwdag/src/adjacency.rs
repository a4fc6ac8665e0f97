//! The adjacency matrix as a nonlinear operator: symbols, nilpotency, and
//! the forward pass as a fixed-point iteration.
//!
//! The operator acts on length-N state vectors. Row `i` of the operator sums
//! trainable and fixed weights times upstream values plus ReLU of upstream
//! values over nonlinear connections. Replacing the ReLU by multiplication
//! with a scalar `xi` yields the numeric symbol matrix, which is strictly
//! lower triangular and therefore nilpotent.

use thiserror::Error;

use crate::dag::{EdgeKind, NodeId, NonlinearDag, ParamVector};
use crate::par;

pub(crate) fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("input has length {got}, expected input dimension {want}")]
    InputDim { got: usize, want: usize },
    #[error("param vector has length {got}, expected {want} slots")]
    ParamLen { got: usize, want: usize },
    #[error("state vector has length {got}, expected {want} nodes")]
    StateLen { got: usize, want: usize },
    #[error("non-finite input coordinate {index}")]
    NonFiniteInput { index: usize },
    #[error("non-finite value at node {node} during evaluation")]
    NonFinite { node: usize },
}

pub(crate) fn check_theta(dag: &NonlinearDag, theta: &ParamVector) -> Result<(), EvalError> {
    if theta.len() != dag.param_count() {
        return Err(EvalError::ParamLen {
            got: theta.len(),
            want: dag.param_count(),
        });
    }
    Ok(())
}

/// Length-N vector of node values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    z: Vec<f64>,
}

impl StateVector {
    pub fn new(z: Vec<f64>) -> Self {
        StateVector { z }
    }

    pub fn zeros(n: usize) -> Self {
        StateVector { z: vec![0.0; n] }
    }

    /// The start vector `z_0 = (x, 0, ..., 0)`.
    pub fn from_input(dag: &NonlinearDag, x: &[f64]) -> Result<Self, EvalError> {
        if x.len() != dag.input_dim() {
            return Err(EvalError::InputDim {
                got: x.len(),
                want: dag.input_dim(),
            });
        }
        for (i, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(EvalError::NonFiniteInput { index: i });
            }
        }
        let mut z = vec![0.0; dag.node_count()];
        z[..x.len()].copy_from_slice(x);
        Ok(StateVector { z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn node(&self, id: NodeId) -> f64 {
        self.z[id.zero_based()]
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(z: Vec<f64>) -> Self {
        StateVector::new(z)
    }
}

/// Indicator vectors of the sources and the sink, and the input projection.
#[derive(Debug, Clone)]
pub struct IOVectors {
    pub one_in: Vec<f64>,
    pub one_out: Vec<f64>,
    /// Diagonal of the projection onto the input coordinates.
    pub p0: Vec<f64>,
}

impl IOVectors {
    pub fn for_dag(dag: &NonlinearDag) -> Self {
        let n = dag.node_count();
        let d = dag.input_dim();
        let mut one_in = vec![0.0; n];
        for v in one_in.iter_mut().take(d) {
            *v = 1.0;
        }
        let mut one_out = vec![0.0; n];
        if n > 0 {
            one_out[n - 1] = 1.0;
        }
        let p0 = one_in.clone();
        IOVectors { one_in, one_out, p0 }
    }

    /// Applies the input projection: zeroes every non-source coordinate.
    pub fn apply_p0(&self, z: &StateVector) -> StateVector {
        StateVector::new(
            z.as_slice()
                .iter()
                .zip(self.p0.iter())
                .map(|(v, m)| v * m)
                .collect(),
        )
    }
}

/// Sparse strictly lower-triangular numeric matrix, stored by destination
/// row with 0-based (row, col) positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymbolMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.rows[row]
            .iter()
            .find(|(c, _)| *c == col)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    /// Nonzero count, counting stored exact zeros as absent.
    pub fn nonzeros(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|(_, v)| *v != 0.0).count())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzeros() == 0
    }

    /// Matrix-vector product `self * x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Sparse product `self * rhs`, dropping exact zeros.
    pub fn matmul(&self, rhs: &SymbolMatrix) -> SymbolMatrix {
        assert_eq!(self.n, rhs.n);
        let mut scratch = vec![0.0; self.n];
        let mut touched: Vec<usize> = Vec::new();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                for &(k, a) in row {
                    if a == 0.0 {
                        continue;
                    }
                    for &(j, b) in &rhs.rows[k] {
                        if scratch[j] == 0.0 && !touched.contains(&j) {
                            touched.push(j);
                        }
                        scratch[j] += a * b;
                    }
                }
                touched.sort_unstable();
                let mut out = Vec::with_capacity(touched.len());
                for &j in &touched {
                    if scratch[j] != 0.0 {
                        out.push((j, scratch[j]));
                    }
                    scratch[j] = 0.0;
                }
                touched.clear();
                out
            })
            .collect();
        SymbolMatrix { n: self.n, rows }
    }
}

/// The numeric symbol `A(theta, c, xi)`: trainable values on Param
/// positions, fixed weights on Fixed positions, `xi` on nonlinear positions.
/// With `absolute` the trainable and fixed entries are replaced by their
/// absolute values.
pub fn symbol(
    dag: &NonlinearDag,
    theta: &ParamVector,
    xi: f64,
    absolute: bool,
) -> Result<SymbolMatrix, EvalError> {
    check_theta(dag, theta)?;
    let n = dag.node_count();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for node in 1..=n {
        let id = NodeId::new(node);
        for (idx, e) in dag.incoming_indexed(id) {
            let v = match e.kind {
                EdgeKind::Param | EdgeKind::Fixed => {
                    let w = dag.effective_weight(idx, theta).unwrap();
                    if absolute {
                        w.abs()
                    } else {
                        w
                    }
                }
                EdgeKind::Nonlinear => xi,
            };
            rows[node - 1].push((e.src.zero_based(), v));
        }
    }
    Ok(SymbolMatrix { n, rows })
}

/// One application of the nonlinear operator: row `i` sums trainable and
/// fixed weights times `z_j` plus `relu(z_j)` over nonlinear connections.
pub fn apply_operator(
    dag: &NonlinearDag,
    theta: &ParamVector,
    z: &StateVector,
) -> Result<StateVector, EvalError> {
    check_theta(dag, theta)?;
    if z.len() != dag.node_count() {
        return Err(EvalError::StateLen {
            got: z.len(),
            want: dag.node_count(),
        });
    }
    Ok(StateVector::new(apply_operator_raw(dag, theta, z.as_slice())))
}

fn apply_operator_raw(dag: &NonlinearDag, theta: &ParamVector, z: &[f64]) -> Vec<f64> {
    let n = dag.node_count();
    let mut out = vec![0.0; n];
    for node in (dag.input_dim() + 1)..=n {
        let id = NodeId::new(node);
        let mut acc = 0.0;
        for (idx, e) in dag.incoming_indexed(id) {
            let zj = z[e.src.zero_based()];
            acc += match e.kind {
                EdgeKind::Param => theta.get(dag.slot_of(idx).unwrap()) * zj,
                EdgeKind::Fixed => e.weight.unwrap() * zj,
                EdgeKind::Nonlinear => relu(zj),
            };
        }
        out[node - 1] = acc;
    }
    out
}

/// Whether `sym^s` is exactly the zero matrix. Powers are accumulated
/// right-to-left (`A * A^{s-1}`) with exact zero dropping.
pub fn matrix_power_is_zero(sym: &SymbolMatrix, s: u32) -> bool {
    assert!(s >= 1, "power must be at least 1");
    let mut acc = sym.clone();
    for _ in 1..s {
        if acc.nonzeros() == 0 {
            break;
        }
        acc = sym.matmul(&acc);
    }
    acc.is_zero()
}

/// Smallest `s0` with `A^{s0} = 0` for the all-ones symbol: one plus the
/// length of the longest directed path. Always at most N.
pub fn nilpotency_index(dag: &NonlinearDag) -> usize {
    let n = dag.node_count();
    let mut longest = vec![0usize; n + 1];
    let mut best = 0;
    for node in 1..=n {
        let id = NodeId::new(node);
        let mut l = 0;
        for e in dag.incoming(id) {
            let j = e.src.get();
            if j <= n {
                l = l.max(longest[j] + 1);
            }
        }
        longest[node] = l;
        best = best.max(l);
    }
    best + 1
}

/// Result of running the fixed-point iteration to exact stationarity.
#[derive(Debug, Clone)]
pub struct ForwardRun {
    /// `1_out^T z_inf`, the network output.
    pub output: f64,
    pub z_inf: StateVector,
    /// Index of the first iterate equal to its successor; bounded by the
    /// nilpotency index.
    pub steps: usize,
}

/// Iterates `z_s = z_0 + A(theta, sigma) z_{s-1}` until two successive
/// iterates are exactly equal. Nilpotency makes the termination test exact:
/// beyond the longest path the iterates are bit-identical, so no tolerance
/// is involved. Non-finite intermediates abort with an error.
pub fn forward_fixed_point(
    dag: &NonlinearDag,
    theta: &ParamVector,
    x: &[f64],
) -> Result<ForwardRun, EvalError> {
    check_theta(dag, theta)?;
    let z0 = StateVector::from_input(dag, x)?;
    let s0 = nilpotency_index(dag);
    let mut prev = z0.as_slice().to_vec();
    for s in 1..=(s0 + 1) {
        let mut cur = apply_operator_raw(dag, theta, &prev);
        for (c, z) in cur.iter_mut().zip(z0.as_slice()) {
            *c += z;
        }
        if let Some(node) = cur.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite { node: node + 1 });
        }
        if cur == prev {
            let output = prev[dag.node_count() - 1];
            return Ok(ForwardRun {
                output,
                z_inf: StateVector::new(prev),
                steps: s - 1,
            });
        }
        prev = cur;
    }
    unreachable!("fixed point not reached within nilpotency bound");
}

/// Fixed-point values by a single ascending sweep: each node reads only
/// lower-indexed nodes, so updating in place in index order lands exactly on
/// the iteration's stationary vector, bit for bit. This is the hot path;
/// [`forward_fixed_point`] is the reference route and the two agree exactly.
pub fn forward_topological(
    dag: &NonlinearDag,
    theta: &ParamVector,
    x: &[f64],
) -> Result<StateVector, EvalError> {
    check_theta(dag, theta)?;
    let z0 = StateVector::from_input(dag, x)?;
    let mut z = z0.as_slice().to_vec();
    let n = dag.node_count();
    for node in (dag.input_dim() + 1)..=n {
        let id = NodeId::new(node);
        let mut acc = 0.0;
        for (idx, e) in dag.incoming_indexed(id) {
            let zj = z[e.src.zero_based()];
            acc += match e.kind {
                EdgeKind::Param => theta.get(dag.slot_of(idx).unwrap()) * zj,
                EdgeKind::Fixed => e.weight.unwrap() * zj,
                EdgeKind::Nonlinear => relu(zj),
            };
        }
        if !acc.is_finite() {
            return Err(EvalError::NonFinite { node });
        }
        z[node - 1] = acc;
    }
    Ok(StateVector::new(z))
}

/// Batched forward pass; runs data-parallel and reduces in index order.
pub fn forward_batch(
    dag: &NonlinearDag,
    theta: &ParamVector,
    xs: &[Vec<f64>],
) -> Result<Vec<f64>, EvalError> {
    let sink = dag.node_count() - 1;
    let outs = par::map_indexed(xs.len(), |i| forward_topological(dag, theta, &xs[i]));
    outs.into_iter()
        .map(|r| r.map(|z| z.as_slice()[sink]))
        .collect()
}
