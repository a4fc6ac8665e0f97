//! Nonlinear weighted DAG data model.
//!
//! A network is a DAG on nodes `1..=N` where nodes `1..=d` are the inputs
//! (sources) and node `N` is the single output (sink). Every edge points from
//! a strictly smaller to a strictly larger index, so the adjacency matrix is
//! strictly lower triangular. Edges come in three kinds: trainable weights,
//! fixed weights, and nonlinear (ReLU) connections.

use std::fmt;

use thiserror::Error;

/// 1-based node index. Nodes `1..=d` are sources, node `N` is the sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    /// Panics if `index` is zero; node indices are 1-based.
    pub fn new(index: usize) -> Self {
        assert!(index >= 1, "node indices are 1-based");
        NodeId(index)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// 0-based position, for indexing state vectors.
    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Edge kinds partition the edge set: trainable, fixed, and nonlinear
/// connections are mutually exclusive on any (dst, src) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Trainable weight; its value lives in a [`ParamVector`] slot.
    Param,
    /// Architecture-fixed weight, stored on the edge itself.
    Fixed,
    /// ReLU connection; carries no weight.
    Nonlinear,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::Param => write!(f, "param"),
            EdgeKind::Fixed => write!(f, "fixed"),
            EdgeKind::Nonlinear => write!(f, "nonlinear"),
        }
    }
}

/// A directed edge `src -> dst` with `src < dst`.
///
/// `weight` is `Some` exactly for `Param` and `Fixed` edges. For `Param`
/// edges it holds the value assigned at construction; evaluation always
/// reads the current value from the [`ParamVector`] instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub dst: NodeId,
    pub src: NodeId,
    pub kind: EdgeKind,
    pub weight: Option<f64>,
}

impl Edge {
    pub fn param(dst: usize, src: usize, weight: f64) -> Self {
        Edge {
            dst: NodeId::new(dst),
            src: NodeId::new(src),
            kind: EdgeKind::Param,
            weight: Some(weight),
        }
    }

    pub fn fixed(dst: usize, src: usize, weight: f64) -> Self {
        Edge {
            dst: NodeId::new(dst),
            src: NodeId::new(src),
            kind: EdgeKind::Fixed,
            weight: Some(weight),
        }
    }

    pub fn nonlinear(dst: usize, src: usize) -> Self {
        Edge {
            dst: NodeId::new(dst),
            src: NodeId::new(src),
            kind: EdgeKind::Nonlinear,
            weight: None,
        }
    }
}

/// A structural invariant violation. Violations are reported as data, not
/// errors: [`NonlinearDag::validate`] returns all of them in a deterministic
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `d < 1` or `N < d + 1`.
    BadDims { n: usize, d: usize },
    /// Edge with `src >= dst` (breaks topological order).
    EdgeOrder { dst: usize, src: usize },
    /// Edge endpoint outside `1..=N`.
    EdgeRange { dst: usize, src: usize },
    /// Edge into a source node (`dst <= d`).
    EdgeIntoSource { dst: usize, src: usize },
    /// More than one edge on the same (dst, src) pair.
    DuplicateEdge { dst: usize, src: usize },
    /// Nonlinear edge carrying a weight.
    DanglingWeight { dst: usize, src: usize },
    /// Param or Fixed edge without a weight.
    MissingWeight { dst: usize, src: usize },
    /// Nonempty edge set but no source-to-sink path.
    UnreachableSink,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadDims { n, d } => {
                write!(f, "dimensions n={n}, d={d} violate d >= 1 and n >= d+1")
            }
            Violation::EdgeOrder { dst, src } => {
                write!(f, "edge {dst}<-{src}: src must be strictly less than dst")
            }
            Violation::EdgeRange { dst, src } => {
                write!(f, "edge {dst}<-{src}: endpoint out of range")
            }
            Violation::EdgeIntoSource { dst, src } => {
                write!(f, "edge {dst}<-{src}: source nodes admit no incoming edges")
            }
            Violation::DuplicateEdge { dst, src } => {
                write!(f, "edge {dst}<-{src}: duplicate (dst, src) pair")
            }
            Violation::DanglingWeight { dst, src } => {
                write!(f, "edge {dst}<-{src}: nonlinear edges carry no weight")
            }
            Violation::MissingWeight { dst, src } => {
                write!(f, "edge {dst}<-{src}: param/fixed edges require a weight")
            }
            Violation::UnreachableSink => {
                write!(f, "sink is not reachable from any source")
            }
        }
    }
}

/// Construction rejected because the DAG breaks its invariants.
#[derive(Debug, Clone, Error)]
#[error("invalid dag: {}", summarize(.violations))]
pub struct InvalidDag {
    pub violations: Vec<Violation>,
}

fn summarize(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// The trainable weight vector, one slot per Param edge in canonical
/// (dst, src)-lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn set(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector::new(values)
    }
}

/// A nonlinear weighted DAG: node count, input dimension, and the edge set
/// stored sorted by (dst, src) and indexed by destination.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct NonlinearDag {
    n: usize,
    d: usize,
    edges: Vec<Edge>,
    /// Incoming edges of node `i` occupy `edges[in_start[i]..in_start[i+1]]`.
    in_start: Vec<usize>,
    /// Outgoing edge indices per node, ascending.
    out_edges: Vec<Vec<usize>>,
    /// Edge indices of Param edges, in canonical slot order.
    param_edges: Vec<usize>,
    /// Slot index per edge (`Some` iff Param).
    slot_by_edge: Vec<Option<usize>>,
}

impl NonlinearDag {
    /// Builds and validates; `Err` carries every violation found.
    pub fn new(n: usize, d: usize, edges: Vec<Edge>) -> Result<Self, InvalidDag> {
        let dag = Self::new_unvalidated(n, d, edges);
        let violations = dag.validate();
        if violations.is_empty() {
            Ok(dag)
        } else {
            Err(InvalidDag { violations })
        }
    }

    /// Builds without validating, for diagnostics and file loading. Sweeps
    /// over an invalid DAG are unspecified; call [`validate`](Self::validate)
    /// before evaluating anything loaded from outside.
    pub fn new_unvalidated(n: usize, d: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.dst, e.src));

        // Index only in-range destinations; out-of-range edges stay visible
        // to validate() through the raw list.
        let mut in_start = vec![0usize; n + 2];
        for e in &edges {
            if e.dst.get() <= n {
                in_start[e.dst.get() + 1] += 1;
            }
        }
        for i in 1..in_start.len() {
            in_start[i] += in_start[i - 1];
        }

        let mut out_edges = vec![Vec::new(); n + 1];
        let mut param_edges = Vec::new();
        let mut slot_by_edge = vec![None; edges.len()];
        for (idx, e) in edges.iter().enumerate() {
            if e.src.get() <= n {
                out_edges[e.src.get()].push(idx);
            }
            if e.kind == EdgeKind::Param {
                slot_by_edge[idx] = Some(param_edges.len());
                param_edges.push(idx);
            }
        }

        NonlinearDag {
            n,
            d,
            edges,
            in_start,
            out_edges,
            param_edges,
            slot_by_edge,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn sink(&self) -> NodeId {
        NodeId::new(self.n)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn param_count(&self) -> usize {
        self.param_edges.len()
    }

    /// Incoming edges of `node`, ascending by src.
    pub fn incoming(&self, node: NodeId) -> &[Edge] {
        let i = node.get();
        if i > self.n {
            return &[];
        }
        &self.edges[self.in_start[i]..self.in_start[i + 1]]
    }

    /// Incoming edges of `node` with their global edge indices.
    pub fn incoming_indexed(&self, node: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        let i = node.get();
        let range = if i > self.n {
            0..0
        } else {
            self.in_start[i]..self.in_start[i + 1]
        };
        range.clone().zip(self.edges[range].iter())
    }

    /// Outgoing edges of `node` with their global edge indices.
    pub fn outgoing_indexed(&self, node: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.out_edges[node.get()]
            .iter()
            .map(move |&idx| (idx, &self.edges[idx]))
    }

    /// Slot of an edge in the canonical Param order, `None` for non-Param.
    pub fn slot_of(&self, edge_index: usize) -> Option<usize> {
        self.slot_by_edge[edge_index]
    }

    /// Effective weight of edge `edge_index` under `theta`: the ParamVector
    /// slot for Param edges, the stored weight for Fixed edges.
    pub fn effective_weight(&self, edge_index: usize, theta: &ParamVector) -> Option<f64> {
        let e = &self.edges[edge_index];
        match e.kind {
            EdgeKind::Param => Some(theta.get(self.slot_by_edge[edge_index].unwrap())),
            EdgeKind::Fixed => e.weight,
            EdgeKind::Nonlinear => None,
        }
    }

    /// All invariant violations, deterministically ordered (by category,
    /// then by the edge list's (dst, src) order). Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.d < 1 || self.n < self.d + 1 {
            out.push(Violation::BadDims { n: self.n, d: self.d });
        }
        for e in &self.edges {
            if e.src >= e.dst {
                out.push(Violation::EdgeOrder {
                    dst: e.dst.get(),
                    src: e.src.get(),
                });
            }
        }
        for e in &self.edges {
            if e.dst.get() > self.n || e.src.get() > self.n {
                out.push(Violation::EdgeRange {
                    dst: e.dst.get(),
                    src: e.src.get(),
                });
            }
        }
        for e in &self.edges {
            if e.dst.get() <= self.d {
                out.push(Violation::EdgeIntoSource {
                    dst: e.dst.get(),
                    src: e.src.get(),
                });
            }
        }
        for w in self.edges.windows(2) {
            if w[0].dst == w[1].dst && w[0].src == w[1].src {
                out.push(Violation::DuplicateEdge {
                    dst: w[1].dst.get(),
                    src: w[1].src.get(),
                });
            }
        }
        for e in &self.edges {
            match (e.kind, e.weight) {
                (EdgeKind::Nonlinear, Some(_)) => out.push(Violation::DanglingWeight {
                    dst: e.dst.get(),
                    src: e.src.get(),
                }),
                (EdgeKind::Param | EdgeKind::Fixed, None) => {
                    out.push(Violation::MissingWeight {
                        dst: e.dst.get(),
                        src: e.src.get(),
                    })
                }
                _ => {}
            }
        }
        if !self.edges.is_empty() && !self.sink_reachable() {
            out.push(Violation::UnreachableSink);
        }
        out
    }

    fn sink_reachable(&self) -> bool {
        if self.n < self.d + 1 {
            return false;
        }
        // Backward walk from the sink over in-range edges.
        let mut seen = vec![false; self.n + 1];
        let mut stack = vec![self.n];
        seen[self.n] = true;
        while let Some(i) = stack.pop() {
            if i <= self.d {
                return true;
            }
            for e in self.incoming(NodeId::new(i)) {
                let j = e.src.get();
                if j <= self.n && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        false
    }

    /// (dst, src) pairs of all Param edges in canonical lexicographic order;
    /// defines the [`ParamVector`] slot semantics.
    pub fn canonical_param_order(&self) -> Vec<(NodeId, NodeId)> {
        self.param_edges
            .iter()
            .map(|&i| (self.edges[i].dst, self.edges[i].src))
            .collect()
    }

    /// Nodes `1..=N` in increasing index: the iteration contract for sweeps.
    pub fn topological_nodes(&self) -> Vec<NodeId> {
        (1..=self.n).map(NodeId::new).collect()
    }

    /// Extracts the current Param values stored on the edges, in canonical
    /// order. Builders keep edge weights and the returned ParamVector in sync.
    pub fn stored_params(&self) -> ParamVector {
        ParamVector::new(
            self.param_edges
                .iter()
                .map(|&i| self.edges[i].weight.unwrap_or(0.0))
                .collect(),
        )
    }

    /// The sub-DAG truncated at `node`: nodes `1..=node`, every edge with
    /// `dst <= node`, and `node` re-interpreted as the sink. Nodes that do
    /// not feed `node` are retained but inert. The Param slots of the
    /// truncation form a prefix of this DAG's canonical order.
    pub fn truncate_at(&self, node: NodeId) -> (NonlinearDag, Vec<usize>) {
        let keep: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| e.dst <= node)
            .copied()
            .collect();
        let slots: Vec<usize> = self
            .param_edges
            .iter()
            .filter(|&&i| self.edges[i].dst <= node)
            .map(|&i| self.slot_by_edge[i].unwrap())
            .collect();
        (NonlinearDag::new_unvalidated(node.get(), self.d, keep), slots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_layer_2_1() -> NonlinearDag {
        // d=2, m=1: W row into node 3, sigma into 4, u into 5.
        NonlinearDag::new(
            5,
            2,
            vec![
                Edge::param(3, 1, 0.5),
                Edge::param(3, 2, -1.0),
                Edge::nonlinear(4, 3),
                Edge::param(5, 4, 2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn valid_two_layer_has_no_violations() {
        assert!(two_layer_2_1().validate().is_empty());
    }

    #[test]
    fn ordering_violation_reported() {
        let dag = NonlinearDag::new_unvalidated(
            5,
            2,
            vec![Edge::param(3, 5, 1.0), Edge::param(5, 3, 1.0)],
        );
        let vs = dag.validate();
        assert_eq!(
            vs.iter()
                .filter(|v| matches!(v, Violation::EdgeOrder { dst: 3, src: 5 }))
                .count(),
            1
        );
    }

    #[test]
    fn duplicate_edge_reported_once() {
        let dag = NonlinearDag::new_unvalidated(
            5,
            2,
            vec![
                Edge::param(4, 1, 1.0),
                Edge::fixed(4, 1, 2.0),
                Edge::param(5, 4, 1.0),
            ],
        );
        let vs = dag.validate();
        assert_eq!(
            vs.iter()
                .filter(|v| matches!(v, Violation::DuplicateEdge { dst: 4, src: 1 }))
                .count(),
            1
        );
    }

    #[test]
    fn unreachable_sink_reported() {
        let dag = NonlinearDag::new_unvalidated(4, 2, vec![Edge::param(3, 1, 1.0)]);
        assert!(dag.validate().contains(&Violation::UnreachableSink));
    }

    #[test]
    fn dangling_and_missing_weights_reported() {
        let mut bad_nonlinear = Edge::nonlinear(4, 3);
        bad_nonlinear.weight = Some(1.0);
        let mut bad_param = Edge::param(5, 4, 0.0);
        bad_param.weight = None;
        let dag =
            NonlinearDag::new_unvalidated(5, 2, vec![Edge::param(3, 1, 1.0), bad_nonlinear, bad_param]);
        let vs = dag.validate();
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::DanglingWeight { dst: 4, src: 3 })));
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::MissingWeight { dst: 5, src: 4 })));
    }

    #[test]
    fn bad_dims_rejected() {
        // N=1 cannot satisfy N >= d+1 >= 2.
        let dag = NonlinearDag::new_unvalidated(1, 1, vec![]);
        assert!(dag
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::BadDims { .. })));
    }

    #[test]
    fn canonical_order_matches_hand_enumeration() {
        let dag = two_layer_2_1();
        let order: Vec<(usize, usize)> = dag
            .canonical_param_order()
            .into_iter()
            .map(|(a, b)| (a.get(), b.get()))
            .collect();
        assert_eq!(order, vec![(3, 1), (3, 2), (5, 4)]);
    }

    #[test]
    fn canonical_order_empty_without_params() {
        let dag = NonlinearDag::new(3, 2, vec![Edge::fixed(3, 1, 1.0)]).unwrap();
        assert!(dag.canonical_param_order().is_empty());
    }

    #[test]
    fn canonical_order_is_construction_order_independent() {
        let edges = vec![
            Edge::param(5, 4, 2.0),
            Edge::nonlinear(4, 3),
            Edge::param(3, 2, -1.0),
            Edge::param(3, 1, 0.5),
        ];
        let a = NonlinearDag::new(5, 2, edges.clone()).unwrap();
        let b = two_layer_2_1();
        assert_eq!(a.canonical_param_order(), b.canonical_param_order());
        assert_eq!(a.stored_params(), b.stored_params());
    }

    #[test]
    fn topological_nodes_full_range() {
        let dag = two_layer_2_1();
        let nodes: Vec<usize> = dag.topological_nodes().iter().map(|v| v.get()).collect();
        assert_eq!(nodes, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn stored_params_round_trip() {
        let dag = two_layer_2_1();
        assert_eq!(dag.stored_params().values(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn truncation_keeps_slot_prefix() {
        let dag = two_layer_2_1();
        let (sub, slots) = dag.truncate_at(NodeId::new(3));
        assert_eq!(sub.node_count(), 3);
        assert_eq!(sub.param_count(), 2);
        assert_eq!(slots, vec![0, 1]);
    }
}
