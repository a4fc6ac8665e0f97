//! Constructors for the four reference architectures as nonlinear weighted
//! DAGs, structural validators for the input and shortcut-connection
//! assumptions, the padding embedding, and the sink decomposition.
//!
//! Each builder also evaluates its own layer recursion directly
//! ([`Architecture::direct_forward`]), independent of the DAG sweep; the two
//! routes cross-check each other.

use std::fmt;

use thiserror::Error;

use crate::adjacency::{forward_topological, relu, EvalError};
use crate::dag::{Edge, EdgeKind, InvalidDag, NodeId, NonlinearDag, ParamVector};

#[derive(Debug, Clone, Error)]
pub enum BuildError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("two-layer width must be at least 1; the sink would be unreachable")]
    DegenerateWidth,
    #[error("skip width {got} must be at least d+1 = {min}")]
    SkipTooNarrow { got: usize, min: usize },
    #[error("padding requires target node count above {n}")]
    PadTooSmall { n: usize },
    #[error("input assumption violated: edge {dst}<-{src} from a source is not trainable")]
    InputAssumption { dst: usize, src: usize },
    #[error(transparent)]
    Invalid(#[from] InvalidDag),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn shape_err(msg: impl Into<String>) -> BuildError {
    BuildError::Shape(msg.into())
}

/// Dense row-major matrix for architecture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, BuildError> {
        if data.len() != rows * cols {
            return Err(shape_err(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, BuildError> {
        let r = rows.len();
        let c = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(shape_err("ragged rows"));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..self.cols {
                    acc += self.at(i, j) * x[j];
                }
                acc
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `a^T relu(W x)`.
#[derive(Debug, Clone)]
pub struct TwoLayerParams {
    /// `m x d`.
    pub w: Mat,
    /// length `m`.
    pub a: Vec<f64>,
}

/// `h^0 = x; h^l = relu(W^l h^{l-1}); out = u^T h^L`.
#[derive(Debug, Clone)]
pub struct FcParams {
    /// `ws[l]`: `m_{l+1} x m_l` with `m_0 = d`.
    pub ws: Vec<Mat>,
    /// length `m_L`.
    pub u: Vec<f64>,
}

/// `h^0 = V x; g^l = relu(W^l h^{l-1}); h^l = h^{l-1} + U^l g^l; out = u^T h^L`.
#[derive(Debug, Clone)]
pub struct ResNetParams {
    /// `D x d` with `D >= d+1`.
    pub v: Mat,
    /// each `m x D`.
    pub ws: Vec<Mat>,
    /// each `D x m`.
    pub us: Vec<Mat>,
    /// length `D`.
    pub u: Vec<f64>,
}

/// `h^0 = V x; g^l = relu(W^l h^{l-1}); h^l = (h^{l-1}; U^l g^l); out = u^T h^L`.
///
/// Layer `l` has nonlinear width `l*m` and skip width `k0 + l*k`, `k` being
/// the growth rate.
#[derive(Debug, Clone)]
pub struct DenseNetParams {
    /// `k0 x d` with `k0 >= d+1`.
    pub v: Mat,
    /// `ws[l-1]`: `l*m x (k0 + (l-1)*k)`.
    pub ws: Vec<Mat>,
    /// `us[l-1]`: `k x l*m`.
    pub us: Vec<Mat>,
    /// length `k0 + L*k`.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Architecture {
    TwoLayer(TwoLayerParams),
    Fc(FcParams),
    ResNet(ResNetParams),
    DenseNet(DenseNetParams),
}

impl Architecture {
    pub fn tag(&self) -> &'static str {
        match self {
            Architecture::TwoLayer(_) => "two_layer",
            Architecture::Fc(_) => "fc",
            Architecture::ResNet(_) => "resnet",
            Architecture::DenseNet(_) => "densenet",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::TwoLayer(p) => p.w.cols(),
            Architecture::Fc(p) => p.ws.first().map(|w| w.cols()).unwrap_or(0),
            Architecture::ResNet(p) => p.v.cols(),
            Architecture::DenseNet(p) => p.v.cols(),
        }
    }

    pub fn build(&self) -> Result<(NonlinearDag, ParamVector), BuildError> {
        match self {
            Architecture::TwoLayer(p) => build_two_layer(p.w.cols(), p.w.rows(), p),
            Architecture::Fc(p) => {
                let mut dims = vec![p.ws.first().map(|w| w.cols()).unwrap_or(0)];
                dims.extend(p.ws.iter().map(|w| w.rows()));
                build_fc(&dims, p)
            }
            Architecture::ResNet(p) => build_resnet(
                p.v.cols(),
                p.v.rows(),
                p.ws.first().map(|w| w.rows()).unwrap_or(0),
                p.ws.len(),
                p,
            ),
            Architecture::DenseNet(p) => {
                let (d, k0, k, m, l) = densenet_dims(p)?;
                build_densenet(d, k0, k, m, l, p)
            }
        }
    }

    /// Evaluates the architecture's own layer recursion, bypassing the DAG.
    /// Serves as the oracle for the fixed-point forward pass.
    pub fn direct_forward(&self, x: &[f64]) -> Result<f64, BuildError> {
        match self {
            Architecture::TwoLayer(p) => {
                if x.len() != p.w.cols() {
                    return Err(shape_err("input length"));
                }
                let hidden = p.w.matvec(x);
                let mut acc = 0.0;
                for (ai, hi) in p.a.iter().zip(&hidden) {
                    acc += ai * relu(*hi);
                }
                Ok(acc)
            }
            Architecture::Fc(p) => {
                if x.len() != p.ws.first().map(|w| w.cols()).unwrap_or(0) {
                    return Err(shape_err("input length"));
                }
                let mut h = x.to_vec();
                for w in &p.ws {
                    h = w.matvec(&h).into_iter().map(relu).collect();
                }
                Ok(dot(&p.u, &h))
            }
            Architecture::ResNet(p) => {
                if x.len() != p.v.cols() {
                    return Err(shape_err("input length"));
                }
                let mut h = p.v.matvec(x);
                for (w, u) in p.ws.iter().zip(&p.us) {
                    let g: Vec<f64> = w.matvec(&h).into_iter().map(relu).collect();
                    let delta = u.matvec(&g);
                    // Accumulate skip first, then the block update, matching
                    // the DAG's by-source edge order.
                    for (hi, di) in h.iter_mut().zip(&delta) {
                        *hi += di;
                    }
                }
                Ok(dot(&p.u, &h))
            }
            Architecture::DenseNet(p) => {
                if x.len() != p.v.cols() {
                    return Err(shape_err("input length"));
                }
                let mut h = p.v.matvec(x);
                for (w, u) in p.ws.iter().zip(&p.us) {
                    let g: Vec<f64> = w.matvec(&h).into_iter().map(relu).collect();
                    h.extend(u.matvec(&g));
                }
                Ok(dot(&p.u, &h))
            }
        }
    }
}

fn densenet_dims(p: &DenseNetParams) -> Result<(usize, usize, usize, usize, usize), BuildError> {
    let d = p.v.cols();
    let k0 = p.v.rows();
    let layers = p.ws.len();
    if layers == 0 || p.us.len() != layers {
        return Err(shape_err("densenet needs matching nonempty ws/us"));
    }
    let m = p.ws[0].rows();
    let k = p.us[0].rows();
    Ok((d, k0, k, m, layers))
}

pub(crate) struct DagAssembly {
    pub(crate) edges: Vec<Edge>,
}

impl DagAssembly {
    pub(crate) fn new() -> Self {
        DagAssembly { edges: Vec::new() }
    }

    /// Dense Param block: every position is a trainable slot, zero-valued or
    /// not. `dst0`/`src0` are the first node indices of the blocks.
    pub(crate) fn param_block(&mut self, dst0: usize, src0: usize, m: &Mat) {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                self.edges.push(Edge::param(dst0 + i, src0 + j, m.at(i, j)));
            }
        }
    }

    /// Diagonal of nonlinear connections between equal-width blocks.
    pub(crate) fn nonlinear_diag(&mut self, dst0: usize, src0: usize, width: usize) {
        for i in 0..width {
            self.edges.push(Edge::nonlinear(dst0 + i, src0 + i));
        }
    }

    /// Fixed identity relay of `width` unit edges.
    pub(crate) fn fixed_identity(&mut self, dst0: usize, src0: usize, width: usize) {
        for i in 0..width {
            self.edges.push(Edge::fixed(dst0 + i, src0 + i, 1.0));
        }
    }

    pub(crate) fn finish(self, n: usize, d: usize) -> Result<(NonlinearDag, ParamVector), BuildError> {
        let dag = NonlinearDag::new(n, d, self.edges)?;
        let theta = dag.stored_params();
        Ok((dag, theta))
    }
}

/// Two-layer network on `N = d + 2m + 1` nodes: a Param block for `W`, the
/// nonlinear diagonal, and the Param output row.
pub fn build_two_layer(
    d: usize,
    m: usize,
    params: &TwoLayerParams,
) -> Result<(NonlinearDag, ParamVector), BuildError> {
    if m == 0 {
        return Err(BuildError::DegenerateWidth);
    }
    if params.w.rows() != m || params.w.cols() != d || params.a.len() != m {
        return Err(shape_err(format!(
            "two-layer expects W {m}x{d} and a of length {m}"
        )));
    }
    let n = d + 2 * m + 1;
    let mut asm = DagAssembly::new();
    asm.param_block(d + 1, 1, &params.w);
    asm.nonlinear_diag(d + m + 1, d + 1, m);
    asm.param_block(n, d + m + 1, &Mat::new(1, m, params.a.clone())?);
    asm.finish(n, d)
}

/// Fully connected network; alternating Param weight blocks and nonlinear
/// diagonals, `dims = [m_0, ..., m_L]` with `m_0 = d`.
pub fn build_fc(dims: &[usize], params: &FcParams) -> Result<(NonlinearDag, ParamVector), BuildError> {
    if dims.len() < 2 {
        return Err(shape_err("fc needs at least one layer"));
    }
    let layers = dims.len() - 1;
    if params.ws.len() != layers {
        return Err(shape_err(format!("fc expects {layers} weight matrices")));
    }
    if dims.iter().any(|&m| m == 0) {
        return Err(BuildError::DegenerateWidth);
    }
    for (l, w) in params.ws.iter().enumerate() {
        if w.rows() != dims[l + 1] || w.cols() != dims[l] {
            return Err(shape_err(format!(
                "fc layer {}: expected {}x{}, got {}x{}",
                l + 1,
                dims[l + 1],
                dims[l],
                w.rows(),
                w.cols()
            )));
        }
    }
    if params.u.len() != dims[layers] {
        return Err(shape_err("fc output vector length"));
    }

    let d = dims[0];
    let n = d + 2 * dims[1..].iter().sum::<usize>() + 1;
    let mut asm = DagAssembly::new();
    let mut prev_start = 1;
    let mut cursor = d;
    for (l, w) in params.ws.iter().enumerate() {
        let width = dims[l + 1];
        asm.param_block(cursor + 1, prev_start, w);
        asm.nonlinear_diag(cursor + width + 1, cursor + 1, width);
        prev_start = cursor + width + 1;
        cursor += 2 * width;
    }
    asm.param_block(n, prev_start, &Mat::new(1, dims[layers], params.u.clone())?);
    asm.finish(n, d)
}

/// ResNet; identity skips are Fixed unit edges, everything else Param.
pub fn build_resnet(
    d: usize,
    skip_width: usize,
    m: usize,
    layers: usize,
    params: &ResNetParams,
) -> Result<(NonlinearDag, ParamVector), BuildError> {
    if skip_width < d + 1 {
        return Err(BuildError::SkipTooNarrow {
            got: skip_width,
            min: d + 1,
        });
    }
    if m == 0 || layers == 0 {
        return Err(BuildError::DegenerateWidth);
    }
    if params.v.rows() != skip_width || params.v.cols() != d {
        return Err(shape_err("resnet V shape"));
    }
    if params.ws.len() != layers || params.us.len() != layers {
        return Err(shape_err("resnet layer count"));
    }
    for (w, u) in params.ws.iter().zip(&params.us) {
        if w.rows() != m || w.cols() != skip_width || u.rows() != skip_width || u.cols() != m {
            return Err(shape_err("resnet W/U shapes"));
        }
    }
    if params.u.len() != skip_width {
        return Err(shape_err("resnet output vector length"));
    }

    let n = d + skip_width + layers * (2 * m + skip_width) + 1;
    let mut asm = DagAssembly::new();
    asm.param_block(d + 1, 1, &params.v);
    let mut h_start = d + 1;
    let mut cursor = d + skip_width;
    for (w, u) in params.ws.iter().zip(&params.us) {
        asm.param_block(cursor + 1, h_start, w);
        asm.nonlinear_diag(cursor + m + 1, cursor + 1, m);
        let next_h = cursor + 2 * m + 1;
        asm.fixed_identity(next_h, h_start, skip_width);
        asm.param_block(next_h, cursor + m + 1, u);
        h_start = next_h;
        cursor += 2 * m + skip_width;
    }
    asm.param_block(n, h_start, &Mat::new(1, skip_width, params.u.clone())?);
    asm.finish(n, d)
}

/// DenseNet; concatenation is realized by a Fixed stacked identity plus the
/// Param block occupying the grown rows. Layer `l` has nonlinear width
/// `l*m` and skip width `k0 + l*k`.
pub fn build_densenet(
    d: usize,
    k0: usize,
    k: usize,
    m: usize,
    layers: usize,
    params: &DenseNetParams,
) -> Result<(NonlinearDag, ParamVector), BuildError> {
    if k0 < d + 1 {
        return Err(BuildError::SkipTooNarrow { got: k0, min: d + 1 });
    }
    if k == 0 || m == 0 || layers == 0 {
        return Err(BuildError::DegenerateWidth);
    }
    if params.v.rows() != k0 || params.v.cols() != d {
        return Err(shape_err("densenet V shape"));
    }
    if params.ws.len() != layers || params.us.len() != layers {
        return Err(shape_err("densenet layer count"));
    }
    for l in 1..=layers {
        let w = &params.ws[l - 1];
        let u = &params.us[l - 1];
        let p = l * m;
        let prev_width = k0 + (l - 1) * k;
        if w.rows() != p || w.cols() != prev_width {
            return Err(shape_err(format!(
                "densenet W[{l}]: expected {p}x{prev_width}, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        if u.rows() != k || u.cols() != p {
            return Err(shape_err(format!(
                "densenet U[{l}]: expected {k}x{p}, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
    }
    if params.u.len() != k0 + layers * k {
        return Err(shape_err("densenet output vector length"));
    }

    let total: usize = (1..=layers).map(|l| 2 * l * m + k0 + l * k).sum();
    let n = d + k0 + total + 1;
    let mut asm = DagAssembly::new();
    asm.param_block(d + 1, 1, &params.v);
    let mut h_start = d + 1;
    let mut h_width = k0;
    let mut cursor = d + k0;
    for l in 1..=layers {
        let p = l * m;
        asm.param_block(cursor + 1, h_start, &params.ws[l - 1]);
        asm.nonlinear_diag(cursor + p + 1, cursor + 1, p);
        let next_h = cursor + 2 * p + 1;
        asm.fixed_identity(next_h, h_start, h_width);
        asm.param_block(next_h + h_width, cursor + p + 1, &params.us[l - 1]);
        h_start = next_h;
        h_width += k;
        cursor += 2 * p + h_width;
    }
    asm.param_block(n, h_start, &Mat::new(1, h_width, params.u.clone())?);
    asm.finish(n, d)
}

/// True iff every edge leaving a source node is trainable: no fixed weights
/// or nonlinear connections read the inputs directly.
pub fn validate_input_assumption(dag: &NonlinearDag) -> bool {
    dag.edges()
        .iter()
        .all(|e| e.src.get() > dag.input_dim() || e.kind == EdgeKind::Param)
}

/// Recovered block structure of a network in shortcut form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub input_dim: usize,
    pub layers: usize,
    /// Skip widths `d_0..d_L`.
    pub d_seq: Vec<usize>,
    /// Nonlinear widths `p_1..p_L`.
    pub p_seq: Vec<usize>,
    /// Per layer: column `j` of the stacked identity maps to this row
    /// (both 0-based within their blocks).
    pub s_perms: Vec<Vec<usize>>,
}

impl BlockSpec {
    /// Plain chain spec with the un-permuted stacked identity.
    pub fn plain(input_dim: usize, d_seq: Vec<usize>, p_seq: Vec<usize>) -> Self {
        let layers = p_seq.len();
        let s_perms = (1..=layers)
            .map(|l| (0..d_seq[l - 1]).collect())
            .collect();
        BlockSpec {
            input_dim,
            layers,
            d_seq,
            p_seq,
            s_perms,
        }
    }

    pub fn check(&self) -> Result<(), BuildError> {
        if self.d_seq.len() != self.layers + 1 || self.p_seq.len() != self.layers {
            return Err(shape_err("block spec lengths"));
        }
        let min = self.input_dim + 1;
        for l in 0..=self.layers {
            if self.d_seq[l] < min {
                return Err(BuildError::SkipTooNarrow {
                    got: self.d_seq[l],
                    min,
                });
            }
        }
        for (l, &p) in self.p_seq.iter().enumerate() {
            if p < min {
                return Err(BuildError::SkipTooNarrow { got: p, min });
            }
            if self.d_seq[l + 1] < self.d_seq[l] {
                return Err(shape_err("skip widths must be nondecreasing"));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.input_dim
            + self.d_seq[0]
            + (1..=self.layers)
                .map(|l| 2 * self.p_seq[l - 1] + self.d_seq[l])
                .sum::<usize>()
            + 1
    }
}

/// Outcome of structural shortcut-form recognition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShortcutForm {
    /// The two-layer shape.
    TwoLayer { width: usize },
    /// The block-chain shape with skip relays.
    BlockChain(BlockSpec),
}

impl fmt::Display for ShortcutForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShortcutForm::TwoLayer { width } => write!(f, "two-layer form, width {width}"),
            ShortcutForm::BlockChain(spec) => write!(
                f,
                "block-chain form, L={} d_seq={:?} p_seq={:?}",
                spec.layers, spec.d_seq, spec.p_seq
            ),
        }
    }
}

/// Structural pattern match against the two shortcut-connection forms.
/// Matching is on edge layout and kinds, never on trainable values: a
/// zero-valued Param edge still counts as a slot. Returns a diagnostic on
/// failure.
pub fn validate_shortcut_form(dag: &NonlinearDag) -> Result<ShortcutForm, String> {
    let n = dag.node_count();
    let d = dag.input_dim();

    // Nonlinear diagonals pin the layout down.
    let mut nonlinear: Vec<(usize, usize)> = dag
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Nonlinear)
        .map(|e| (e.src.get(), e.dst.get()))
        .collect();
    nonlinear.sort_unstable();
    if nonlinear.is_empty() {
        return Err("no nonlinear connections; neither form applies".into());
    }

    // Parse maximal diagonal runs: sources a..a+p-1 mapping to a+p..a+2p-1.
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (first pre node, width)
    let mut i = 0;
    while i < nonlinear.len() {
        let (a, dst) = nonlinear[i];
        if dst <= a {
            return Err(format!("nonlinear edge {dst}<-{a} is not lower triangular"));
        }
        let p = dst - a;
        for t in 0..p {
            match nonlinear.get(i + t) {
                Some(&(s, e)) if s == a + t && e == a + t + p => {}
                _ => {
                    return Err(format!(
                        "nonlinear connections near node {a} do not form a diagonal block"
                    ))
                }
            }
        }
        runs.push((a, p));
        i += p;
    }

    // Form (i): a single run laid out as [inputs | pre | post | sink].
    if runs.len() == 1 {
        let (a, p) = runs[0];
        if a == d + 1 && n == d + 2 * p + 1 {
            let mut ok = true;
            for e in dag.edges() {
                if e.kind == EdgeKind::Nonlinear {
                    continue;
                }
                let (dst, src) = (e.dst.get(), e.src.get());
                let in_v = e.kind == EdgeKind::Param && src <= d && (d + 1..=d + p).contains(&dst);
                let in_u = e.kind == EdgeKind::Param
                    && dst == n
                    && (d + p + 1..=d + 2 * p).contains(&src);
                if !(in_v || in_u) {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(ShortcutForm::TwoLayer { width: p });
            }
        }
    }

    // Form (ii): [inputs | h0 | pre_1 post_1 h1 | ... | sink].
    let layers = runs.len();
    let d0 = runs[0].0 as isize - d as isize - 1;
    if d0 < 1 {
        return Err("no room for an initial skip block before the first nonlinearity".into());
    }
    let d0 = d0 as usize;
    let mut d_seq = vec![d0];
    let mut p_seq = Vec::with_capacity(layers);
    let mut h_starts = vec![d + 1];
    for (l, &(a, p)) in runs.iter().enumerate() {
        p_seq.push(p);
        let post_end = a + 2 * p - 1;
        let h_end = if l + 1 < layers {
            runs[l + 1].0 - 1
        } else {
            n - 1
        };
        if h_end <= post_end {
            return Err(format!("empty skip block after layer {}", l + 1));
        }
        h_starts.push(post_end + 1);
        d_seq.push(h_end - post_end);
    }

    let min = d + 1;
    for (l, &w) in d_seq.iter().enumerate() {
        if w < min {
            return Err(format!(
                "skip width d_{l} = {w} is below the required d+1 = {min}"
            ));
        }
    }
    for (l, &p) in p_seq.iter().enumerate() {
        if p < min {
            return Err(format!(
                "nonlinear width p_{} = {p} is below the required d+1 = {min}",
                l + 1
            ));
        }
    }
    for l in 1..=layers {
        if d_seq[l] < d_seq[l - 1] {
            return Err(format!("skip width shrinks at layer {l}"));
        }
    }

    // Region bounds, all 1-based inclusive.
    let h_block = |l: usize| (h_starts[l], h_starts[l] + d_seq[l] - 1);
    let pre_block = |l: usize| (runs[l - 1].0, runs[l - 1].0 + p_seq[l - 1] - 1);
    let post_block = |l: usize| {
        (
            runs[l - 1].0 + p_seq[l - 1],
            runs[l - 1].0 + 2 * p_seq[l - 1] - 1,
        )
    };
    let within = |(lo, hi): (usize, usize), v: usize| (lo..=hi).contains(&v);

    let mut s_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); layers + 1];
    for e in dag.edges() {
        if e.kind == EdgeKind::Nonlinear {
            continue;
        }
        let (dst, src) = (e.dst.get(), e.src.get());
        let mut placed = false;
        match e.kind {
            EdgeKind::Param => {
                if src <= d && within(h_block(0), dst) {
                    placed = true; // V
                } else if dst == n && within(h_block(layers), src) {
                    placed = true; // u
                } else {
                    for l in 1..=layers {
                        if within(pre_block(l), dst) && within(h_block(l - 1), src) {
                            placed = true; // W block
                            break;
                        }
                        if within(h_block(l), dst) && within(post_block(l), src) {
                            placed = true; // U block
                            break;
                        }
                    }
                }
            }
            EdgeKind::Fixed => {
                for l in 1..=layers {
                    if within(h_block(l), dst) && within(h_block(l - 1), src) {
                        if e.weight != Some(1.0) {
                            return Err(format!(
                                "skip edge {dst}<-{src} must carry unit weight"
                            ));
                        }
                        s_edges[l].push((src, dst));
                        placed = true;
                        break;
                    }
                }
            }
            EdgeKind::Nonlinear => unreachable!(),
        }
        if !placed {
            return Err(format!(
                "edge {dst}<-{src} ({}) falls outside every block region",
                e.kind
            ));
        }
    }

    // Each skip must be a row permutation of the stacked identity: one unit
    // edge per column, distinct rows.
    let mut s_perms = Vec::with_capacity(layers);
    for l in 1..=layers {
        let (src_lo, _) = h_block(l - 1);
        let (dst_lo, _) = h_block(l);
        let cols = d_seq[l - 1];
        let mut perm = vec![usize::MAX; cols];
        let mut used_rows = vec![false; d_seq[l]];
        for &(src, dst) in &s_edges[l] {
            let c = src - src_lo;
            let r = dst - dst_lo;
            if perm[c] != usize::MAX {
                return Err(format!("skip block {l}: column {c} relayed twice"));
            }
            if used_rows[r] {
                return Err(format!("skip block {l}: row {r} receives two relays"));
            }
            perm[c] = r;
            used_rows[r] = true;
        }
        if let Some(c) = perm.iter().position(|&r| r == usize::MAX) {
            return Err(format!("skip block {l}: column {c} is not relayed"));
        }
        s_perms.push(perm);
    }

    Ok(ShortcutForm::BlockChain(BlockSpec {
        input_dim: d,
        layers,
        d_seq,
        p_seq,
        s_perms,
    }))
}

/// Embeds a network into a larger node budget: the adjacency representation
/// becomes `[[A, 0], [E, 0]]` where `E` holds a single unit Fixed edge from
/// the old sink into the new one; all other added nodes stay isolated. The
/// function and the path norm are unchanged.
pub fn embed_pad(
    dag: &NonlinearDag,
    theta: &ParamVector,
    n_bar: usize,
) -> Result<(NonlinearDag, ParamVector), BuildError> {
    let n = dag.node_count();
    if n_bar <= n {
        return Err(BuildError::PadTooSmall { n });
    }
    let mut edges = dag.edges().to_vec();
    edges.push(Edge::fixed(n_bar, n, 1.0));
    let padded = NonlinearDag::new(n_bar, dag.input_dim(), edges)?;
    Ok((padded, theta.clone()))
}

/// One truncated sub-network of a decomposition, re-sinked at `node`.
#[derive(Debug, Clone)]
pub struct SubnetHandle {
    pub node: NodeId,
    pub dag: NonlinearDag,
    pub theta: ParamVector,
}

/// Split of a network into a linear part over the inputs plus a combination
/// of ReLU'd sub-networks: `f(x) = sum_{i<=d} a_i x_i +
/// sum_{d<i<N} a_i relu(f_i(x))`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub input_dim: usize,
    /// `coeffs[i-1]` multiplies `x_i` for `i <= d` and `relu(f_i(x))` above.
    pub coeffs: Vec<f64>,
    /// Handles for nodes `d+1 ..= N-1`, in node order.
    pub subnets: Vec<SubnetHandle>,
}

impl Decomposition {
    /// Evaluates the decomposed form; agrees pointwise with the original
    /// network.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        let d = self.input_dim;
        let mut acc = 0.0;
        for i in 0..d {
            acc += self.coeffs[i] * x[i];
        }
        for handle in &self.subnets {
            let c = self.coeffs[handle.node.get() - 1];
            if c == 0.0 {
                continue;
            }
            let z = forward_topological(&handle.dag, &handle.theta, x)?;
            acc += c * relu(z.as_slice()[handle.dag.node_count() - 1]);
        }
        Ok(acc)
    }
}

/// Computes the sink decomposition by the bottom-up coefficient recursion:
/// a node's coefficients combine its direct linear edges with the expansions
/// of its linear predecessors, while nonlinear connections contribute a unit
/// coefficient on the ReLU'd sub-network.
pub fn decompose_sink(
    dag: &NonlinearDag,
    theta: &ParamVector,
) -> Result<Decomposition, BuildError> {
    if let Some(e) = dag
        .edges()
        .iter()
        .find(|e| e.src.get() <= dag.input_dim() && e.kind != EdgeKind::Param)
    {
        return Err(BuildError::InputAssumption {
            dst: e.dst.get(),
            src: e.src.get(),
        });
    }
    let n = dag.node_count();
    let d = dag.input_dim();

    // rows[i] holds the expansion coefficients of f_i over indices 1..i-1.
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    for i in (d + 1)..=n {
        let mut row = vec![0.0; i - 1];
        for (idx, e) in dag.incoming_indexed(NodeId::new(i)) {
            let k = e.src.get();
            match e.kind {
                EdgeKind::Param | EdgeKind::Fixed => {
                    let w = dag.effective_weight(idx, theta).unwrap();
                    if k <= d {
                        row[k - 1] += w;
                    } else {
                        for (j, a) in rows[k].iter().enumerate() {
                            row[j] += w * a;
                        }
                    }
                }
                EdgeKind::Nonlinear => {
                    row[k - 1] += 1.0;
                }
            }
        }
        rows[i] = row;
    }

    let subnets = ((d + 1)..n)
        .map(|i| {
            let node = NodeId::new(i);
            let (sub, slots) = dag.truncate_at(node);
            let theta_i = ParamVector::new(slots.iter().map(|&s| theta.get(s)).collect());
            SubnetHandle {
                node,
                dag: sub,
                theta: theta_i,
            }
        })
        .collect();

    Ok(Decomposition {
        input_dim: d,
        coeffs: rows[n].clone(),
        subnets,
    })
}
