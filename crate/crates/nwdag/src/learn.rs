//! Truncated loss, empirical and Monte Carlo population risks, reverse-mode
//! gradients over the DAG, path-norm regularized training, Rademacher
//! complexity estimation, and the two generalization-bound calculators.
//!
//! Subgradient conventions at kinks: `relu'(0) = 0`, the truncation
//! derivative is 0 on the boundary of `[0, 1]`, and `sign(0) = 0`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adjacency::{check_theta, forward_topological, EvalError};
use crate::approx::BarronTarget;
use crate::builders::validate_input_assumption;
use crate::dag::{EdgeKind, NodeId, NonlinearDag, ParamVector};
use crate::par;
use crate::pathnorm::{path_norm_neumann, PathNormError, NONLINEARITY_WEIGHT};

#[derive(Debug, Clone, Error)]
pub enum LearnError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    PathNorm(#[from] PathNormError),
    #[error("training diverged: non-finite objective at epoch {epoch}")]
    Diverged { epoch: usize, trace: Vec<TraceRow> },
    #[error("dag violates the input assumption; regularized training requires it")]
    InputAssumption,
    #[error("skeleton unsupported for path-norm projection: {0}")]
    UnsupportedSkeleton(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DataError {
    #[error("dataset must hold at least one sample")]
    Empty,
    #[error("xs and ys lengths differ: {xs} vs {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("sample {index} leaves the unit cube or label range")]
    OutOfRange { index: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BoundError {
    #[error("delta must lie in (0, 1)")]
    BadDelta,
    #[error("sample count must be at least 1")]
    BadSampleCount,
    #[error("input dimension must be at least 1")]
    BadDim,
    #[error("path norm must be nonnegative")]
    NegativeNorm,
    #[error("nonlinearity count must be at least 1")]
    NoNonlinearities,
    #[error("lambda0 = {got} is below the admissible threshold {threshold}")]
    Lambda0BelowThreshold { got: f64, threshold: f64 },
}

/// Labeled sample set on the unit cube with labels in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self, DataError> {
        if xs.is_empty() {
            return Err(DataError::Empty);
        }
        if xs.len() != ys.len() {
            return Err(DataError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
            });
        }
        for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
            let ok = x.iter().all(|v| (0.0..=1.0).contains(v)) && (0.0..=1.0).contains(y);
            if !ok {
                return Err(DataError::OutOfRange { index: i });
            }
        }
        Ok(Dataset { xs, ys })
    }

    /// `n` uniform points on the cube labeled by the target.
    pub fn from_target(target: &BarronTarget, n: usize, seed: u64) -> Result<Self, DataError> {
        let d = target.input_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            ys.push(target.label(&x));
            xs.push(x);
        }
        Dataset::new(xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }
}

/// Clamp onto `[0, 1]`.
pub fn truncate(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Truncated square loss `1/2 (truncate(f(x)) - y)^2`, valued in `[0, 1/2]`.
pub fn loss(
    dag: &NonlinearDag,
    theta: &ParamVector,
    x: &[f64],
    y: f64,
) -> Result<f64, EvalError> {
    let z = forward_topological(dag, theta, x)?;
    let e = truncate(z.as_slice()[dag.node_count() - 1]) - y;
    Ok(0.5 * e * e)
}

/// Mean loss over the dataset; per-sample evaluations run data-parallel and
/// reduce in index order.
pub fn empirical_risk(
    dag: &NonlinearDag,
    theta: &ParamVector,
    data: &Dataset,
) -> Result<f64, EvalError> {
    let parts = par::map_indexed(data.len(), |i| loss(dag, theta, data.x(i), data.y(i)));
    let mut sum = 0.0;
    for p in parts {
        sum += p?;
    }
    Ok(sum / data.len() as f64)
}

/// Monte Carlo estimate of the population risk against a target's labels
/// under the uniform distribution, with its standard error. Deterministic
/// for a fixed seed regardless of backend.
pub fn population_risk_mc(
    dag: &NonlinearDag,
    theta: &ParamVector,
    target: &BarronTarget,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    const CHUNKS: usize = 64;
    assert!(samples >= 2);
    let d = dag.input_dim();
    let base = samples / CHUNKS;
    let extra = samples % CHUNKS;
    let parts = par::map_indexed(CHUNKS, |c| -> Result<(f64, f64), EvalError> {
        let count = base + usize::from(c < extra);
        let mut rng = par::shard_rng(seed, c as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut x = vec![0.0; d];
        for _ in 0..count {
            for xi in x.iter_mut() {
                *xi = rng.gen::<f64>();
            }
            let l = loss(dag, theta, &x, target.label(&x))?;
            sum += l;
            sumsq += l * l;
        }
        Ok((sum, sumsq))
    });
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for p in parts {
        let (s, q) = p?;
        sum += s;
        sumsq += q;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sumsq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Reverse sweep seeded with `seed_adj` at the sink; returns d(seed * f)/d(theta).
fn backward(dag: &NonlinearDag, theta: &ParamVector, z: &[f64], seed_adj: f64) -> Vec<f64> {
    let n = dag.node_count();
    let d = dag.input_dim();
    let mut adj = vec![0.0; n];
    adj[n - 1] = seed_adj;
    let mut grad = vec![0.0; theta.len()];
    for i in ((d + 1)..=n).rev() {
        let a = adj[i - 1];
        if a == 0.0 {
            continue;
        }
        for (idx, e) in dag.incoming_indexed(NodeId::new(i)) {
            let j = e.src.zero_based();
            match e.kind {
                EdgeKind::Param => {
                    let slot = dag.slot_of(idx).unwrap();
                    grad[slot] += a * z[j];
                    adj[j] += a * theta.get(slot);
                }
                EdgeKind::Fixed => {
                    adj[j] += a * e.weight.unwrap();
                }
                EdgeKind::Nonlinear => {
                    if z[j] > 0.0 {
                        adj[j] += a;
                    }
                }
            }
        }
    }
    grad
}

/// Network output and its gradient over the Param slots.
pub fn output_grad(
    dag: &NonlinearDag,
    theta: &ParamVector,
    x: &[f64],
) -> Result<(f64, Vec<f64>), EvalError> {
    let z = forward_topological(dag, theta, x)?;
    let g = backward(dag, theta, z.as_slice(), 1.0);
    Ok((z.as_slice()[dag.node_count() - 1], g))
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Gradient of the truncated square loss at `theta`. Exact wherever the loss
/// is differentiable; at kinks the documented subgradient selections apply,
/// so a saturated truncation zeroes the whole gradient.
pub fn grad(
    dag: &NonlinearDag,
    theta: &ParamVector,
    x: &[f64],
    y: f64,
) -> Result<LossGrad, EvalError> {
    let z = forward_topological(dag, theta, x)?;
    let f = z.as_slice()[dag.node_count() - 1];
    let t = truncate(f);
    let gate = if f > 0.0 && f < 1.0 { 1.0 } else { 0.0 };
    let seed = (t - y) * gate;
    let grad = if seed == 0.0 {
        vec![0.0; theta.len()]
    } else {
        backward(dag, theta, z.as_slice(), seed)
    };
    Ok(LossGrad {
        loss: 0.5 * (t - y) * (t - y),
        grad,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient of the weighted path norm: slot `(i, j)` receives
/// `sign(theta_ij)` times the total mass of source-to-sink paths through the
/// edge with that edge's own absolute weight factored out, computed by one
/// forward and one backward accumulation over the absolute symbol.
pub fn path_norm_subgradient(
    dag: &NonlinearDag,
    theta: &ParamVector,
) -> Result<Vec<f64>, EvalError> {
    check_theta(dag, theta)?;
    let n = dag.node_count();
    let d = dag.input_dim();
    let abs_weight = |idx: usize, e: &crate::dag::Edge| -> f64 {
        match e.kind {
            EdgeKind::Param => theta.get(dag.slot_of(idx).unwrap()).abs(),
            EdgeKind::Fixed => e.weight.unwrap().abs(),
            EdgeKind::Nonlinear => NONLINEARITY_WEIGHT,
        }
    };

    // alpha[j]: mass of all source-to-j paths (including the empty path at
    // sources).
    let mut alpha = vec![0.0; n];
    for a in alpha.iter_mut().take(d) {
        *a = 1.0;
    }
    for i in (d + 1)..=n {
        let mut acc = 0.0;
        for (idx, e) in dag.incoming_indexed(NodeId::new(i)) {
            acc += abs_weight(idx, e) * alpha[e.src.zero_based()];
        }
        alpha[i - 1] = acc;
    }

    // beta[j]: mass of all j-to-sink paths (empty path at the sink).
    let mut beta = vec![0.0; n];
    beta[n - 1] = 1.0;
    for i in (1..n).rev() {
        let mut acc = 0.0;
        for (idx, e) in dag.outgoing_indexed(NodeId::new(i)) {
            acc += abs_weight(idx, e) * beta[e.dst.zero_based()];
        }
        beta[i - 1] = acc;
    }

    let mut g = vec![0.0; theta.len()];
    for i in 1..=n {
        for (idx, e) in dag.incoming_indexed(NodeId::new(i)) {
            if let Some(slot) = dag.slot_of(idx) {
                g[slot] = sign(theta.get(slot)) * alpha[e.src.zero_based()] * beta[i - 1];
            }
        }
    }
    Ok(g)
}

/// Trainable-weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Zero,
    Uniform { lo: f64, hi: f64 },
    /// i.i.d. uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per destination
    /// node, `fan_in` counting incoming Param edges.
    ScaledFanIn,
}

pub fn init_params(dag: &NonlinearDag, scheme: InitScheme, rng: &mut ChaCha8Rng) -> ParamVector {
    match scheme {
        InitScheme::Zero => ParamVector::zeros(dag.param_count()),
        InitScheme::Uniform { lo, hi } => ParamVector::new(
            (0..dag.param_count())
                .map(|_| rng.gen_range(lo..hi))
                .collect(),
        ),
        InitScheme::ScaledFanIn => {
            let mut fan = vec![0usize; dag.node_count() + 1];
            for e in dag.edges() {
                if e.kind == EdgeKind::Param {
                    fan[e.dst.get()] += 1;
                }
            }
            let values = dag
                .edges()
                .iter()
                .filter(|e| e.kind == EdgeKind::Param)
                .map(|e| {
                    let b = 1.0 / (fan[e.dst.get()] as f64).sqrt();
                    rng.gen_range(-b..b)
                })
                .collect();
            ParamVector::new(values)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainMode {
    /// Subgradient descent on shuffled mini-batches with a `1/sqrt(t)` step
    /// schedule.
    MiniBatch { batch_size: usize },
    /// Deterministic full-batch descent with backtracking; the objective
    /// trace is non-increasing.
    FullBatchBacktracking,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Coefficient of the `||theta||_P / sqrt(n)` penalty; nonnegative.
    pub lambda: f64,
    pub epochs: usize,
    pub step_size: f64,
    pub mode: TrainMode,
    pub seed: u64,
    pub init: InitScheme,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub epoch: usize,
    pub empirical_risk: f64,
    pub path_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub theta: ParamVector,
    pub trace: Vec<TraceRow>,
}

fn mean_loss_grad(
    dag: &NonlinearDag,
    theta: &ParamVector,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, Vec<f64>), EvalError> {
    let parts = par::map_indexed(indices.len(), |t| {
        let i = indices[t];
        grad(dag, theta, data.x(i), data.y(i))
    });
    let mut loss_sum = 0.0;
    let mut g = vec![0.0; theta.len()];
    for p in parts {
        let lg = p?;
        loss_sum += lg.loss;
        for (gi, di) in g.iter_mut().zip(&lg.grad) {
            *gi += di;
        }
    }
    let inv = 1.0 / indices.len() as f64;
    for gi in g.iter_mut() {
        *gi *= inv;
    }
    Ok((loss_sum * inv, g))
}

/// Minimizes `J(theta) = R_S(theta) + (lambda / sqrt(n)) ||theta||_P` by
/// first-order subgradient descent. Requires the input assumption.
pub fn train_regularized(
    dag: &NonlinearDag,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome, LearnError> {
    assert!(config.lambda >= 0.0);
    if !validate_input_assumption(dag) {
        return Err(LearnError::InputAssumption);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = init_params(dag, config.init, &mut rng);
    let reg = config.lambda / (data.len() as f64).sqrt();

    let objective = |theta: &ParamVector| -> Result<(f64, f64, f64), LearnError> {
        let r = empirical_risk(dag, theta, data)?;
        let pn = path_norm_neumann(dag, theta)?.value;
        Ok((r, pn, r + reg * pn))
    };

    let mut trace = Vec::with_capacity(config.epochs + 1);
    let (r0, pn0, j0) = objective(&theta)?;
    trace.push(TraceRow {
        epoch: 0,
        empirical_risk: r0,
        path_norm: pn0,
        objective: j0,
    });

    match config.mode {
        TrainMode::MiniBatch { batch_size } => {
            let batch = batch_size.clamp(1, data.len());
            let mut order: Vec<usize> = (0..data.len()).collect();
            let mut step: u64 = 0;
            for epoch in 1..=config.epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(batch) {
                    step += 1;
                    let (_, mut g) = mean_loss_grad(dag, &theta, data, chunk)?;
                    if reg > 0.0 {
                        let pg = path_norm_subgradient(dag, &theta)?;
                        for (gi, pi) in g.iter_mut().zip(&pg) {
                            *gi += reg * pi;
                        }
                    }
                    let eta = config.step_size / (step as f64).sqrt();
                    for (v, gi) in theta.values_mut().iter_mut().zip(&g) {
                        *v -= eta * gi;
                    }
                }
                let (r, pn, j) = objective(&theta)?;
                trace.push(TraceRow {
                    epoch,
                    empirical_risk: r,
                    path_norm: pn,
                    objective: j,
                });
                if !j.is_finite() {
                    return Err(LearnError::Diverged { epoch, trace });
                }
            }
        }
        TrainMode::FullBatchBacktracking => {
            let all: Vec<usize> = (0..data.len()).collect();
            let mut eta = config.step_size;
            let mut current_j = j0;
            'epochs: for epoch in 1..=config.epochs {
                let (_, mut g) = mean_loss_grad(dag, &theta, data, &all)?;
                if reg > 0.0 {
                    let pg = path_norm_subgradient(dag, &theta)?;
                    for (gi, pi) in g.iter_mut().zip(&pg) {
                        *gi += reg * pi;
                    }
                }
                if g.iter().all(|&gi| gi == 0.0) {
                    break 'epochs; // stationary under the selected subgradient
                }
                let mut accepted = false;
                for _ in 0..40 {
                    let mut candidate = theta.clone();
                    for (v, gi) in candidate.values_mut().iter_mut().zip(&g) {
                        *v -= eta * gi;
                    }
                    let (r, pn, j) = objective(&candidate)?;
                    if j.is_finite() && j <= current_j {
                        theta = candidate;
                        current_j = j;
                        trace.push(TraceRow {
                            epoch,
                            empirical_risk: r,
                            path_norm: pn,
                            objective: j,
                        });
                        eta *= 1.5;
                        accepted = true;
                        break;
                    }
                    eta *= 0.5;
                }
                if !accepted {
                    // No descent direction at this scale; stationary enough.
                    break 'epochs;
                }
            }
        }
    }
    Ok(TrainOutcome { theta, trace })
}

/// Admissible lower threshold for `lambda0`.
pub fn lambda0_threshold(d: usize) -> f64 {
    2.0 + 1.0 / (12.0 * (2.0 * d as f64).ln().sqrt())
}

/// The regularization weight `lambda = 3 lambda0 sqrt(2 log(2d))`.
pub fn lambda_from_lambda0(lambda0: f64, d: usize) -> f64 {
    3.0 * lambda0 * (2.0 * (2.0 * d as f64).ln()).sqrt()
}

fn check_bound_domain(n: usize, d: usize, delta: f64) -> Result<(), BoundError> {
    if n < 1 {
        return Err(BoundError::BadSampleCount);
    }
    if d < 1 {
        return Err(BoundError::BadDim);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundError::BadDelta);
    }
    Ok(())
}

/// Generalization-gap bound computable from the trained parameters:
/// `(||theta||_P + 1)(6 sqrt(2 log 2d) + 1/(2 sqrt 2)) / sqrt(n)
///  + 1/2 sqrt(log(pi^2 / (3 delta)) / (2n))`.
pub fn aposteriori_bound(
    path_norm: f64,
    n: usize,
    d: usize,
    delta: f64,
) -> Result<f64, BoundError> {
    check_bound_domain(n, d, delta)?;
    if path_norm < 0.0 {
        return Err(BoundError::NegativeNorm);
    }
    let nf = n as f64;
    let ln2d = (2.0 * d as f64).ln();
    let first = (path_norm + 1.0) * (6.0 * (2.0 * ln2d).sqrt() + 0.5 / 2f64.sqrt()) / nf.sqrt();
    let second = 0.5 * ((std::f64::consts::PI.powi(2) / (3.0 * delta)).ln() / (2.0 * nf)).sqrt();
    Ok(first + second)
}

/// Population-risk bound for the regularized minimizer, from the
/// explicit-constant display:
/// `3 B^2 / (2 N_non)
///  + (6B + 1)(3 (2 + lambda0) sqrt(2 log 2d) + 1/(2 sqrt 2)) / sqrt(n)
///  + sqrt(log(2 pi^2 / (3 delta)) / (2n))`.
pub fn apriori_bound(
    barron_bound: f64,
    n_non: usize,
    n: usize,
    d: usize,
    lambda0: f64,
    delta: f64,
) -> Result<f64, BoundError> {
    check_bound_domain(n, d, delta)?;
    if n_non < 1 {
        return Err(BoundError::NoNonlinearities);
    }
    let threshold = lambda0_threshold(d);
    if lambda0 < threshold {
        return Err(BoundError::Lambda0BelowThreshold {
            got: lambda0,
            threshold,
        });
    }
    let nf = n as f64;
    let b = barron_bound;
    let ln2d = (2.0 * d as f64).ln();
    let approx_term = 3.0 * b * b / (2.0 * n_non as f64);
    let estimation = (6.0 * b + 1.0)
        * (3.0 * (2.0 + lambda0) * (2.0 * ln2d).sqrt() + 0.5 / 2f64.sqrt())
        / nf.sqrt();
    let confidence =
        ((2.0 * std::f64::consts::PI.powi(2) / (3.0 * delta)).ln() / (2.0 * nf)).sqrt();
    Ok(approx_term + estimation + confidence)
}

enum Projection {
    /// All sink-incoming edges are trainable: rescaling them rescales both
    /// the output and the path norm linearly.
    OutputRescale { sink_slots: Vec<usize> },
    /// Every source-to-sink path holds exactly `depth` Param edges and no
    /// Fixed edges: a global rescale by the `depth`-th root restores
    /// feasibility.
    LayeredRescale { depth: usize },
}

fn projection_strategy(dag: &NonlinearDag) -> Result<Projection, LearnError> {
    let sink = dag.sink();
    let sink_edges = dag.incoming(sink);
    if !sink_edges.is_empty() && sink_edges.iter().all(|e| e.kind == EdgeKind::Param) {
        let sink_slots = dag
            .incoming_indexed(sink)
            .filter_map(|(idx, _)| dag.slot_of(idx))
            .collect();
        return Ok(Projection::OutputRescale { sink_slots });
    }

    // Layered fallback: uniform Param depth over all source-to-sink paths
    // and no Fixed edge anywhere on them.
    let n = dag.node_count();
    let d = dag.input_dim();
    let mut reach_fwd = vec![false; n + 1]; // reachable from a source
    for i in 1..=d {
        reach_fwd[i] = true;
    }
    let mut min_depth = vec![usize::MAX; n + 1];
    let mut max_depth = vec![0usize; n + 1];
    for i in 1..=d {
        min_depth[i] = 0;
    }
    for i in (d + 1)..=n {
        for e in dag.incoming(NodeId::new(i)) {
            let j = e.src.get();
            if !reach_fwd[j] {
                continue;
            }
            if e.kind == EdgeKind::Fixed {
                return Err(LearnError::UnsupportedSkeleton(
                    "fixed edge on a source-to-sink path".into(),
                ));
            }
            let inc = usize::from(e.kind == EdgeKind::Param);
            reach_fwd[i] = true;
            min_depth[i] = min_depth[i].min(min_depth[j] + inc);
            max_depth[i] = max_depth[i].max(max_depth[j] + inc);
        }
    }
    if !reach_fwd[n] {
        return Err(LearnError::UnsupportedSkeleton("sink unreachable".into()));
    }
    if min_depth[n] != max_depth[n] || min_depth[n] == 0 {
        return Err(LearnError::UnsupportedSkeleton(
            "param depth varies across paths".into(),
        ));
    }
    Ok(Projection::LayeredRescale { depth: min_depth[n] })
}

fn project_to_ball(
    dag: &NonlinearDag,
    theta: &mut ParamVector,
    q: f64,
    projection: &Projection,
) -> Result<(), LearnError> {
    let pn = path_norm_neumann(dag, theta)?.value;
    if pn <= q {
        return Ok(());
    }
    match projection {
        Projection::OutputRescale { sink_slots } => {
            let factor = q / pn;
            for &s in sink_slots {
                let v = theta.get(s);
                theta.set(s, v * factor);
            }
        }
        Projection::LayeredRescale { depth } => {
            let factor = (q / pn).powf(1.0 / *depth as f64);
            for v in theta.values_mut() {
                *v *= factor;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RademacherOutcome {
    /// Lower estimate of the empirical Rademacher complexity (the inner
    /// supremum is under-approximated by projected subgradient ascent).
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Estimates `Rad_S` of the path-norm ball of radius `q` on the given
/// skeleton: for each trial, a random sign vector is correlated with the
/// network by projected subgradient ascent over the trainable weights.
/// Trials run in parallel with per-trial seeds and reduce in trial order.
pub fn rademacher_estimate(
    xs: &[Vec<f64>],
    skeleton: &NonlinearDag,
    q: f64,
    trials: usize,
    opt_budget: usize,
    seed: u64,
) -> Result<RademacherOutcome, LearnError> {
    assert!(q >= 0.0);
    assert!(trials >= 2);
    let projection = projection_strategy(skeleton)?;
    let n = xs.len();
    let results = par::map_indexed(trials, |t| -> Result<f64, LearnError> {
        let mut rng = par::shard_rng(seed, t as u64);
        let tau: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let mut theta = init_params(skeleton, InitScheme::ScaledFanIn, &mut rng);
        project_to_ball(skeleton, &mut theta, q, &projection)?;
        let mut best = f64::NEG_INFINITY;
        for step in 1..=opt_budget.max(1) {
            let mut obj = 0.0;
            let mut g = vec![0.0; theta.len()];
            for (x, ti) in xs.iter().zip(&tau) {
                let (f, gf) = output_grad(skeleton, &theta, x)?;
                obj += ti * f;
                for (gi, gfi) in g.iter_mut().zip(&gf) {
                    *gi += ti * gfi;
                }
            }
            obj /= n as f64;
            best = best.max(obj);
            let eta = 0.5 * q.max(1.0) / (step as f64).sqrt();
            for (v, gi) in theta.values_mut().iter_mut().zip(&g) {
                *v += eta * gi / n as f64;
            }
            project_to_ball(skeleton, &mut theta, q, &projection)?;
        }
        Ok(best)
    });

    let mut values = Vec::with_capacity(trials);
    for r in results {
        values.push(r?);
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (trials as f64 - 1.0);
    Ok(RademacherOutcome {
        estimate: mean,
        stderr: (var / trials as f64).sqrt(),
        trials,
    })
}

/// The theorem's complexity bound `3 Q sqrt(2 log(2d) / n)`.
pub fn rademacher_theory_bound(q: f64, d: usize, n: usize) -> f64 {
    3.0 * q * (2.0 * (2.0 * d as f64).ln() / n as f64).sqrt()
}

/// Measured risks, norm, and bound values for one trained network.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub r_s: f64,
    pub r_d_hat: f64,
    pub path_norm: f64,
    pub aposteriori: f64,
    pub apriori: f64,
    pub delta: f64,
}
