//! Seeded experiment runners with stable CSV schemas.
//!
//! Every runner is a pure function of its config: identical configs produce
//! byte-identical CSV rows regardless of thread count or the parallel
//! backend. The CLI wraps these; the acceptance suite drives them directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::approx::{
    approx_error_bound, sample_two_layer, ApproxError, BarronTarget, MCBudget,
};
use crate::builders::{
    build_densenet, build_fc, build_resnet, build_two_layer, BuildError, DenseNetParams,
    FcParams, Mat, ResNetParams, TwoLayerParams,
};
use crate::dag::{NonlinearDag, ParamVector};
use crate::learn::{
    aposteriori_bound, apriori_bound, empirical_risk, lambda0_threshold, lambda_from_lambda0,
    population_risk_mc, rademacher_estimate, rademacher_theory_bound, train_regularized,
    Dataset, InitScheme, LearnError, RiskReport, TrainConfig, TrainMode,
};
use crate::par;
use crate::pathnorm::path_norm_neumann;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Build(#[from] crate::builders::BuildError),
    #[error(transparent)]
    Bound(#[from] crate::learn::BoundError),
    #[error(transparent)]
    PathNorm(#[from] crate::pathnorm::PathNormError),
    #[error(transparent)]
    Data(#[from] crate::learn::DataError),
    #[error(transparent)]
    Eval(#[from] crate::adjacency::EvalError),
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in logs {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

// ---------------------------------------------------------------------------
// Approximation rate

#[derive(Debug, Clone)]
pub struct ApproxRateConfig {
    pub seed: u64,
    pub d: usize,
    pub atoms: usize,
    pub sparsity: usize,
    pub widths: Vec<usize>,
    pub retries: usize,
    pub risk_mc_samples: usize,
}

impl ApproxRateConfig {
    pub fn new(seed: u64, d: usize, atoms: usize, widths: Vec<usize>) -> Self {
        ApproxRateConfig {
            seed,
            d,
            atoms,
            sparsity: d.div_ceil(2),
            widths,
            retries: 200,
            risk_mc_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxRateRow {
    pub seed: u64,
    pub d: usize,
    pub atoms: usize,
    pub m: usize,
    pub accepted_risk: f64,
    pub bound: f64,
    pub path_norm: f64,
    pub retries: usize,
}

impl ApproxRateRow {
    pub const HEADER: &'static str = "seed,d,atoms,m,accepted_risk,bound,path_norm,retries";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.d,
            self.atoms,
            self.m,
            self.accepted_risk,
            self.bound,
            self.path_norm,
            self.retries
        )
    }
}

/// Samples one accepted two-layer network per width from the seeded target
/// and records its risk estimate, the width bound, and the realized path
/// norm of the built DAG.
pub fn run_approx_rate(cfg: &ApproxRateConfig) -> Result<Vec<ApproxRateRow>, ExperimentError> {
    let target = BarronTarget::make(cfg.seed, cfg.d, cfg.atoms, cfg.sparsity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut rows = Vec::with_capacity(cfg.widths.len());
    for &m in &cfg.widths {
        let budget = MCBudget {
            width: m,
            retries: cfg.retries,
            risk_mc_samples: cfg.risk_mc_samples,
        };
        let sampled = sample_two_layer(&target, &budget, &mut rng)?;
        let (dag, theta) = build_two_layer(cfg.d, m, &sampled.params)?;
        let path_norm = path_norm_neumann(&dag, &theta)?.value;
        rows.push(ApproxRateRow {
            seed: cfg.seed,
            d: cfg.d,
            atoms: cfg.atoms,
            m,
            accepted_risk: sampled.risk_estimate,
            bound: approx_error_bound(target.barron_bound(), m)?,
            path_norm,
            retries: sampled.draws_used,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Rademacher complexity grid

#[derive(Debug, Clone)]
pub struct RademacherCellConfig {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub q: f64,
    pub width: usize,
    pub trials: usize,
    pub opt_budget: usize,
}

#[derive(Debug, Clone)]
pub struct RademacherRow {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub q: f64,
    pub width: usize,
    pub trials: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub theory_bound: f64,
}

impl RademacherRow {
    pub const HEADER: &'static str = "seed,d,n,q,width,trials,estimate,stderr,theory_bound";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.d,
            self.n,
            self.q,
            self.width,
            self.trials,
            self.estimate,
            self.stderr,
            self.theory_bound
        )
    }
}

/// Rademacher estimate on a two-layer skeleton over freshly drawn uniform
/// sample points.
pub fn run_rademacher_cell(cfg: &RademacherCellConfig) -> Result<RademacherRow, ExperimentError> {
    use rand::Rng;
    let mut rng = par::shard_rng(cfg.seed, 0xdada);
    let xs: Vec<Vec<f64>> = (0..cfg.n)
        .map(|_| (0..cfg.d).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let params = TwoLayerParams {
        w: Mat::zeros(cfg.width, cfg.d),
        a: vec![0.0; cfg.width],
    };
    let (skeleton, _) = build_two_layer(cfg.d, cfg.width, &params)?;
    let out = rademacher_estimate(&xs, &skeleton, cfg.q, cfg.trials, cfg.opt_budget, cfg.seed)?;
    Ok(RademacherRow {
        seed: cfg.seed,
        d: cfg.d,
        n: cfg.n,
        q: cfg.q,
        width: cfg.width,
        trials: cfg.trials,
        estimate: out.estimate,
        stderr: out.stderr,
        theory_bound: rademacher_theory_bound(cfg.q, cfg.d, cfg.n),
    })
}

// ---------------------------------------------------------------------------
// Generalization-gap trials

/// Architecture skeleton by dimensions only; weights start at zero and the
/// trainer initializes them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkeletonSpec {
    TwoLayer { d: usize, m: usize },
    Fc { dims: Vec<usize> },
    ResNet { d: usize, skip: usize, m: usize, layers: usize },
    DenseNet { d: usize, k0: usize, growth: usize, m: usize, layers: usize },
}

impl SkeletonSpec {
    pub fn arch_tag(&self) -> &'static str {
        match self {
            SkeletonSpec::TwoLayer { .. } => "two_layer",
            SkeletonSpec::Fc { .. } => "fc",
            SkeletonSpec::ResNet { .. } => "resnet",
            SkeletonSpec::DenseNet { .. } => "densenet",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SkeletonSpec::TwoLayer { d, .. } => *d,
            SkeletonSpec::Fc { dims } => dims[0],
            SkeletonSpec::ResNet { d, .. } => *d,
            SkeletonSpec::DenseNet { d, .. } => *d,
        }
    }

    /// Colon-separated dims, in the same order the CLI accepts them.
    pub fn dims_string(&self) -> String {
        let parts: Vec<usize> = match self {
            SkeletonSpec::TwoLayer { d, m } => vec![*d, *m],
            SkeletonSpec::Fc { dims } => dims.clone(),
            SkeletonSpec::ResNet { d, skip, m, layers } => vec![*d, *skip, *m, *layers],
            SkeletonSpec::DenseNet { d, k0, growth, m, layers } => {
                vec![*d, *k0, *growth, *m, *layers]
            }
        };
        parts
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(":")
    }

    /// Builds the skeleton with all trainable weights at zero.
    pub fn build_zeroed(&self) -> Result<(NonlinearDag, ParamVector), BuildError> {
        match self {
            SkeletonSpec::TwoLayer { d, m } => {
                let params = TwoLayerParams {
                    w: Mat::zeros(*m, *d),
                    a: vec![0.0; *m],
                };
                build_two_layer(*d, *m, &params)
            }
            SkeletonSpec::Fc { dims } => {
                let layers = dims.len().saturating_sub(1);
                let params = FcParams {
                    ws: (0..layers).map(|l| Mat::zeros(dims[l + 1], dims[l])).collect(),
                    u: vec![0.0; *dims.last().unwrap_or(&0)],
                };
                build_fc(dims, &params)
            }
            SkeletonSpec::ResNet { d, skip, m, layers } => {
                let params = ResNetParams {
                    v: Mat::zeros(*skip, *d),
                    ws: (0..*layers).map(|_| Mat::zeros(*m, *skip)).collect(),
                    us: (0..*layers).map(|_| Mat::zeros(*skip, *m)).collect(),
                    u: vec![0.0; *skip],
                };
                build_resnet(*d, *skip, *m, *layers, &params)
            }
            SkeletonSpec::DenseNet { d, k0, growth, m, layers } => {
                let params = DenseNetParams {
                    v: Mat::zeros(*k0, *d),
                    ws: (1..=*layers)
                        .map(|l| Mat::zeros(l * m, k0 + (l - 1) * growth))
                        .collect(),
                    us: (1..=*layers).map(|l| Mat::zeros(*growth, l * m)).collect(),
                    u: vec![0.0; k0 + layers * growth],
                };
                build_densenet(*d, *k0, *growth, *m, *layers, &params)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Train with lambda = 0.
    None,
    /// Train with lambda0 at the admissible threshold.
    Lambda0Auto,
    /// Train with an explicit lambda0 (at or above the threshold).
    Lambda0(f64),
}

#[derive(Debug, Clone)]
pub struct GenGapConfig {
    pub seed: u64,
    pub skeleton: SkeletonSpec,
    pub n: usize,
    pub delta: f64,
    pub regularization: Regularization,
    pub target_seed: u64,
    pub target_atoms: usize,
    pub target_sparsity: usize,
    pub heldout: usize,
    pub epochs: usize,
    pub batch: usize,
    pub step_size: f64,
}

impl GenGapConfig {
    /// The DenseNet bound-verification setup at its defaults.
    pub fn densenet(
        seed: u64,
        d: usize,
        k0: usize,
        growth: usize,
        m: usize,
        layers: usize,
        n: usize,
    ) -> Self {
        GenGapConfig {
            seed,
            skeleton: SkeletonSpec::DenseNet { d, k0, growth, m, layers },
            n,
            delta: 0.1,
            regularization: Regularization::None,
            target_seed: 9000,
            target_atoms: 8,
            target_sparsity: d.div_ceil(2),
            heldout: 20_000,
            epochs: 60,
            batch: 32,
            step_size: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenGapRow {
    pub seed: u64,
    pub arch: &'static str,
    /// `d:k0:k:m:L`.
    pub dims: String,
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub report: RiskReport,
}

impl GenGapRow {
    pub const HEADER: &'static str =
        "seed,arch,dims,n,d,lambda,r_s,r_d_hat,path_norm,apost_bound,apri_bound,delta";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.arch,
            self.dims,
            self.n,
            self.d,
            self.lambda,
            self.report.r_s,
            self.report.r_d_hat,
            self.report.path_norm,
            self.report.aposteriori,
            self.report.apriori,
            self.report.delta
        )
    }
}

/// Draws a dataset from a nonnegative Barron target, trains the skeleton on
/// it, and reports the measured risks next to both bound values.
pub fn run_gen_gap_trial(cfg: &GenGapConfig) -> Result<GenGapRow, ExperimentError> {
    let d = cfg.skeleton.input_dim();
    let target = BarronTarget::make_nonnegative(
        cfg.target_seed,
        d,
        cfg.target_atoms,
        cfg.target_sparsity,
    )?;
    let data = Dataset::from_target(&target, cfg.n, cfg.seed.wrapping_add(0xda7a))?;
    let (dag, _) = cfg.skeleton.build_zeroed()?;

    let lambda0 = match cfg.regularization {
        Regularization::None | Regularization::Lambda0Auto => lambda0_threshold(d),
        Regularization::Lambda0(v) => v,
    };
    let lambda = match cfg.regularization {
        Regularization::None => 0.0,
        _ => lambda_from_lambda0(lambda0, d),
    };

    let config = TrainConfig {
        lambda,
        epochs: cfg.epochs,
        step_size: cfg.step_size,
        mode: TrainMode::MiniBatch { batch_size: cfg.batch },
        seed: cfg.seed,
        init: InitScheme::ScaledFanIn,
    };
    let outcome = train_regularized(&dag, &data, &config)?;

    let r_s = empirical_risk(&dag, &outcome.theta, &data)?;
    let path_norm = path_norm_neumann(&dag, &outcome.theta)?.value;
    let (r_d_hat, _) = population_risk_mc(
        &dag,
        &outcome.theta,
        &target,
        cfg.heldout,
        cfg.seed.wrapping_add(0x4e1d),
    )?;
    let n_non = crate::pathnorm::edge_counts(&dag).n_non;
    let aposteriori = aposteriori_bound(path_norm, cfg.n, d, cfg.delta)?;
    let apriori = apriori_bound(
        target.barron_bound(),
        n_non,
        cfg.n,
        d,
        lambda0.max(lambda0_threshold(d)),
        cfg.delta,
    )?;

    Ok(GenGapRow {
        seed: cfg.seed,
        arch: cfg.skeleton.arch_tag(),
        dims: cfg.skeleton.dims_string(),
        n: cfg.n,
        d,
        lambda,
        report: RiskReport {
            r_s,
            r_d_hat,
            path_norm,
            aposteriori,
            apriori,
            delta: cfg.delta,
        },
    })
}

/// One `bounds` subcommand evaluation, serialized with its full config.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub kind: &'static str,
    pub d: usize,
    pub n: usize,
    pub n_non: Option<usize>,
    pub barron: Option<f64>,
    pub lambda0: Option<f64>,
    pub path_norm: Option<f64>,
    pub delta: f64,
    pub value: f64,
}

impl BoundRow {
    pub const HEADER: &'static str = "kind,d,n,nnon,barron,lambda0,pathnorm,delta,value";

    pub fn to_csv(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.d,
            self.n,
            opt(&self.n_non),
            opt(&self.barron),
            opt(&self.lambda0),
            opt(&self.path_norm),
            self.delta,
            self.value
        )
    }
}
