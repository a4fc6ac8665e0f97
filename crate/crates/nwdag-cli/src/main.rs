//! `nwdag`: build, inspect, and run experiments on nonlinear weighted DAGs.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors. All
//! randomness flows from explicit `--seed` flags; identical invocations
//! produce byte-identical CSV output. `NWDAG_THREADS` caps worker
//! parallelism (default: machine parallelism).

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nwdag::adjacency::{forward_fixed_point, nilpotency_index};
use nwdag::builders::{
    build_densenet, build_fc, build_resnet, build_two_layer, DenseNetParams, FcParams, Mat,
    ResNetParams, TwoLayerParams,
};
use nwdag::experiments::{
    run_approx_rate, run_gen_gap_trial, run_rademacher_cell, ApproxRateConfig, ApproxRateRow,
    BoundRow, GenGapConfig, GenGapRow, RademacherCellConfig, RademacherRow, Regularization,
    SkeletonSpec,
};
use nwdag::io::{load_dag, save_dag};
use nwdag::learn::{
    aposteriori_bound, apriori_bound, init_params, lambda0_threshold, InitScheme,
};
use nwdag::pathnorm::{path_norm_enumerate, path_norm_neumann, PathNormError, DEFAULT_MAX_PATHS};
use nwdag::{NonlinearDag, ParamVector};

#[derive(Parser)]
#[command(name = "nwdag", version, about = "Nonlinear weighted DAG toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an architecture and write it in the interchange format.
    Build(BuildArgs),
    /// Check a DAG file against the structural invariants.
    Validate(FileArg),
    /// Weighted path norm by both methods, with the agreement delta.
    Pathnorm(PathnormArgs),
    /// Evaluate the network on one input by fixed-point iteration.
    Forward(ForwardArgs),
    /// Monte Carlo two-layer approximation sweep over widths.
    Approx(ApproxArgs),
    /// Train on a seeded Barron-target dataset and report risks and bounds.
    Train(TrainArgs),
    /// Estimate empirical Rademacher complexity on a two-layer skeleton.
    Rademacher(RademacherArgs),
    /// Evaluate the a posteriori / a priori bound displays.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct FileArg {
    /// Input DAG file.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    /// Architecture: two_layer, fc, resnet, or densenet.
    #[arg(long)]
    arch: String,
    /// Comma-separated dimensions: two_layer d,m; fc m0,...,mL;
    /// resnet d,D,m,L; densenet d,k0,k,m,L.
    #[arg(long)]
    dims: String,
    /// Weight init: zero, scaled, or uniform:<lo>:<hi>.
    #[arg(long, default_value = "scaled")]
    init: String,
    #[arg(long)]
    seed: u64,
    /// Output DAG file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PathnormArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Path budget for the enumeration method.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: u64,
}

#[derive(Args)]
struct ForwardArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Comma-separated input coordinates.
    #[arg(long)]
    x: String,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    atoms: usize,
    /// Comma-separated widths, e.g. 8,16,32,64,128,256,512.
    #[arg(long)]
    widths: String,
    #[arg(long)]
    seed: u64,
    /// Nonzero coordinates per atom direction (default: half of d).
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long, default_value_t = 200)]
    retries: usize,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    /// Append CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Architecture: two_layer, fc, resnet, or densenet.
    #[arg(long)]
    arch: String,
    /// Comma-separated dimensions (see `build`).
    #[arg(long)]
    dims: String,
    /// Training sample count.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Trials; trial t uses seed+t.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Regularization: none, auto, or an explicit lambda0 value.
    #[arg(long, default_value = "none")]
    lambda0: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    /// Held-out Monte Carlo points for the population-risk estimate.
    #[arg(long, default_value_t = 20_000)]
    heldout: usize,
    #[arg(long, default_value_t = 9000)]
    target_seed: u64,
    #[arg(long, default_value_t = 8)]
    target_atoms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RademacherArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Comma-separated path-norm radii.
    #[arg(long)]
    q: String,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    trials: usize,
    #[arg(long, default_value_t = 60)]
    opt_steps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct BoundKind {
    /// Evaluate the a posteriori display (needs --pathnorm).
    #[arg(long)]
    aposteriori: bool,
    /// Evaluate the a priori display (needs --nnon, --barron, --lambda0).
    #[arg(long)]
    apriori: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    kind: BoundKind,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    pathnorm: Option<f64>,
    #[arg(long)]
    nnon: Option<usize>,
    #[arg(long)]
    barron: Option<f64>,
    /// `auto` for the admissible threshold, or an explicit value.
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("NWDAG_THREADS") {
        match v.parse::<usize>() {
            Ok(n) => {
                // Ignore failures from a pool that is already running.
                let _ = nwdag::par::set_max_threads(n);
            }
            Err(_) => {
                eprintln!("warning: NWDAG_THREADS is not an integer; ignoring");
            }
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Build(args) => build_cmd(args),
        Cmd::Validate(args) => validate_cmd(args),
        Cmd::Pathnorm(args) => pathnorm_cmd(args),
        Cmd::Forward(args) => forward_cmd(args),
        Cmd::Approx(args) => approx_cmd(args),
        Cmd::Train(args) => train_cmd(args),
        Cmd::Rademacher(args) => rademacher_cmd(args),
        Cmd::Bounds(args) => bounds_cmd(args),
    }
}

fn parse_usizes(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad {what} entry `{t}`"))
        })
        .collect()
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad {what} entry `{t}`"))
        })
        .collect()
}

fn parse_init(s: &str) -> Result<InitScheme> {
    match s {
        "zero" => Ok(InitScheme::Zero),
        "scaled" => Ok(InitScheme::ScaledFanIn),
        other => {
            let body = other
                .strip_prefix("uniform")
                .ok_or_else(|| anyhow!("unknown init scheme `{other}`"))?;
            let parts: Vec<&str> = body
                .trim_matches(|c| c == '(' || c == ')' || c == ':')
                .split([':', ','])
                .collect();
            if parts.len() != 2 {
                bail!("expected uniform:<lo>:<hi>");
            }
            let lo: f64 = parts[0].parse().context("bad uniform lower bound")?;
            let hi: f64 = parts[1].parse().context("bad uniform upper bound")?;
            if !(lo < hi) {
                bail!("uniform bounds must satisfy lo < hi");
            }
            Ok(InitScheme::Uniform { lo, hi })
        }
    }
}

fn parse_skeleton(arch: &str, dims: &[usize]) -> Result<SkeletonSpec> {
    match arch {
        "two_layer" => {
            if dims.len() != 2 {
                bail!("two_layer expects dims d,m");
            }
            Ok(SkeletonSpec::TwoLayer { d: dims[0], m: dims[1] })
        }
        "fc" => {
            if dims.len() < 2 {
                bail!("fc expects dims m0,...,mL with at least one layer");
            }
            Ok(SkeletonSpec::Fc { dims: dims.to_vec() })
        }
        "resnet" => {
            if dims.len() != 4 {
                bail!("resnet expects dims d,D,m,L");
            }
            Ok(SkeletonSpec::ResNet {
                d: dims[0],
                skip: dims[1],
                m: dims[2],
                layers: dims[3],
            })
        }
        "densenet" => {
            if dims.len() != 5 {
                bail!("densenet expects dims d,k0,k,m,L");
            }
            Ok(SkeletonSpec::DenseNet {
                d: dims[0],
                k0: dims[1],
                growth: dims[2],
                m: dims[3],
                layers: dims[4],
            })
        }
        other => bail!("unknown architecture `{other}`"),
    }
}

/// Writes header + rows to stdout, or appends to a file (header only when
/// the file starts empty).
fn emit_csv(out: &Option<PathBuf>, header: &str, rows: &[String]) -> Result<()> {
    match out {
        None => {
            println!("{header}");
            for r in rows {
                println!("{r}");
            }
        }
        Some(path) => {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("cannot open {}", path.display()))?;
            if file.metadata()?.len() == 0 {
                writeln!(file, "{header}")?;
            }
            for r in rows {
                writeln!(file, "{r}")?;
            }
        }
    }
    Ok(())
}

fn load_valid(path: &PathBuf) -> Result<(NonlinearDag, ParamVector)> {
    let (dag, theta) = load_dag(path)?;
    let violations = dag.validate();
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("invalid dag in {}: {}", path.display(), msgs.join("; "));
    }
    Ok((dag, theta))
}

fn build_cmd(args: BuildArgs) -> Result<ExitCode> {
    use rand::SeedableRng;
    let dims = parse_usizes(&args.dims, "dims")?;
    let skeleton = parse_skeleton(&args.arch, &dims)?;
    let (dag, _) = match &skeleton {
        SkeletonSpec::TwoLayer { d, m } => build_two_layer(
            *d,
            *m,
            &TwoLayerParams {
                w: Mat::zeros(*m, *d),
                a: vec![0.0; *m],
            },
        )?,
        SkeletonSpec::Fc { dims } => {
            let layers = dims.len() - 1;
            build_fc(
                dims,
                &FcParams {
                    ws: (0..layers).map(|l| Mat::zeros(dims[l + 1], dims[l])).collect(),
                    u: vec![0.0; dims[layers]],
                },
            )?
        }
        SkeletonSpec::ResNet { d, skip, m, layers } => build_resnet(
            *d,
            *skip,
            *m,
            *layers,
            &ResNetParams {
                v: Mat::zeros(*skip, *d),
                ws: (0..*layers).map(|_| Mat::zeros(*m, *skip)).collect(),
                us: (0..*layers).map(|_| Mat::zeros(*skip, *m)).collect(),
                u: vec![0.0; *skip],
            },
        )?,
        SkeletonSpec::DenseNet { d, k0, growth, m, layers } => build_densenet(
            *d,
            *k0,
            *growth,
            *m,
            *layers,
            &DenseNetParams {
                v: Mat::zeros(*k0, *d),
                ws: (1..=*layers)
                    .map(|l| Mat::zeros(l * m, k0 + (l - 1) * growth))
                    .collect(),
                us: (1..=*layers).map(|l| Mat::zeros(*growth, l * m)).collect(),
                u: vec![0.0; k0 + layers * growth],
            },
        )?,
    };
    let scheme = parse_init(&args.init)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let theta = init_params(&dag, scheme, &mut rng);
    save_dag(&args.out, &dag, &theta)?;
    println!(
        "wrote {} ({} nodes, {} params)",
        args.out.display(),
        dag.node_count(),
        theta.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn validate_cmd(args: FileArg) -> Result<ExitCode> {
    let (dag, _) = load_dag(&args.input)?;
    let violations = dag.validate();
    if violations.is_empty() {
        println!("valid");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            println!("{v}");
        }
        Ok(ExitCode::from(1))
    }
}

fn pathnorm_cmd(args: PathnormArgs) -> Result<ExitCode> {
    let (dag, theta) = load_valid(&args.input)?;
    let neumann = path_norm_neumann(&dag, &theta)?;
    println!(
        "neumann: {} (terms: {})",
        neumann.value,
        neumann.terms.unwrap_or(0)
    );
    match path_norm_enumerate(&dag, &theta, args.max_paths) {
        Ok(enm) => {
            println!(
                "enumeration: {} (paths: {})",
                enm.value,
                enm.paths_counted.unwrap_or(0)
            );
            println!("delta: {:e}", (enm.value - neumann.value).abs());
        }
        Err(PathNormError::BudgetExceeded { budget }) => {
            println!("enumeration: skipped, more than {budget} paths");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn forward_cmd(args: ForwardArgs) -> Result<ExitCode> {
    let (dag, theta) = load_valid(&args.input)?;
    let x = parse_floats(&args.x, "x")?;
    let run = forward_fixed_point(&dag, &theta, &x)?;
    println!("output: {}", run.output);
    println!(
        "steps: {} (nilpotency index {})",
        run.steps,
        nilpotency_index(&dag)
    );
    Ok(ExitCode::SUCCESS)
}

fn approx_cmd(args: ApproxArgs) -> Result<ExitCode> {
    let widths = parse_usizes(&args.widths, "widths")?;
    let cfg = ApproxRateConfig {
        seed: args.seed,
        d: args.d,
        atoms: args.atoms,
        sparsity: args.sparsity.unwrap_or_else(|| args.d.div_ceil(2)),
        widths,
        retries: args.retries,
        risk_mc_samples: args.mc_samples,
    };
    let rows = run_approx_rate(&cfg)?;
    let lines: Vec<String> = rows.iter().map(|r| r.to_csv()).collect();
    emit_csv(&args.out, ApproxRateRow::HEADER, &lines)?;
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(args: TrainArgs) -> Result<ExitCode> {
    let dims = parse_usizes(&args.dims, "dims")?;
    let skeleton = parse_skeleton(&args.arch, &dims)?;
    let regularization = match args.lambda0.as_str() {
        "none" => Regularization::None,
        "auto" => Regularization::Lambda0Auto,
        other => Regularization::Lambda0(
            other
                .parse::<f64>()
                .with_context(|| format!("bad lambda0 `{other}`"))?,
        ),
    };
    let mut lines = Vec::with_capacity(args.trials);
    for t in 0..args.trials.max(1) {
        let cfg = GenGapConfig {
            seed: args.seed + t as u64,
            skeleton: skeleton.clone(),
            n: args.n,
            delta: args.delta,
            regularization,
            target_seed: args.target_seed,
            target_atoms: args.target_atoms,
            target_sparsity: skeleton.input_dim().div_ceil(2),
            heldout: args.heldout,
            epochs: args.epochs,
            batch: args.batch,
            step_size: args.step,
        };
        lines.push(run_gen_gap_trial(&cfg)?.to_csv());
    }
    emit_csv(&args.out, GenGapRow::HEADER, &lines)?;
    Ok(ExitCode::SUCCESS)
}

fn rademacher_cmd(args: RademacherArgs) -> Result<ExitCode> {
    let qs = parse_floats(&args.q, "q")?;
    let mut lines = Vec::with_capacity(qs.len());
    for q in qs {
        let cfg = RademacherCellConfig {
            seed: args.seed,
            d: args.d,
            n: args.n,
            q,
            width: args.width,
            trials: args.trials,
            opt_budget: args.opt_steps,
        };
        lines.push(run_rademacher_cell(&cfg)?.to_csv());
    }
    emit_csv(&args.out, RademacherRow::HEADER, &lines)?;
    Ok(ExitCode::SUCCESS)
}

fn bounds_cmd(args: BoundsArgs) -> Result<ExitCode> {
    let row = if args.kind.aposteriori {
        let pn = args
            .pathnorm
            .ok_or_else(|| anyhow!("--aposteriori requires --pathnorm"))?;
        BoundRow {
            kind: "aposteriori",
            d: args.d,
            n: args.n,
            n_non: None,
            barron: None,
            lambda0: None,
            path_norm: Some(pn),
            delta: args.delta,
            value: aposteriori_bound(pn, args.n, args.d, args.delta)?,
        }
    } else {
        let n_non = args.nnon.ok_or_else(|| anyhow!("--apriori requires --nnon"))?;
        let barron = args
            .barron
            .ok_or_else(|| anyhow!("--apriori requires --barron"))?;
        let lambda0 = match args.lambda0.as_deref() {
            Some("auto") | None => lambda0_threshold(args.d),
            Some(other) => other
                .parse::<f64>()
                .with_context(|| format!("bad lambda0 `{other}`"))?,
        };
        BoundRow {
            kind: "apriori",
            d: args.d,
            n: args.n,
            n_non: Some(n_non),
            barron: Some(barron),
            lambda0: Some(lambda0),
            path_norm: None,
            delta: args.delta,
            value: apriori_bound(barron, n_non, args.n, args.d, lambda0, args.delta)?,
        }
    };
    emit_csv(&args.out, BoundRow::HEADER, &[row.to_csv()])?;
    Ok(ExitCode::SUCCESS)
}
