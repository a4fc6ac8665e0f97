//! Finite-atom Barron targets, the Monte Carlo two-layer construction, and
//! the constructive embedding of a two-layer network into the block-chain
//! shortcut form.
//!
//! A target is a finite sum `f*(x) = sum_k c_k relu(w_k^T x)` together with
//! the importance-weighted atom distribution that certifies the Barron-norm
//! upper bound `B = sum_k |c_k| ||w_k||_1`: drawing atom `k` with mass
//! `|c_k| ||w_k||_1 / B` at rescaled amplitude `sign(c_k) B / ||w_k||_1`
//! reproduces `f*` in expectation exactly and has second moment `B^2`.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adjacency::relu;
use crate::builders::{BlockSpec, BuildError, DagAssembly, Mat, TwoLayerParams};
use crate::dag::{Edge, NonlinearDag, ParamVector};
use crate::par;

#[derive(Debug, Clone, Error)]
pub enum ApproxError {
    #[error("target carries zero Barron mass; nothing to sample")]
    EmptyTarget,
    #[error("acceptance events not satisfied after {attempts} draws; increase the retry budget")]
    RetriesExhausted { attempts: usize },
    #[error("block partition sums to {got}, expected the two-layer width {want}")]
    PartitionMismatch { got: usize, want: usize },
    #[error("input dimension {got} does not match the block spec's {want}")]
    DimMismatch { got: usize, want: usize },
    #[error("nonlinearity count must be at least 1")]
    NoNonlinearities,
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// One ridge atom `c * relu(w^T x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub c: f64,
    pub w: Vec<f64>,
}

impl Atom {
    fn mass(&self) -> f64 {
        self.c.abs() * l1(&self.w)
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// A Barron function given as finitely many atoms, with its certified norm
/// bound and the label map that places values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct BarronTarget {
    atoms: Vec<Atom>,
    barron_bound: f64,
    /// Cumulative atom masses, for sampling.
    cum_mass: Vec<f64>,
    /// Rescaled amplitude per atom: `sign(c) * B / ||w||_1`.
    amps: Vec<f64>,
    /// Labels are `label_shift + label_scale * f*(x)`.
    pub label_shift: f64,
    pub label_scale: f64,
}

impl BarronTarget {
    /// Wraps explicit atoms. Zero-mass atoms contribute nothing and are
    /// dropped. The label map is the identity whenever the value range
    /// already sits inside `[0, 1]`, otherwise the affine map onto it.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self, ApproxError> {
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.mass() > 0.0).collect();
        let bound: f64 = atoms.iter().map(|a| a.mass()).sum();
        if atoms.is_empty() || bound <= 0.0 {
            return Err(ApproxError::EmptyTarget);
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.mass();
            cum.push(acc);
        }
        let amps = atoms
            .iter()
            .map(|a| a.c.signum() * bound / l1(&a.w))
            .collect();
        // Per-sign range of f* over the unit cube.
        let lo: f64 = atoms.iter().filter(|a| a.c < 0.0).map(|a| -a.mass()).sum();
        let hi: f64 = atoms.iter().filter(|a| a.c > 0.0).map(|a| a.mass()).sum();
        let (label_shift, label_scale) = if lo >= 0.0 && hi <= 1.0 {
            (0.0, 1.0)
        } else {
            let scale = 1.0 / (hi - lo);
            (-lo * scale, scale)
        };
        Ok(BarronTarget {
            atoms,
            barron_bound: bound,
            cum_mass: cum,
            amps,
            label_shift,
            label_scale,
        })
    }

    /// Seeded random target: `atom_count` atoms whose directions have
    /// `sparsity` nonzero coordinates, amplitudes rescaled so the certified
    /// bound is one (hence `sup |f*| <= 1` on the cube).
    pub fn make(
        seed: u64,
        d: usize,
        atom_count: usize,
        sparsity: usize,
    ) -> Result<Self, ApproxError> {
        assert!(atom_count >= 1, "need at least one atom");
        assert!(d >= 1);
        let sparsity = sparsity.clamp(1, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms = Vec::with_capacity(atom_count);
        while atoms.len() < atom_count {
            let mut w = vec![0.0; d];
            for idx in index_sample(&mut rng, d, sparsity) {
                w[idx] = rng.gen_range(-1.0..1.0);
            }
            let c: f64 = rng.gen_range(-1.0..1.0);
            let atom = Atom { c, w };
            if atom.mass() > 1e-9 {
                atoms.push(atom);
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass()).sum();
        for a in &mut atoms {
            a.c /= total;
        }
        Self::from_atoms(atoms)
    }

    /// Nonnegative variant of [`make`](Self::make): amplitudes are folded to
    /// `|c|`, so `f*` maps the cube into `[0, 1]` and the label map is the
    /// identity. Suitable as a regression target for the bound experiments.
    pub fn make_nonnegative(
        seed: u64,
        d: usize,
        atom_count: usize,
        sparsity: usize,
    ) -> Result<Self, ApproxError> {
        let base = Self::make(seed, d, atom_count, sparsity)?;
        let atoms = base
            .atoms
            .into_iter()
            .map(|a| Atom { c: a.c.abs(), w: a.w })
            .collect();
        Self::from_atoms(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn input_dim(&self) -> usize {
        self.atoms[0].w.len()
    }

    /// Certified upper bound on the Barron norm.
    pub fn barron_bound(&self) -> f64 {
        self.barron_bound
    }

    /// The raw Barron function `f*(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            let mut dot = 0.0;
            for (wi, xi) in a.w.iter().zip(x) {
                dot += wi * xi;
            }
            acc += a.c * relu(dot);
        }
        acc
    }

    /// The `[0, 1]`-valued label function.
    pub fn label(&self, x: &[f64]) -> f64 {
        self.label_shift + self.label_scale * self.eval(x)
    }

    /// Draws one rescaled atom `(a, w)` from the certifying distribution.
    pub fn sample_atom(&self, rng: &mut ChaCha8Rng) -> (f64, &[f64]) {
        let u: f64 = rng.gen_range(0.0..self.barron_bound);
        let k = self.cum_mass.partition_point(|&c| c <= u);
        let k = k.min(self.atoms.len() - 1);
        (self.amps[k], &self.atoms[k].w)
    }

    /// Exact expectation of `a * relu(w^T x)` over the full discrete
    /// distribution; coincides with `eval` by construction.
    pub fn sampler_mean(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            let p = a.mass() / self.barron_bound;
            let mut dot = 0.0;
            for (wi, xi) in a.w.iter().zip(x) {
                dot += wi * xi;
            }
            acc += p * self.amps[k] * relu(dot);
        }
        acc
    }

    /// Second moment `E |a|^2 ||w||_1^2` of the certifying distribution;
    /// equals the squared bound.
    pub fn sampler_second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let p = a.mass() / self.barron_bound;
                // |amp| * ||w||_1 telescopes to the bound itself.
                p * self.barron_bound * self.barron_bound
            })
            .sum()
    }
}

/// Sampling budget for the Monte Carlo two-layer construction.
#[derive(Debug, Clone, Copy)]
pub struct MCBudget {
    /// Network width `m >= 1`.
    pub width: usize,
    /// Independent redraws before giving up.
    pub retries: usize,
    /// Monte Carlo sample count for the risk estimate.
    pub risk_mc_samples: usize,
}

impl MCBudget {
    pub fn new(width: usize) -> Self {
        MCBudget {
            width,
            retries: 200,
            risk_mc_samples: 20_000,
        }
    }
}

/// An accepted Monte Carlo draw.
#[derive(Debug, Clone)]
pub struct SampledTwoLayer {
    pub params: TwoLayerParams,
    /// Monte Carlo estimate of the population risk against the target.
    pub risk_estimate: f64,
    pub risk_stderr: f64,
    /// `sum_k |a_k| ||w_k||_1`, the path norm without the nonlinearity
    /// factor.
    pub weight_sum: f64,
    /// Draws consumed, including the accepted one.
    pub draws_used: usize,
}

pub(crate) fn eval_two_layer(p: &TwoLayerParams, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..p.w.rows() {
        let mut dot = 0.0;
        for j in 0..p.w.cols() {
            dot += p.w.at(k, j) * x[j];
        }
        acc += p.a[k] * relu(dot);
    }
    acc
}

const RISK_CHUNKS: usize = 64;

/// Monte Carlo estimate of `E_x 1/2 (f_m(x) - f*(x))^2` under the uniform
/// distribution on the cube, returning the mean and its standard error.
/// Sharded deterministically: chunk `c` draws from `shard_rng(seed, c)` and
/// the partial sums reduce in chunk order, so the estimate is identical
/// across thread counts and backends.
pub fn mc_risk(
    params: &TwoLayerParams,
    target: &BarronTarget,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(samples >= 2);
    let d = target.input_dim();
    let base = samples / RISK_CHUNKS;
    let extra = samples % RISK_CHUNKS;
    let partials = par::map_indexed(RISK_CHUNKS, |c| {
        let count = base + usize::from(c < extra);
        let mut rng = par::shard_rng(seed, c as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut x = vec![0.0; d];
        for _ in 0..count {
            for xi in x.iter_mut() {
                *xi = rng.gen::<f64>();
            }
            let diff = eval_two_layer(params, &x) - target.eval(&x);
            let loss = 0.5 * diff * diff;
            sum += loss;
            sumsq += loss * loss;
        }
        (sum, sumsq)
    });
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for (s, q) in partials {
        sum += s;
        sumsq += q;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sumsq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Draws `width` atoms i.i.d. from the target's certifying distribution and
/// accepts when both events hold: the estimated risk plus a two-standard-
/// error cushion stays below `3 B^2 / (2 m)`, and the weight sum stays
/// below `2 B`. Redraws up to the retry budget.
pub fn sample_two_layer(
    target: &BarronTarget,
    budget: &MCBudget,
    rng: &mut ChaCha8Rng,
) -> Result<SampledTwoLayer, ApproxError> {
    assert!(budget.width >= 1);
    let m = budget.width;
    let d = target.input_dim();
    let bound = target.barron_bound();
    let risk_threshold = 3.0 * bound * bound / (2.0 * m as f64);
    let attempts = budget.retries.max(1);
    for attempt in 1..=attempts {
        let mut w_data = Vec::with_capacity(m * d);
        let mut a = Vec::with_capacity(m);
        for _ in 0..m {
            let (amp, w) = target.sample_atom(rng);
            w_data.extend_from_slice(w);
            a.push(amp / m as f64);
        }
        let mc_seed: u64 = rng.gen();
        let params = TwoLayerParams {
            w: Mat::new(m, d, w_data).expect("dimensions by construction"),
            a,
        };
        let weight_sum: f64 = (0..m)
            .map(|k| {
                let row: f64 = (0..d).map(|j| params.w.at(k, j).abs()).sum();
                params.a[k].abs() * row
            })
            .sum();
        if weight_sum >= 2.0 * bound {
            continue;
        }
        let (est, stderr) = mc_risk(&params, target, budget.risk_mc_samples, mc_seed);
        if est + 2.0 * stderr < risk_threshold {
            return Ok(SampledTwoLayer {
                params,
                risk_estimate: est,
                risk_stderr: stderr,
                weight_sum,
                draws_used: attempt,
            });
        }
    }
    Err(ApproxError::RetriesExhausted { attempts })
}

/// Approximation-error bound `3 B^2 / (2 N_non)`.
pub fn approx_error_bound(barron_bound: f64, n_non: usize) -> Result<f64, ApproxError> {
    if n_non < 1 {
        return Err(ApproxError::NoNonlinearities);
    }
    Ok(3.0 * barron_bound * barron_bound / (2.0 * n_non as f64))
}

/// Distributes the `m` hidden units of a two-layer network across the blocks
/// of a shortcut-form chain: `V = [I; 0]`, each `W` block carries the
/// layer's unit directions padded with zeros, each `U` block carries the
/// amplitudes in its bottom row, and `u = (0, ..., 0, 1)` reads the
/// accumulator. Skip blocks relay the inputs in place and route the
/// accumulator to the last row; when the skip width does not grow this is
/// the plain stacked identity. The result computes the two-layer function
/// exactly and its path norm equals `3 sum_j |a_j| ||b_j||_1`.
pub fn embed_two_layer_into_blocks(
    two_layer: &TwoLayerParams,
    spec: &BlockSpec,
) -> Result<(NonlinearDag, ParamVector), ApproxError> {
    spec.check()?;
    let d = spec.input_dim;
    if two_layer.w.cols() != d {
        return Err(ApproxError::DimMismatch {
            got: two_layer.w.cols(),
            want: d,
        });
    }
    let m = two_layer.w.rows();
    let p_total: usize = spec.p_seq.iter().sum();
    if p_total != m {
        return Err(ApproxError::PartitionMismatch {
            got: p_total,
            want: m,
        });
    }

    let n = spec.node_count();
    let mut asm = DagAssembly::new();

    // V = [I_d; 0], a dense Param block.
    let mut v = Mat::zeros(spec.d_seq[0], d);
    for j in 0..d {
        v.set(j, j, 1.0);
    }
    asm.param_block(d + 1, 1, &v);

    let mut h_start = d + 1;
    let mut cursor = d + spec.d_seq[0];
    let mut unit = 0; // global hidden-unit index
    for l in 1..=spec.layers {
        let p = spec.p_seq[l - 1];
        let prev_w = spec.d_seq[l - 1];
        let cur_w = spec.d_seq[l];

        // W block: row r carries unit direction b^T padded with zeros.
        let mut w = Mat::zeros(p, prev_w);
        for r in 0..p {
            for j in 0..d {
                w.set(r, j, two_layer.w.at(unit + r, j));
            }
        }
        asm.param_block(cursor + 1, h_start, &w);
        asm.nonlinear_diag(cursor + p + 1, cursor + 1, p);

        let next_h = cursor + 2 * p + 1;
        // Skip relay: identity on all but the accumulator column, which
        // routes to the last row of the next block.
        for j in 0..prev_w {
            let row = if j + 1 == prev_w { cur_w - 1 } else { j };
            asm.edges.push(Edge::fixed(next_h + row, h_start + j, 1.0));
        }
        // U block: bottom row carries the layer's amplitudes.
        let mut u = Mat::zeros(cur_w, p);
        for r in 0..p {
            u.set(cur_w - 1, r, two_layer.a[unit + r]);
        }
        asm.param_block(next_h, cursor + p + 1, &u);

        unit += p;
        h_start = next_h;
        cursor += 2 * p + cur_w;
    }

    let d_last = spec.d_seq[spec.layers];
    let mut out = vec![0.0; d_last];
    out[d_last - 1] = 1.0;
    asm.param_block(n, h_start, &Mat::new(1, d_last, out).expect("shape"));

    Ok(asm.finish(n, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::forward_fixed_point;
    use crate::builders::{validate_shortcut_form, ShortcutForm};
    use crate::pathnorm::path_norm_neumann;

    fn unit_vec(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn single_atom_identity_target() {
        let t = BarronTarget::from_atoms(vec![Atom { c: 1.0, w: unit_vec(3, 0) }]).unwrap();
        assert_eq!(t.barron_bound(), 1.0);
        assert_eq!(t.eval(&[0.4, 0.9, 0.1]), 0.4);
        assert_eq!(t.label(&[0.4, 0.9, 0.1]), 0.4);
    }

    #[test]
    fn two_atom_bound() {
        let t = BarronTarget::from_atoms(vec![
            Atom { c: 0.5, w: unit_vec(2, 0) },
            Atom { c: -0.5, w: unit_vec(2, 1) },
        ])
        .unwrap();
        assert_eq!(t.barron_bound(), 1.0);
        // Mixed signs: values live in [-1/2, 1/2], so the label map shifts.
        assert_eq!(t.label_shift, 0.5);
        assert_eq!(t.label_scale, 1.0);
        let x = [1.0, 0.0];
        assert!((0.0..=1.0).contains(&t.label(&x)));
    }

    #[test]
    fn make_is_seed_deterministic() {
        let a = BarronTarget::make(42, 8, 8, 3).unwrap();
        let b = BarronTarget::make(42, 8, 8, 3).unwrap();
        assert_eq!(a.atoms(), b.atoms());
        let c = BarronTarget::make(43, 8, 8, 3).unwrap();
        assert_ne!(a.atoms(), c.atoms());
    }

    #[test]
    fn make_normalizes_bound_to_one() {
        let t = BarronTarget::make(7, 5, 6, 2).unwrap();
        assert!((t.barron_bound() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
            assert!(t.eval(&x).abs() <= 1.0 + 1e-12);
            assert!((0.0..=1.0).contains(&t.label(&x)));
        }
    }

    #[test]
    fn sampler_reproduces_target_exactly() {
        let t = BarronTarget::make(11, 6, 5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let f = t.eval(&x);
            let mean = t.sampler_mean(&x);
            assert!((f - mean).abs() <= 1e-12 * (1.0 + f.abs()));
        }
        let b2 = t.barron_bound() * t.barron_bound();
        assert!((t.sampler_second_moment() - b2).abs() <= 1e-12 * (1.0 + b2));
    }

    #[test]
    fn single_atom_width_one_draw_is_exact() {
        let t = BarronTarget::from_atoms(vec![Atom { c: 0.8, w: unit_vec(2, 1) }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let budget = MCBudget {
            width: 1,
            retries: 5,
            risk_mc_samples: 500,
        };
        let s = sample_two_layer(&t, &budget, &mut rng).unwrap();
        assert_eq!(s.risk_estimate, 0.0);
        assert_eq!(s.draws_used, 1);
        assert!(s.weight_sum < 2.0 * t.barron_bound());
    }

    #[test]
    fn accepted_draws_satisfy_both_events() {
        let t = BarronTarget::make(5, 4, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let budget = MCBudget {
            width: 16,
            retries: 100,
            risk_mc_samples: 4000,
        };
        let s = sample_two_layer(&t, &budget, &mut rng).unwrap();
        let b = t.barron_bound();
        assert!(s.risk_estimate <= 3.0 * b * b / (2.0 * 16.0));
        assert!(s.weight_sum < 2.0 * b);
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(approx_error_bound(1.0, 6).unwrap(), 0.25);
        assert_eq!(approx_error_bound(1.0, 12).unwrap(), 0.125);
        assert!(approx_error_bound(1.0, 0).is_err());
    }

    fn sample_params(seed: u64, d: usize, m: usize) -> TwoLayerParams {
        let t = BarronTarget::make(seed, d, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let budget = MCBudget {
            width: m,
            retries: 50,
            risk_mc_samples: 2000,
        };
        sample_two_layer(&t, &budget, &mut rng).unwrap().params
    }

    #[test]
    fn embedding_matches_two_layer_exactly() {
        let d = 3;
        let params = sample_params(21, d, 8);
        // Equal widths: plain stacked identities.
        let spec = BlockSpec::plain(d, vec![4, 4, 4], vec![4, 4]);
        let (dag, theta) = embed_two_layer_into_blocks(&params, &spec).unwrap();
        assert!(dag.validate().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let via_dag = forward_fixed_point(&dag, &theta, &x).unwrap().output;
            let direct = eval_two_layer(&params, &x);
            assert!((via_dag - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
        assert!(matches!(
            validate_shortcut_form(&dag),
            Ok(ShortcutForm::BlockChain(_))
        ));
    }

    #[test]
    fn embedding_with_growing_widths_routes_accumulator() {
        let d = 2;
        let params = sample_params(22, d, 6);
        let spec = BlockSpec::plain(d, vec![3, 4, 6], vec![3, 3]);
        let (dag, theta) = embed_two_layer_into_blocks(&params, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let via_dag = forward_fixed_point(&dag, &theta, &x).unwrap().output;
            let direct = eval_two_layer(&params, &x);
            assert!((via_dag - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
        assert!(matches!(
            validate_shortcut_form(&dag),
            Ok(ShortcutForm::BlockChain(_))
        ));
    }

    #[test]
    fn embedding_path_norm_identity() {
        let d = 3;
        let params = sample_params(23, d, 8);
        let spec = BlockSpec::plain(d, vec![4, 4, 4], vec![4, 4]);
        let (dag, theta) = embed_two_layer_into_blocks(&params, &spec).unwrap();
        let norm = path_norm_neumann(&dag, &theta).unwrap().value;
        let direct: f64 = (0..8)
            .map(|k| {
                let row: f64 = (0..d).map(|j| params.w.at(k, j).abs()).sum();
                3.0 * params.a[k].abs() * row
            })
            .sum();
        assert!((norm - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn embedding_rejects_bad_partition() {
        let params = sample_params(24, 2, 6);
        let spec = BlockSpec::plain(2, vec![3, 3], vec![5]);
        assert!(matches!(
            embed_two_layer_into_blocks(&params, &spec),
            Err(ApproxError::PartitionMismatch { got: 5, want: 6 })
        ));
    }

    #[test]
    fn mc_risk_is_repeatable() {
        let t = BarronTarget::make(9, 4, 4, 2).unwrap();
        let params = sample_params(25, 4, 4);
        let (a, sa) = mc_risk(&params, &t, 5000, 77);
        let (b, sb) = mc_risk(&params, &t, 5000, 77);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
