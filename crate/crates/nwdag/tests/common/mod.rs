//! Shared helpers for the integration suites: seeded random valid DAGs with
//! mixed edge kinds, and random inputs.

use nwdag::dag::{Edge, EdgeKind, NonlinearDag, ParamVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random valid DAG: every non-source node has at least one incoming edge,
/// so the sink is always reachable. With `respect_input` every edge leaving
/// a source is trainable.
pub fn random_dag(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    respect_input: bool,
) -> (NonlinearDag, ParamVector) {
    assert!(max_n >= 3);
    let d = rng.gen_range(1..=3.min(max_n - 2));
    let n = rng.gen_range((d + 1)..=max_n);
    let mut edges = Vec::new();
    for i in (d + 1)..=n {
        let avail = i - 1;
        let count = rng.gen_range(1..=avail.min(3));
        for s in rand::seq::index::sample(rng, avail, count) {
            let src = s + 1;
            let kind = if src <= d && respect_input {
                EdgeKind::Param
            } else {
                match rng.gen_range(0..10) {
                    0..=5 => EdgeKind::Param,
                    6 | 7 => EdgeKind::Fixed,
                    _ => EdgeKind::Nonlinear,
                }
            };
            edges.push(match kind {
                EdgeKind::Param => Edge::param(i, src, rng.gen_range(-1.5..1.5)),
                EdgeKind::Fixed => Edge::fixed(i, src, rng.gen_range(-1.5..1.5)),
                EdgeKind::Nonlinear => Edge::nonlinear(i, src),
            });
        }
    }
    let dag = NonlinearDag::new(n, d, edges).expect("generator emits valid dags");
    let theta = dag.stored_params();
    (dag, theta)
}

pub fn random_x(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(lo..hi)).collect()
}
