//! Masking oracle and a seeded equivalence suite for the sparse kernels.
//!
//! The oracle runs plain softmax attention with dropped scores set to
//! negative infinity, so it shares no selection or renormalisation code with
//! the kernels it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{block_topk_attention, dense_attention, local_attention, topk_attention, AttnOutput, AttnProblem, Matrix};

/// Dense attention with `keep[i] == false` scores replaced by `-inf`.
pub fn masked_attention(p: &AttnProblem, keep: &[bool]) -> Matrix {
    let (g, n, dv) = (p.group_size(), p.num_tokens(), p.values().cols());
    let mut data = vec![0.0; g * dv];
    for q in 0..g {
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                if keep[i] {
                    p.queries().row(q).iter().zip(p.keys().row(i)).map(|(a, b)| a * b).sum::<f64>() * p.scale()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (i, e) in exps.iter().enumerate() {
            for j in 0..dv {
                data[q * dv + j] += e / z * p.values().get(i, j);
            }
        }
    }
    Matrix::new(g, dv, data).expect("shape is g x dv by construction")
}

/// `|a - b| / max(|a|, |b|, 1)`, maximised over entries.
pub fn max_rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub max_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub seed: u64,
    pub instances: usize,
    pub tolerance: f64,
    pub properties: Vec<PropertyResult>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failures == 0)
    }
}

pub const TOLERANCE: f64 = 1e-6;

struct Tally {
    results: Vec<PropertyResult>,
}

impl Tally {
    fn record(&mut self, name: &'static str, err: f64) {
        let slot = match self.results.iter().position(|r| r.name == name) {
            Some(i) => &mut self.results[i],
            None => {
                self.results.push(PropertyResult {
                    name,
                    max_error: 0.0,
                    failures: 0,
                });
                self.results.last_mut().expect("just pushed")
            }
        };
        slot.max_error = slot.max_error.max(err);
        if !(err <= TOLERANCE) {
            slot.failures += 1;
        }
    }

    fn flag(&mut self, name: &'static str, ok: bool) {
        self.record(name, if ok { 0.0 } else { f64::INFINITY });
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::new(rows, cols, data).expect("sized by construction")
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> AttnProblem {
    let n = rng.gen_range(1..=64);
    let d = rng.gen_range(1..=16);
    let g = rng.gen_range(1..=4);
    let q = random_matrix(rng, g, d);
    let k = random_matrix(rng, n, d);
    let v = random_matrix(rng, n, d);
    AttnProblem::new(q, k, v).expect("random problem is valid")
}

fn mask_of(out: &AttnOutput, n: usize) -> Vec<bool> {
    let mut keep = vec![false; n];
    for &i in &out.selected {
        keep[i] = true;
    }
    keep
}

fn weights_normalised(out: &AttnOutput) -> bool {
    (0..out.weights.rows()).all(|q| (out.weights.row(q).iter().sum::<f64>() - 1.0).abs() <= 1e-9)
}

/// Runs the equivalence properties over `instances` seeded random problems.
pub fn run_self_check(seed: u64, instances: usize) -> SelfCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally { results: Vec::new() };
    for _ in 0..instances {
        let p = random_problem(&mut rng);
        let n = p.num_tokens();
        let k = rng.gen_range(1..=n);
        let bs = rng.gen_range(1..=8usize);
        let block_k = bs * rng.gen_range(1..=n.div_ceil(bs));
        let window = rng.gen_range(1..=n + 2);

        let dense = dense_attention(&p);
        let topk = topk_attention(&p, k).expect("k within range");
        let full = topk_attention(&p, n).expect("k = n");
        let block1 = block_topk_attention(&p, k, 1).expect("block size 1");
        let block = block_topk_attention(&p, block_k, bs).expect("whole blocks");
        let local = local_attention(&p, window).expect("window >= 1");

        tally.record("topk_full_equals_dense", max_rel_err(&full.output, &dense.output));
        tally.flag("block1_same_indices_as_topk", block1.selected == topk.selected);
        tally.record("block1_equals_topk", max_rel_err(&block1.output, &topk.output));
        tally.record("topk_equals_mask", max_rel_err(&topk.output, &masked_attention(&p, &mask_of(&topk, n))));
        tally.record("block_equals_mask", max_rel_err(&block.output, &masked_attention(&p, &mask_of(&block, n))));
        let local_keep: Vec<bool> = (0..n).map(|i| i + window >= n).collect();
        tally.record("local_equals_mask", max_rel_err(&local.output, &masked_attention(&p, &local_keep)));
        tally.flag("budget_respected", topk.selected.len() <= k && block.selected.len() <= block_k);
        tally.flag(
            "weights_normalised",
            [&dense, &topk, &block, &local].into_iter().all(weights_normalised),
        );
        tally.flag(
            "dropped_weights_zero",
            [&topk, &block, &local].into_iter().all(|o| {
                let keep = mask_of(o, n);
                (0..o.weights.rows()).all(|q| (0..n).all(|i| keep[i] || o.weights.get(q, i) == 0.0))
            }),
        );
    }
    SelfCheckReport {
        seed,
        instances,
        tolerance: TOLERANCE,
        properties: tally.results,
    }
}
