//! Seeded synthetic trace generator.
//!
//! Produces records in the trace format with plausible structure: harder
//! tasks are solved less often, larger KV budgets help, and truncated
//! generations are rarely correct. Output depends only on the
//! [`SynthSpec`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::AttnVariant;
use crate::traces::SampleRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthModel {
    pub name: String,
    /// Shifts the solve probability logit.
    pub skill: f64,
    /// Multiplies the task's natural length.
    pub verbosity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub tasks: usize,
    pub models: Vec<SynthModel>,
    pub kv_budgets: Vec<u64>,
    pub include_dense: bool,
    pub sparse_variant: AttnVariant,
    /// Generation limit of the many-sample groups.
    pub bon_max_new_tokens: u64,
    pub bon_samples: u64,
    /// Additional generation limits, each sampled `longcot_samples` times.
    pub longcot_lengths: Vec<u64>,
    pub longcot_samples: u64,
}

impl SynthSpec {
    /// Parameters behind `tests/fixtures/synthetic.jsonl`.
    pub fn fixture() -> Self {
        Self {
            seed: 20_250_601,
            tasks: 3,
            models: vec![
                SynthModel {
                    name: "Qwen3-1.7B".into(),
                    skill: -0.4,
                    verbosity: 1.25,
                },
                SynthModel {
                    name: "Qwen3-8B".into(),
                    skill: 0.9,
                    verbosity: 1.0,
                },
            ],
            kv_budgets: vec![32, 64, 128, 256, 512, 1024],
            include_dense: true,
            sparse_variant: AttnVariant::BlockTopK,
            bon_max_new_tokens: 32_768,
            bon_samples: 32,
            longcot_lengths: vec![2048, 4096, 8192, 16_384, 24_576, 32_768],
            longcot_samples: 8,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// Irwin-Hall approximation of a standard normal draw.
fn normalish(rng: &mut ChaCha8Rng) -> f64 {
    let s: f64 = (0..6).map(|_| rng.gen::<f64>()).sum();
    (s - 3.0) * 2.0f64.sqrt()
}

/// Records ordered by task, model, configuration and sample id.
pub fn generate(spec: &SynthSpec) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut budgets: Vec<Option<u64>> = Vec::new();
    if spec.include_dense {
        budgets.push(None);
    }
    budgets.extend(spec.kv_budgets.iter().copied().map(Some));

    let mut limits = vec![(spec.bon_max_new_tokens, spec.bon_samples)];
    for &n in &spec.longcot_lengths {
        if n != spec.bon_max_new_tokens {
            limits.push((n, spec.longcot_samples));
        }
    }

    let mut out = Vec::new();
    for t in 0..spec.tasks {
        let difficulty = rng.gen_range(-1.5..1.5);
        let natural_len = rng.gen_range(3000.0..14_000.0);
        let task_id = format!("task-{t:03}");
        for model in &spec.models {
            for &budget in &budgets {
                // Budget help saturates near the top of the ladder; dense is the ceiling.
                let budget_logit = budget.map_or(0.4, |b| 0.45 * (b as f64 / 1024.0).log2().max(-6.0));
                let attn = if budget.is_some() {
                    spec.sparse_variant
                } else {
                    AttnVariant::Dense
                };
                for &(limit, samples) in &limits {
                    for sample_id in 0..samples {
                        let want = natural_len * model.verbosity * (0.45 * normalish(&mut rng)).exp();
                        let want = want.round().max(1.0) as u64;
                        let truncated = want > limit;
                        let mut p = sigmoid(model.skill - difficulty + budget_logit);
                        if truncated {
                            p *= 0.15;
                        }
                        let correct = rng.gen::<f64>() < p;
                        out.push(SampleRecord {
                            task_id: task_id.clone(),
                            model: model.name.clone(),
                            attn,
                            kv_budget: budget,
                            max_new_tokens: limit,
                            sample_id,
                            gen_len: want.min(limit),
                            correct,
                        });
                    }
                }
            }
        }
    }
    out
}
