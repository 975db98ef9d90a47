//! Cost model and compute-allocation tools for test-time scaling of language models.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
pub mod arch;
pub mod attn;
pub mod cost;
pub mod fit;
pub mod synth;
pub mod traces;
