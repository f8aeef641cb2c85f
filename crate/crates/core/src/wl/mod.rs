//! Exact color refinement (1-WL, k-WL, k-FWL), canonical signatures, a
//! curated suite of hard graph pairs, and the model-side verdict harness.

pub mod align;
pub mod refine;
pub mod suite;

pub use align::{alignment_config, model_signature, model_verdicts, DEFAULT_DECIMALS};
pub use refine::{
    color_of, distinguishes, kfwl_refine, kwl_refine, refine, signature, wl1_refine,
    ColorPartition, GraphSignature, Scheme, MAX_TUPLES,
};
pub use suite::{
    golden_verdicts, oracle_verdicts, pair_suite, SuitePair, VerdictRecord, GOLDEN, GOLDEN_SCHEMES,
};
