//! Tuple-based indexing metrics, coherence, classification and word
//! intrusion tasks.

mod classify;
mod coherence;
mod intrusion;
mod metrics;
mod tuples;

pub use classify::{classify_max_likelihood, cross_validate, ClassifierConfig, Classification, CrossValidation, ModelKind};
pub use coherence::coherence_topk;
pub use intrusion::{
    generate_intrusion_tasks, read_jsonl, score_intrusion, write_tasks_jsonl, IntrusionAnswer, IntrusionConfig,
    IntrusionScore, IntrusionTask,
};
pub use metrics::{consistency, diversity_curve, ClarityModel, DiversityCurve};
pub use tuples::{sample_distinct_words, sample_tuple_at, sample_tuples, EvalTuple, MASS_THRESHOLD};
