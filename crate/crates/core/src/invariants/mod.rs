//! Artin–Procesi trace invariants of the `O(g)` and `O(g_F) × O(g_B)` actions
//! on `End T`: evaluation, gradients, enumeration and rank certification.

mod generators;
mod word;

pub use generators::{
    independent_generators, numerical_rank, orbit_separation_check, target_rank, GeneratorSet,
    Separation, SeparationReport, RANK_THRESHOLD, SAMPLE_POINTS, VALUE_TOL,
};
pub use word::{enumerate_words, enumerate_words_capped, Letter, TraceWord, DEFAULT_DEGREE_CAP};
