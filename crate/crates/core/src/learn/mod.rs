//! Dictionary learning from auxiliary subjects, the synthetic recovery
//! benchmark, and its relative-error metric.

mod fit;
mod metric;
mod sequential;
mod synth;

pub use fit::{center_by_subject, fit_matrix, fit_mean_and_basis, subject_means, BasisFit};
pub use metric::{min_cost_assignment, relative_error};
pub use sequential::{
    learn_dictionary, learn_matrix, AtomDiagnostics, CandidateSet, LearnDiagnostics, LearnOptions, LearnResult,
    DEFAULT_SPARSITY_THRESHOLD, MAX_CONDITION,
};
pub use synth::{
    generate_synthetic, images_per_subject, run_cell, run_phase_transition, PhaseGrid, RecoveryCell, RecoveryReport,
    SynthConfig, SyntheticInstance,
};
