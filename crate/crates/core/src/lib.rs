//! Finite-scale tools for sofic approximations: permutations and partial
//! injections with normalized Hamming distance, linking lemmas that build
//! permutations from approximately compatible data, Bernoulli and wreath
//! product constructions, and local statistics of labeled actions.

pub mod approx;
pub mod constructions;
pub mod error;
pub mod io;
pub mod linking;
pub mod localstats;
pub mod perm;
pub mod sampling;
pub mod word;

pub use approx::{make_base, DefectReport, GroupElement, GroupKind, GroupSpec, SoficApproximation};
pub use constructions::{
    amalgam_glue, bernoulli_extend, bernoulli_extend_with_budget, common_root_base, dyadic_odometer, root_amalgam,
    generalized_bernoulli, integer_action_approx, lamp_general, lamp_z2, product_action, treeing_restrict,
    wreath_general, wreath_z2, ActionApproximation, AmalgamResult, BernoulliApproximation, BernoulliMode,
    CylinderSpec, CylinderTrace, TreeingFamily,
};
pub use error::{Error, Result};
pub use linking::{
    align_labelings, align_labelings_with, conjugate_partitions, conjugate_subsets, link_matrix_units,
    round_to_permutation, sum_of_pieces, AlignMode, Alignment, MatrixUnitSystem, RowFunction,
};
pub use localstats::{
    bernoulli_local_stats, bernoulli_oracle, el_verify, el_verify_action, enumerate_words, local_stats, neighborhood,
    stats_distance, treeing_local_stats, LocalStats, NeighborhoodClass, NeighborhoodSpec, StatsMode, VerifyReport,
    WordBall,
};
pub use perm::{DyadicLabeling, PartialInjection, Permutation, Rational};
pub use word::{reduced_words, Letter, Word};
