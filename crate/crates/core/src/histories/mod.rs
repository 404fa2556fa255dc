//! Histories of a closed quantum system: chain operators, the
//! decoherence functional, coarse-graining, conditional probabilities and
//! branching structure.
//!
//! A history picks one cell of the family at each time. Histories are
//! stored earliest time first; chain operators apply the earliest
//! projector first, so the latest one stands leftmost in the product.

mod branching;
mod coarse;
mod functional;
mod space;

pub use branching::{
    branch_measure, branching_distances, branching_structure_check, extract_branch_tree,
    BranchTree, BranchingReport, TreeNode, DEFAULT_BRANCHING_TOL, MAX_TREE_NODES,
};
pub use coarse::{
    coarse_grain, coarse_vector, conditional_probability, conditional_probability_with_floor,
    measure, pairwise_sum_rule_violation, sum_rule_report, sum_rule_violation, CoarseGraining,
    CoarseHistory, Partition, SumRuleReport, DEFAULT_CONDITIONING_FLOOR,
};
pub use functional::{
    check_space, consistency_check, decoherence_functional, ConsistencyReport, Criterion,
    DecoherenceFunctional, DEFAULT_CONSISTENCY_TOL, ZERO_WEIGHT_FLOOR,
};
pub use space::{
    branch_vector, chain_operator, fine_tuned_space, heisenberg_projector, schrodinger_agreement,
    superposition_identity_check, BranchVector, History, HistorySpace, DEFAULT_HISTORY_CAP,
    MAX_DENSE_CHAIN_DIM, T0,
};
