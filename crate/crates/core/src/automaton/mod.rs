//! A two-outcome measuring automaton with a pointer and a memory register,
//! the branch ensembles produced by repeating its measurement, and the
//! frequency statistics of those branches.

mod ensemble;
mod output;
mod protocol;
mod simulate;
mod space;

pub use ensemble::{
    attainable_deviations, bernoulli_envelope, binomial_pmf, deviant_set_amplitude,
    frequency_class_weight, frequency_table, is_deviant, run_trials, run_trials_capped,
    BernoulliParams, BranchEnsemble, BranchRecord, FrequencyClass, Record, TrialMode,
    DEFAULT_TRIAL_CAP, DEVIATION_SLACK, MAX_RECORD_LEN,
};
pub use output::{write_branches_csv, write_frequency_csv};
pub use protocol::{
    build_measurement_unitary, device_state, MeasurementProtocol, MemoryRegister, Outcome,
    MAX_DENSE_REGISTER_DIM, POINTER_LEVELS, POINTER_MINUS, POINTER_PLUS, POINTER_READY,
    SLOT_BLANK, SLOT_MINUS, SLOT_PLUS,
};
pub use simulate::{simulate_trials, MAX_SIMULATED_TRIALS};
pub use space::{automaton_space, ensemble_tree, AutomatonFamilies, AutomatonSpec};
