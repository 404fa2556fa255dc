//! Wavefunctions on a one-dimensional grid: split-step evolution, the
//! Ehrenfest comparison with classical trajectories, and a two-slit
//! history space whose paths interfere unless a record separates them.

mod ehrenfest;
mod evolve;
mod grid;
mod output;
mod potential;
mod two_slit;

pub use ehrenfest::{
    classical_energy, classical_trajectory, ehrenfest_deviation, ehrenfest_track, Deviation, TrackPoint,
    TIME_MATCH_TOL,
};
pub use evolve::{
    check_drift, split_step_evolve, Boundary, EvolveOptions, GridDynamics, Kick, SplitStep, Trajectory,
    RUN_DRIFT_LIMIT, STEP_DRIFT_LIMIT,
};
pub use grid::{Grid, GridState, PhaseSpacePoint, GRID_NORM_TOL};
pub use output::{write_snapshot_csv, write_track_csv};
pub use potential::{PotentialSpec, Slit, SlitLens};
pub use two_slit::{
    slit_history, two_slit_space, SlitTimes, TwoSlitGeometry, APERTURE, SCREEN, SLIT_MINUS, SLIT_PLUS,
};
