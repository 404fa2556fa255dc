use everett::quasiclassical::{
    classical_trajectory, ehrenfest_deviation, ehrenfest_track, split_step_evolve, write_track_csv, EvolveOptions,
    GridState, PhaseSpacePoint, TrackPoint,
};
use serde::Serialize;

use crate::artifacts::{ArtifactWriter, Assertion};
use crate::config::EhrenfestParams;
use crate::error::CliError;

#[derive(Serialize)]
struct Summary {
    potential: everett::quasiclassical::PotentialSpec,
    dt: f64,
    steps: usize,
    max_deviation: f64,
    rms_deviation: f64,
    /// First time the deviation exceeded the packet width, if it did.
    width_exceeded_at: Option<f64>,
    asserted_limit: Option<f64>,
}

pub fn run(p: &EhrenfestParams, out: &mut ArtifactWriter) -> Result<Vec<Assertion>, CliError> {
    let psi = GridState::gaussian(p.grid, p.x0, p.p0, p.sigma)?;
    let opts = EvolveOptions {
        sample_every: p.sample_every,
        ..Default::default()
    };
    let traj = split_step_evolve(&psi, &p.potential, p.dt, p.steps, opts)?;
    let quantum = ehrenfest_track(&traj)?;
    // Start the orbit from the packet's own means so only the dynamics differ
    let start = PhaseSpacePoint::new(quantum[0].point.x, quantum[0].point.p);
    let classical = classical_trajectory(&p.potential, p.grid.mass, start, p.dt, p.steps, p.sample_every);
    let dev = ehrenfest_deviation(&quantum, &classical)?;

    let csv = |track: &[TrackPoint], d: Option<&[f64]>| -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        write_track_csv(track, d, &mut buf)?;
        Ok(buf)
    };
    out.write("deviation.csv", &csv(&quantum, Some(&dev.series))?)?;
    out.write("classical.csv", &csv(&classical, None)?)?;
    out.write_json(
        "summary.json",
        &Summary {
            potential: p.potential,
            dt: p.dt,
            steps: p.steps,
            max_deviation: dev.max,
            rms_deviation: dev.rms,
            width_exceeded_at: dev.width_exceeded_at,
            asserted_limit: p.max_deviation,
        },
    )?;
    Ok(p
        .max_deviation
        .map(|limit| Assertion::below("mean follows the classical orbit", dev.max, limit))
        .into_iter()
        .collect())
}
