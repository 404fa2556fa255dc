use rayon::prelude::*;
use serde::Serialize;

use super::evolve::Fourier;
use super::{GridState, PhaseSpacePoint, PotentialSpec, Trajectory};
use crate::error::{Error, Result};

/// Time stamps of two series count as equal within this.
pub const TIME_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub point: PhaseSpacePoint,
    /// Position spread; zero for a classical particle.
    pub width: f64,
}

/// `⟨p⟩ = ħ Σ k |ψ̂_k|² / Σ |ψ̂_k|²`, from the discrete Fourier transform.
fn mean_p(state: &GridState, fourier: &Fourier, scratch: &mut Vec<crate::hilbert::C64>) -> f64 {
    let grid = state.grid();
    let mut buf = state.values().to_vec();
    fourier.forward(&mut buf, scratch);
    let (num, den) = buf
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(n, d), (j, v)| (n + grid.k(j) * v.norm_sqr(), d + v.norm_sqr()));
    grid.hbar * num / den
}

/// `⟨x⟩`, `⟨p⟩` and the spread of every sampled state.
pub fn ehrenfest_track(traj: &Trajectory) -> Result<Vec<TrackPoint>> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::Contract("cannot track an empty trajectory".into()))?;
    let fourier = Fourier::new(first.grid().n_points);
    Ok(traj
        .times
        .par_iter()
        .zip(&traj.states)
        .map_init(
            || fourier.scratch(),
            |scratch, (&t, s)| TrackPoint {
                t,
                point: PhaseSpacePoint::new(s.mean_x(), mean_p(s, &fourier, scratch)),
                width: s.width(),
            },
        )
        .collect())
}

/// `p²/2m + V(x)`.
pub fn classical_energy(potential: &PotentialSpec, mass: f64, at: PhaseSpacePoint) -> f64 {
    at.p * at.p / (2.0 * mass) + potential.value(at.x, mass)
}

/// Velocity-Verlet (leapfrog) integration of `m ẍ = −V′(x)`, sampled every
/// `sample_every` steps and at both ends.
pub fn classical_trajectory(
    potential: &PotentialSpec,
    mass: f64,
    start: PhaseSpacePoint,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Vec<TrackPoint> {
    let every = sample_every.max(1);
    let mut at = start;
    let mut out = vec![TrackPoint {
        t: 0.0,
        point: at,
        width: 0.0,
    }];
    let mut force = potential.force(at.x, mass);
    for s in 1..=steps {
        at.p += 0.5 * dt * force;
        at.x += dt * at.p / mass;
        force = potential.force(at.x, mass);
        at.p += 0.5 * dt * force;
        if s % every == 0 || s == steps {
            out.push(TrackPoint {
                t: s as f64 * dt,
                point: at,
                width: 0.0,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub max: f64,
    pub rms: f64,
    /// `|⟨x⟩_ψ − x_classical|` per sample.
    pub series: Vec<f64>,
    /// First time the deviation exceeds the quantum packet width, after
    /// which the expectation value no longer follows a classical path.
    pub width_exceeded_at: Option<f64>,
}

/// Position deviation of a quantum track from a classical one sampled at
/// the same times.
pub fn ehrenfest_deviation(quantum: &[TrackPoint], classical: &[TrackPoint]) -> Result<Deviation> {
    if quantum.len() != classical.len() {
        return Err(Error::DimensionMismatch {
            expected: quantum.len(),
            actual: classical.len(),
        });
    }
    if quantum.is_empty() {
        return Err(Error::Contract("no samples to compare".into()));
    }
    if let Some((q, c)) = quantum
        .iter()
        .zip(classical)
        .find(|(q, c)| (q.t - c.t).abs() > TIME_MATCH_TOL * q.t.abs().max(1.0))
    {
        return Err(Error::Contract(format!("time grids differ: {} vs {}", q.t, c.t)));
    }
    let series: Vec<f64> = quantum
        .iter()
        .zip(classical)
        .map(|(q, c)| (q.point.x - c.point.x).abs())
        .collect();
    let max = series.iter().copied().fold(0.0, f64::max);
    let rms = (series.iter().map(|d| d * d).sum::<f64>() / series.len() as f64).sqrt();
    let width_exceeded_at = quantum
        .iter()
        .zip(&series)
        .find(|(q, &d)| d > q.width)
        .map(|(q, _)| q.t);
    Ok(Deviation {
        max,
        rms,
        series,
        width_exceeded_at,
    })
}
