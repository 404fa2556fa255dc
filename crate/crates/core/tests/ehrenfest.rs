use std::f64::consts::PI;

use everett::quasiclassical::{
    classical_trajectory, ehrenfest_deviation, ehrenfest_track, split_step_evolve, EvolveOptions, Grid, GridState,
    PhaseSpacePoint, PotentialSpec,
};

fn compare(psi: &GridState, v: &PotentialSpec, dt: f64, steps: usize, every: usize) -> everett::quasiclassical::Deviation {
    let opts = EvolveOptions {
        sample_every: every,
        ..Default::default()
    };
    let q = ehrenfest_track(&split_step_evolve(psi, v, dt, steps, opts).unwrap()).unwrap();
    let start = PhaseSpacePoint::new(q[0].point.x, q[0].point.p);
    let c = classical_trajectory(v, psi.grid().mass, start, dt, steps, every);
    ehrenfest_deviation(&q, &c).unwrap()
}

#[test]
fn quadratic_potentials_keep_the_mean_on_the_classical_path() {
    let g = Grid::new(-20.0, 20.0, 2048).unwrap();
    let omega = 1.0;
    let steps = 3 * 6000;
    let dt = 3.0 * 2.0 * PI / omega / steps as f64;
    for (x0, p0, sigma) in [(2.0, 0.0, 0.5), (-1.0, 1.5, 1.2), (0.5, -2.0, 0.3)] {
        let psi = GridState::gaussian(g, x0, p0, sigma).unwrap();
        let d = compare(&psi, &PotentialSpec::Harmonic { omega }, dt, steps, 100);
        assert!(d.max < 1e-5, "harmonic {x0} {p0} {sigma}: {}", d.max);
        assert!(d.width_exceeded_at.is_none());
    }
    let wide = Grid::new(-60.0, 60.0, 2048).unwrap();
    let psi = GridState::gaussian(wide, -10.0, 2.0, 1.0).unwrap();
    let d = compare(&psi, &PotentialSpec::Free, 0.01, 1000, 10);
    assert!(d.max < 1e-8, "free: {}", d.max);
}

/// First time the quantum mean of a broad packet in `λx⁴` strays from
/// the classical orbit by a tenth of the amplitude, and the largest
/// deviation over four periods.
fn quartic_run(dt: f64) -> (Option<f64>, f64) {
    let (lambda, x0, sigma) = (0.1, 3.0, 1.0);
    let g = Grid::new(-12.0, 12.0, 2048).unwrap();
    let psi = GridState::gaussian(g, x0, 0.0, sigma).unwrap();
    let steps = (16.0 / dt).round() as usize;
    let d = compare(&psi, &PotentialSpec::Quartic { lambda }, dt, steps, steps / 160);
    let every = 16.0 / 160.0;
    let onset = d.series.iter().position(|&e| e > 0.1 * x0).map(|i| i as f64 * every);
    (onset, d.max)
}

#[test]
fn quartic_mean_leaves_the_classical_orbit() {
    let (onset, max) = quartic_run(1e-3);
    let (onset_fine, max_fine) = quartic_run(5e-4);
    assert_eq!(onset, onset_fine);
    assert!((max - max_fine).abs() < 1e-6, "{max} vs {max_fine}");
    let onset = onset.expect("deviation reaches 10% of the amplitude");
    assert!(onset < 8.0, "onset at {onset}");
    assert!(max > 0.3);
}
