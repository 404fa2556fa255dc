use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};

/// Tolerance on `Σ|ψ_j|² dx = 1` for a grid state.
pub const GRID_NORM_TOL: f64 = 1e-8;

/// Uniform periodic grid on `[x_min, x_max)` with its unit system. Points
/// sit at cell centres, so a grid centred on the origin is mirror
/// symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        Self {
            x_min,
            x_max,
            n_points,
            mass: 1.0,
            hbar: 1.0,
        }
        .validated()
    }

    pub fn with_units(mut self, mass: f64, hbar: f64) -> Result<Self> {
        self.mass = mass;
        self.hbar = hbar;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let mut problems = Vec::new();
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            problems.push(format!("need finite x_min < x_max, got [{}, {})", self.x_min, self.x_max));
        }
        if self.n_points < 2 || !self.n_points.is_power_of_two() {
            problems.push(format!("n_points must be a power of two ≥ 2, got {}", self.n_points));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            problems.push(format!("mass must be > 0, got {}", self.mass));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            problems.push(format!("hbar must be > 0, got {}", self.hbar));
        }
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|j| self.x(j))
    }

    /// Angular wavenumber of FFT bin `j`, in the usual wrapped order.
    pub fn k(&self, j: usize) -> f64 {
        let n = self.n_points as i64;
        let m = if (j as i64) < n / 2 { j as i64 } else { j as i64 - n };
        2.0 * PI * m as f64 / self.length()
    }

    /// Mask of the grid points inside `[lo, hi]`.
    pub fn region(&self, lo: f64, hi: f64) -> Vec<bool> {
        self.xs().map(|x| x >= lo && x <= hi).collect()
    }
}

/// A wavefunction sampled on a grid, normalized so `Σ|ψ_j|² dx = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    grid: Grid,
    values: Vec<C64>,
}

impl GridState {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points,
                actual: values.len(),
            });
        }
        let s = Self { grid, values };
        let norm = s.norm_sqr();
        if !((norm - 1.0).abs() <= GRID_NORM_TOL) {
            return Err(Error::Contract(format!("grid state has Σ|ψ|²dx = {norm}, expected 1")));
        }
        Ok(s)
    }

    /// Samples `f` and normalizes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values: Vec<C64> = grid.xs().map(f).collect();
        Self::normalizing(grid, values)
    }

    pub fn normalizing(grid: Grid, mut values: Vec<C64>) -> Result<Self> {
        let norm: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Contract("cannot normalize a vanishing or non-finite wavefunction".into()));
        }
        let s = norm.sqrt().recip();
        values.iter_mut().for_each(|v| *v *= s);
        Self::new(grid, values)
    }

    /// Gaussian packet `∝ exp(−(x−x₀)²/4σ² + i p₀ x/ħ)`, position spread `σ`.
    pub fn gaussian(grid: Grid, x0: f64, p0: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Contract(format!("packet width must be > 0, got {sigma}")));
        }
        let hbar = grid.hbar;
        Self::from_fn(grid, |x| {
            let d = x - x0;
            C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), p0 * x / hbar)
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.norm_sqr())
    }

    /// Probability of finding the particle in the masked region.
    pub fn probability(&self, mask: &[bool]) -> f64 {
        self.density().zip(mask).filter(|(_, &m)| m).map(|(d, _)| d).sum::<f64>() * self.grid.dx()
    }

    pub fn mean_x(&self) -> f64 {
        self.density().zip(self.grid.xs()).map(|(d, x)| d * x).sum::<f64>() * self.grid.dx()
    }

    /// Position spread `√(⟨x²⟩ − ⟨x⟩²)`.
    pub fn width(&self) -> f64 {
        let m = self.mean_x();
        let var = self
            .density()
            .zip(self.grid.xs())
            .map(|(d, x)| d * (x - m) * (x - m))
            .sum::<f64>()
            * self.grid.dx();
        var.max(0.0).sqrt()
    }

    /// As a unit vector of `ℂⁿ`, amplitudes `ψ_j √dx`.
    pub fn to_state_vector(&self) -> StateVector {
        let s = self.grid.dx().sqrt();
        StateVector::from_amplitudes(self.values.iter().map(|v| v * s).collect())
            .expect("grid amplitudes are finite")
    }

    pub fn from_state_vector(grid: Grid, v: &StateVector) -> Result<Self> {
        let s = grid.dx().sqrt().recip();
        Self::new(grid, v.amplitudes().iter().map(|a| a * s).collect())
    }
}

/// Position and momentum expectation values, or a classical phase point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_geometry_listing_every_problem() {
        let err = Grid {
            x_min: 1.0,
            x_max: 0.0,
            n_points: 100,
            mass: -1.0,
            hbar: 1.0,
        }
        .validated()
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x_min < x_max") && msg.contains("power of two") && msg.contains("mass"));
    }

    #[test]
    fn wavenumbers_wrap() {
        let g = Grid::new(0.0, 2.0 * PI, 8).unwrap();
        let ks: Vec<f64> = (0..8).map(|j| g.k(j)).collect();
        assert_eq!(ks, [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let s = GridState::gaussian(g, 1.5, 2.0, 0.7).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((s.mean_x() - 1.5).abs() < 1e-12);
        assert!((s.width() - 0.7).abs() < 1e-12);
        let v = s.to_state_vector();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        let back = GridState::from_state_vector(g, &v).unwrap();
        assert!(back.values().iter().zip(s.values()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn unnormalized_values_rejected() {
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            GridState::new(g, vec![C64::new(2.0, 0.0); 4]),
            Err(Error::Contract(_))
        ));
    }
}
