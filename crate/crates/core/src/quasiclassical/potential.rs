use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// One of the two paths of the two-slit surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slit {
    /// The path through `x > 0`.
    Plus,
    /// The path through `x < 0`.
    Minus,
}

impl Slit {
    pub fn sign(self) -> f64 {
        match self {
            Slit::Plus => 1.0,
            Slit::Minus => -1.0,
        }
    }
}

/// Harmonic focusing potential of the two-slit surrogate, optionally with a
/// wall closing one path. The wall rises smoothly (`10u³ − 15u⁴ + 6u⁵`) from zero
/// at `wall_edge` to `wall_height` one `wall_ramp` further out; a step
/// would scatter split-step error straight through it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitLens {
    pub omega: f64,
    pub blocked: Option<Slit>,
    /// Distance from the origin at which the wall starts.
    pub wall_edge: f64,
    pub wall_ramp: f64,
    pub wall_height: f64,
}

impl SlitLens {
    /// Wall height and its slope along `x` at `x`.
    fn wall(&self, x: f64) -> (f64, f64) {
        let Some(side) = self.blocked else {
            return (0.0, 0.0);
        };
        let s = side.sign();
        let u = ((s * x - self.wall_edge) / self.wall_ramp).clamp(0.0, 1.0);
        let height = self.wall_height * u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let slope = s * self.wall_height * 30.0 * u * u * (1.0 - u) * (1.0 - u) / self.wall_ramp;
        (height, slope)
    }
}

/// A static potential `V(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free,
    /// `½ m ω² x²`.
    Harmonic { omega: f64 },
    /// `λ x⁴`.
    Quartic { lambda: f64 },
    /// `height` on `|x| < width/2`, zero elsewhere.
    Barrier { height: f64, width: f64 },
    TwoSlitMask(SlitLens),
}

impl PotentialSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} must be finite and ≥ 0, got {v}")));
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Harmonic { omega } if !ok(omega) => bad("ω", omega),
            PotentialSpec::Quartic { lambda } if !ok(lambda) => bad("λ", lambda),
            PotentialSpec::Barrier { height, .. } if !height.is_finite() => bad("barrier height", height),
            PotentialSpec::Barrier { width, .. } if !ok(width) => bad("barrier width", width),
            PotentialSpec::TwoSlitMask(l) if !ok(l.omega) => bad("ω", l.omega),
            PotentialSpec::TwoSlitMask(l) if !ok(l.wall_edge) => bad("wall edge", l.wall_edge),
            PotentialSpec::TwoSlitMask(l) if !ok(l.wall_height) => bad("wall height", l.wall_height),
            PotentialSpec::TwoSlitMask(l) if !(l.wall_ramp > 0.0 && l.wall_ramp.is_finite()) => {
                Err(Error::Config(format!("wall ramp must be > 0, got {}", l.wall_ramp)))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64, mass: f64) -> f64 {
        match *self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Harmonic { omega } => 0.5 * mass * omega * omega * x * x,
            PotentialSpec::Quartic { lambda } => lambda * x.powi(4),
            PotentialSpec::Barrier { height, width } => {
                if x.abs() < width / 2.0 {
                    height
                } else {
                    0.0
                }
            }
            PotentialSpec::TwoSlitMask(l) => 0.5 * mass * l.omega * l.omega * x * x + l.wall(x).0,
        }
    }

    /// `−dV/dx`. Piecewise-constant parts contribute nothing; their edges
    /// are not differentiable.
    pub fn force(&self, x: f64, mass: f64) -> f64 {
        match *self {
            PotentialSpec::Free | PotentialSpec::Barrier { .. } => 0.0,
            PotentialSpec::Harmonic { omega } => -mass * omega * omega * x,
            PotentialSpec::Quartic { lambda } => -4.0 * lambda * x.powi(3),
            PotentialSpec::TwoSlitMask(l) => -mass * l.omega * l.omega * x - l.wall(x).1,
        }
    }

    /// Samples on the grid, rejecting non-finite values.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.check()?;
        let v: Vec<f64> = grid.xs().map(|x| self.value(x, grid.mass)).collect();
        match v.iter().position(|y| !y.is_finite()) {
            Some(j) => Err(Error::Config(format!("potential is not finite at x = {}", grid.x(j)))),
            None => Ok(v),
        }
    }
}
