use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Grid, GridDynamics, GridState, Kick, PotentialSpec, Slit, SlitLens};
use crate::error::{Error, Result};
use crate::hilbert::{qubit, CellLabel, ProjectorFamily, StateVector, Tensor, C64};
use crate::histories::HistorySpace;

pub const APERTURE: &str = "aperture";
pub const SLIT_PLUS: &str = "slit+";
pub const SLIT_MINUS: &str = "slit-";
pub const SCREEN: &str = "screen";

/// One-dimensional stand-in for a two-slit experiment.
///
/// A harmonic lens of frequency `omega` carries two packets launched with
/// momenta `±momentum` out to the slit regions `|x| ≥ slit_edge` at a
/// quarter period and refocuses them on the screen at half a period, where
/// they overlap. `separation` launches the packets from `±separation`
/// instead of the origin, so they land apart on the screen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoSlitGeometry {
    pub grid: Grid,
    pub omega: f64,
    pub momentum: f64,
    pub sigma: f64,
    pub separation: f64,
    /// Half-width of the aperture region around the origin.
    pub aperture: f64,
    pub slit_edge: f64,
    pub screen_center: f64,
    pub screen_half_width: f64,
    /// Wall closing one path before it reaches its slit.
    pub blocked: Option<Slit>,
    pub wall_edge: f64,
    pub wall_ramp: f64,
    pub wall_height: f64,
    /// Record the path in an ancilla qubit just after the slit time.
    pub which_path: bool,
    pub max_step: f64,
}

impl Default for TwoSlitGeometry {
    fn default() -> Self {
        Self {
            grid: Grid {
                x_min: -32.0,
                x_max: 32.0,
                n_points: 4096,
                mass: 1.0,
                hbar: 1.0,
            },
            omega: 1.0,
            momentum: 16.0,
            sigma: 0.5,
            separation: 0.0,
            aperture: 8.0,
            slit_edge: 4.0,
            screen_center: 0.0,
            screen_half_width: 0.05,
            blocked: None,
            wall_edge: 3.0,
            wall_ramp: 1.0,
            wall_height: 400.0,
            which_path: false,
            max_step: 5e-4,
        }
    }
}

/// Aperture, slit and screen times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitTimes {
    pub aperture: f64,
    pub slits: f64,
    pub screen: f64,
}

impl SlitTimes {
    /// Shortly after launch, a quarter period, half a period.
    pub fn for_lens(omega: f64) -> Self {
        Self {
            aperture: 0.1,
            slits: PI / (2.0 * omega),
            screen: PI / omega,
        }
    }
}

impl Default for SlitTimes {
    fn default() -> Self {
        Self::for_lens(1.0)
    }
}

impl TwoSlitGeometry {
    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::TwoSlitMask(SlitLens {
            omega: self.omega,
            blocked: self.blocked,
            wall_edge: self.wall_edge,
            wall_ramp: self.wall_ramp,
            wall_height: self.wall_height,
        })
    }

    /// Every problem with the geometry, or none.
    pub fn problems(&self, times: &SlitTimes) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.grid.validated() {
            out.push(e.to_string());
            return out;
        }
        if let Err(e) = self.potential().check() {
            out.push(e.to_string());
        }
        let dx = self.grid.dx();
        let positive = [
            ("omega", self.omega),
            ("sigma", self.sigma),
            ("aperture", self.aperture),
            ("slit_edge", self.slit_edge),
            ("max_step", self.max_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.momentum.is_finite() && self.separation.is_finite() && self.screen_center.is_finite()) {
            out.push("momentum, separation and screen_center must be finite".into());
        }
        if !(self.screen_half_width >= dx) {
            out.push(format!(
                "screen half-width {} is not resolved by grid spacing {dx}",
                self.screen_half_width
            ));
        }
        if self.slit_edge < 2.0 * dx {
            out.push(format!("slit edge {} is not resolved by grid spacing {dx}", self.slit_edge));
        }
        let reach = self.aperture.max(self.slit_edge).max(self.screen_center.abs() + self.screen_half_width);
        if reach >= self.grid.x_max.min(-self.grid.x_min) {
            out.push(format!("regions up to |x| = {reach} do not fit inside the grid"));
        }
        let k_max = PI / dx;
        if self.momentum.abs() / self.grid.hbar > 0.5 * k_max {
            out.push(format!("momentum {} needs a finer grid (k_max = {k_max})", self.momentum));
        }
        if !(times.aperture > 0.0 && times.aperture < times.slits && times.slits < times.screen) {
            out.push(format!(
                "need 0 < aperture < slits < screen times, got {} {} {}",
                times.aperture, times.slits, times.screen
            ));
        }
        out
    }

    /// `∝ G(x − a) e^{ipx/ħ} + G(x + a) e^{−ipx/ħ}`.
    pub fn initial(&self) -> Result<GridState> {
        let (a, p, s, hbar) = (self.separation, self.momentum, self.sigma, self.grid.hbar);
        let packet = |d: f64| (-d * d / (4.0 * s * s)).exp();
        GridState::from_fn(self.grid, |x| {
            C64::from_polar(packet(x - a), p * x / hbar) + C64::from_polar(packet(x + a), -p * x / hbar)
        })
    }

    pub fn dynamics(&self, times: &SlitTimes) -> Result<GridDynamics> {
        let d = GridDynamics::new(self.grid, &self.potential(), self.max_step)?;
        if !self.which_path {
            return Ok(d);
        }
        d.with_ancilla(2)?.with_kick(Kick {
            time: times.slits,
            ancilla_op: qubit::sigma_x(),
            region: self.grid.xs().map(|x| x < 0.0).collect(),
        })
    }

    /// Aperture, slit and screen families, each completed by `elsewhere`.
    pub fn families(&self) -> Result<Vec<ProjectorFamily>> {
        let g = &self.grid;
        let copies = if self.which_path { 2 } else { 1 };
        let family = |cells: Vec<(&str, Vec<bool>)>| {
            ProjectorFamily::from_masks(
                copies * g.n_points,
                cells
                    .into_iter()
                    .map(|(name, m)| (CellLabel::new(name), m.repeat(copies)))
                    .collect(),
            )
        };
        let (c, w) = (self.screen_center, self.screen_half_width);
        Ok(vec![
            family(vec![(APERTURE, g.region(-self.aperture, self.aperture))])?,
            family(vec![
                (SLIT_PLUS, g.region(self.slit_edge, f64::INFINITY)),
                (SLIT_MINUS, g.region(f64::NEG_INFINITY, -self.slit_edge)),
            ])?,
            family(vec![(SCREEN, g.region(c - w, c + w))])?,
        ])
    }
}

/// Label of the history through the aperture, the given slit and the screen.
pub fn slit_history(slit: Slit) -> [&'static str; 3] {
    [
        APERTURE,
        match slit {
            Slit::Plus => SLIT_PLUS,
            Slit::Minus => SLIT_MINUS,
        },
        SCREEN,
    ]
}

/// The two-slit history space on the grid, with an ancilla qubit in front
/// when the geometry records which path was taken.
pub fn two_slit_space(geometry: &TwoSlitGeometry, times: &SlitTimes) -> Result<HistorySpace> {
    let problems = geometry.problems(times);
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let dynamics = geometry.dynamics(times)?;
    let mut psi: StateVector = geometry.initial()?.to_state_vector();
    if geometry.which_path {
        psi = qubit::zero().tensor(&psi)?;
    }
    HistorySpace::new(
        psi,
        Arc::new(dynamics),
        vec![times.aperture, times.slits, times.screen],
        geometry.families()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unresolvable_geometry_lists_every_problem() {
        let g = TwoSlitGeometry {
            screen_half_width: 1e-4,
            aperture: 40.0,
            ..Default::default()
        };
        let times = SlitTimes {
            aperture: 0.5,
            slits: 0.2,
            screen: 3.0,
        };
        let msg = two_slit_space(&g, &times).unwrap_err().to_string();
        assert!(msg.contains("not resolved") && msg.contains("inside the grid") && msg.contains("aperture <"));
    }

    #[test]
    fn families_resolve_the_identity() {
        for which_path in [false, true] {
            let g = TwoSlitGeometry {
                which_path,
                ..Default::default()
            };
            for f in g.families().unwrap() {
                assert!(crate::hilbert::validate_family(&f).passed);
                assert!(f.position(crate::hilbert::ELSEWHERE).is_some());
            }
        }
    }
}
