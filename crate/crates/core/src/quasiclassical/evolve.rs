use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Grid, GridState, PotentialSpec};
use crate::error::{Error, Result};
use crate::hilbert::{Dynamics, Kinds, Operator, StateVector, C64, VALIDATION_TOL};

/// Largest tolerated change of `Σ|ψ|²dx` in a single step.
pub const STEP_DRIFT_LIMIT: f64 = 1e-10;

/// Largest tolerated change of `Σ|ψ|²dx` over a whole run.
pub const RUN_DRIFT_LIMIT: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Boundary {
    #[default]
    Periodic,
    /// A damping layer of the given width at both ends. Loses norm by
    /// design, so drift checks are skipped.
    Absorbing { width: f64 },
}

#[derive(Clone)]
pub(crate) struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("len", &self.forward.len()).finish()
    }
}

impl Fourier {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / n as f64,
        }
    }

    pub(crate) fn scratch(&self) -> Vec<C64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![C64::new(0.0, 0.0); len]
    }

    pub(crate) fn forward(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Inverse transform including the `1/n`.
    pub(crate) fn inverse(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.inverse.process_with_scratch(buf, scratch);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// One Strang step `e^{−iVdt/2ħ} e^{−iTdt/ħ} e^{−iVdt/2ħ}`, kinetic part
/// exact in Fourier space. The step with `−dt` is its exact inverse.
#[derive(Clone, Debug)]
pub struct SplitStep {
    grid: Grid,
    dt: f64,
    half_potential: Vec<C64>,
    kinetic: Vec<C64>,
    absorber: Option<Vec<f64>>,
    fourier: Fourier,
}

impl SplitStep {
    pub fn new(grid: Grid, potential: &PotentialSpec, dt: f64, boundary: Boundary) -> Result<Self> {
        let grid = grid.validated()?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Config(format!("time step must be finite and non-zero, got {dt}")));
        }
        let v = potential.sample(&grid)?;
        let absorber = match boundary {
            Boundary::Periodic => None,
            Boundary::Absorbing { width } => Some(absorber(&grid, width)?),
        };
        Ok(Self::from_samples(grid, &v, dt, Fourier::new(grid.n_points), absorber))
    }

    pub(crate) fn from_samples(grid: Grid, v: &[f64], dt: f64, fourier: Fourier, absorber: Option<Vec<f64>>) -> Self {
        let hbar = grid.hbar;
        let half_potential = v.iter().map(|&vx| C64::from_polar(1.0, -vx * dt / (2.0 * hbar))).collect();
        let kinetic = (0..grid.n_points)
            .map(|j| {
                let k = grid.k(j);
                C64::from_polar(1.0, -hbar * k * k * dt / (2.0 * grid.mass))
            })
            .collect();
        Self {
            grid,
            dt,
            half_potential,
            kinetic,
            absorber,
            fourier,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_unitary(&self) -> bool {
        self.absorber.is_none()
    }

    pub(crate) fn apply(&self, psi: &mut [C64], scratch: &mut [C64]) {
        mul_in_place(psi, &self.half_potential);
        self.fourier.forward(psi, scratch);
        mul_in_place(psi, &self.kinetic);
        self.fourier.inverse(psi, scratch);
        mul_in_place(psi, &self.half_potential);
        if let Some(mask) = &self.absorber {
            psi.iter_mut().zip(mask).for_each(|(p, m)| *p *= m);
        }
    }

    /// Advance a state `steps` times, visiting it every `sample_every`
    /// steps (and at the start and end). Unitary runs check the norm
    /// drift of every step and of the whole run.
    pub fn run(
        &self,
        state: &GridState,
        steps: usize,
        sample_every: usize,
        mut visit: impl FnMut(f64, &GridState),
    ) -> Result<GridState> {
        if state.grid() != &self.grid {
            return Err(Error::Contract("state and propagator live on different grids".into()));
        }
        let every = sample_every.max(1);
        let mut psi = state.clone();
        let mut scratch = self.fourier.scratch();
        let start = psi.norm_sqr();
        let mut before = start;
        visit(0.0, &psi);
        for s in 1..=steps {
            self.apply(psi.values_mut(), &mut scratch);
            if self.is_unitary() {
                let after = psi.norm_sqr();
                check_drift((after - before).abs(), STEP_DRIFT_LIMIT, self.dt)?;
                before = after;
            }
            if s % every == 0 || s == steps {
                visit(s as f64 * self.dt, &psi);
            }
        }
        if self.is_unitary() {
            check_drift((before - start).abs(), RUN_DRIFT_LIMIT, self.dt)?;
        }
        Ok(psi)
    }
}

/// Fails with a suggested smaller step when the drift exceeds the limit.
/// The Strang local error is third order in `dt`.
pub fn check_drift(drift: f64, limit: f64, dt: f64) -> Result<()> {
    if drift <= limit {
        return Ok(());
    }
    let shrink = if drift.is_finite() {
        0.5 * (limit / drift).cbrt()
    } else {
        0.1
    };
    Err(Error::Stability {
        drift,
        limit,
        suggested_dt: dt.abs() * shrink,
    })
}

fn mul_in_place(psi: &mut [C64], phase: &[C64]) {
    psi.iter_mut().zip(phase).for_each(|(p, f)| *p *= f);
}

/// `cos^{1/8}` damping over a layer of `width` at each end of the grid.
fn absorber(grid: &Grid, width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0 && width < grid.length() / 2.0) {
        return Err(Error::Config(format!(
            "absorbing layer width must lie in (0, {}), got {width}",
            grid.length() / 2.0
        )));
    }
    Ok(grid
        .xs()
        .map(|x| {
            let depth = (grid.x_min + width - x).max(x - (grid.x_max - width)).max(0.0);
            (FRAC_PI_2 * depth / width).cos().max(0.0).powf(0.125)
        })
        .collect())
}

/// States sampled along a run.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&GridState> {
        self.states.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub sample_every: usize,
    pub boundary: Boundary,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            sample_every: 1,
            boundary: Boundary::Periodic,
        }
    }
}

/// Strang split-step evolution, sampled.
pub fn split_step_evolve(
    state: &GridState,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
    options: EvolveOptions,
) -> Result<Trajectory> {
    let stepper = SplitStep::new(*state.grid(), potential, dt, options.boundary)?;
    let mut traj = Trajectory::default();
    stepper.run(state, steps, options.sample_every, |t, s| {
        traj.times.push(t);
        traj.states.push(s.clone());
    })?;
    Ok(traj)
}

/// An instantaneous unitary on an ancilla, applied wherever the particle
/// is inside `region`, just after `time`.
#[derive(Clone, Debug)]
pub struct Kick {
    pub time: f64,
    pub ancilla_op: Operator,
    pub region: Vec<bool>,
}

/// Grid Schrödinger dynamics as a [`Dynamics`], optionally tensored with an
/// ancilla (slow factor) that is touched only by kicks.
///
/// `U(t, 0)` is a fixed product of full Strang steps of `max_step` followed
/// by one partial step, restarting after each kick, and
/// `U(to, from) = U(to, 0) U(from, 0)⁻¹`. The group law therefore holds to
/// rounding whatever times are asked for.
#[derive(Clone, Debug)]
pub struct GridDynamics {
    grid: Grid,
    dims: Vec<usize>,
    potential: Vec<f64>,
    step: f64,
    forward: SplitStep,
    backward: SplitStep,
    kicks: Vec<Kick>,
}

enum Op {
    Steps(i64),
    Partial(f64),
    Kick(usize, bool),
}

impl GridDynamics {
    pub fn new(grid: Grid, potential: &PotentialSpec, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::Config(format!("time step must be > 0, got {max_step}")));
        }
        let grid = grid.validated()?;
        let v = potential.sample(&grid)?;
        let fourier = Fourier::new(grid.n_points);
        Ok(Self {
            grid,
            dims: vec![grid.n_points],
            forward: SplitStep::from_samples(grid, &v, max_step, fourier.clone(), None),
            backward: SplitStep::from_samples(grid, &v, -max_step, fourier, None),
            potential: v,
            step: max_step,
            kicks: Vec::new(),
        })
    }

    /// Prepend an ancilla factor of dimension `dim`.
    pub fn with_ancilla(mut self, dim: usize) -> Result<Self> {
        if dim == 0 || !self.kicks.is_empty() {
            return Err(Error::Contract("add a non-empty ancilla before any kick".into()));
        }
        self.dims = vec![dim, self.grid.n_points];
        Ok(self)
    }

    pub fn with_kick(mut self, kick: Kick) -> Result<Self> {
        if self.dims.len() != 2 || kick.ancilla_op.dim() != self.dims[0] {
            return Err(Error::DimensionMismatch {
                expected: if self.dims.len() == 2 { self.dims[0] } else { 0 },
                actual: kick.ancilla_op.dim(),
            });
        }
        if kick.region.len() != self.grid.n_points {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n_points,
                actual: kick.region.len(),
            });
        }
        let last = self.kicks.last().map_or(0.0, |k| k.time);
        if !(kick.time > last) {
            return Err(Error::Contract(format!(
                "kicks need strictly increasing positive times, got {} after {last}",
                kick.time
            )));
        }
        let ancilla_op = kick.ancilla_op.validated(Kinds::UNITARY, VALIDATION_TOL)?;
        self.kicks.push(Kick { ancilla_op, ..kick });
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.dims
    }

    /// `(segment, full steps, remainder)` of time `t`.
    fn locate(&self, t: f64) -> (usize, i64, f64) {
        let seg = self.kicks.iter().take_while(|k| k.time < t).count();
        let (n, r) = self.lattice(t - self.anchor(seg));
        (seg, n, r)
    }

    fn anchor(&self, seg: usize) -> f64 {
        if seg == 0 {
            0.0
        } else {
            self.kicks[seg - 1].time
        }
    }

    fn lattice(&self, tau: f64) -> (i64, f64) {
        let n = (tau / self.step).floor();
        (n as i64, tau - n * self.step)
    }

    fn plan(&self, from: f64, to: f64) -> Vec<Op> {
        let (s0, mut n, r0) = self.locate(from);
        let (s1, n1, r1) = self.locate(to);
        let mut ops = vec![Op::Partial(-r0)];
        let mut seg = s0;
        while seg < s1 {
            let (n_end, r_end) = self.lattice(self.kicks[seg].time - self.anchor(seg));
            ops.push(Op::Steps(n_end - n));
            ops.push(Op::Partial(r_end));
            ops.push(Op::Kick(seg, false));
            seg += 1;
            n = 0;
        }
        while seg > s1 {
            ops.push(Op::Steps(-n));
            ops.push(Op::Kick(seg - 1, true));
            seg -= 1;
            let (n_end, r_end) = self.lattice(self.kicks[seg].time - self.anchor(seg));
            ops.push(Op::Partial(-r_end));
            n = n_end;
        }
        ops.push(Op::Steps(n1 - n));
        ops.push(Op::Partial(r1));
        ops
    }

    fn run_grid_ops(&self, amps: &mut [C64], ops: &[Op]) {
        let n = self.grid.n_points;
        let partials: Vec<Option<SplitStep>> = ops
            .iter()
            .map(|op| match *op {
                Op::Partial(r) if r != 0.0 => Some(SplitStep::from_samples(
                    self.grid,
                    &self.potential,
                    r,
                    self.forward.fourier.clone(),
                    None,
                )),
                _ => None,
            })
            .collect();
        amps.par_chunks_mut(n).for_each(|block| {
            let mut scratch = self.forward.fourier.scratch();
            for (op, partial) in ops.iter().zip(&partials) {
                match *op {
                    Op::Steps(m) => {
                        let s = if m >= 0 { &self.forward } else { &self.backward };
                        for _ in 0..m.unsigned_abs() {
                            s.apply(block, &mut scratch);
                        }
                    }
                    Op::Partial(_) => {
                        if let Some(p) = partial {
                            p.apply(block, &mut scratch);
                        }
                    }
                    Op::Kick(..) => unreachable!("kicks are applied between grid runs"),
                }
            }
        });
    }

    fn kick(&self, amps: &mut [C64], index: usize, inverse: bool) {
        let k = &self.kicks[index];
        let op = if inverse { k.ancilla_op.adjoint() } else { k.ancilla_op.clone() };
        let (a, n) = (self.dims[0], self.grid.n_points);
        let mut column = vec![C64::new(0.0, 0.0); a];
        for j in (0..n).filter(|&j| k.region[j]) {
            for (r, c) in column.iter_mut().enumerate() {
                *c = (0..a).map(|s| op.entry(r, s) * amps[s * n + j]).sum();
            }
            for (r, c) in column.iter().enumerate() {
                amps[r * n + j] = *c;
            }
        }
    }
}

impl Dynamics for GridDynamics {
    fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn propagate(&self, state: &StateVector, from: f64, to: f64) -> Result<StateVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        if from == to {
            return Ok(state.clone());
        }
        let dims = state.factor_dims().to_vec();
        let mut amps = state.clone().into_vec();
        let ops = self.plan(from, to);
        for run in ops.split_inclusive(|op| matches!(op, Op::Kick(..))) {
            let (grid_ops, kick) = match run.last() {
                Some(&Op::Kick(i, inv)) => (&run[..run.len() - 1], Some((i, inv))),
                _ => (run, None),
            };
            self.run_grid_ops(&mut amps, grid_ops);
            if let Some((i, inv)) = kick {
                self.kick(&mut amps, i, inv);
            }
        }
        StateVector::new(amps, dims)
    }
}
