use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    inner, Kinds, Operator, StateVector, Tensor, C64, VALIDATION_TOL,
};

/// Pointer ("display") levels: ready, showing `+`, showing `−`.
pub const POINTER_LEVELS: usize = 3;
pub const POINTER_READY: usize = 0;
pub const POINTER_PLUS: usize = 1;
pub const POINTER_MINUS: usize = 2;

/// Memory slot levels: blank, `+`, `−`.
pub const SLOT_BLANK: usize = 0;
pub const SLOT_PLUS: usize = 1;
pub const SLOT_MINUS: usize = 2;

/// Largest dense register unitary `build_measurement_unitary` will form.
pub const MAX_DENSE_REGISTER_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Outcome::Plus),
            '-' | '−' => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn slot_level(self) -> usize {
        match self {
            Outcome::Plus => SLOT_PLUS,
            Outcome::Minus => SLOT_MINUS,
        }
    }

    pub fn pointer_level(self) -> usize {
        match self {
            Outcome::Plus => POINTER_PLUS,
            Outcome::Minus => POINTER_MINUS,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A two-outcome measuring device with display and memory.
///
/// The device unitary for one trial is `U = U₀ U_m` on
/// `system ⊗ pointer ⊗ slot`:
///
/// ```text
/// U_m : |φ±⟩|0⟩ ↦ |φ±⟩|±⟩          (system ⊗ pointer)
/// U₀  : |±⟩|blank⟩ ↦ |0⟩|±⟩        (pointer ⊗ slot)
/// ```
///
/// Both are fixed only on those inputs. Each is completed to a permutation
/// of computational basis states (in the `φ±` frame for the system) by
/// pairing the unassigned inputs with the unassigned outputs in ascending
/// index order.
#[derive(Clone, Debug)]
pub struct MeasurementProtocol {
    plus: StateVector,
    minus: StateVector,
    slot_levels: usize,
    repeatable: bool,
}

impl MeasurementProtocol {
    pub fn new(plus: StateVector, minus: StateVector, repeatable: bool) -> Result<Self> {
        if plus.dim() != 2 || minus.dim() != 2 {
            return Err(Error::Construction("system basis must be two qubit states".into()));
        }
        let overlaps = [
            (inner(&plus, &plus)? - C64::new(1.0, 0.0)).norm(),
            (inner(&minus, &minus)? - C64::new(1.0, 0.0)).norm(),
            inner(&plus, &minus)?.norm(),
        ];
        if overlaps.iter().any(|&d| d >= VALIDATION_TOL) {
            return Err(Error::Construction(format!(
                "system basis is not orthonormal (defects {overlaps:?})"
            )));
        }
        Ok(Self {
            plus,
            minus,
            slot_levels: 3,
            repeatable,
        })
    }

    /// Repeatable measurement in the computational basis.
    pub fn z_basis() -> Self {
        Self::new(
            StateVector::from_real(&[1.0, 0.0]).unwrap(),
            StateVector::from_real(&[0.0, 1.0]).unwrap(),
            true,
        )
        .unwrap()
    }

    /// Override the number of levels per memory slot. Fewer than three
    /// cannot hold blank, `+` and `−`; the error surfaces when the unitary
    /// is built.
    pub fn with_slot_levels(mut self, levels: usize) -> Self {
        self.slot_levels = levels;
        self
    }

    pub fn slot_levels(&self) -> usize {
        self.slot_levels
    }

    pub fn repeatable(&self) -> bool {
        self.repeatable
    }

    pub fn eigenstate(&self, o: Outcome) -> &StateVector {
        match o {
            Outcome::Plus => &self.plus,
            Outcome::Minus => &self.minus,
        }
    }

    /// `c₊|φ+⟩ + c₋|φ−⟩`, unnormalized.
    pub fn system_state(&self, c_plus: C64, c_minus: C64) -> StateVector {
        self.plus
            .scaled(c_plus)
            .add(&self.minus.scaled(c_minus))
            .expect("basis states share a dimension")
    }

    fn frame(&self) -> Operator {
        let (p, m) = (self.plus.amplitudes(), self.minus.amplitudes());
        Operator::from_fn(2, |r, c| if c == 0 { p[r] } else { m[r] })
            .and_then(|o| o.validated(Kinds::UNITARY, VALIDATION_TOL))
            .expect("orthonormal basis gives a unitary frame")
    }

    /// `U_m` on `system ⊗ pointer`.
    pub fn display_unitary(&self) -> Result<Operator> {
        let idx = |s: usize, p: usize| s * POINTER_LEVELS + p;
        let settled = if self.repeatable { 1 } else { 0 };
        let perm = complete_permutation(
            2 * POINTER_LEVELS,
            &[
                (idx(0, POINTER_READY), idx(0, POINTER_PLUS)),
                (idx(1, POINTER_READY), idx(settled, POINTER_MINUS)),
            ],
        )?;
        let w = self.frame().tensor(&Operator::identity(POINTER_LEVELS))?;
        w.mul(&perm)?.mul(&w.adjoint())?.validated(Kinds::UNITARY, VALIDATION_TOL)
    }

    /// `U₀` on `pointer ⊗ slot`.
    pub fn record_unitary(&self) -> Result<Operator> {
        let levels = self.slot_levels;
        if levels < 3 {
            return Err(Error::Construction(format!(
                "memory slot with {levels} levels cannot hold blank, + and −"
            )));
        }
        let idx = |p: usize, s: usize| p * levels + s;
        complete_permutation(
            POINTER_LEVELS * levels,
            &[
                (idx(POINTER_PLUS, SLOT_BLANK), idx(POINTER_READY, SLOT_PLUS)),
                (idx(POINTER_MINUS, SLOT_BLANK), idx(POINTER_READY, SLOT_MINUS)),
            ],
        )
    }

    /// `U₀ U_m` on `system ⊗ pointer ⊗ slot`.
    pub fn local_unitary(&self) -> Result<Operator> {
        let um = self.display_unitary()?.tensor(&Operator::identity(self.slot_levels))?;
        let u0 = Operator::identity(2).tensor(&self.record_unitary()?)?;
        u0.mul(&um)?.validated(Kinds::UNITARY, VALIDATION_TOL)
    }
}

/// Permutation matrix sending basis index `src` to `dst` for each pair,
/// completed on the remaining indices in ascending order.
fn complete_permutation(n: usize, fixed: &[(usize, usize)]) -> Result<Operator> {
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for &(src, dst) in fixed {
        if src >= n || dst >= n || image[src] != usize::MAX || used[dst] {
            return Err(Error::Construction(format!(
                "protocol pairs do not define an injective map on {n} basis states"
            )));
        }
        image[src] = dst;
        used[dst] = true;
    }
    let mut free_dst = (0..n).filter(|&d| !used[d]);
    for img in image.iter_mut().filter(|i| **i == usize::MAX) {
        *img = free_dst.next().expect("counts of free sources and targets agree");
    }
    Operator::from_fn(n, |r, c| C64::new(if image[c] == r { 1.0 } else { 0.0 }, 0.0))?
        .validated(Kinds::UNITARY, VALIDATION_TOL)
}

/// Ordered memory slots of the automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryRegister {
    slots: Vec<Outcome>,
    capacity: usize,
}

impl MemoryRegister {
    pub fn ready(capacity: usize) -> Self {
        Self {
            slots: Vec::new(),
            capacity,
        }
    }

    pub fn with_records(capacity: usize, records: &[Outcome]) -> Result<Self> {
        let mut r = Self::ready(capacity);
        for &o in records {
            r.record(o)?;
        }
        Ok(r)
    }

    pub fn record(&mut self, o: Outcome) -> Result<()> {
        if self.slots.len() >= self.capacity {
            return Err(Error::Contract(format!(
                "memory register full at capacity {}",
                self.capacity
            )));
        }
        self.slots.push(o);
        Ok(())
    }

    pub fn slots(&self) -> &[Outcome] {
        &self.slots
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Basis state of the register: recorded slots, then blanks.
    pub fn state(&self, slot_levels: usize) -> Result<StateVector> {
        let digits: Vec<usize> = (0..self.capacity)
            .map(|i| self.slots.get(i).map_or(SLOT_BLANK, |o| o.slot_level()))
            .collect();
        StateVector::product_basis(vec![slot_levels; self.capacity], &digits)
    }
}

/// `|ψ⟩ ⊗ |pointer⟩ ⊗ |register⟩` for a single system.
pub fn device_state(
    system: &StateVector,
    pointer: usize,
    register: &MemoryRegister,
    slot_levels: usize,
) -> Result<StateVector> {
    let ptr = StateVector::basis(vec![POINTER_LEVELS], pointer)?;
    system.tensor(&ptr)?.tensor(&register.state(slot_levels)?)
}

/// Dense `U = U₀U_m` on `system ⊗ pointer ⊗ memory[capacity]`, writing to
/// `slot` and acting as the identity on the other slots.
pub fn build_measurement_unitary(
    proto: &MeasurementProtocol,
    capacity: usize,
    slot: usize,
) -> Result<Operator> {
    if slot >= capacity {
        return Err(Error::Contract(format!("slot {slot} outside capacity {capacity}")));
    }
    let local = proto.local_unitary()?;
    let mut dims = vec![2, POINTER_LEVELS];
    dims.extend(std::iter::repeat_n(proto.slot_levels(), capacity));
    let dim: usize = dims.iter().product();
    if dim > MAX_DENSE_REGISTER_DIM {
        return Err(Error::Size {
            what: "dense register dimension",
            requested: dim,
            limit: MAX_DENSE_REGISTER_DIM,
        });
    }
    crate::hilbert::embed_local(&local, &dims, &[0, 1, 2 + slot])?
        .validated(Kinds::UNITARY, VALIDATION_TOL)
}
