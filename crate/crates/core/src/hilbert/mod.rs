//! Dense finite-dimensional Hilbert-space kernel: pure states with explicit
//! tensor structure, operators, unitary evolution and projector families.
//!
//! Tensor products use Kronecker ordering with the left operand as the
//! slow index everywhere in the crate.

mod dynamics;
mod family;
mod operator;
pub mod random;
mod state;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use dynamics::{apply_local, embed_local, evolve, Dynamics, Gate, GateSequence, Hamiltonian};
pub use family::{
    validate_family, validate_family_with_tol, Cell, CellLabel, FamilyReport, ProjectorFamily,
    ELSEWHERE,
};
pub use operator::{Kinds, Operator};
pub use state::{inner, StateVector};

pub type C64 = Complex64;

/// Default cap on the number of amplitudes in any state or operator side.
pub const MAX_AMPLITUDES: usize = 1 << 22;

/// Default tolerance for projector/unitary/hermitian validation.
pub const VALIDATION_TOL: f64 = 1e-10;

/// A state counts as normalized when `|‖v‖² − 1|` is below this.
pub const NORMALIZED_TOL: f64 = 1e-12;

/// Kronecker product of like objects.
pub trait Tensor: Sized {
    fn tensor_with_limit(&self, other: &Self, limit: usize) -> Result<Self>;

    fn tensor(&self, other: &Self) -> Result<Self> {
        self.tensor_with_limit(other, MAX_AMPLITUDES)
    }
}

/// `a ⊗ b`, left operand slow.
pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

fn check_size(a: usize, b: usize, limit: usize) -> Result<usize> {
    match a.checked_mul(b) {
        Some(n) if n <= limit => Ok(n),
        _ => Err(Error::Size {
            what: "tensor product dimension",
            requested: a.saturating_mul(b),
            limit,
        }),
    }
}

/// Pauli matrices and common single-qubit states.
pub mod qubit {
    use super::{Operator, StateVector, C64};

    pub fn sigma_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn sigma_y() -> Operator {
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        Operator::from_fn(2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => z,
        })
        .unwrap()
    }

    pub fn sigma_z() -> Operator {
        Operator::diagonal(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap()
    }

    pub fn zero() -> StateVector {
        StateVector::from_real(&[1.0, 0.0]).unwrap()
    }

    pub fn one() -> StateVector {
        StateVector::from_real(&[0.0, 1.0]).unwrap()
    }

    pub fn plus() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(&[h, h]).unwrap()
    }

    pub fn minus() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(&[h, -h]).unwrap()
    }
}
