use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{check_size, StateVector, Tensor, C64};

/// Structural properties an operator has been checked to satisfy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Kinds {
    pub hermitian: bool,
    pub unitary: bool,
    pub projector: bool,
}

impl Kinds {
    pub const NONE: Kinds = Kinds {
        hermitian: false,
        unitary: false,
        projector: false,
    };
    pub const HERMITIAN: Kinds = Kinds {
        hermitian: true,
        unitary: false,
        projector: false,
    };
    pub const UNITARY: Kinds = Kinds {
        hermitian: false,
        unitary: true,
        projector: false,
    };
    pub const PROJECTOR: Kinds = Kinds {
        hermitian: true,
        unitary: false,
        projector: true,
    };
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(DMatrix<C64>),
    /// Diagonal in the computational basis. Position indicators and memory
    /// record projectors live here; storing them densely is prohibitive on
    /// grids.
    Diagonal(DVector<C64>),
}

/// A square linear operator with validated kind flags.
#[derive(Clone, Debug)]
pub struct Operator {
    repr: Repr,
    kinds: Kinds,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Structure(format!(
                "operator must be a non-empty square matrix, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            repr: Repr::Dense(matrix),
            kinds: Kinds::NONE,
        })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    /// Row-major real matrix, mostly for small hand-written operators.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Structure("rows must form a square matrix".into()));
        }
        Self::from_fn(n, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Structure("operator must be non-empty".into()));
        }
        Ok(Self {
            repr: Repr::Diagonal(DVector::from_vec(entries)),
            kinds: Kinds::NONE,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            repr: Repr::Diagonal(DVector::from_element(dim, C64::new(1.0, 0.0))),
            kinds: Kinds {
                hermitian: true,
                unitary: true,
                projector: true,
            },
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            repr: Repr::Diagonal(DVector::from_element(dim, C64::new(0.0, 0.0))),
            kinds: Kinds::PROJECTOR,
        }
    }

    /// Diagonal 0/1 projector selecting the computational basis states where
    /// `mask` is true.
    pub fn indicator(mask: &[bool]) -> Result<Self> {
        let entries = mask
            .iter()
            .map(|&m| C64::new(if m { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let mut op = Self::diagonal(entries)?;
        op.kinds = Kinds::PROJECTOR;
        Ok(op)
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn projector_onto(v: &StateVector) -> Result<Self> {
        Self::projector_onto_span(&[v.normalized()?])
    }

    /// `Σ_k |v_k⟩⟨v_k|` for orthonormal `v_k`; orthonormality is validated
    /// through the projector check.
    pub fn projector_onto_span(vectors: &[StateVector]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Structure("span needs at least one vector".into()))?;
        let d = first.dim();
        let mut m = DMatrix::zeros(d, d);
        for v in vectors {
            first.check_same_dim(v)?;
            m += v.as_dvector() * v.as_dvector().adjoint();
        }
        Self::new(m)?.validated(Kinds::PROJECTOR, super::VALIDATION_TOL)
    }

    /// Check each claimed kind and record it; fails on the first violated
    /// claim.
    pub fn validated(mut self, claim: Kinds, tol: f64) -> Result<Self> {
        if claim.hermitian && !self.kinds.hermitian {
            let d = self.hermiticity_defect();
            if d >= tol {
                return Err(Error::Contract(format!("operator not hermitian: defect {d:e}")));
            }
            self.kinds.hermitian = true;
        }
        if claim.unitary && !self.kinds.unitary {
            let d = self.unitarity_defect();
            if d >= tol {
                return Err(Error::Contract(format!("operator not unitary: defect {d:e}")));
            }
            self.kinds.unitary = true;
        }
        if claim.projector && !self.kinds.projector {
            let d = self.projector_defect();
            if d >= tol {
                return Err(Error::Contract(format!("operator not a projector: defect {d:e}")));
            }
            self.kinds.projector = true;
            self.kinds.hermitian = true;
        }
        Ok(self)
    }

    pub fn kinds(&self) -> Kinds {
        self.kinds
    }

    pub(crate) fn with_kinds(mut self, kinds: Kinds) -> Self {
        self.kinds = kinds;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Diagonal(d) => d.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal(_))
    }

    pub fn diagonal_entries(&self) -> Option<&[C64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d.as_slice()),
            Repr::Dense(_) => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match &self.repr {
            Repr::Dense(m) => m[(i, j)],
            Repr::Diagonal(d) if i == j => d[i],
            Repr::Diagonal(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn adjoint(&self) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m.adjoint()),
            Repr::Diagonal(d) => Repr::Diagonal(d.map(|z| z.conj())),
        };
        Self {
            repr,
            kinds: self.kinds,
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v.dim())?;
        let amps = match &self.repr {
            Repr::Dense(m) => m * v.as_dvector(),
            Repr::Diagonal(d) => d.component_mul(v.as_dvector()),
        };
        Ok(StateVector::from_parts(amps, v.factor_dims().to_vec()))
    }

    /// `self · other`. Kind flags are not propagated except where the
    /// algebra guarantees them (products of unitaries).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => Repr::Diagonal(a.component_mul(b)),
            (Repr::Diagonal(a), Repr::Dense(b)) => {
                let mut m = b.clone();
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    row *= a[i];
                }
                Repr::Dense(m)
            }
            (Repr::Dense(a), Repr::Diagonal(b)) => {
                let mut m = a.clone();
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col *= b[j];
                }
                Repr::Dense(m)
            }
            (Repr::Dense(a), Repr::Dense(b)) => Repr::Dense(a * b),
        };
        let kinds = Kinds {
            unitary: self.kinds.unitary && other.kinds.unitary,
            ..Kinds::NONE
        };
        Ok(Self { repr, kinds })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => Repr::Diagonal(a + b),
            _ => Repr::Dense(self.to_dense() + other.to_dense()),
        };
        Ok(Self {
            repr,
            kinds: Kinds {
                hermitian: self.kinds.hermitian && other.kinds.hermitian,
                ..Kinds::NONE
            },
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m * c),
            Repr::Diagonal(d) => Repr::Diagonal(d * c),
        };
        Self {
            repr,
            kinds: Kinds::NONE,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => max_abs(&(a - b)),
            _ => max_abs(&(self.to_dense() - other.to_dense())),
        }
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().map(|z| z.im.abs() * 2.0).fold(0.0, f64::max),
            Repr::Dense(m) => max_abs(&(m - m.adjoint())),
        }
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().map(|z| (z.norm_sqr() - 1.0).abs()).fold(0.0, f64::max),
            Repr::Dense(m) => {
                let n = m.nrows();
                max_abs(&(m.adjoint() * m - DMatrix::identity(n, n)))
            }
        }
    }

    /// `max(‖P² − P‖_max, ‖P − P†‖_max)`.
    pub fn projector_defect(&self) -> f64 {
        let idem = match &self.repr {
            Repr::Diagonal(d) => d.iter().map(|z| (z * z - z).norm()).fold(0.0, f64::max),
            Repr::Dense(m) => max_abs(&(m * m - m)),
        };
        idem.max(self.hermiticity_defect())
    }

    /// Trace, e.g. the rank of a projector.
    pub fn trace(&self) -> C64 {
        match &self.repr {
            Repr::Dense(m) => m.trace(),
            Repr::Diagonal(d) => d.sum(),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: d,
            });
        }
        Ok(())
    }
}

impl Tensor for Operator {
    fn tensor_with_limit(&self, other: &Self, limit: usize) -> Result<Self> {
        check_size(self.dim(), other.dim(), limit)?;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => Repr::Diagonal(a.kronecker(b)),
            _ => Repr::Dense(self.to_dense().kronecker(&other.to_dense())),
        };
        let kinds = Kinds {
            hermitian: self.kinds.hermitian && other.kinds.hermitian,
            unitary: self.kinds.unitary && other.kinds.unitary,
            projector: self.kinds.projector && other.kinds.projector,
        };
        Ok(Self { repr, kinds })
    }
}

fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::Storage<C64, R, C>>(
    m: &nalgebra::Matrix<C64, R, C, S>,
) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
