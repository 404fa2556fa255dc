use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{check_size, Tensor, C64, MAX_AMPLITUDES, NORMALIZED_TOL};

/// A pure state on a finite tensor-product Hilbert space.
///
/// Amplitudes are stored in Kronecker order with the first factor as the
/// slowest-varying index: for `factor_dims = [d0, d1]` the amplitude of
/// `|i⟩⊗|j⟩` lives at `i * d1 + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
    dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::Structure(format!(
                "factor dimensions must be positive, got {factor_dims:?}"
            )));
        }
        let total = checked_product(&factor_dims)?;
        if total != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: total,
                actual: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Contract("amplitudes must be finite".into()));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
            dims: factor_dims,
        })
    }

    /// Single-factor state.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        Self::new(amps, vec![n])
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(factor_dims: Vec<usize>) -> Result<Self> {
        let total = checked_product(&factor_dims)?;
        Self::new(vec![C64::new(0.0, 0.0); total], factor_dims)
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(factor_dims: Vec<usize>, index: usize) -> Result<Self> {
        let mut s = Self::zeros(factor_dims)?;
        if index >= s.dim() {
            return Err(Error::Contract(format!(
                "basis index {index} out of range for dimension {}",
                s.dim()
            )));
        }
        s.amps[index] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Basis vector addressed by one digit per tensor factor.
    pub fn product_basis(factor_dims: Vec<usize>, digits: &[usize]) -> Result<Self> {
        if digits.len() != factor_dims.len() {
            return Err(Error::DimensionMismatch {
                expected: factor_dims.len(),
                actual: digits.len(),
            });
        }
        let mut index = 0;
        for (&d, &dim) in digits.iter().zip(&factor_dims) {
            if d >= dim {
                return Err(Error::Contract(format!("digit {d} ≥ factor dimension {dim}")));
            }
            index = index * dim + d;
        }
        Self::basis(factor_dims, index)
    }

    pub(crate) fn from_parts(amps: DVector<C64>, dims: Vec<usize>) -> Self {
        debug_assert_eq!(amps.len(), dims.iter().product::<usize>());
        Self { amps, dims }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amps.data.into()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORMALIZED_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            amps: &self.amps * c,
            dims: self.dims.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            amps: &self.amps + &other.amps,
            dims: self.dims.clone(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            amps: &self.amps - &other.amps,
            dims: self.dims.clone(),
        })
    }

    /// Reinterpret the amplitudes with a different factorization.
    pub fn with_factor_dims(self, factor_dims: Vec<usize>) -> Result<Self> {
        Self::new(self.into_vec(), factor_dims)
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub(crate) fn amps_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }
}

impl Tensor for StateVector {
    fn tensor_with_limit(&self, other: &Self, limit: usize) -> Result<Self> {
        let total = check_size(self.dim(), other.dim(), limit)?;
        let mut amps = Vec::with_capacity(total);
        for a in self.amps.iter() {
            for b in other.amps.iter() {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ok(Self {
            amps: DVector::from_vec(amps),
            dims,
        })
    }
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.check_same_dim(b)?;
    Ok(a.amps.dotc(&b.amps))
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    let mut total: usize = 1;
    for &d in dims {
        total = total.checked_mul(d).filter(|&t| t <= MAX_AMPLITUDES).ok_or(Error::Size {
            what: "state dimension",
            requested: usize::MAX,
            limit: MAX_AMPLITUDES,
        })?;
    }
    Ok(total)
}
