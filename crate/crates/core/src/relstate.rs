//! Relative states and the biorthogonal (Schmidt) decomposition of a
//! bipartite pure state.
//!
//! A split is a factor boundary: `split = k` puts factors `0..k` in the
//! left block and `k..` in the right block.
//!
//! Phase convention: the first entry of each left Schmidt vector whose
//! modulus exceeds `1e-12` is made real and positive; the right vector
//! absorbs the compensating phase.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector, C64};

/// Coefficients at or below this fraction of `‖Ψ‖` are treated as absent.
const RANK_CUTOFF: f64 = 1e-13;

/// Coefficients closer than this make the bases non-unique.
const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Non-negative, descending.
    pub coefficients: Vec<f64>,
    pub left_basis: Vec<StateVector>,
    pub right_basis: Vec<StateVector>,
    /// Set when two retained coefficients coincide within `1e-10`; the
    /// bases within that block are then an arbitrary orthonormal choice.
    pub non_unique: bool,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// `Σ_k c_k |φ_k⟩ ⊗ |η_k⟩`.
    pub fn reconstruct(&self) -> Result<StateVector> {
        let mut dims = self.left_basis[0].factor_dims().to_vec();
        dims.extend_from_slice(self.right_basis[0].factor_dims());
        let mut acc = StateVector::zeros(dims)?;
        for ((c, l), r) in self.coefficients.iter().zip(&self.left_basis).zip(&self.right_basis) {
            use crate::hilbert::Tensor;
            acc = acc.add(&l.tensor(r)?.scaled(C64::new(*c, 0.0)))?;
        }
        Ok(acc)
    }
}

fn block_dims(psi: &StateVector, split: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let dims = psi.factor_dims();
    if dims.len() < 2 {
        return Err(Error::Structure(
            "bipartition needs a state with at least two tensor factors".into(),
        ));
    }
    if split == 0 || split >= dims.len() {
        return Err(Error::Structure(format!(
            "split {split} must lie strictly inside 0..{}",
            dims.len()
        )));
    }
    Ok((dims[..split].to_vec(), dims[split..].to_vec()))
}

/// Amplitudes reshaped to a `left × right` matrix.
fn coefficient_matrix(psi: &StateVector, dl: usize, dr: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(dl, dr, psi.amplitudes())
}

pub fn schmidt_decompose(psi: &StateVector, split: usize) -> Result<SchmidtDecomposition> {
    let (ldims, rdims) = block_dims(psi, split)?;
    let dl: usize = ldims.iter().product();
    let dr: usize = rdims.iter().product();
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(Error::Contract("cannot decompose the zero vector".into()));
    }
    let m = coefficient_matrix(psi, dl, dr);
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut coefficients = Vec::new();
    let mut left_basis = Vec::new();
    let mut right_basis = Vec::new();
    for k in order {
        let s = svd.singular_values[k];
        if s <= RANK_CUTOFF * norm {
            continue;
        }
        let mut left: Vec<C64> = u.column(k).iter().copied().collect();
        // Ψ = Σ s_k u_k v_k^T, with v_t rows being v_k^T
        let mut right: Vec<C64> = v_t.row(k).iter().copied().collect();
        if let Some(lead) = left.iter().copied().find(|z| z.norm() > 1e-12) {
            let phase = lead / lead.norm();
            for z in &mut left {
                *z /= phase;
            }
            for z in &mut right {
                *z *= phase;
            }
        }
        coefficients.push(s);
        left_basis.push(StateVector::new(left, ldims.clone())?);
        right_basis.push(StateVector::new(right, rdims.clone())?);
    }
    let non_unique = coefficients.windows(2).any(|w| (w[0] - w[1]).abs() < DEGENERACY_TOL);
    Ok(SchmidtDecomposition {
        coefficients,
        left_basis,
        right_basis,
        non_unique,
    })
}

fn normalize_relative(v: StateVector) -> Result<StateVector> {
    let n2 = v.norm_sqr();
    // exact zero or rounding dust left by an orthogonal probe
    if n2 <= 1e-28 {
        return Err(Error::NoRelativeState { norm_sqr: n2 });
    }
    v.normalized()
}

/// Normalized state of the complementary block relative to `probe` on
/// `side`: `(⟨probe| ⊗ I)Ψ / ‖·‖`.
pub fn relative_state(
    psi: &StateVector,
    probe: &StateVector,
    split: usize,
    side: Side,
) -> Result<StateVector> {
    let (ldims, rdims) = block_dims(psi, split)?;
    let dl: usize = ldims.iter().product();
    let dr: usize = rdims.iter().product();
    let probe_dim = if side == Side::Left { dl } else { dr };
    if probe.dim() != probe_dim {
        return Err(Error::DimensionMismatch {
            expected: probe_dim,
            actual: probe.dim(),
        });
    }
    if !probe.is_normalized() {
        return Err(Error::Contract("probe state must be normalized".into()));
    }
    let m = coefficient_matrix(psi, dl, dr);
    let rel = match side {
        Side::Left => {
            let row = probe.as_dvector().adjoint() * &m;
            StateVector::new(row.iter().copied().collect(), rdims)?
        }
        Side::Right => {
            let col = &m * probe.as_dvector().conjugate();
            StateVector::new(col.iter().copied().collect(), ldims)?
        }
    };
    normalize_relative(rel)
}

/// Normalized `(P_Δ ⊗ I)Ψ` (or `(I ⊗ P_Δ)Ψ`), on the full space.
pub fn relative_state_ranged(
    psi: &StateVector,
    projector: &Operator,
    split: usize,
    side: Side,
) -> Result<StateVector> {
    let (ldims, rdims) = block_dims(psi, split)?;
    if !projector.kinds().projector {
        return Err(Error::Contract("ranged relative state needs a validated projector".into()));
    }
    let factors: Vec<usize> = match side {
        Side::Left => (0..ldims.len()).collect(),
        Side::Right => (ldims.len()..ldims.len() + rdims.len()).collect(),
    };
    let projected = crate::hilbert::apply_local(projector, psi, &factors)?;
    normalize_relative(projected)
}
