//! Seeded random states, hermitian generators, unitaries and projector
//! families for randomized property suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{CellLabel, Kinds, Operator, ProjectorFamily, StateVector, C64, VALIDATION_TOL};
use crate::error::Result;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Normalized state with i.i.d. complex Gaussian amplitudes.
pub fn state<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> StateVector {
    let n = dims.iter().product();
    let amps = (0..n).map(|_| gaussian(rng)).collect();
    StateVector::new(amps, dims)
        .and_then(|s| s.normalized())
        .expect("gaussian vector is almost surely non-zero")
}

/// Hermitian matrix from the Gaussian unitary ensemble, scaled by `scale`.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Operator {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let h = (&a + a.adjoint()) * C64::new(0.5 * scale, 0.0);
    Operator::new(h)
        .and_then(|o| o.validated(Kinds::HERMITIAN, VALIDATION_TOL))
        .expect("symmetrized matrix is hermitian")
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        col *= phase;
    }
    Operator::new(q)
        .and_then(|o| o.validated(Kinds::UNITARY, VALIDATION_TOL))
        .expect("QR factor is unitary")
}

/// Family whose cells project onto consecutive blocks of columns of
/// `basis`, with the given ranks. Ranks must sum to the dimension.
pub fn family_from_basis(basis: &Operator, ranks: &[usize], prefix: &str) -> Result<ProjectorFamily> {
    let u = basis.to_dense();
    let dim = u.nrows();
    let mut start = 0;
    let mut cells = Vec::with_capacity(ranks.len());
    for (k, &r) in ranks.iter().enumerate() {
        let cols: Vec<StateVector> = (start..start + r)
            .map(|j| StateVector::from_amplitudes(u.column(j).iter().copied().collect()))
            .collect::<Result<_>>()?;
        start += r;
        cells.push((
            CellLabel::new(format!("{prefix}{k}")),
            Operator::projector_onto_span(&cols)?,
        ));
    }
    if start != dim {
        return Err(crate::Error::Structure(format!(
            "ranks sum to {start}, dimension is {dim}"
        )));
    }
    ProjectorFamily::new(cells)
}

/// Random partition of `dim` into `parts` non-empty blocks.
pub fn ranks<R: Rng + ?Sized>(rng: &mut R, dim: usize, parts: usize) -> Vec<usize> {
    assert!(parts >= 1 && parts <= dim);
    let mut ranks = vec![1; parts];
    for _ in parts..dim {
        let k = rng.random_range(0..parts);
        ranks[k] += 1;
    }
    ranks
}
