use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{Kinds, Operator, StateVector, C64, VALIDATION_TOL};

/// A unitary propagator `U(to, from)` on a fixed Hilbert space.
///
/// Implementations must satisfy the group law
/// `U(c, b) U(b, a) = U(c, a)` and `U(a, b) = U(b, a)†` for every time
/// they accept; history identities depend on it.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn propagate(&self, state: &StateVector, from: f64, to: f64) -> Result<StateVector>;

    /// Dense matrix of `U(to, from)` when cheaply available.
    fn propagator(&self, _from: f64, _to: f64) -> Option<Operator> {
        None
    }
}

#[derive(Clone, Debug)]
enum Spectrum {
    Diagonal(Vec<f64>),
    Dense {
        values: Vec<f64>,
        vectors: DMatrix<C64>,
    },
}

/// Time-independent hermitian generator with a cached eigendecomposition,
/// so `U(t) = V e^{−iΛt} V†` is unitary to rounding for every `t`.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    op: Operator,
    spectrum: Spectrum,
}

impl Hamiltonian {
    pub fn new(op: Operator) -> Result<Self> {
        let op = op.validated(Kinds::HERMITIAN, VALIDATION_TOL)?;
        let spectrum = match op.diagonal_entries() {
            Some(d) => Spectrum::Diagonal(d.iter().map(|z| z.re).collect()),
            None => {
                let m = op.to_dense();
                // symmetrize away rounding before the hermitian solver
                let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
                let eig = m.symmetric_eigen();
                let mut vectors = eig.eigenvectors;
                for mut col in vectors.column_iter_mut() {
                    let n = col.norm();
                    col /= C64::new(n, 0.0);
                }
                Spectrum::Dense {
                    values: eig.eigenvalues.iter().copied().collect(),
                    vectors,
                }
            }
        };
        Ok(Self { op, spectrum })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            op: Operator::zero(dim),
            spectrum: Spectrum::Diagonal(vec![0.0; dim]),
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        match &self.spectrum {
            Spectrum::Diagonal(v) => v,
            Spectrum::Dense { values, .. } => values,
        }
    }

    /// `e^{−iHt}`.
    pub fn unitary(&self, t: f64) -> Operator {
        let phases = |values: &[f64]| -> Vec<C64> {
            values.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect()
        };
        let op = match &self.spectrum {
            Spectrum::Diagonal(v) => Operator::diagonal(phases(v)),
            Spectrum::Dense { values, vectors } => {
                let d = DVector::from_vec(phases(values));
                let mut scaled = vectors.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                Operator::new(scaled * vectors.adjoint())
            }
        }
        .expect("spectrum is non-empty and square");
        op.validated_unchecked_unitary()
    }

    /// `e^{−iHt}|ψ⟩` without forming the full propagator.
    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        let amps = match &self.spectrum {
            Spectrum::Diagonal(v) => DVector::from_iterator(
                v.len(),
                v.iter()
                    .zip(state.amplitudes())
                    .map(|(&l, a)| a * C64::from_polar(1.0, -l * t)),
            ),
            Spectrum::Dense { values, vectors } => {
                let mut coeffs = vectors.adjoint() * state.as_dvector();
                for (c, &l) in coeffs.iter_mut().zip(values) {
                    *c *= C64::from_polar(1.0, -l * t);
                }
                vectors * coeffs
            }
        };
        Ok(StateVector::from_parts(amps, state.factor_dims().to_vec()))
    }
}

impl Dynamics for Hamiltonian {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn propagate(&self, state: &StateVector, from: f64, to: f64) -> Result<StateVector> {
        self.evolve(state, to - from)
    }

    fn propagator(&self, from: f64, to: f64) -> Option<Operator> {
        Some(self.unitary(to - from))
    }
}

/// `e^{−iHt}|state⟩` for hermitian `H`.
pub fn evolve(state: &StateVector, h: &Operator, t: f64) -> Result<StateVector> {
    Hamiltonian::new(h.clone())?.evolve(state, t)
}

/// A unitary acting on a subset of tensor factors, fired at a given time.
#[derive(Clone, Debug)]
pub struct Gate {
    pub time: f64,
    pub op: Operator,
    pub factors: Vec<usize>,
}

/// Piecewise-constant dynamics: instantaneous unitaries at fixed times and
/// nothing in between. Evolving across a gate time applies the gate;
/// evolving backwards across it applies the adjoint.
#[derive(Clone, Debug)]
pub struct GateSequence {
    factor_dims: Vec<usize>,
    gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(factor_dims: Vec<usize>, mut gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            let local: usize = g
                .factors
                .iter()
                .map(|&f| factor_dims.get(f).copied().unwrap_or(0))
                .product();
            if local != g.op.dim() || g.factors.iter().any(|&f| f >= factor_dims.len()) {
                return Err(Error::Structure(format!(
                    "gate at t={} acts on factors {:?} of dims {:?} but has dimension {}",
                    g.time,
                    g.factors,
                    factor_dims,
                    g.op.dim()
                )));
            }
            if !g.op.kinds().unitary {
                return Err(Error::Contract(format!("gate at t={} is not validated unitary", g.time)));
            }
        }
        gates.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { factor_dims, gates })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }
}

impl Dynamics for GateSequence {
    fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    fn propagate(&self, state: &StateVector, from: f64, to: f64) -> Result<StateVector> {
        let mut s = state.clone();
        if to >= from {
            for g in self.gates.iter().filter(|g| g.time > from && g.time <= to) {
                s = apply_local(&g.op, &s, &g.factors)?;
            }
        } else {
            for g in self.gates.iter().rev().filter(|g| g.time > to && g.time <= from) {
                s = apply_local(&g.op.adjoint(), &s, &g.factors)?;
            }
        }
        Ok(s)
    }
}

/// Apply `op`, defined on the ordered factors `factors`, to `state`,
/// acting as the identity on all other factors.
pub fn apply_local(op: &Operator, state: &StateVector, factors: &[usize]) -> Result<StateVector> {
    let dims = state.factor_dims();
    let nf = dims.len();
    if factors.iter().any(|&f| f >= nf) {
        return Err(Error::Structure(format!("factor index out of range in {factors:?}")));
    }
    let mut sorted = factors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != factors.len() {
        return Err(Error::Structure(format!("repeated factor in {factors:?}")));
    }
    let local_dim: usize = factors.iter().map(|&f| dims[f]).product();
    if local_dim != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            actual: op.dim(),
        });
    }

    let mut strides = vec![1usize; nf];
    for i in (0..nf.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = digit_offsets(factors.iter().map(|&f| (dims[f], strides[f])));
    let rest: Vec<usize> = (0..nf).filter(|f| !factors.contains(f)).collect();
    let bases = digit_offsets(rest.iter().map(|&f| (dims[f], strides[f])));

    let input = state.amplitudes();
    let mut out = state.clone();
    let out_amps = out.amps_mut();
    let dense = op.to_dense_if_small();
    let mut buf = vec![C64::new(0.0, 0.0); local_dim];
    for &base in &bases {
        for (b, &off) in buf.iter_mut().zip(&offsets) {
            *b = input[base + off];
        }
        for (i, &off) in offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            match &dense {
                Some(m) => {
                    for (j, b) in buf.iter().enumerate() {
                        acc += m[(i, j)] * b;
                    }
                }
                None => acc = op.entry(i, i) * buf[i],
            }
            out_amps[base + off] = acc;
        }
    }
    Ok(out)
}

/// Full-space matrix of `op ⊗ I`, with `op` acting on the ordered `factors`
/// of a space with factor dimensions `dims`. Diagonal operators stay
/// diagonal.
pub fn embed_local(op: &Operator, dims: &[usize], factors: &[usize]) -> Result<Operator> {
    let nf = dims.len();
    if factors.iter().any(|&f| f >= nf) {
        return Err(Error::Structure(format!("factor index out of range in {factors:?}")));
    }
    let local_dim: usize = factors.iter().map(|&f| dims[f]).product();
    if local_dim != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            actual: op.dim(),
        });
    }
    let mut strides = vec![1usize; nf];
    for i in (0..nf.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = digit_offsets(factors.iter().map(|&f| (dims[f], strides[f])));
    let rest: Vec<usize> = (0..nf).filter(|f| !factors.contains(f)).collect();
    let bases = digit_offsets(rest.iter().map(|&f| (dims[f], strides[f])));
    let dim: usize = dims.iter().product();

    let embedded = match op.diagonal_entries() {
        Some(d) => {
            let mut diag = vec![C64::new(0.0, 0.0); dim];
            for &base in &bases {
                for (i, &off) in offsets.iter().enumerate() {
                    diag[base + off] = d[i];
                }
            }
            Operator::diagonal(diag)?
        }
        None => {
            let m = op.to_dense();
            let mut full = DMatrix::zeros(dim, dim);
            for &base in &bases {
                for (i, &oi) in offsets.iter().enumerate() {
                    for (j, &oj) in offsets.iter().enumerate() {
                        full[(base + oi, base + oj)] = m[(i, j)];
                    }
                }
            }
            Operator::new(full)?
        }
    };
    Ok(embedded.with_kinds(op.kinds()))
}

/// Flat offsets of every digit combination, first listed factor slowest.
fn digit_offsets(factors: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for (dim, stride) in factors {
        let mut next = Vec::with_capacity(offsets.len() * dim);
        for &o in &offsets {
            for d in 0..dim {
                next.push(o + d * stride);
            }
        }
        offsets = next;
    }
    offsets
}

impl Operator {
    fn to_dense_if_small(&self) -> Option<DMatrix<C64>> {
        if self.is_diagonal() {
            None
        } else {
            Some(self.to_dense())
        }
    }

    /// Spectral propagators are unitary by construction.
    fn validated_unchecked_unitary(self) -> Self {
        let kinds = Kinds {
            unitary: true,
            ..self.kinds()
        };
        self.with_kinds(kinds)
    }
}
