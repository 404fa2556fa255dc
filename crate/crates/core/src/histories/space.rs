use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    validate_family, Dynamics, Hamiltonian, Kinds, Operator, ProjectorFamily, StateVector,
    VALIDATION_TOL,
};

/// Default cap on the number of fine-grained histories a space enumerates.
pub const DEFAULT_HISTORY_CAP: usize = 4096;

/// Largest dimension for which dense chain operators are formed.
pub const MAX_DENSE_CHAIN_DIM: usize = 2048;

/// Reference time of the initial state.
pub const T0: f64 = 0.0;

/// Initial state, dynamics, and one projector family per time.
///
/// The dynamics supply `U(t, t′)`; for a time-independent `H` this is
/// `e^{−iH(t−t′)}`. Histories are evaluated in the Schrödinger picture
/// (project, propagate, project, …, then propagate back to `t₀`), which
/// equals the Heisenberg chain `P_N(t_N)⋯P_1(t_1)|ψ⟩` exactly.
#[derive(Clone)]
pub struct HistorySpace {
    initial: StateVector,
    dynamics: Arc<dyn Dynamics>,
    times: Vec<f64>,
    families: Vec<ProjectorFamily>,
    history_cap: usize,
    branches: Arc<OnceLock<Arc<Vec<BranchVector>>>>,
}

impl fmt::Debug for HistorySpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistorySpace")
            .field("dim", &self.dim())
            .field("times", &self.times)
            .field("cells", &self.families.iter().map(|f| f.len()).collect::<Vec<_>>())
            .finish()
    }
}

impl HistorySpace {
    pub fn new(
        initial: StateVector,
        dynamics: Arc<dyn Dynamics>,
        times: Vec<f64>,
        families: Vec<ProjectorFamily>,
    ) -> Result<Self> {
        let dim = initial.dim();
        if dynamics.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: dynamics.dim(),
            });
        }
        if times.len() != families.len() {
            return Err(Error::Structure(format!(
                "{} times but {} families",
                times.len(),
                families.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Structure("a history space needs at least one time".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structure(format!("times must be strictly increasing, got {times:?}")));
        }
        for (k, fam) in families.iter().enumerate() {
            if fam.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: fam.dim(),
                });
            }
            let report = validate_family(fam);
            if !report.passed {
                return Err(Error::Structure(format!(
                    "family at t={} is not a resolution of the identity \
                     (orthogonality {:.3e}, completeness {:.3e})",
                    times[k], report.orthogonality_defect, report.completeness_defect
                )));
            }
        }
        Ok(Self {
            initial,
            dynamics,
            times,
            families,
            history_cap: DEFAULT_HISTORY_CAP,
            branches: Arc::default(),
        })
    }

    /// Space driven by a time-independent hermitian generator.
    pub fn with_hamiltonian(
        initial: StateVector,
        h: Operator,
        times: Vec<f64>,
        families: Vec<ProjectorFamily>,
    ) -> Result<Self> {
        Self::new(initial, Arc::new(Hamiltonian::new(h)?), times, families)
    }

    pub fn with_history_cap(mut self, cap: usize) -> Self {
        self.history_cap = cap;
        self
    }

    /// Same dynamics, times and families with a different initial state.
    pub fn with_initial(&self, initial: StateVector) -> Result<Self> {
        if initial.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: initial.dim(),
            });
        }
        Ok(Self {
            initial,
            branches: Arc::default(),
            ..self.clone()
        })
    }

    /// Same initial state and dynamics with replaced families.
    pub fn with_families(&self, families: Vec<ProjectorFamily>) -> Result<Self> {
        Self::new(self.initial.clone(), self.dynamics.clone(), self.times.clone(), families)
            .map(|s| s.with_history_cap(self.history_cap))
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn families(&self) -> &[ProjectorFamily] {
        &self.families
    }

    pub fn history_cap(&self) -> usize {
        self.history_cap
    }

    /// Number of fine-grained histories, if it fits in `usize`.
    pub fn history_count(&self) -> Option<usize> {
        self.families
            .iter()
            .try_fold(1usize, |acc, f| acc.checked_mul(f.len()))
    }

    pub(crate) fn check_cap(&self) -> Result<usize> {
        match self.history_count() {
            Some(n) if n <= self.history_cap => Ok(n),
            n => Err(Error::Size {
                what: "history count",
                requested: n.unwrap_or(usize::MAX),
                limit: self.history_cap,
            }),
        }
    }

    /// History by cell names, earliest time first.
    pub fn history(&self, labels: &[&str]) -> Result<History> {
        if labels.len() != self.times.len() {
            return Err(Error::Structure(format!(
                "history has {} cells, space has {} times",
                labels.len(),
                self.times.len()
            )));
        }
        labels
            .iter()
            .zip(&self.families)
            .enumerate()
            .map(|(k, (&name, fam))| {
                fam.position(name).ok_or_else(|| Error::Lookup {
                    label: name.to_string(),
                    time: k,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(History)
    }

    pub fn check_history(&self, h: &History) -> Result<()> {
        if h.0.len() != self.times.len() {
            return Err(Error::Structure(format!(
                "history has {} cells, space has {} times",
                h.0.len(),
                self.times.len()
            )));
        }
        for (k, (&c, fam)) in h.0.iter().zip(&self.families).enumerate() {
            if c >= fam.len() {
                return Err(Error::Lookup {
                    label: format!("#{c}"),
                    time: k,
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self, h: &History) -> Vec<String> {
        h.0.iter()
            .zip(&self.families)
            .map(|(&c, f)| f.label(c).name.clone())
            .collect()
    }

    /// Comma-joined cell names, earliest first.
    pub fn history_name(&self, h: &History) -> String {
        self.labels(h).join(",")
    }

    /// All fine-grained histories, lexicographic in cell order with the
    /// earliest time varying slowest.
    pub fn histories(&self) -> Result<Vec<History>> {
        let n = self.check_cap()?;
        let sizes: Vec<usize> = self.families.iter().map(|f| f.len()).collect();
        Ok((0..n)
            .map(|mut i| {
                let mut cells = vec![0; sizes.len()];
                for (slot, &s) in cells.iter_mut().zip(&sizes).rev() {
                    *slot = i % s;
                    i /= s;
                }
                History(cells)
            })
            .collect())
    }

    fn to_time(&self, state: &StateVector, from: f64, k: usize) -> Result<StateVector> {
        self.dynamics.propagate(state, from, self.times[k])
    }

    /// Forward Schrödinger state after projecting at times `0..=k` with the
    /// given per-time operator, still at time `t_k`.
    pub(crate) fn project_forward<F>(&self, state: &StateVector, upto: usize, mut project: F) -> Result<StateVector>
    where
        F: FnMut(usize, &StateVector) -> Result<StateVector>,
    {
        let mut v = state.clone();
        let mut t = T0;
        for k in 0..=upto {
            if v.norm_sqr() == 0.0 {
                return Ok(v);
            }
            v = self.to_time(&v, t, k)?;
            v = project(k, &v)?;
            t = self.times[k];
        }
        Ok(v)
    }

    /// Back to `t₀` from `t_k`.
    pub(crate) fn back_to_start(&self, v: StateVector, k: usize) -> Result<StateVector> {
        if v.norm_sqr() == 0.0 {
            return Ok(v);
        }
        self.dynamics.propagate(&v, self.times[k], T0)
    }

    /// `C_α|state⟩` for an arbitrary state.
    pub fn apply_chain(&self, h: &History, state: &StateVector) -> Result<StateVector> {
        self.check_history(h)?;
        let last = self.times.len() - 1;
        let v = self.project_forward(state, last, |k, v| self.families[k].projector(h.0[k]).apply(v))?;
        self.back_to_start(v, last)
    }

    /// All branch vectors, computed once per space and shared by every
    /// later call. Prefixes are shared, so each node of the history tree is
    /// propagated once.
    pub fn branch_vectors(&self) -> Result<Arc<Vec<BranchVector>>> {
        self.check_cap()?;
        if let Some(b) = self.branches.get() {
            return Ok(b.clone());
        }
        let computed = Arc::new(self.compute_branch_vectors()?);
        Ok(self.branches.get_or_init(|| computed).clone())
    }

    fn compute_branch_vectors(&self) -> Result<Vec<BranchVector>> {
        let histories = self.histories()?;
        let last = self.times.len() - 1;
        let first = self.to_time(&self.initial, T0, 0)?;
        let per_first: Vec<Vec<StateVector>> = (0..self.families[0].len())
            .into_par_iter()
            .map(|c| {
                let v = self.families[0].projector(c).apply(&first)?;
                let mut leaves = Vec::new();
                self.descend(v, 0, &mut leaves)?;
                leaves
                    .into_iter()
                    .map(|v| self.back_to_start(v, last))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(histories
            .into_iter()
            .zip(per_first.into_iter().flatten())
            .map(|(history, vector)| BranchVector::new(history, vector))
            .collect())
    }

    fn descend(&self, v: StateVector, k: usize, leaves: &mut Vec<StateVector>) -> Result<()> {
        if k + 1 == self.times.len() {
            leaves.push(v);
            return Ok(());
        }
        let fam = &self.families[k + 1];
        if v.norm_sqr() == 0.0 {
            for _ in 0..fam.len() {
                self.descend(v.clone(), k + 1, leaves)?;
            }
            return Ok(());
        }
        let moved = self.dynamics.propagate(&v, self.times[k], self.times[k + 1])?;
        for c in 0..fam.len() {
            self.descend(fam.projector(c).apply(&moved)?, k + 1, leaves)?;
        }
        Ok(())
    }
}

/// One cell index per time, earliest first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct History(pub Vec<usize>);

impl History {
    pub fn cells(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `C_α|ψ⟩` with its squared norm.
#[derive(Clone, Debug)]
pub struct BranchVector {
    pub history: History,
    pub vector: StateVector,
    pub weight: f64,
}

impl BranchVector {
    pub fn new(history: History, vector: StateVector) -> Self {
        let weight = vector.norm_sqr();
        Self {
            history,
            vector,
            weight,
        }
    }
}

/// `U(−t) P U(t)` for `U(t) = e^{−iHt}`.
pub fn heisenberg_projector(p: &Operator, h: &Operator, t: f64) -> Result<Operator> {
    let p = p.clone().validated(Kinds::PROJECTOR, VALIDATION_TOL)?;
    if h.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: h.dim(),
        });
    }
    let u = Hamiltonian::new(h.clone())?.unitary(t);
    u.adjoint()
        .mul(&p)?
        .mul(&u)?
        .validated(Kinds::PROJECTOR, VALIDATION_TOL)
}

/// Dense `C_α = P_{α_N}(t_N) ⋯ P_{α_1}(t_1)`, column by column.
pub fn chain_operator(space: &HistorySpace, h: &History) -> Result<Operator> {
    space.check_history(h)?;
    let dim = space.dim();
    if dim > MAX_DENSE_CHAIN_DIM {
        return Err(Error::Size {
            what: "dense chain operator dimension",
            requested: dim,
            limit: MAX_DENSE_CHAIN_DIM,
        });
    }
    let dims = space.initial().factor_dims().to_vec();
    let columns: Vec<StateVector> = (0..dim)
        .into_par_iter()
        .map(|j| space.apply_chain(h, &StateVector::basis(dims.clone(), j)?))
        .collect::<Result<_>>()?;
    Operator::from_fn(dim, |r, c| columns[c].amplitude(r))
}

pub fn branch_vector(space: &HistorySpace, h: &History) -> Result<BranchVector> {
    let v = space.apply_chain(h, space.initial())?;
    Ok(BranchVector::new(h.clone(), v))
}

/// The space restarted from its own branch `C_α|ψ⟩`, renormalized: the end
/// state of that history carried back to `t₀`.
pub fn fine_tuned_space(space: &HistorySpace, h: &History) -> Result<HistorySpace> {
    let v = space.apply_chain(h, space.initial())?;
    if v.norm_sqr() == 0.0 {
        return Err(Error::Conditioning {
            measure: 0.0,
            floor: 0.0,
        });
    }
    space.with_initial(v.normalized()?)
}

/// `‖Σ_α C_α|ψ⟩ − |ψ⟩‖`.
pub fn superposition_identity_check(space: &HistorySpace) -> Result<f64> {
    let branches = space.branch_vectors()?;
    let mut sum = StateVector::zeros(space.initial().factor_dims().to_vec())?;
    for b in branches.iter() {
        sum = sum.add(&b.vector)?;
    }
    Ok(sum.sub(space.initial())?.norm())
}

/// `Σ_α C_α|ψ⟩` propagated to the last time, against `U(t_N)|ψ⟩`.
pub fn schrodinger_agreement(space: &HistorySpace) -> Result<f64> {
    let branches = space.branch_vectors()?;
    let mut sum = StateVector::zeros(space.initial().factor_dims().to_vec())?;
    for b in branches.iter() {
        sum = sum.add(&b.vector)?;
    }
    let t_last = *space.times().last().unwrap();
    let lhs = space.dynamics().propagate(&sum, T0, t_last)?;
    let rhs = space.dynamics().propagate(space.initial(), T0, t_last)?;
    Ok(lhs.max_abs_diff(&rhs))
}
