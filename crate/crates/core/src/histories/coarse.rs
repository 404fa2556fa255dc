use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{History, HistorySpace};
use crate::error::{Error, Result};
use crate::hilbert::{CellLabel, Operator, ProjectorFamily, StateVector};

/// Default floor below which a conditioning history counts as impossible,
/// relative to `‖ψ‖²`.
pub const DEFAULT_CONDITIONING_FLOOR: f64 = 1e-12;

/// For every time, coarse cells given as lists of fine cell names.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    per_time: Vec<Vec<(String, Vec<String>)>>,
}

impl Partition {
    pub fn new(per_time: Vec<Vec<(String, Vec<String>)>>) -> Self {
        Self { per_time }
    }

    /// Every fine cell is its own coarse cell.
    pub fn identity(space: &HistorySpace) -> Self {
        Self::new(
            space
                .families()
                .iter()
                .map(|f| {
                    f.cells()
                        .iter()
                        .map(|c| (c.label.name.clone(), vec![c.label.name.clone()]))
                        .collect()
                })
                .collect(),
        )
    }

    /// One coarse cell per time.
    pub fn merge_all(space: &HistorySpace) -> Self {
        Self::new(
            space
                .families()
                .iter()
                .map(|f| vec![("all".to_string(), f.cells().iter().map(|c| c.label.name.clone()).collect())])
                .collect(),
        )
    }

    /// Identity except that `cells` at time index `k` merge into `name`,
    /// placed where the first of them stood.
    pub fn merging(space: &HistorySpace, k: usize, name: &str, cells: &[&str]) -> Self {
        let mut p = Self::identity(space);
        if let Some(fam) = space.families().get(k) {
            let mut slot = Vec::new();
            let mut placed = false;
            for c in fam.cells() {
                let n = c.label.name.as_str();
                if !cells.contains(&n) {
                    slot.push((n.to_string(), vec![n.to_string()]));
                } else if !std::mem::replace(&mut placed, true) {
                    slot.push((name.to_string(), cells.iter().map(|s| s.to_string()).collect()));
                }
            }
            p.per_time[k] = slot;
        }
        p
    }

    pub fn per_time(&self) -> &[Vec<(String, Vec<String>)>] {
        &self.per_time
    }
}

/// A coarse-grained space with the fine cells behind each coarse cell.
#[derive(Clone, Debug)]
pub struct CoarseGraining {
    pub space: HistorySpace,
    members: Vec<Vec<Vec<usize>>>,
}

impl CoarseGraining {
    /// Fine cell indices behind coarse cell `c` at time `k`.
    pub fn members(&self, k: usize, c: usize) -> &[usize] {
        &self.members[k][c]
    }

    pub fn coarse_histories(&self) -> Result<Vec<History>> {
        self.space.histories()
    }

    /// The coarse history as sets of fine cells.
    pub fn as_fine_sets(&self, h: &History) -> CoarseHistory {
        CoarseHistory(
            h.cells()
                .iter()
                .enumerate()
                .map(|(k, &c)| self.members[k][c].clone())
                .collect(),
        )
    }

    /// Fine histories contained in a coarse one.
    pub fn fine_histories(&self, h: &History) -> Vec<History> {
        self.as_fine_sets(h).fine_histories()
    }
}

/// Merge fine cells into coarse ones. Coarse projectors are sums of the
/// fine projectors, so coarse chain operators are sums of fine ones.
pub fn coarse_grain(space: &HistorySpace, partition: &Partition) -> Result<CoarseGraining> {
    if partition.per_time.len() != space.times().len() {
        return Err(Error::Structure(format!(
            "partition covers {} times, space has {}",
            partition.per_time.len(),
            space.times().len()
        )));
    }
    let mut families = Vec::with_capacity(space.times().len());
    let mut members = Vec::with_capacity(space.times().len());
    for (k, (fam, coarse)) in space.families().iter().zip(&partition.per_time).enumerate() {
        let mut seen = vec![false; fam.len()];
        let mut names = HashSet::new();
        let mut cells = Vec::with_capacity(coarse.len());
        let mut idx = Vec::with_capacity(coarse.len());
        for (name, fine) in coarse {
            if !names.insert(name.as_str()) {
                return Err(Error::Structure(format!("coarse cell {name:?} repeated at time index {k}")));
            }
            if fine.is_empty() {
                return Err(Error::Structure(format!("coarse cell {name:?} is empty")));
            }
            let mut proj: Option<Operator> = None;
            let mut fine_idx = Vec::with_capacity(fine.len());
            let mut extent = Vec::new();
            for f in fine {
                let i = fam.position(f).ok_or_else(|| Error::Structure(format!(
                    "partition names unknown cell {f:?} at time index {k}"
                )))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Structure(format!("cell {f:?} assigned twice at time index {k}")));
                }
                fine_idx.push(i);
                extent.extend(fam.label(i).extent.iter().copied());
                proj = Some(match proj {
                    None => fam.projector(i).clone(),
                    Some(p) => p.add(fam.projector(i))?,
                });
            }
            fine_idx.sort_unstable();
            idx.push(fine_idx);
            let proj = proj
                .expect("non-empty cell")
                .validated(crate::hilbert::Kinds::PROJECTOR, crate::hilbert::VALIDATION_TOL)?;
            cells.push((CellLabel::with_extent(name.clone(), extent), proj));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Structure(format!(
                "cell {:?} at time index {k} is not covered by the partition",
                fam.label(missing).name
            )));
        }
        families.push(ProjectorFamily::new(cells)?);
        members.push(idx);
    }
    Ok(CoarseGraining {
        space: space.with_families(families)?,
        members,
    })
}

/// Per time, a set of fine cell indices; the coarse history is their
/// disjoint union.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CoarseHistory(pub Vec<Vec<usize>>);

impl CoarseHistory {
    pub fn fine(h: &History) -> Self {
        Self(h.cells().iter().map(|&c| vec![c]).collect())
    }

    /// From per-time lists of fine cell names.
    pub fn from_labels(space: &HistorySpace, per_time: &[&[&str]]) -> Result<Self> {
        if per_time.len() != space.times().len() {
            return Err(Error::Structure(format!(
                "coarse history has {} times, space has {}",
                per_time.len(),
                space.times().len()
            )));
        }
        per_time
            .iter()
            .zip(space.families())
            .enumerate()
            .map(|(t, (names, fam))| {
                let mut set: Vec<usize> = names
                    .iter()
                    .map(|n| {
                        fam.position(n).ok_or_else(|| Error::Lookup {
                            label: n.to_string(),
                            time: t,
                        })
                    })
                    .collect::<Result<_>>()?;
                set.sort_unstable();
                set.dedup();
                Ok(set)
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// Every cell at every time.
    pub fn everything(space: &HistorySpace) -> Self {
        Self(space.families().iter().map(|f| (0..f.len()).collect()).collect())
    }

    /// Restrict time index `k` to the named cells.
    pub fn restricted(mut self, space: &HistorySpace, k: usize, names: &[&str]) -> Result<Self> {
        let fam = &space.families()[k];
        let mut set: Vec<usize> = names
            .iter()
            .map(|n| {
                fam.position(n).ok_or_else(|| Error::Lookup {
                    label: n.to_string(),
                    time: k,
                })
            })
            .collect::<Result<_>>()?;
        set.sort_unstable();
        set.dedup();
        self.0[k] = set;
        Ok(self)
    }

    /// `⟨γ_N ∩ δ_N, …, γ_1 ∩ δ_1⟩`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.iter().copied().filter(|c| b.contains(c)).collect())
                .collect(),
        )
    }

    pub fn fine_histories(&self) -> Vec<History> {
        let mut out = vec![Vec::new()];
        for set in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    set.iter().map(move |&c| {
                        let mut h = prefix.clone();
                        h.push(c);
                        h
                    })
                })
                .collect();
        }
        out.into_iter().map(History).collect()
    }
}

/// `C_γ|state⟩ = Σ_{α⊂γ} C_α|state⟩`, one projection per time.
pub fn coarse_vector(space: &HistorySpace, gamma: &CoarseHistory, state: &StateVector) -> Result<StateVector> {
    if gamma.0.len() != space.times().len() {
        return Err(Error::Structure("coarse history does not match the space".into()));
    }
    let last = space.times().len() - 1;
    let v = space.project_forward(state, last, |k, v| {
        let fam = &space.families()[k];
        let set = &gamma.0[k];
        if set.iter().any(|&c| c >= fam.len()) {
            return Err(Error::Lookup {
                label: format!("{set:?}"),
                time: k,
            });
        }
        if set.len() == fam.len() {
            return Ok(v.clone());
        }
        let mut acc = StateVector::zeros(v.factor_dims().to_vec())?;
        for &c in set {
            acc = acc.add(&fam.projector(c).apply(v)?)?;
        }
        Ok(acc)
    })?;
    space.back_to_start(v, last)
}

/// `μ[γ] = ‖C_γ|ψ⟩‖²`.
pub fn measure(space: &HistorySpace, gamma: &CoarseHistory) -> Result<f64> {
    Ok(coarse_vector(space, gamma, space.initial())?.norm_sqr())
}

/// `μ[γ∗δ] / μ[δ]`.
pub fn conditional_probability(space: &HistorySpace, gamma: &CoarseHistory, delta: &CoarseHistory) -> Result<f64> {
    conditional_probability_with_floor(space, gamma, delta, DEFAULT_CONDITIONING_FLOOR)
}

pub fn conditional_probability_with_floor(
    space: &HistorySpace,
    gamma: &CoarseHistory,
    delta: &CoarseHistory,
    floor: f64,
) -> Result<f64> {
    let mu_delta = measure(space, delta)?;
    let scale = space.initial().norm_sqr();
    if mu_delta <= floor * scale {
        return Err(Error::Conditioning {
            measure: mu_delta,
            floor: floor * scale,
        });
    }
    Ok(measure(space, &gamma.compose(delta))? / mu_delta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumRuleReport {
    pub max_violation: f64,
    pub worst: Option<String>,
}

/// `max_β | ‖C_β ψ‖² − Σ_{α⊂β} ‖C_α ψ‖² |` over the coarse histories of
/// `partition`.
pub fn sum_rule_violation(space: &HistorySpace, partition: &Partition) -> Result<f64> {
    Ok(sum_rule_report(space, partition)?.max_violation)
}

pub fn sum_rule_report(space: &HistorySpace, partition: &Partition) -> Result<SumRuleReport> {
    let cg = coarse_grain(space, partition)?;
    let fine = space.branch_vectors()?;
    let sizes: Vec<usize> = space.families().iter().map(|f| f.len()).collect();
    let flat = |h: &History| h.cells().iter().zip(&sizes).fold(0usize, |acc, (&c, &s)| acc * s + c);
    let coarse = cg.coarse_histories()?;
    let per: Vec<(f64, String)> = coarse
        .par_iter()
        .map(|beta| {
            let members = cg.fine_histories(beta);
            let mut sum = StateVector::zeros(space.initial().factor_dims().to_vec())?;
            let mut weights = 0.0;
            for a in &members {
                let b = &fine[flat(a)];
                weights += b.weight;
                sum = sum.add(&b.vector)?;
            }
            Ok(((sum.norm_sqr() - weights).abs(), cg.space.history_name(beta)))
        })
        .collect::<Result<_>>()?;
    let worst = per
        .into_iter()
        .fold(None::<(f64, String)>, |best, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        });
    Ok(SumRuleReport {
        max_violation: worst.as_ref().map_or(0.0, |w| w.0),
        worst: worst.map(|w| w.1),
    })
}

/// Sum rule for every two-element set of fine histories:
/// `max_{α≠α′} | ‖C_αψ + C_α′ψ‖² − ‖C_αψ‖² − ‖C_α′ψ‖² |`.
pub fn pairwise_sum_rule_violation(space: &HistorySpace) -> Result<f64> {
    let fine = space.branch_vectors()?;
    let n = fine.len();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut worst: f64 = 0.0;
            for b in a + 1..n {
                let s = fine[a].vector.add(&fine[b].vector)?;
                worst = worst.max((s.norm_sqr() - fine[a].weight - fine[b].weight).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(per_row.into_iter().fold(0.0, f64::max))
}
