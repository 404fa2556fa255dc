use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::ser::SerializeStruct;
use serde::Serialize;

use super::{BranchVector, History, HistorySpace};
use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Default tolerance for the normalized off-diagonal defect.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-8;

/// Rows whose weight is below this fraction of the trace are left out of
/// the normalized defect.
pub const ZERO_WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// `|D(α,α′)|` must vanish.
    #[default]
    Full,
    /// Only `Re D(α,α′)` must vanish.
    Medium,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Criterion::Full),
            "medium" => Ok(Criterion::Medium),
            other => Err(Error::Config(format!("unknown consistency criterion {other:?}"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Full => "full",
            Criterion::Medium => "medium",
        })
    }
}

/// `D(α, α′) = ⟨C_α′ψ | C_αψ⟩` over all fine histories.
#[derive(Clone, Debug)]
pub struct DecoherenceFunctional {
    entries: DMatrix<C64>,
    histories: Vec<History>,
    labels: Vec<String>,
}

impl DecoherenceFunctional {
    /// From precomputed branch vectors, in their order.
    pub fn from_branches(branches: &[BranchVector], labels: Vec<String>) -> Result<Self> {
        let n = branches.len();
        if labels.len() != n {
            return Err(Error::Structure("one label per branch is required".into()));
        }
        let live: Vec<usize> = (0..n).filter(|&i| branches[i].weight > 0.0).collect();
        let mut entries = DMatrix::zeros(n, n);
        if let Some(&first) = live.first() {
            let dim = branches[first].vector.dim();
            let v = DMatrix::from_fn(dim, live.len(), |r, c| branches[live[c]].vector.amplitude(r));
            // gram[b, a] = ⟨v_b|v_a⟩ = D(a, b)
            let gram = v.ad_mul(&v);
            for (bi, &b) in live.iter().enumerate() {
                for (ai, &a) in live.iter().enumerate() {
                    entries[(a, b)] = gram[(bi, ai)];
                }
            }
        }
        Ok(Self {
            entries,
            histories: branches.iter().map(|b| b.history.clone()).collect(),
            labels,
        })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn entry(&self, a: usize, b: usize) -> C64 {
        self.entries[(a, b)]
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Entry by history names.
    pub fn get(&self, a: &str, b: &str) -> Result<C64> {
        let find = |l: &str| {
            self.position(l).ok_or_else(|| Error::Lookup {
                label: l.to_string(),
                time: 0,
            })
        };
        Ok(self.entries[(find(a)?, find(b)?)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.len()).map(|i| self.entries[(i, i)].re).fold(f64::INFINITY, f64::min)
    }

    /// Largest `|Re D(α,α′)|`, `α ≠ α′`, unnormalized.
    pub fn max_off_diagonal_re(&self) -> f64 {
        self.off_diagonal().map(|(_, _, z)| z.re.abs()).fold(0.0, f64::max)
    }

    /// Largest `|D(α,α′)|`, `α ≠ α′`, unnormalized.
    pub fn max_off_diagonal_abs(&self) -> f64 {
        self.off_diagonal().map(|(_, _, z)| z.norm()).fold(0.0, f64::max)
    }

    fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |a| (0..n).filter(move |&b| b != a).map(move |b| (a, b, self.entries[(a, b)])))
    }
}

impl Serialize for DecoherenceFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.len())
            .map(|a| (0..self.len()).map(|b| [self.entries[(a, b)].re, self.entries[(a, b)].im]).collect())
            .collect();
        let mut st = s.serialize_struct("DecoherenceFunctional", 3)?;
        st.serialize_field("histories", &self.labels)?;
        st.serialize_field("entries", &rows)?;
        st.serialize_field("trace", &self.trace())?;
        st.end()
    }
}

/// Full decoherence functional of a space, subject to its history cap.
pub fn decoherence_functional(space: &HistorySpace) -> Result<DecoherenceFunctional> {
    let branches = space.branch_vectors()?;
    let labels = branches.iter().map(|b| space.history_name(&b.history)).collect();
    DecoherenceFunctional::from_branches(&branches, labels)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub criterion: Criterion,
    pub tolerance: f64,
    /// `max |D(α,α′)| / √(D(α,α)D(α′,α′))` (or with `Re` under medium).
    pub max_defect: f64,
    pub worst_pair: Option<(String, String)>,
    /// Histories left out for carrying (near) zero weight.
    pub skipped: usize,
    pub passed: bool,
}

/// Normalized off-diagonal defect of `D` under the chosen criterion.
pub fn consistency_check(d: &DecoherenceFunctional, tol: f64, criterion: Criterion) -> ConsistencyReport {
    let floor = ZERO_WEIGHT_FLOOR * d.trace().abs();
    let live: Vec<usize> = (0..d.len()).filter(|&i| d.entry(i, i).re > floor).collect();
    let mut max_defect = 0.0;
    let mut worst = None;
    for (i, &a) in live.iter().enumerate() {
        for &b in &live[i + 1..] {
            let z = d.entry(a, b);
            let raw = match criterion {
                Criterion::Full => z.norm(),
                Criterion::Medium => z.re.abs(),
            };
            let defect = raw / (d.entry(a, a).re * d.entry(b, b).re).sqrt();
            if defect > max_defect {
                max_defect = defect;
                worst = Some((d.labels[a].clone(), d.labels[b].clone()));
            }
        }
    }
    ConsistencyReport {
        criterion,
        tolerance: tol,
        max_defect,
        worst_pair: worst,
        skipped: d.len() - live.len(),
        passed: max_defect < tol || max_defect == 0.0,
    }
}

/// Consistency of a space under the full criterion.
pub fn check_space(space: &HistorySpace, tol: f64) -> Result<ConsistencyReport> {
    Ok(consistency_check(&decoherence_functional(space)?, tol, Criterion::Full))
}
