use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

use super::{Kinds, Operator, VALIDATION_TOL};

/// Name of a cell in a coarse-grained parameter space, optionally with the
/// interval(s) it covers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellLabel {
    pub name: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extent: Vec<(f64, f64)>,
}

impl CellLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            extent: Vec::new(),
        }
    }

    pub fn with_extent(name: impl Into<String>, extent: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            extent,
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub label: CellLabel,
    pub projector: Operator,
}

/// A labelled resolution of the identity `{P_a}`.
///
/// Construction checks shapes, projector flags and label uniqueness.
/// Orthogonality and completeness are reported by [`validate_family`] and
/// enforced where a family enters a history space.
#[derive(Clone, Debug)]
pub struct ProjectorFamily {
    cells: Vec<Cell>,
    dim: usize,
}

impl ProjectorFamily {
    pub fn new(cells: Vec<(CellLabel, Operator)>) -> Result<Self> {
        let dim = cells
            .first()
            .map(|(_, p)| p.dim())
            .ok_or_else(|| Error::Structure("projector family must have at least one cell".into()))?;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(cells.len());
        for (label, projector) in cells {
            if projector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: projector.dim(),
                });
            }
            if !seen.insert(label.name.clone()) {
                return Err(Error::Structure(format!("duplicate cell label `{}`", label.name)));
            }
            let projector = projector.validated(Kinds::PROJECTOR, VALIDATION_TOL)?;
            out.push(Cell { label, projector });
        }
        Ok(Self { cells: out, dim })
    }

    /// The one-cell family `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            cells: vec![Cell {
                label: CellLabel::new("all"),
                projector: Operator::identity(dim),
            }],
            dim,
        }
    }

    /// Diagonal indicator cells from basis-index masks, completed with an
    /// `elsewhere` cell covering whatever the named cells miss (omitted
    /// when nothing is missed).
    pub fn from_masks(dim: usize, named: Vec<(CellLabel, Vec<bool>)>) -> Result<Self> {
        let mut covered = vec![false; dim];
        let mut cells = Vec::with_capacity(named.len() + 1);
        for (label, mask) in named {
            if mask.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: mask.len(),
                });
            }
            for (c, &m) in covered.iter_mut().zip(&mask) {
                if m && *c {
                    return Err(Error::Structure(format!(
                        "cell `{}` overlaps an earlier cell",
                        label.name
                    )));
                }
                *c |= m;
            }
            cells.push((label, Operator::indicator(&mask)?));
        }
        if covered.iter().any(|c| !c) {
            let rest: Vec<bool> = covered.iter().map(|c| !c).collect();
            cells.push((CellLabel::new(ELSEWHERE), Operator::indicator(&rest)?));
        }
        Self::new(cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn label(&self, index: usize) -> &CellLabel {
        &self.cells[index].label
    }

    pub fn projector(&self, index: usize) -> &Operator {
        &self.cells[index].projector
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.label.name == name)
    }
}

/// Label used for the completing cell of a family.
pub const ELSEWHERE: &str = "elsewhere";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    /// `max_{a≠b} ‖P_a P_b‖_max`
    pub orthogonality_defect: f64,
    /// `‖Σ_a P_a − I‖_max`
    pub completeness_defect: f64,
    pub worst_pair: Option<(String, String)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Report orthogonality and completeness defects at the default tolerance.
pub fn validate_family(family: &ProjectorFamily) -> FamilyReport {
    validate_family_with_tol(family, VALIDATION_TOL)
}

pub fn validate_family_with_tol(family: &ProjectorFamily, tol: f64) -> FamilyReport {
    let cells = family.cells();
    let mut orth = 0.0;
    let mut worst = None;
    for a in 0..cells.len() {
        for b in (a + 1)..cells.len() {
            let prod = cells[a]
                .projector
                .mul(&cells[b].projector)
                .expect("family cells share a dimension");
            let d = prod.max_abs_diff(&Operator::zero(family.dim()));
            if d > orth {
                orth = d;
                worst = Some((cells[a].label.name.clone(), cells[b].label.name.clone()));
            }
        }
    }
    let mut sum = Operator::zero(family.dim());
    for c in cells {
        sum = sum.add(&c.projector).expect("family cells share a dimension");
    }
    let completeness = sum.max_abs_diff(&Operator::identity(family.dim()));
    FamilyReport {
        orthogonality_defect: orth,
        completeness_defect: completeness,
        worst_pair: worst,
        tolerance: tol,
        passed: orth < tol && completeness < tol,
    }
}
