use std::sync::Arc;

use serde::Serialize;

use super::{BranchEnsemble, MeasurementProtocol, TrialMode, POINTER_LEVELS, SLOT_MINUS, SLOT_PLUS};
use crate::error::{Error, Result};
use crate::histories::{BranchTree, HistorySpace};
use crate::hilbert::{
    embed_local, CellLabel, Gate, GateSequence, Kinds, Operator, ProjectorFamily, StateVector, Tensor, C64,
    VALIDATION_TOL,
};

/// What the family at each trial time distinguishes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AutomatonFamilies {
    /// The whole record written so far, one cell per outcome sequence,
    /// plus `elsewhere`.
    #[default]
    RecordPrefix,
    /// The symbol just written to memory: `+`, `-`, or `blank`.
    LatestRecord,
    /// The measured system in the `φ±` basis.
    SystemBasis,
}

#[derive(Clone, Debug)]
pub struct AutomatonSpec {
    pub protocol: MeasurementProtocol,
    pub c_plus: C64,
    pub c_minus: C64,
    pub trials: usize,
    pub mode: TrialMode,
    /// Angle of an `x` rotation of the system before every trial but the
    /// first. Same-system mode only.
    pub precession: f64,
    pub families: AutomatonFamilies,
}

impl AutomatonSpec {
    pub fn new(c_plus: C64, c_minus: C64, trials: usize, mode: TrialMode) -> Self {
        Self {
            protocol: MeasurementProtocol::z_basis(),
            c_plus,
            c_minus,
            trials,
            mode,
            precession: 0.0,
            families: AutomatonFamilies::RecordPrefix,
        }
    }

    pub fn with_precession(mut self, angle: f64) -> Self {
        self.precession = angle;
        self
    }

    pub fn with_families(mut self, families: AutomatonFamilies) -> Self {
        self.families = families;
        self
    }

    pub fn with_protocol(mut self, protocol: MeasurementProtocol) -> Self {
        self.protocol = protocol;
        self
    }

    fn systems(&self) -> usize {
        match self.mode {
            TrialMode::FreshSystems => self.trials,
            TrialMode::SameSystem => 1,
        }
    }

    /// Factor dimensions: systems, pointer, memory slots.
    pub fn factor_dims(&self) -> Vec<usize> {
        let mut dims = vec![2; self.systems()];
        dims.push(POINTER_LEVELS);
        dims.extend(std::iter::repeat_n(self.protocol.slot_levels(), self.trials));
        dims
    }
}

/// The automaton as a history space: trial `k` fires at `k + ½` and the
/// family of time `k + 1` looks at its outcome.
pub fn automaton_space(spec: &AutomatonSpec) -> Result<HistorySpace> {
    if spec.trials == 0 {
        return Err(Error::Contract("at least one trial is required".into()));
    }
    if spec.precession != 0.0 && spec.mode == TrialMode::FreshSystems {
        return Err(Error::Contract("precession applies to a re-measured system only".into()));
    }
    let norm = (spec.c_plus.norm_sqr() + spec.c_minus.norm_sqr()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Contract("coefficients must not both vanish".into()));
    }
    let dims = spec.factor_dims();
    let systems = spec.systems();
    let pointer = systems;
    let slot = |k: usize| systems + 1 + k;
    let system_of = |k: usize| if systems == 1 { 0 } else { k };

    let local = spec.protocol.local_unitary()?;
    let mut gates = Vec::new();
    let rotation = x_rotation(spec.precession)?;
    for k in 0..spec.trials {
        if k > 0 && spec.precession != 0.0 {
            gates.push(Gate {
                time: k as f64 + 0.25,
                op: rotation.clone(),
                factors: vec![0],
            });
        }
        gates.push(Gate {
            time: k as f64 + 0.5,
            op: local.clone(),
            factors: vec![system_of(k), pointer, slot(k)],
        });
    }
    let dynamics = GateSequence::new(dims.clone(), gates)?;

    let sys = spec.protocol.system_state(spec.c_plus / norm, spec.c_minus / norm);
    let mut psi = sys.clone();
    for _ in 1..systems {
        psi = psi.tensor(&sys)?;
    }
    let tail_dims: Vec<usize> = dims[systems..].to_vec();
    let tail = StateVector::product_basis(tail_dims, &vec![0; spec.trials + 1])?;
    let psi = psi.tensor(&tail)?.with_factor_dims(dims.clone())?;

    let levels = spec.protocol.slot_levels();
    let families = (0..spec.trials)
        .map(|k| match spec.families {
            AutomatonFamilies::RecordPrefix => record_prefix_family(&dims, systems + 1, k),
            AutomatonFamilies::LatestRecord => {
                let cell = |level: usize| {
                    let diag = (0..levels).map(|l| C64::new(if l == level { 1.0 } else { 0.0 }, 0.0)).collect();
                    embed_local(&Operator::diagonal(diag)?.validated(Kinds::PROJECTOR, VALIDATION_TOL)?, &dims, &[slot(k)])
                };
                let plus = cell(SLOT_PLUS)?;
                let minus = cell(SLOT_MINUS)?;
                let rest = Operator::identity(plus.dim())
                    .add(&plus.scale(C64::new(-1.0, 0.0)))?
                    .add(&minus.scale(C64::new(-1.0, 0.0)))?
                    .validated(Kinds::PROJECTOR, VALIDATION_TOL)?;
                ProjectorFamily::new(vec![
                    (CellLabel::new("+"), plus),
                    (CellLabel::new("-"), minus),
                    (CellLabel::new("blank"), rest),
                ])
            }
            AutomatonFamilies::SystemBasis => {
                let cell = |o| {
                    let p = Operator::projector_onto(spec.protocol.eigenstate(o))?;
                    embed_local(&p, &dims, &[system_of(k)])
                };
                ProjectorFamily::new(vec![
                    (CellLabel::new("+"), cell(super::Outcome::Plus)?),
                    (CellLabel::new("-"), cell(super::Outcome::Minus)?),
                ])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let times = (1..=spec.trials).map(|k| k as f64).collect();
    HistorySpace::new(psi, Arc::new(dynamics), times, families)
}

/// Cells fixing memory slots `0..=k`, which start at factor `first_slot`.
fn record_prefix_family(dims: &[usize], first_slot: usize, k: usize) -> Result<ProjectorFamily> {
    let dim: usize = dims.iter().product();
    let slot_dims = &dims[first_slot..];
    let mut strides = vec![1usize; slot_dims.len()];
    for i in (0..slot_dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * slot_dims[i + 1];
    }
    let tail: usize = slot_dims.iter().product();
    let cells = (0..1u128 << (k + 1))
        .map(|idx| {
            let record = super::Record::from_index(k + 1, idx);
            let levels: Vec<usize> = record.outcomes().map(|o| o.slot_level()).collect();
            let mask = (0..dim)
                .map(|i| {
                    let mem = i % tail;
                    levels.iter().enumerate().all(|(j, &l)| mem / strides[j] % slot_dims[j] == l)
                })
                .collect();
            (CellLabel::new(record.to_string()), mask)
        })
        .collect();
    ProjectorFamily::from_masks(dim, cells)
}

fn x_rotation(angle: f64) -> Result<Operator> {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    Operator::from_fn(2, |r, col| if r == col { C64::new(c, 0.0) } else { C64::new(0.0, -s) })?
        .validated(Kinds::UNITARY, VALIDATION_TOL)
}

/// Branch tree of an ensemble from its closed-form prefix weights.
pub fn ensemble_tree(ens: &BranchEnsemble, cutoff: f64) -> Result<BranchTree> {
    let p = ens.p();
    let q = 1.0 - p;
    let times: Vec<f64> = (1..=ens.trials()).map(|k| k as f64).collect();
    let mode = ens.mode();
    BranchTree::grow(1.0, &times, cutoff, |prefix| {
        Ok(["+", "-"]
            .iter()
            .map(|&sym| {
                let plus = prefix.iter().filter(|s| *s == "+").count() + usize::from(sym == "+");
                let len = prefix.len() + 1;
                let weight = match mode {
                    TrialMode::FreshSystems => p.powi(plus as i32) * q.powi((len - plus) as i32),
                    TrialMode::SameSystem if plus == len => p,
                    TrialMode::SameSystem if plus == 0 => q,
                    TrialMode::SameSystem => 0.0,
                };
                (sym.to_string(), weight)
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{binomial_pmf, run_trials};
    use crate::histories::{
        branch_vector, branching_structure_check, check_space, conditional_probability,
        decoherence_functional, extract_branch_tree, fine_tuned_space, superposition_identity_check,
        CoarseHistory, DEFAULT_BRANCHING_TOL, DEFAULT_CONSISTENCY_TOL,
    };

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn same_system_record_weight() {
        let spec = AutomatonSpec::new(c(0.6), c(0.8), 2, TrialMode::SameSystem)
            .with_families(AutomatonFamilies::LatestRecord);
        let space = automaton_space(&spec).unwrap();
        let b = branch_vector(&space, &space.history(&["+", "+"]).unwrap()).unwrap();
        assert!((b.weight - 0.36).abs() < 1e-12);
        let b = branch_vector(&space, &space.history(&["-", "-"]).unwrap()).unwrap();
        assert!((b.weight - 0.64).abs() < 1e-12);
        let b = branch_vector(&space, &space.history(&["+", "-"]).unwrap()).unwrap();
        assert!(b.weight < 1e-24);
    }

    #[test]
    fn records_decohere_and_branch() {
        for mode in [TrialMode::SameSystem, TrialMode::FreshSystems] {
            let space = automaton_space(&AutomatonSpec::new(c(0.6), C64::new(0.0, 0.8), 3, mode)).unwrap();
            assert!(superposition_identity_check(&space).unwrap() < 1e-10);
            let d = decoherence_functional(&space).unwrap();
            assert!(d.max_off_diagonal_abs() < 1e-10);
            let report = branching_structure_check(&space, DEFAULT_BRANCHING_TOL, DEFAULT_CONSISTENCY_TOL).unwrap();
            assert!(report.max_distance < 1e-10);
        }
    }

    #[test]
    fn fresh_space_weights_follow_the_ensemble() {
        let space = automaton_space(&AutomatonSpec::new(c(0.6), c(0.8), 3, TrialMode::FreshSystems)).unwrap();
        let ens = run_trials(c(0.6), c(0.8), 3, TrialMode::FreshSystems).unwrap();
        for b in ens.branches() {
            let full = b.record.to_string();
            let labels: Vec<String> = (1..=3).map(|k| full[..k].to_string()).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let h = space.history(&refs).unwrap();
            assert!((branch_vector(&space, &h).unwrap().weight - b.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn first_record_given_the_whole_record() {
        let spec = AutomatonSpec::new(c(0.6), c(0.8), 2, TrialMode::SameSystem)
            .with_families(AutomatonFamilies::LatestRecord);
        let space = automaton_space(&spec).unwrap();
        let delta = CoarseHistory::from_labels(&space, &[&["+"], &["+"]]).unwrap();
        let gamma = CoarseHistory::from_labels(&space, &[&["+"], &["+", "-", "blank"]]).unwrap();
        assert!((conditional_probability(&space, &gamma, &delta).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trees_from_space_and_combinatorics_agree() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let space = automaton_space(&AutomatonSpec::new(c(h), c(h), 2, TrialMode::FreshSystems)).unwrap();
        let tree = extract_branch_tree(&space, 1e-12, DEFAULT_CONSISTENCY_TOL, DEFAULT_BRANCHING_TOL).unwrap();
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 4);
        assert!(leaves.iter().all(|l| (l.weight - 0.25).abs() < 1e-12));
        assert_eq!(leaves[1].prefix, ["+", "+-"]);

        let ens = run_trials(c(h), c(h), 2, TrialMode::FreshSystems).unwrap();
        let combinatorial = ensemble_tree(&ens, 1e-12).unwrap();
        assert_eq!(combinatorial.leaves().len(), 4);

        let certain = run_trials(c(1.0), c(0.0), 3, TrialMode::FreshSystems).unwrap();
        let tree = ensemble_tree(&certain, 0.0).unwrap();
        assert_eq!(tree.nodes.len(), 4);
        assert_eq!(tree.leaves()[0].prefix.concat(), "+++");
        assert_eq!(tree.leaves()[0].weight, 1.0);
    }

    #[test]
    fn pruned_tree_matches_binomial_leaves() {
        let space = automaton_space(&AutomatonSpec::new(c(0.6), c(0.8), 3, TrialMode::FreshSystems)).unwrap();
        let tree = extract_branch_tree(&space, 0.05, DEFAULT_CONSISTENCY_TOL, DEFAULT_BRANCHING_TOL).unwrap();
        let p: f64 = 0.36;
        let mut pruned = 0.0;
        for k in 0..=3usize {
            let w = p.powi(k as i32) * (1.0 - p).powi(3 - k as i32);
            let plus = |l: &&crate::histories::TreeNode| l.prefix.last().unwrap().matches('+').count();
            let count = tree.leaves().iter().filter(|l| plus(l) == k).count();
            if w <= 0.05 {
                pruned += binomial_pmf(3, k, p);
                assert_eq!(count, 0);
            } else {
                assert_eq!(count, [1, 3, 3, 1][k]);
                for l in tree.leaves().iter().filter(|l| plus(l) == k) {
                    assert!((l.weight - w).abs() < 1e-12);
                }
            }
        }
        assert!((tree.pruned_mass - pruned).abs() < 1e-12);
        assert!(tree.max_child_sum_defect(3) < 1e-9);
    }

    #[test]
    fn restarting_from_a_branch_breaks_consistency() {
        let spec = AutomatonSpec::new(c(0.6), c(0.8), 3, TrialMode::SameSystem)
            .with_precession(1.1)
            .with_families(AutomatonFamilies::SystemBasis);
        let forward = automaton_space(&spec).unwrap();
        assert!(check_space(&forward, DEFAULT_CONSISTENCY_TOL).unwrap().passed);
        let h = forward.history(&["+", "-", "+"]).unwrap();
        assert!(branch_vector(&forward, &h).unwrap().weight > 1e-3);
        let tuned = fine_tuned_space(&forward, &h).unwrap();
        let report = check_space(&tuned, DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(!report.passed, "defect {}", report.max_defect);
    }

    #[test]
    fn fresh_precession_is_rejected() {
        let spec = AutomatonSpec::new(c(0.6), c(0.8), 2, TrialMode::FreshSystems).with_precession(0.3);
        assert!(matches!(automaton_space(&spec), Err(Error::Contract(_))));
    }
}
