use everett::hilbert::{random, CellLabel, Operator, ProjectorFamily, StateVector, C64};
use everett::histories::{
    branching_distances, consistency_check, decoherence_functional, extract_branch_tree,
    pairwise_sum_rule_violation, superposition_identity_check, BranchingReport, Criterion, HistorySpace,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{verdict, MatrixJson};
use crate::artifacts::{ArtifactWriter, Assertion};
use crate::config::{CustomParams, CustomSource, Expectation, Tolerances};
use crate::error::CliError;

fn build(p: &CustomParams, seed: u64) -> Result<HistorySpace, CliError> {
    let dim = p.dim;
    let (h, psi, families) = match &p.source {
        CustomSource::Random { parts, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random::hermitian(&mut rng, dim, *scale);
            let psi = random::state(&mut rng, vec![dim]);
            let families = (0..p.times.len())
                .map(|k| {
                    let basis = random::unitary(&mut rng, dim);
                    let ranks = random::ranks(&mut rng, dim, *parts);
                    random::family_from_basis(&basis, &ranks, &format!("t{k}c"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            (h, psi, families)
        }
        CustomSource::Explicit {
            hamiltonian,
            initial,
            families,
        } => {
            let h = Operator::from_fn(dim, |i, j| C64::new(hamiltonian.re[i][j], hamiltonian.im[i][j]))?;
            let amps = initial.0.iter().zip(&initial.1).map(|(&re, &im)| C64::new(re, im)).collect();
            let psi = StateVector::from_amplitudes(amps)?.normalized()?;
            let families = families
                .iter()
                .map(|cells| {
                    let named = cells
                        .iter()
                        .map(|c| {
                            let mut mask = vec![false; dim];
                            c.indices.iter().for_each(|&i| mask[i] = true);
                            (CellLabel::new(c.label.clone()), mask)
                        })
                        .collect();
                    ProjectorFamily::from_masks(dim, named)
                })
                .collect::<Result<Vec<_>, _>>()?;
            (h, psi, families)
        }
    };
    Ok(HistorySpace::with_hamiltonian(psi, h, p.times.clone(), families)?)
}

#[derive(Serialize)]
struct Report<'a> {
    decoherence: MatrixJson<'a>,
    consistency: everett::histories::ConsistencyReport,
    verdict: String,
    pairwise_sum_rule_violation: f64,
    superposition_defect: f64,
    /// Only computed for consistent spaces.
    branching: Option<BranchingReport>,
}

pub fn run(p: &CustomParams, seed: u64, tol: &Tolerances, out: &mut ArtifactWriter) -> Result<Vec<Assertion>, CliError> {
    let space = build(p, seed)?;
    let d = decoherence_functional(&space)?;
    let consistency = consistency_check(&d, tol.consistency, Criterion::Full);
    let expected = match p.expect {
        Expectation::Any => None,
        Expectation::Inconsistent => Some(false),
        Expectation::Consistent | Expectation::Branching => Some(true),
    };
    let branching = if consistency.passed {
        Some(branching_distances(&space, tol.branching)?)
    } else {
        None
    };
    let branches = branching.as_ref().is_some_and(|b| b.passed);
    let report = Report {
        decoherence: MatrixJson::new(&d),
        verdict: verdict(consistency.passed, expected),
        pairwise_sum_rule_violation: pairwise_sum_rule_violation(&space)?,
        superposition_defect: superposition_identity_check(&space)?,
        consistency,
        branching,
    };
    out.write_json("decoherence.json", &report)?;
    if branches {
        let tree = extract_branch_tree(&space, p.tree_cutoff, tol.consistency, tol.branching)?;
        out.write("tree.json", format!("{}\n", tree.to_json()).as_bytes())?;
    }

    let mut asserts = vec![
        Assertion::below("chain operators sum to the identity", report.superposition_defect, 1e-9),
        Assertion::below("decoherence trace is one", (report.decoherence.trace - 1.0).abs(), 1e-10),
    ];
    if let Some(e) = expected {
        asserts.push(Assertion::new(
            "consistency",
            e == report.consistency.passed,
            format!("max defect {:e}: {}", report.consistency.max_defect, report.verdict),
        ));
    }
    if p.expect == Expectation::Branching {
        let distance = report.branching.as_ref().map_or(f64::NAN, |b| b.max_distance);
        asserts.push(Assertion::new(
            "branching",
            branches,
            format!("max distance from {{0, 1}}: {distance:e}"),
        ));
    }
    Ok(asserts)
}
