use std::fmt::Write as _;

use everett::automaton::{
    automaton_space, deviant_set_amplitude, ensemble_tree, is_deviant, run_trials, AutomatonSpec, BernoulliParams,
    TrialMode,
};
use everett::hilbert::C64;
use everett::histories::{branching_distances, check_space, superposition_identity_check};
use serde::Serialize;

use crate::artifacts::{ArtifactWriter, Assertion};
use crate::config::{AutomatonParams, Tolerances};
use crate::error::CliError;

const WEIGHT_TOL: f64 = 1e-10;
const AMPLITUDE_TOL: f64 = 1e-12;

/// `C(n,k) p^k q^(n−k)` by a running product, kept apart from the library's
/// log-space evaluation so the two can be compared.
fn binomial(n: usize, k: usize, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k.min(n - k) {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Weights the trial mode predicts for each `+` count.
fn oracle(p: &AutomatonParams) -> Vec<f64> {
    let n = p.trials;
    match p.mode {
        TrialMode::FreshSystems => (0..=n).map(|k| binomial(n, k, p.p)).collect(),
        TrialMode::SameSystem => (0..=n)
            .map(|k| match k {
                0 => 1.0 - p.p,
                k if k == n => p.p,
                _ => 0.0,
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct SpaceCheck {
    histories: usize,
    superposition_defect: f64,
    consistency_defect: f64,
    branching_distance: f64,
}

pub fn run(p: &AutomatonParams, tol: &Tolerances, out: &mut ArtifactWriter) -> Result<Vec<Assertion>, CliError> {
    let (c_plus, c_minus) = (C64::new(p.p.sqrt(), 0.0), C64::new((1.0 - p.p).sqrt(), 0.0));
    let ens = run_trials(c_plus, c_minus, p.trials, p.mode)?;
    let mut asserts = Vec::new();

    // Class weights summed branch by branch against the closed form
    let mut weights = vec![0.0; p.trials + 1];
    for b in ens.support() {
        weights[b.record.plus_count()] += b.weight;
    }
    let expected = oracle(p);
    let mut csv = String::from("k,frequency,weight,oracle,envelope\n");
    let mut worst: f64 = 0.0;
    for (k, (&w, &o)) in weights.iter().zip(&expected).enumerate() {
        let freq = k as f64 / p.trials as f64;
        let envelope = BernoulliParams::new(p.p, p.trials, (freq - p.p).abs())
            .map(|b| (-b.exponent()).exp())
            .unwrap_or(f64::NAN);
        worst = worst.max((w - o).abs());
        writeln!(csv, "{k},{freq:e},{w:e},{o:e},{envelope:e}").expect("string write");
    }
    out.write("frequency.csv", csv.as_bytes())?;
    asserts.push(Assertion::below("class weights match the binomial oracle", worst, WEIGHT_TOL));
    let total: f64 = weights.iter().sum();
    asserts.push(Assertion::below("branch weights sum to one", (total - 1.0).abs(), WEIGHT_TOL));

    if p.mode == TrialMode::FreshSystems {
        let mut csv = String::from("epsilon,amplitude,oracle,bound,exponent_ratio\n");
        let mut worst: f64 = 0.0;
        for i in 0..p.sweep_points {
            let eps = if p.sweep_points == 1 {
                p.epsilon
            } else {
                p.epsilon + (p.epsilon_max - p.epsilon) * i as f64 / (p.sweep_points - 1) as f64
            };
            let amp = deviant_set_amplitude(&ens, eps)?;
            let tail: f64 = (0..=p.trials)
                .filter(|&k| is_deviant(k, p.trials, p.p, eps))
                .map(|k| expected[k])
                .sum();
            let exact = tail.sqrt();
            worst = worst.max((amp - exact).abs());
            let exponent = BernoulliParams::new(p.p, p.trials, eps)?.exponent();
            let ratio = if amp > 0.0 { amp.ln() / -exponent } else { f64::INFINITY };
            writeln!(csv, "{eps:e},{amp:e},{exact:e},{:e},{ratio:e}", (-exponent).exp()).expect("string write");
        }
        out.write("envelope.csv", csv.as_bytes())?;
        asserts.push(Assertion::below("deviant amplitude matches the binomial tail", worst, AMPLITUDE_TOL));
    }

    let tree = ensemble_tree(&ens, p.tree_cutoff)?;
    out.write("tree.json", format!("{}\n", tree.to_json()).as_bytes())?;
    let defect = (1..=p.trials).map(|d| tree.max_child_sum_defect(d)).fold(0.0, f64::max);
    asserts.push(Assertion::below("tree children account for parent weight", defect, WEIGHT_TOL));

    if p.space_check {
        let space = automaton_space(&AutomatonSpec::new(c_plus, c_minus, p.trials, p.mode))?;
        let consistency = check_space(&space, tol.consistency)?;
        let branching = branching_distances(&space, tol.branching)?;
        let check = SpaceCheck {
            histories: space.branch_vectors()?.len(),
            superposition_defect: superposition_identity_check(&space)?,
            consistency_defect: consistency.max_defect,
            branching_distance: branching.max_distance,
        };
        out.write_json("space_check.json", &check)?;
        asserts.push(Assertion::below(
            "record histories are consistent",
            consistency.max_defect,
            tol.consistency,
        ));
        asserts.push(Assertion::below(
            "record histories branch",
            branching.max_distance,
            tol.branching,
        ));
    }
    Ok(asserts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_product_binomial() {
        assert_eq!(binomial(4, 2, 0.5), 6.0 / 16.0);
        assert!((binomial(20, 7, 0.3) - 0.164_261_985_217_236_5).abs() < 1e-15);
        let s: f64 = (0..=50).map(|k| binomial(50, k, 0.64)).sum();
        assert!((s - 1.0).abs() < 1e-13);
    }
}
