use std::fmt::Write as _;

use everett::histories::{
    consistency_check, decoherence_functional, sum_rule_report, Criterion, Partition, ZERO_WEIGHT_FLOOR,
};
use everett::quasiclassical::{slit_history, two_slit_space, Slit, SLIT_MINUS, SLIT_PLUS};
use serde::Serialize;

use super::{verdict, MatrixJson};
use crate::artifacts::{ArtifactWriter, Assertion};
use crate::config::{Expectation, Tolerances, TwoSlitParams};
use crate::error::CliError;

#[derive(Serialize)]
struct CrossTerm {
    between: [String; 2],
    re: f64,
    im: f64,
    abs: f64,
    /// `|D(+,−)| / √(D(+,+) D(−,−))`, zero when either path carries no weight.
    normalized: f64,
    verdict: String,
}

#[derive(Serialize)]
struct Report<'a> {
    decoherence: MatrixJson<'a>,
    cross_term: CrossTerm,
    consistency: everett::histories::ConsistencyReport,
    merged_slits_sum_rule: everett::histories::SumRuleReport,
}

pub fn run(p: &TwoSlitParams, tol: &Tolerances, out: &mut ArtifactWriter) -> Result<Vec<Assertion>, CliError> {
    let space = two_slit_space(&p.geometry, &p.times)?;
    let d = decoherence_functional(&space)?;
    let name = |s: Slit| slit_history(s).join(",");
    let (plus, minus) = (name(Slit::Plus), name(Slit::Minus));
    let pm = d.get(&plus, &minus)?;
    let (pp, mm) = (d.get(&plus, &plus)?.re, d.get(&minus, &minus)?.re);
    let floor = ZERO_WEIGHT_FLOOR * d.trace();
    let normalized = if pp > floor && mm > floor { pm.norm() / (pp * mm).sqrt() } else { 0.0 };
    let pair_consistent = normalized < tol.consistency;
    let expected = match p.expect {
        Expectation::Consistent => Some(true),
        Expectation::Inconsistent => Some(false),
        _ => None,
    };
    let pair_verdict = verdict(pair_consistent, expected);
    let consistency = consistency_check(&d, tol.consistency, Criterion::Full);
    let merged = Partition::merging(&space, 1, "slits", &[SLIT_PLUS, SLIT_MINUS]);
    let report = Report {
        decoherence: MatrixJson::new(&d),
        cross_term: CrossTerm {
            between: [plus, minus],
            re: pm.re,
            im: pm.im,
            abs: pm.norm(),
            normalized,
            verdict: pair_verdict.clone(),
        },
        merged_slits_sum_rule: sum_rule_report(&space, &merged)?,
        consistency,
    };
    out.write_json("decoherence.json", &report)?;
    let whole = verdict(report.consistency.passed, None);

    // Density on the grid at the screen time, summed over any ancilla
    let g = p.geometry.grid;
    let at_screen = space.dynamics().propagate(space.initial(), 0.0, p.times.screen)?;
    let n = g.n_points;
    let mut csv = String::from("x,density\n");
    for (j, x) in g.xs().enumerate() {
        let rho: f64 = at_screen.amplitudes().iter().skip(j).step_by(n).map(|a| a.norm_sqr()).sum::<f64>() / g.dx();
        writeln!(csv, "{x:e},{rho:e}").expect("string write");
    }
    out.write("screen_density.csv", csv.as_bytes())?;

    let mut asserts = vec![Assertion::new(
        "slit histories",
        expected.is_none_or(|e| e == pair_consistent),
        format!("normalized cross term {normalized:e}: {pair_verdict}; whole space {whole}"),
    )];
    asserts.push(Assertion::below(
        "decoherence trace is one",
        (report.decoherence.trace - 1.0).abs(),
        1e-10,
    ));
    Ok(asserts)
}
