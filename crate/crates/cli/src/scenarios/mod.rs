//! One runner per scenario. Each writes its artifacts and returns the
//! acceptance assertions it made.

mod automaton;
mod custom;
mod ehrenfest;
mod two_slit;

use everett::histories::DecoherenceFunctional;
use serde::Serialize;

use crate::artifacts::{ArtifactWriter, Assertion};
use crate::config::{Parameters, ScenarioConfig};
use crate::error::CliError;

pub fn run(cfg: &ScenarioConfig, out: &mut ArtifactWriter) -> Result<Vec<Assertion>, CliError> {
    match &cfg.parameters {
        Parameters::Automaton(p) => automaton::run(p, &cfg.tolerances, out),
        Parameters::TwoSlit(p) => two_slit::run(p, &cfg.tolerances, out),
        Parameters::Ehrenfest(p) => ehrenfest::run(p, out),
        Parameters::Custom(p) => custom::run(p, cfg.seed, &cfg.tolerances, out),
    }
}

/// The decoherence functional as plain arrays.
#[derive(Serialize)]
struct MatrixJson<'a> {
    labels: &'a [String],
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    trace: f64,
    hermiticity_defect: f64,
}

impl<'a> MatrixJson<'a> {
    fn new(d: &'a DecoherenceFunctional) -> Self {
        let n = d.len();
        let part = |f: fn(everett::hilbert::C64) -> f64| {
            (0..n).map(|a| (0..n).map(|b| f(d.entry(a, b))).collect()).collect()
        };
        Self {
            labels: d.labels(),
            re: part(|z| z.re),
            im: part(|z| z.im),
            trace: d.trace(),
            hermiticity_defect: d.hermiticity_defect(),
        }
    }
}

/// Text stating whether a consistency verdict matched what was expected.
fn verdict(consistent: bool, expected: Option<bool>) -> String {
    let found = if consistent { "consistent" } else { "inconsistent" };
    match expected {
        None => found.to_string(),
        Some(e) if e == consistent => format!("{found}, as expected"),
        Some(_) => format!("{found}, contrary to expectation"),
    }
}
