use std::io::Write;

use super::{frequency_table, BranchEnsemble};
use crate::error::{Error, Result};

fn io(e: std::io::Error) -> Error {
    Error::Contract(format!("write failed: {e}"))
}

/// `record,amplitude_re,amplitude_im,weight`, one row per branch.
pub fn write_branches_csv<W: Write>(ens: &BranchEnsemble, mut out: W) -> Result<()> {
    writeln!(out, "record,amplitude_re,amplitude_im,weight").map_err(io)?;
    for b in ens.branches() {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            b.record, b.amplitude.re, b.amplitude.im, b.weight
        )
        .map_err(io)?;
    }
    Ok(())
}

/// `k,weight,envelope`, one row per frequency class.
pub fn write_frequency_csv<W: Write>(ens: &BranchEnsemble, mut out: W) -> Result<()> {
    writeln!(out, "k,weight,envelope").map_err(io)?;
    for c in frequency_table(ens)? {
        writeln!(out, "{},{:e},{:e}", c.k, c.weight, c.envelope).map_err(io)?;
    }
    Ok(())
}
