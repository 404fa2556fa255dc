use std::io::Write;

use super::{GridState, TrackPoint};
use crate::error::{Error, Result};

fn io(e: std::io::Error) -> Error {
    Error::Contract(format!("write failed: {e}"))
}

/// `t,x,p,deviation`, pairing a quantum track with its classical deviation
/// (empty when there is none).
pub fn write_track_csv<W: Write>(track: &[TrackPoint], deviation: Option<&[f64]>, mut out: W) -> Result<()> {
    if let Some(d) = deviation {
        if d.len() != track.len() {
            return Err(Error::DimensionMismatch {
                expected: track.len(),
                actual: d.len(),
            });
        }
    }
    writeln!(out, "t,x,p,deviation").map_err(io)?;
    for (i, p) in track.iter().enumerate() {
        write!(out, "{:e},{:e},{:e},", p.t, p.point.x, p.point.p).map_err(io)?;
        match deviation {
            Some(d) => writeln!(out, "{:e}", d[i]),
            None => writeln!(out),
        }
        .map_err(io)?;
    }
    Ok(())
}

/// `x,density,re,im` for every grid point.
pub fn write_snapshot_csv<W: Write>(state: &GridState, mut out: W) -> Result<()> {
    writeln!(out, "x,density,re,im").map_err(io)?;
    for (x, v) in state.grid().xs().zip(state.values()) {
        writeln!(out, "{:e},{:e},{:e},{:e}", x, v.norm_sqr(), v.re, v.im).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasiclassical::{Grid, PhaseSpacePoint};

    #[test]
    fn csv_shapes() {
        let track = vec![
            TrackPoint {
                t: 0.0,
                point: PhaseSpacePoint::new(1.0, 0.0),
                width: 0.5,
            };
            3
        ];
        let mut buf = Vec::new();
        write_track_csv(&track, Some(&[0.0, 1e-9, 2e-9]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(2).unwrap(), "0e0,1e0,0e0,1e-9");
        assert!(write_track_csv(&track, Some(&[0.0]), Vec::new()).is_err());

        let g = Grid::new(-1.0, 1.0, 8).unwrap();
        let s = GridState::gaussian(g, 0.0, 0.0, 0.3).unwrap();
        let mut buf = Vec::new();
        write_snapshot_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }
}
