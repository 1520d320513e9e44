//! CSV output for extracted crack branches and run trajectories.

use std::fs::File;
use std::io::{BufWriter, Read as _, Write as _};
use std::path::Path;

use crate::math::Vec2;
use crate::pd::dynamics::TrajectorySample;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CsvError + '_ {
    move |source| CsvError::Io { path: path.display().to_string(), source }
}

/// Writes the two extracted crack branches side by side.
///
/// Columns are `x1,y1` for the first branch and `x2,y2` for the second; the
/// shorter branch is padded with empty cells. Floats use the shortest
/// round-trip form, so reading the file back recovers exact values.
pub fn write_crack_branches_csv(
    first: &[Vec2],
    second: &[Vec2],
    path: &Path,
) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "x1,y1,x2,y2")?;
        for i in 0..first.len().max(second.len()) {
            match (first.get(i), second.get(i)) {
                (Some(a), Some(b)) => writeln!(w, "{},{},{},{}", a.x, a.y, b.x, b.y)?,
                (Some(a), None) => writeln!(w, "{},{},,", a.x, a.y)?,
                (None, Some(b)) => writeln!(w, ",,{},{}", b.x, b.y)?,
                (None, None) => unreachable!(),
            }
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

/// Reads a file produced by [`write_crack_branches_csv`].
pub fn read_crack_branches_csv(path: &Path) -> Result<(Vec<Vec2>, Vec<Vec2>), CsvError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    let parse = |line: usize, msg: String| CsvError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "x1,y1,x2,y2")) => {}
        _ => return Err(parse(1, "expected header x1,y1,x2,y2".into())),
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(parse(i + 1, format!("expected 4 cells, found {}", cells.len())));
        }
        let pair = |a: &str, b: &str, out: &mut Vec<Vec2>| -> Result<(), CsvError> {
            match (a.is_empty(), b.is_empty()) {
                (true, true) => Ok(()),
                (false, false) => {
                    let x = a.parse().map_err(|_| parse(i + 1, format!("bad float {a}")))?;
                    let y = b.parse().map_err(|_| parse(i + 1, format!("bad float {b}")))?;
                    out.push(Vec2::new(x, y));
                    Ok(())
                }
                _ => Err(parse(i + 1, "half-empty coordinate pair".into())),
            }
        };
        pair(cells[0], cells[1], &mut first)?;
        pair(cells[2], cells[3], &mut second)?;
    }
    Ok((first, second))
}

/// Writes the per-step trajectory of a transient run.
pub fn write_trajectory_csv(samples: &[TrajectorySample], path: &Path) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "step,time,u_max,damage_max")?;
        for s in samples {
            writeln!(w, "{},{},{},{}", s.step, s.time, s.u_max, s.damage_max)?;
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("fracture2d-{}-{name}", std::process::id()))
    }

    #[test]
    fn branch_csv_pads_the_shorter_branch() {
        let first = vec![Vec2::new(1.0, 2.0)];
        let second = vec![Vec2::new(3.0, 4.0), Vec2::new(5.0, 6.0)];
        let path = tmp("pad.csv");
        write_crack_branches_csv(&first, &second, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(text, "x1,y1,x2,y2\n1,2,3,4\n,,5,6\n");
    }

    #[test]
    fn branch_csv_round_trips_exactly() {
        let first = vec![Vec2::new(0.1 + 0.2, -1e-300), Vec2::new(1.0 / 3.0, 5e-324)];
        let second = vec![Vec2::new(-0.0, 1.235e-4)];
        let path = tmp("roundtrip.csv");
        write_crack_branches_csv(&first, &second, &path).unwrap();
        let (a, b) = read_crack_branches_csv(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(a, first);
        assert_eq!(b, second);
        // -0.0 must survive with its sign bit.
        assert_eq!(b[0].x.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn empty_branches_leave_just_the_header() {
        let path = tmp("empty.csv");
        write_crack_branches_csv(&[], &[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let (a, b) = read_crack_branches_csv(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(text, "x1,y1,x2,y2\n");
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn malformed_rows_are_rejected_with_position() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "x1,y1,x2,y2\n1,2,3,4\n1,,3,4\n").unwrap();
        let err = read_crack_branches_csv(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        match err {
            CsvError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trajectory_csv_lists_every_sample() {
        let samples = vec![
            TrajectorySample { step: 0, time: 0.0, u_max: 0.0, damage_max: 0.0 },
            TrajectorySample { step: 250, time: 5e-6, u_max: 1.2e-4, damage_max: 0.073 },
        ];
        let path = tmp("traj.csv");
        write_trajectory_csv(&samples, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(
            text,
            "step,time,u_max,damage_max\n0,0,0,0\n250,0.000005,0.00012,0.073\n"
        );
    }
}
