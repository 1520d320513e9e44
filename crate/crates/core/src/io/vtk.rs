//! Legacy ASCII VTK output for point-cloud fields and crack polylines.
//!
//! The writer emits the fixed legacy header, a `POLYDATA` point set, and
//! point data consisting of an optional displacement vector field and an
//! optional damage scalar field. Floats are printed in Rust's shortest
//! round-trip decimal form, so a written file parses back to bit-identical
//! values and identical inputs always produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Read as _, Write as _};
use std::path::Path;

use crate::crack::CrackPath;
use crate::math::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("field sample is empty")]
    Empty,
    #[error("{field} has {got} values for {want} points")]
    LengthMismatch { field: &'static str, got: usize, want: usize },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VtkError + '_ {
    move |source| VtkError::Io { path: path.display().to_string(), source }
}

/// A sampled field on a point cloud: positions plus optional point data.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub points: Vec<Vec2>,
    pub displacement: Option<Vec<Vec2>>,
    pub damage: Option<Vec<f64>>,
}

impl FieldSample {
    fn check(&self) -> Result<(), VtkError> {
        if self.points.is_empty() {
            return Err(VtkError::Empty);
        }
        let want = self.points.len();
        if let Some(u) = &self.displacement {
            if u.len() != want {
                return Err(VtkError::LengthMismatch {
                    field: "displacement",
                    got: u.len(),
                    want,
                });
            }
        }
        if let Some(d) = &self.damage {
            if d.len() != want {
                return Err(VtkError::LengthMismatch { field: "damage", got: d.len(), want });
            }
        }
        Ok(())
    }
}

/// Writes a point-cloud field. The 2D data is embedded at `z = 0`.
pub fn write_vtk(sample: &FieldSample, path: &Path) -> Result<(), VtkError> {
    sample.check()?;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut emit = || -> std::io::Result<()> {
        let n = sample.points.len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "fracture2d field")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {n} double")?;
        for p in &sample.points {
            writeln!(w, "{} {} 0", p.x, p.y)?;
        }
        if sample.displacement.is_some() || sample.damage.is_some() {
            writeln!(w, "POINT_DATA {n}")?;
        }
        if let Some(u) = &sample.displacement {
            writeln!(w, "VECTORS displacement double")?;
            for v in u {
                writeln!(w, "{} {} 0", v.x, v.y)?;
            }
        }
        if let Some(d) = &sample.damage {
            writeln!(w, "SCALARS damage double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in d {
                writeln!(w, "{v}")?;
            }
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

/// Writes a crack polyline as a `POLYDATA` line cell.
pub fn write_crack_vtk(crack: &CrackPath, path: &Path) -> Result<(), VtkError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut emit = || -> std::io::Result<()> {
        let n = crack.points().len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "fracture2d crack path")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {n} double")?;
        for p in crack.points() {
            writeln!(w, "{} {} 0", p.x, p.y)?;
        }
        write!(w, "LINES 1 {}", n + 1)?;
        write!(w, "\n{n}")?;
        for i in 0..n {
            write!(w, " {i}")?;
        }
        writeln!(w)?;
        w.flush()
    };
    emit().map_err(io_err(path))
}

/// Minimal legacy-VTK reader for the subset this crate writes: an ASCII
/// `POLYDATA` point set with optional `displacement` vectors and `damage`
/// scalars. Token layout (values per line) is free-form.
pub fn read_vtk(path: &Path) -> Result<FieldSample, VtkError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    let parse = |msg: &str| VtkError::Parse { path: path.display().to_string(), msg: msg.into() };

    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("# vtk DataFile")) {
        return Err(parse("missing legacy VTK magic line"));
    }
    lines.next(); // title
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(parse("only ASCII encoding is supported"));
    }
    if !lines.next().is_some_and(|l| l.trim().starts_with("DATASET POLYDATA")) {
        return Err(parse("only DATASET POLYDATA is supported"));
    }

    // Tokenize the rest; section keywords and numbers are all whitespace
    // separated from here on.
    let tokens: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
    let mut k = 0;
    let take = |k: &mut usize, tokens: &[&str]| -> Option<String> {
        let t = tokens.get(*k).map(|s| s.to_string());
        *k += 1;
        t
    };
    let mut points: Option<Vec<Vec2>> = None;
    let mut displacement = None;
    let mut damage = None;
    let floats = |k: &mut usize, count: usize, what: &str| -> Result<Vec<f64>, VtkError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let tok = tokens.get(*k).ok_or_else(|| parse(&format!("truncated {what}")))?;
            *k += 1;
            out.push(tok.parse().map_err(|_| parse(&format!("bad float in {what}: {tok}")))?);
        }
        Ok(out)
    };
    while let Some(tok) = take(&mut k, &tokens) {
        match tok.as_str() {
            "POINTS" => {
                let n: usize = take(&mut k, &tokens)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse("bad POINTS count"))?;
                take(&mut k, &tokens); // value type
                let v = floats(&mut k, 3 * n, "POINTS")?;
                points = Some(v.chunks(3).map(|c| Vec2::new(c[0], c[1])).collect());
            }
            "VECTORS" => {
                let name = take(&mut k, &tokens).ok_or_else(|| parse("truncated VECTORS"))?;
                take(&mut k, &tokens); // value type
                let n = points.as_ref().ok_or_else(|| parse("VECTORS before POINTS"))?.len();
                let v = floats(&mut k, 3 * n, "VECTORS")?;
                let field = v.chunks(3).map(|c| Vec2::new(c[0], c[1])).collect();
                if name == "displacement" {
                    displacement = Some(field);
                }
            }
            "SCALARS" => {
                let name = take(&mut k, &tokens).ok_or_else(|| parse("truncated SCALARS"))?;
                take(&mut k, &tokens); // value type
                // Optional component count, then the LOOKUP_TABLE keyword.
                if tokens.get(k).is_some_and(|t| t.parse::<usize>().is_ok()) {
                    k += 1;
                }
                if tokens.get(k).copied() == Some("LOOKUP_TABLE") {
                    k += 2;
                }
                let n = points.as_ref().ok_or_else(|| parse("SCALARS before POINTS"))?.len();
                let v = floats(&mut k, n, "SCALARS")?;
                if name == "damage" {
                    damage = Some(v);
                }
            }
            // Sections we do not consume (POINT_DATA n, LINES …): the next
            // keyword match resynchronizes the scan.
            _ => {}
        }
    }
    let points = points.ok_or_else(|| parse("no POINTS section"))?;
    let sample = FieldSample { points, displacement, damage };
    sample.check().map_err(|e| parse(&e.to_string()))?;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("fracture2d-{}-{name}", std::process::id()))
    }

    #[test]
    fn single_zero_node_matches_the_golden_file() {
        let sample = FieldSample {
            points: vec![Vec2::zeros()],
            displacement: Some(vec![Vec2::zeros()]),
            damage: Some(vec![0.0]),
        };
        let path = tmp("golden.vtk");
        write_vtk(&sample, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let golden = "\
# vtk DataFile Version 3.0
fracture2d field
ASCII
DATASET POLYDATA
POINTS 1 double
0 0 0
POINT_DATA 1
VECTORS displacement double
0 0 0
SCALARS damage double 1
LOOKUP_TABLE default
0
";
        assert_eq!(text, golden);
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn write_read_round_trip_is_bit_exact() {
        let sample = FieldSample {
            points: vec![Vec2::new(1.0 / 3.0, -2.5e-7), Vec2::new(0.1 + 0.2, 1e300)],
            displacement: Some(vec![Vec2::new(-1.23456789012345e-4, 5e-324), Vec2::zeros()]),
            damage: Some(vec![0.073, 1.0625]),
        };
        let path = tmp("roundtrip.vtk");
        write_vtk(&sample, &path).unwrap();
        let back = read_vtk(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(sample, back);
    }

    #[test]
    fn identical_inputs_produce_byte_identical_files() {
        let sample = FieldSample {
            points: vec![Vec2::new(0.25, 0.75); 7],
            displacement: None,
            damage: Some(vec![0.5; 7]),
        };
        let (p1, p2) = (tmp("det1.vtk"), tmp("det2.vtk"));
        write_vtk(&sample, &p1).unwrap();
        write_vtk(&sample, &p2).unwrap();
        let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_file(&p1).ok();
        std::fs::remove_file(&p2).ok();
        assert_eq!(b1, b2);
    }

    #[test]
    fn empty_and_mismatched_samples_are_rejected() {
        let path = tmp("invalid.vtk");
        let empty = FieldSample { points: vec![], displacement: None, damage: None };
        assert!(matches!(write_vtk(&empty, &path), Err(VtkError::Empty)));
        let bad = FieldSample {
            points: vec![Vec2::zeros()],
            displacement: Some(vec![]),
            damage: None,
        };
        assert!(matches!(
            write_vtk(&bad, &path),
            Err(VtkError::LengthMismatch { field: "displacement", .. })
        ));
    }

    #[test]
    fn crack_polyline_writes_a_connected_line_cell() {
        let crack = CrackPath::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.1),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap();
        let path = tmp("crack.vtk");
        write_crack_vtk(&crack, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Its point cloud also parses with the field reader.
        let sample = read_vtk(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert!(text.contains("LINES 1 4"));
        assert!(text.contains("3 0 1 2"));
        assert_eq!(sample.points, crack.points());
    }
}
