//! Legacy VTK output and the per-iteration history table.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const HISTORY_HEADER: &str = "iter,J1,J2,V,Verr,W,newton_ns,newton_pb,clamp,seconds";

/// One row of the history table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub iter: usize,
    pub j1: f64,
    pub j2: f64,
    pub volume: f64,
    pub volume_error: f64,
    pub free_energy: f64,
    pub newton_ns: usize,
    pub newton_pb: usize,
    pub clamp: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHistory {
    pub records: Vec<RunRecord>,
}

impl RunHistory {
    /// CSV text. Floats use the shortest representation that parses back
    /// to the same value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.iter, r.j1, r.j2, r.volume, r.volume_error, r.free_energy, r.newton_ns, r.newton_pb, r.clamp, r.seconds
            );
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HISTORY_HEADER => {}
            _ => return Err(Error::Parse { line: 1, message: format!("expected header `{HISTORY_HEADER}`") }),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: String| Error::Parse { line: i + 1, message: m };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 10 {
                return Err(err(format!("expected 10 columns, found {}", cols.len())));
            }
            let f = |k: usize| cols[k].parse::<f64>().map_err(|e| err(format!("column {}: {e}", k + 1)));
            let u = |k: usize| cols[k].parse::<usize>().map_err(|e| err(format!("column {}: {e}", k + 1)));
            records.push(RunRecord {
                iter: u(0)?,
                j1: f(1)?,
                j2: f(2)?,
                volume: f(3)?,
                volume_error: f(4)?,
                free_energy: f(5)?,
                newton_ns: u(6)?,
                newton_pb: u(7)?,
                clamp: f(8)?,
                seconds: f(9)?,
            });
        }
        Ok(RunHistory { records })
    }

    /// Copy with the wall-clock column zeroed, for reproducible output.
    pub fn without_timing(&self) -> Self {
        let records = self.records.iter().map(|r| RunRecord { seconds: 0.0, ..*r }).collect();
        RunHistory { records }
    }
}

pub fn export_history(history: &RunHistory, path: &Path) -> Result<()> {
    std::fs::write(path, history.to_csv())?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<RunHistory> {
    RunHistory::parse_csv(&std::fs::read_to_string(path)?)
}

/// A named nodal field for VTK output.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a str, &'a [f64]),
    /// Interleaved `[x0, y0, x1, y1, ...]`.
    Vector(&'a str, &'a [f64]),
}

fn num(x: f64) -> String {
    // 9 significant digits; NaN and infinities pass through as text.
    if x == 0.0 {
        "0".into()
    } else if x.is_finite() {
        format!("{:.8e}", x)
    } else {
        format!("{x}")
    }
}

pub fn vtk_string(mesh: &Mesh, fields: &[FieldRef<'_>]) -> Result<String> {
    let n = mesh.num_nodes();
    for f in fields {
        let (name, len, want) = match f {
            FieldRef::Scalar(name, v) => (name, v.len(), n),
            FieldRef::Vector(name, v) => (name, v.len(), 2 * n),
        };
        if len != want {
            return Err(Error::Domain(format!("field `{name}` has {len} values, mesh needs {want}")));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nphasemix\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", num(p[0]), num(p[1]));
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
    }
    for f in fields {
        match f {
            FieldRef::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v.iter() {
                    s.push_str(&num(*x));
                    s.push('\n');
                }
            }
            FieldRef::Vector(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for c in v.chunks(2) {
                    let _ = writeln!(s, "{} {} 0", num(c[0]), num(c[1]));
                }
            }
        }
    }
    Ok(s)
}

pub fn export_vtk(mesh: &Mesh, fields: &[FieldRef<'_>], path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, fields)?)?;
    Ok(())
}

/// Reads the scalar field `name` back from a file written by [`export_vtk`].
pub fn read_vtk_scalar(path: &Path, name: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut n = None;
    while let Some((i, line)) = lines.next() {
        if let Some(rest) = line.strip_prefix("POINT_DATA ") {
            n = Some(rest.trim().parse::<usize>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
        }
        let mut parts = line.split_whitespace();
        if parts.next() == Some("SCALARS") && parts.next() == Some(name) {
            let n = n.ok_or_else(|| Error::Parse { line: i + 1, message: "SCALARS before POINT_DATA".into() })?;
            lines.next();
            let mut out = Vec::with_capacity(n);
            for (j, l) in lines.by_ref().take(n) {
                out.push(l.trim().parse::<f64>().map_err(|e| Error::Parse { line: j + 1, message: e.to_string() })?);
            }
            if out.len() != n {
                return Err(Error::Parse { line: i + 1, message: format!("field `{name}` truncated") });
            }
            return Ok(out);
        }
    }
    Err(Error::Parse { line: 0, message: format!("no scalar field `{name}`") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_rect, channel_tagger, BBox};

    fn record(i: usize) -> RunRecord {
        RunRecord {
            iter: i,
            j1: 0.1 * i as f64 + 1.0 / 3.0,
            j2: 1e-17 * i as f64,
            volume: 0.5,
            volume_error: 2.0f64.sqrt() * 1e-5,
            free_energy: -3.25,
            newton_ns: 4,
            newton_pb: 0,
            clamp: 0.0,
            seconds: 0.0123456789,
        }
    }

    #[test]
    fn history_round_trip_is_exact() {
        let h = RunHistory { records: (1..6).map(record).collect() };
        let back = RunHistory::parse_csv(&h.to_csv()).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn history_rejects_bad_header() {
        assert!(RunHistory::parse_csv("a,b\n1,2\n").is_err());
        let bad = format!("{HISTORY_HEADER}\n1,2,3\n");
        match RunHistory::parse_csv(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vtk_scalar_round_trip() {
        let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
        let mesh = build_structured_rect(bbox, 3, 2, &channel_tagger(bbox)).unwrap();
        let vals: Vec<f64> = (0..mesh.num_nodes()).map(|i| (i as f64).sin()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.vtk");
        export_vtk(&mesh, &[FieldRef::Scalar("phi", &vals)], &path).unwrap();
        let back = read_vtk_scalar(&path, "phi").unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300));
        }
        assert!(vtk_string(&mesh, &[FieldRef::Scalar("x", &vals[1..])]).is_err());
    }
}
