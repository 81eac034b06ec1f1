//! Plain-text mesh serialization.
//!
//! Format: header line `ntv ntt`, then ntv lines `x y boundary_flag`, then
//! ntt lines `i j k` (0-based, CCW), then an optional `pin <index>` line.
//! Coordinates are written with 17 significant digits so a save/load round
//! trip reproduces every vertex bitwise. Blank lines and `#` comments are
//! tolerated on load. The domain kind is not stored; the loader infers it
//! from the flagged vertices (unit circle -> disk, two radius clusters ->
//! annulus, axis-aligned bounding box -> rectangle).

use super::{DomainKind, TriMesh};
use crate::{Error, Result};
use num_complex::Complex64;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const INFER_TOL: f64 = 1e-9;

pub fn save_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |s: String| -> Result<()> {
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))
    };
    emit(format!("{} {}", mesh.vertex_count(), mesh.triangle_count()))?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        emit(format!(
            "{:.16e} {:.16e} {}",
            v.re,
            v.im,
            u8::from(mesh.is_boundary(i))
        ))?;
    }
    for tri in mesh.triangles() {
        emit(format!("{} {} {}", tri[0], tri[1], tri[2]))?;
    }
    if let Some(p) = mesh.pinned_index() {
        emit(format!("pin {p}"))?;
    }
    Ok(())
}

fn infer_kind(vertices: &[Complex64], boundary: &[bool]) -> Result<DomainKind> {
    let flagged: Vec<Complex64> = vertices
        .iter()
        .zip(boundary)
        .filter(|(_, &b)| b)
        .map(|(v, _)| *v)
        .collect();
    if flagged.is_empty() {
        return Err(Error::MeshInvariant("no boundary vertices".into()));
    }
    if flagged.iter().all(|v| (v.norm() - 1.0).abs() <= INFER_TOL) {
        return Ok(DomainKind::Disk);
    }
    let radii: Vec<f64> = flagged.iter().map(|v| v.norm()).collect();
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().cloned().fold(0.0_f64, f64::max);
    if r_min > INFER_TOL
        && r_max - r_min > INFER_TOL
        && radii
            .iter()
            .all(|r| (r - r_min).abs() <= INFER_TOL || (r - r_max).abs() <= INFER_TOL)
    {
        return Ok(DomainKind::Annulus {
            r_inner: r_min,
            r_outer: r_max,
        });
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        x_min = x_min.min(v.re);
        x_max = x_max.max(v.re);
        y_min = y_min.min(v.im);
        y_max = y_max.max(v.im);
    }
    let on_box = |v: &Complex64| {
        (v.re - x_min).abs() <= INFER_TOL
            || (x_max - v.re).abs() <= INFER_TOL
            || (v.im - y_min).abs() <= INFER_TOL
            || (y_max - v.im).abs() <= INFER_TOL
    };
    if x_min.abs() <= INFER_TOL && y_min.abs() <= INFER_TOL && flagged.iter().all(on_box) {
        return Ok(DomainKind::Rectangle {
            width: x_max,
            height: y_max,
        });
    }
    Err(Error::MeshInvariant(
        "cannot infer domain kind from boundary vertices".into(),
    ))
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim().to_string();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push((n + 1, trimmed));
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut it = lines.into_iter();
    let (hn, header) = it
        .next()
        .ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(hn, format!("bad header: {e}")))?;
    if counts.len() != 2 {
        return Err(parse_err(hn, "header must be 'ntv ntt'".into()));
    }
    let (nv, nt) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, line) = it
            .next()
            .ok_or_else(|| parse_err(hn, format!("expected {nv} vertex lines")))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(parse_err(n, "vertex line must be 'x y flag'".into()));
        }
        let x: f64 = tok[0]
            .parse()
            .map_err(|e| parse_err(n, format!("bad x: {e}")))?;
        let y: f64 = tok[1]
            .parse()
            .map_err(|e| parse_err(n, format!("bad y: {e}")))?;
        let flag = match tok[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(n, format!("bad boundary flag '{other}'"))),
        };
        vertices.push(Complex64::new(x, y));
        boundary.push(flag);
    }

    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, line) = it
            .next()
            .ok_or_else(|| parse_err(hn, format!("expected {nt} triangle lines")))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(n, format!("bad triangle: {e}")))?;
        if idx.len() != 3 {
            return Err(parse_err(n, "triangle line must be 'i j k'".into()));
        }
        triangles.push([idx[0], idx[1], idx[2]]);
    }

    let mut pinned = None;
    if let Some((n, line)) = it.next() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() == 2 && tok[0] == "pin" {
            pinned = Some(
                tok[1]
                    .parse()
                    .map_err(|e| parse_err(n, format!("bad pin index: {e}")))?,
            );
        } else {
            return Err(parse_err(n, format!("unexpected trailing line '{line}'")));
        }
    }
    if let Some((n, line)) = it.next() {
        return Err(parse_err(n, format!("unexpected trailing line '{line}'")));
    }

    let kind = infer_kind(&vertices, &boundary)?;
    let mesh = TriMesh::new(vertices, triangles, boundary, pinned, kind)?;
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_annulus_mesh, build_disk_mesh, build_rectangle_mesh};

    fn roundtrip(mesh: &TriMesh) -> TriMesh {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        save_mesh(mesh, &path).unwrap();
        load_mesh(&path).unwrap()
    }

    #[test]
    fn disk_roundtrip_is_bitwise() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap();
        let back = roundtrip(&mesh);
        assert_eq!(back.kind(), DomainKind::Disk);
        assert_eq!(back.pinned_index(), mesh.pinned_index());
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rectangle_and_annulus_kinds_are_inferred() {
        let rect = build_rectangle_mesh(2.0, 1.0, 0.25).unwrap();
        match roundtrip(&rect).kind() {
            DomainKind::Rectangle { width, height } => {
                assert!((width - 2.0).abs() < 1e-12 && (height - 1.0).abs() < 1e-12);
            }
            other => panic!("expected rectangle, got {other:?}"),
        }
        let ann = build_annulus_mesh(0.5, 1.0, 0.1).unwrap();
        match roundtrip(&ann).kind() {
            DomainKind::Annulus { r_inner, r_outer } => {
                assert!((r_inner - 0.5).abs() < 1e-9 && (r_outer - 1.0).abs() < 1e-9);
            }
            other => panic!("expected annulus, got {other:?}"),
        }
    }

    #[test]
    fn malformed_files_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "2 1\n0 0 1\n1 0 1\n0 1 bogus\n").unwrap();
        match load_mesh(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "").unwrap();
        assert!(load_mesh(&path).is_err());
    }
}
