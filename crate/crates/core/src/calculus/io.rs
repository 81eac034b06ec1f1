//! Plain-text map serialization: `nv` on the first line, then nv lines
//! `u v` of image coordinates, in mesh vertex order. A map file is only
//! meaningful next to its mesh; the loader takes the mesh, infers the
//! boundary condition (identity when every boundary image coincides with
//! its domain position) and revalidates all map invariants.

use super::{BoundaryCondition, PLMap};
use crate::mesh::TriMesh;
use crate::{Error, Result};
use num_complex::Complex64;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

pub fn save_map(map: &PLMap, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", map.images().len()).map_err(|e| Error::io(path, e))?;
    for im in map.images() {
        writeln!(w, "{:.16e} {:.16e}", im.re, im.im).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_map(path: &Path, mesh: Arc<TriMesh>) -> Result<PLMap> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut images = Vec::new();
    let mut expected = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if expected.is_none() {
            expected = Some(
                t.parse::<usize>()
                    .map_err(|e| parse_err(n + 1, format!("bad vertex count: {e}")))?,
            );
            continue;
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        if tok.len() != 2 {
            return Err(parse_err(n + 1, "image line must be 'u v'".into()));
        }
        let u: f64 = tok[0]
            .parse()
            .map_err(|e| parse_err(n + 1, format!("bad u: {e}")))?;
        let v: f64 = tok[1]
            .parse()
            .map_err(|e| parse_err(n + 1, format!("bad v: {e}")))?;
        images.push(Complex64::new(u, v));
    }
    let expected = expected.ok_or_else(|| parse_err(1, "empty map file".into()))?;
    if images.len() != expected {
        return Err(parse_err(
            0,
            format!("header says {expected} images, file has {}", images.len()),
        ));
    }
    let identity = (0..mesh.vertex_count())
        .filter(|&i| mesh.is_boundary(i))
        .all(|i| images.get(i) == Some(&mesh.vertices()[i]));
    let bc = if identity {
        BoundaryCondition::Identity
    } else {
        BoundaryCondition::Prescribed(images.clone())
    };
    let pin_target = mesh.pinned_index().and_then(|p| images.get(p).copied());
    PLMap::new(mesh, images, bc, pin_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn map_roundtrip_preserves_images_bitwise() {
        let pin = Complex64::new(0.3, 0.0);
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, pin).unwrap());
        let mut images = mesh.vertices().to_vec();
        for (i, im) in images.iter_mut().enumerate() {
            if !mesh.is_boundary(i) && mesh.pinned_index() != Some(i) {
                *im += Complex64::new(0.01, -0.005) * (i as f64).sin();
            }
        }
        let map = PLMap::new(mesh.clone(), images, BoundaryCondition::Identity, Some(pin)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.txt");
        save_map(&map, &path).unwrap();
        let back = load_map(&path, mesh).unwrap();
        assert_eq!(back.boundary_condition(), map.boundary_condition());
        assert_eq!(back.pin_target(), Some(pin));
        for (a, b) in map.images().iter().zip(back.images()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn wrong_count_is_rejected() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.txt");
        std::fs::write(&path, "2\n0 0\n").unwrap();
        assert!(load_map(&path, mesh).is_err());
    }
}
