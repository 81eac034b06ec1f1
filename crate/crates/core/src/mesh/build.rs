//! Mesh generators: graded concentric-ring disk, structured rectangle,
//! uniform annulus.
//!
//! Disk construction happens in a canonical frame where the pin sits at the
//! origin: ring radii are graded toward 0, one ring is snapped or inserted
//! at radius |pin| so that the point that must map to 0 is an exact vertex,
//! and the finished mesh is pushed through w ↦ (w + pin)/(1 + conj(pin)·w).
//! The automorphism is conformal, so triangle shape survives and the grading
//! law transfers up to a bounded factor. Ring vertices are built mirror-wise
//! (lower half = bitwise conjugate of upper half) and the zipper compares
//! angles through integer cross products, so disk meshes with a real pin are
//! bitwise conjugation-symmetric.

use super::{mesh_statistics, DomainKind, TriMesh, MIN_ANGLE_DEG};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Below this distance from the pin the graded edge target stops shrinking.
const GRADING_FLOOR: f64 = 5e-3;
/// Margin on the graded spacing law so the edge-length postcondition holds
/// after the conformal pushforward.
const GRADING_SAFETY: f64 = 0.7;
/// Resource guard against pathological grading parameters.
const MAX_RINGS: usize = 5000;

fn even_count(x: f64) -> usize {
    let half = (x / 2.0).round().max(3.0);
    2 * half as usize
}

/// Target edge length at distance `dist` from the grading center.
fn graded_spacing(h: f64, gamma: f64, dist: f64) -> f64 {
    if gamma == 0.0 {
        h
    } else {
        GRADING_SAFETY * h * dist.max(GRADING_FLOOR).powf(gamma)
    }
}

/// Ring radii in (0, 1], innermost first, boundary ring exactly 1.
fn disk_ring_radii(h: f64, gamma: f64) -> Result<Vec<f64>> {
    let mut radii = vec![1.0];
    if gamma == 0.0 {
        let n = (1.0 / h).round().max(2.0) as usize;
        radii = (1..=n).map(|k| k as f64 / n as f64).collect();
        radii[n - 1] = 1.0;
        return Ok(radii);
    }
    let mut rho: f64 = 1.0;
    loop {
        let next = rho - graded_spacing(h, gamma, rho);
        if next <= 1.4 * graded_spacing(h, gamma, next) {
            break;
        }
        radii.push(next);
        rho = next;
        if radii.len() > MAX_RINGS {
            return Err(Error::InvalidParameter(format!(
                "grading exponent {gamma} at edge length {h} needs more than {MAX_RINGS} rings"
            )));
        }
    }
    radii.reverse();
    Ok(radii)
}

/// Make sure some ring sits exactly at radius `tau`, snapping the nearest
/// ring when it is already close and inserting a new ring otherwise.
/// Returns the index of the tau ring.
fn place_pin_ring(radii: &mut Vec<f64>, tau: f64, h: f64, gamma: f64) -> usize {
    let local = graded_spacing(h, gamma, tau);
    let mut k = 0;
    for (i, r) in radii.iter().enumerate() {
        if (r - tau).abs() < (radii[k] - tau).abs() {
            k = i;
        }
    }
    // never touch the boundary ring
    if (radii[k] - tau).abs() <= 0.1 * local && radii[k] != 1.0 {
        radii[k] = tau;
        return k;
    }
    let pos = radii.partition_point(|&r| r < tau);
    radii.insert(pos, tau);
    // prune immediate neighbors that got squeezed
    if pos + 1 < radii.len() && radii[pos + 1] != 1.0 && radii[pos + 1] - tau < 0.4 * local {
        radii.remove(pos + 1);
    }
    if pos > 0 && tau - radii[pos - 1] < 0.4 * local {
        radii.remove(pos - 1);
        return pos - 1;
    }
    pos
}

/// Vertices of a ring at radius `rho` with an even count `m`, vertex 0 on
/// the positive real axis, vertex m/2 on the negative one, lower half the
/// bitwise conjugate of the upper half.
fn ring_vertices(rho: f64, m: usize) -> Vec<Complex64> {
    debug_assert!(m % 2 == 0 && m >= 6);
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    v[0] = Complex64::new(rho, 0.0);
    v[m / 2] = Complex64::new(-rho, 0.0);
    for j in 1..m / 2 {
        let theta = 2.0 * PI * j as f64 / m as f64;
        let p = Complex64::new(rho * theta.cos(), rho * theta.sin());
        v[j] = p;
        v[m - j] = p.conj();
    }
    v
}

/// Stitch ring (base1, m1) to the ring (base2, m2) outside it. Both rings
/// are even with vertex j at angle 2πj/m. The upper half-strip is merged by
/// comparing the next vertex angles through exact integer cross products
/// (ties advance the inner ring), then mirrored across the real axis.
fn zipper_strip(
    base1: usize,
    m1: usize,
    base2: usize,
    m2: usize,
    out: &mut Vec<[usize; 3]>,
) {
    let mut upper: Vec<[usize; 3]> = Vec::with_capacity(m1 / 2 + m2 / 2);
    let (mut i, mut j) = (0usize, 0usize);
    while i < m1 / 2 || j < m2 / 2 {
        let advance_inner = if i == m1 / 2 {
            false
        } else if j == m2 / 2 {
            true
        } else {
            (i + 1) * m2 <= (j + 1) * m1
        };
        if advance_inner {
            upper.push([base1 + i, base2 + j, base1 + i + 1]);
            i += 1;
        } else {
            upper.push([base1 + i, base2 + j, base2 + j + 1]);
            j += 1;
        }
    }
    let mirror = |v: usize| {
        if v >= base2 {
            base2 + (m2 - (v - base2)) % m2
        } else {
            base1 + (m1 - (v - base1)) % m1
        }
    };
    for &[a, b, c] in &upper {
        out.push([mirror(a), mirror(c), mirror(b)]);
    }
    out.append(&mut upper);
}

/// Graded concentric-ring triangulation of the unit disk.
///
/// The mesh contains a vertex exactly at `pin_location` (the pinned vertex)
/// and a vertex exactly at 0. Local edge length near the pin scales like
/// `target_edge_length · dist^grading_exponent`; exponent 0 gives the
/// uniform ring mesh. Minimum angle below 15° is an error.
pub fn build_disk_mesh(
    target_edge_length: f64,
    grading_exponent: f64,
    pin_location: Complex64,
) -> Result<TriMesh> {
    let h = target_edge_length;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target edge length {h} outside (0, 1)"
        )));
    }
    if grading_exponent < 0.0 || !grading_exponent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grading exponent {grading_exponent} must be finite and ≥ 0"
        )));
    }
    let tau = pin_location.norm();
    if !(tau < 1.0 - h) {
        return Err(Error::InvalidParameter(format!(
            "pin at |{pin_location}| = {tau} too close to the boundary for edge length {h}"
        )));
    }

    let mut radii = disk_ring_radii(h, grading_exponent)?;
    let pin_ring = if tau > 0.0 {
        Some(place_pin_ring(&mut radii, tau, h, grading_exponent))
    } else {
        None
    };

    // tangential counts from the central radial gap
    let n = radii.len();
    let mut counts = Vec::with_capacity(n);
    for k in 0..n {
        let below = if k == 0 { 0.0 } else { radii[k - 1] };
        let above = if k + 1 < n { radii[k + 1] } else { radii[k] };
        let gap = if k + 1 < n {
            (above - below) / 2.0
        } else {
            radii[k] - below
        };
        counts.push(even_count(2.0 * PI * radii[k] / gap));
    }

    let mut vertices = vec![Complex64::new(0.0, 0.0)];
    let mut boundary = vec![false];
    let mut bases = Vec::with_capacity(n);
    for k in 0..n {
        bases.push(vertices.len());
        let mut ring = ring_vertices(radii[k], counts[k]);
        if k + 1 == n {
            for v in ring.iter_mut() {
                *v /= v.norm();
            }
        }
        boundary.extend(std::iter::repeat(k + 1 == n).take(ring.len()));
        vertices.append(&mut ring);
    }

    let mut triangles = Vec::new();
    for j in 0..counts[0] {
        triangles.push([0, bases[0] + j, bases[0] + (j + 1) % counts[0]]);
    }
    for k in 0..n - 1 {
        zipper_strip(bases[k], counts[k], bases[k + 1], counts[k + 1], &mut triangles);
    }

    // push the canonical frame onto the requested pin
    if let Some(kp) = pin_ring {
        let zero_index = bases[kp] + counts[kp] / 2; // the vertex at -tau
        let unit = pin_location / tau;
        for v in vertices.iter_mut() {
            *v *= unit;
        }
        vertices[zero_index] = -pin_location;
        let cpin = pin_location.conj();
        for v in vertices.iter_mut() {
            *v = (*v + pin_location) / (Complex64::new(1.0, 0.0) + cpin * *v);
        }
        vertices[0] = pin_location;
        vertices[zero_index] = Complex64::new(0.0, 0.0);
        for (i, v) in vertices.iter_mut().enumerate() {
            if boundary[i] {
                *v /= v.norm();
            }
        }
    }

    let mesh = TriMesh::new(vertices, triangles, boundary, Some(0), DomainKind::Disk)?;
    let stats = mesh_statistics(&mesh);
    if stats.min_angle_deg < MIN_ANGLE_DEG {
        return Err(Error::MeshInvariant(format!(
            "disk mesh min angle {:.2}° below {MIN_ANGLE_DEG}° (edge {h}, grading {grading_exponent}, pin {pin_location})",
            stats.min_angle_deg
        )));
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Structured triangulation of [0, width] × [0, height] with exact corner
/// vertices; each grid cell is split along the same diagonal.
pub fn build_rectangle_mesh(width: f64, height: f64, target_edge_length: f64) -> Result<TriMesh> {
    let h = target_edge_length;
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rectangle sides ({width}, {height}) must be positive"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("edge length {h} must be positive")));
    }
    let nx = ((width / h).round() as usize).max(1);
    let ny = ((height / h).round() as usize).max(1);
    let coord = |i: usize, n: usize, len: f64| -> f64 {
        if i == 0 {
            0.0
        } else if i == n {
            len
        } else {
            i as f64 * len / n as f64
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Complex64::new(coord(i, nx, width), coord(j, ny, height)));
            boundary.push(i == 0 || i == nx || j == 0 || j == ny);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mesh = TriMesh::new(
        vertices,
        triangles,
        boundary,
        None,
        DomainKind::Rectangle { width, height },
    )?;
    mesh.validate()?;
    Ok(mesh)
}

/// Uniform concentric-ring triangulation of the annulus
/// r_inner ≤ |z| ≤ r_outer; both circles are boundary.
pub fn build_annulus_mesh(r_inner: f64, r_outer: f64, target_edge_length: f64) -> Result<TriMesh> {
    let h = target_edge_length;
    if !(0.0 < r_inner && r_inner < r_outer) {
        return Err(Error::InvalidParameter(format!(
            "annulus radii ({r_inner}, {r_outer}) must satisfy 0 < inner < outer"
        )));
    }
    if !(h > 0.0 && h < r_outer - r_inner) {
        return Err(Error::InvalidParameter(format!(
            "edge length {h} incompatible with annulus width {}",
            r_outer - r_inner
        )));
    }
    let n = ((r_outer - r_inner) / h).round().max(1.0) as usize;
    let gap = (r_outer - r_inner) / n as f64;
    let mut radii: Vec<f64> = (0..=n)
        .map(|k| r_inner + k as f64 * (r_outer - r_inner) / n as f64)
        .collect();
    radii[0] = r_inner;
    radii[n] = r_outer;

    let mut vertices = Vec::new();
    let mut boundary = Vec::new();
    let mut bases = Vec::with_capacity(n + 1);
    for (k, &rho) in radii.iter().enumerate() {
        bases.push(vertices.len());
        let m = even_count(2.0 * PI * rho / gap);
        let mut ring = ring_vertices(rho, m);
        boundary.extend(std::iter::repeat(k == 0 || k == n).take(ring.len()));
        vertices.append(&mut ring);
    }
    let mut triangles = Vec::new();
    for k in 0..n {
        let m1 = bases.get(k + 1).unwrap() - bases[k];
        let m2 = if k + 1 == n {
            vertices.len() - bases[k + 1]
        } else {
            bases[k + 2] - bases[k + 1]
        };
        zipper_strip(bases[k], m1, bases[k + 1], m2, &mut triangles);
    }
    let mesh = TriMesh::new(
        vertices,
        triangles,
        boundary,
        None,
        DomainKind::Annulus { r_inner, r_outer },
    )?;
    let stats = mesh_statistics(&mesh);
    if stats.min_angle_deg < MIN_ANGLE_DEG {
        return Err(Error::MeshInvariant(format!(
            "annulus mesh min angle {:.2}° below {MIN_ANGLE_DEG}°",
            stats.min_angle_deg
        )));
    }
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::mesh_statistics;

    #[test]
    fn uniform_disk_has_center_vertex_and_unit_boundary() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(mesh.pinned_index(), Some(0));
        assert_eq!(mesh.vertices()[0], Complex64::new(0.0, 0.0));
        for (i, v) in mesh.vertices().iter().enumerate() {
            if mesh.is_boundary(i) {
                assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }
        mesh.validate().unwrap();
    }

    #[test]
    fn uniform_disk_triangle_count_near_area_estimate() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap();
        let estimate = PI / (0.2 * 0.2 * 3.0f64.sqrt() / 4.0);
        let count = mesh.triangle_count() as f64;
        assert!(count > estimate / 4.0 && count < estimate * 4.0);
    }

    #[test]
    fn off_center_pin_is_exact_vertex_with_zero_vertex() {
        let pin = Complex64::new(0.3, 0.0);
        let mesh = build_disk_mesh(0.2, 0.0, pin).unwrap();
        let p = mesh.pinned_index().unwrap();
        assert_eq!(mesh.vertices()[p], pin);
        assert!(mesh
            .vertices()
            .iter()
            .any(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn graded_mesh_resolves_fine_scales_near_pin() {
        let pin = Complex64::new(0.3, 0.0);
        let mesh = build_disk_mesh(0.1, 1.0, pin).unwrap();
        // minimum incident edge length at distance ~0.01 from the pin must
        // be below 0.1 * 0.01
        let mut min_edge = f64::INFINITY;
        for tri in mesh.triangles() {
            for e in 0..3 {
                let a = mesh.vertices()[tri[e]];
                let b = mesh.vertices()[tri[(e + 1) % 3]];
                let mid = (a + b) / 2.0;
                let d = (mid - pin).norm();
                if (0.005..=0.02).contains(&d) {
                    min_edge = min_edge.min((a - b).norm());
                }
            }
        }
        assert!(
            min_edge <= 0.1 * 0.01,
            "min edge near pin {min_edge} exceeds graded target"
        );
    }

    #[test]
    fn disk_mesh_min_angle_at_coarse_resolution() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let stats = mesh_statistics(&mesh);
        assert!(
            stats.min_angle_deg >= 20.0,
            "min angle {} too small",
            stats.min_angle_deg
        );
    }

    #[test]
    fn disk_area_converges_to_pi_from_below() {
        let mut last = 0.0;
        for h in [0.2, 0.1, 0.05] {
            let mesh = build_disk_mesh(h, 0.0, Complex64::new(0.0, 0.0)).unwrap();
            let area = mesh.total_area();
            assert!(area < PI && area > last);
            last = area;
        }
        assert!((last - PI).abs() < 0.01);
    }

    #[test]
    fn disk_mesh_with_real_pin_is_conjugation_symmetric() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap();
        // every vertex's conjugate is a vertex, bitwise (modulo the sign
        // of zero on the axis)
        use std::collections::HashSet;
        let key = |v: Complex64| ((v.re + 0.0).to_bits(), (v.im + 0.0).to_bits());
        let set: HashSet<(u64, u64)> = mesh.vertices().iter().map(|v| key(*v)).collect();
        for v in mesh.vertices() {
            assert!(set.contains(&key(v.conj())), "conjugate of {v} missing");
        }
    }

    #[test]
    fn rotating_the_pin_rotates_the_mesh() {
        let a = build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap();
        let b = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.3)).unwrap();
        assert_eq!(a.vertex_count(), b.vertex_count());
        assert_eq!(a.triangles(), b.triangles());
        let rot = Complex64::i();
        let worst = a
            .vertices()
            .iter()
            .zip(b.vertices())
            .map(|(va, vb)| (rot * va - vb).norm())
            .fold(0.0f64, f64::max);
        assert!(worst == 0.0, "worst vertex mismatch {worst:.3e}");
    }

    #[test]
    fn rejects_pin_too_close_to_boundary() {
        assert!(build_disk_mesh(0.2, 0.0, Complex64::new(0.85, 0.0)).is_err());
        assert!(build_disk_mesh(0.0, 0.0, Complex64::new(0.0, 0.0)).is_err());
        assert!(build_disk_mesh(1.0, 0.0, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn rectangle_mesh_corners_and_counts() {
        let mesh = build_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        assert!(mesh.triangle_count() >= 8);
        for corner in [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ] {
            assert!(mesh.vertices().contains(&corner));
        }
        let fine = build_rectangle_mesh(1.0, 1.0, 0.1).unwrap();
        let nb = (0..fine.vertex_count()).filter(|&i| fine.is_boundary(i)).count();
        assert!((32..=48).contains(&nb), "boundary count {nb}");
        let wide = build_rectangle_mesh(2.0, 1.0, 0.25).unwrap();
        assert!(wide.areas().iter().all(|&a| a > 0.0));
        assert!((wide.total_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_mesh_is_valid_and_flags_both_circles() {
        let mesh = build_annulus_mesh(0.5, 1.0, 0.1).unwrap();
        mesh.validate().unwrap();
        let mut saw_inner = false;
        let mut saw_outer = false;
        for (i, v) in mesh.vertices().iter().enumerate() {
            if mesh.is_boundary(i) {
                if (v.norm() - 0.5).abs() < 1e-12 {
                    saw_inner = true;
                } else {
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                    saw_outer = true;
                }
            }
        }
        assert!(saw_inner && saw_outer);
        let area = mesh.total_area();
        let exact = PI * (1.0 - 0.25);
        assert!((area - exact).abs() / exact < 0.01);
    }
}
