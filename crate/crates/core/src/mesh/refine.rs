//! Local red-green refinement around a disk of interest.
//!
//! Triangles meeting the open ball B(center, radius) are split into four
//! similar children (red). Marked edges propagate: a triangle with two or
//! three marked edges is promoted to red, a triangle with exactly one marked
//! edge is bisected (green), so the result is conforming. Boundary edge
//! midpoints are projected back onto the exact domain boundary. Existing
//! vertex indices are preserved, so the pinned vertex survives refinement.

use super::{boundary_distance, DomainKind, TriMesh, BOUNDARY_TOL};
use crate::Result;
use num_complex::Complex64;
use std::collections::HashMap;

/// Euclidean distance from `p` to the closed triangle (a, b, c).
fn point_triangle_distance(p: Complex64, a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let inside = |u: Complex64, v: Complex64| -> bool {
        // p strictly left of directed edge u -> v (triangles are CCW)
        (v.re - u.re) * (p.im - u.im) - (v.im - u.im) * (p.re - u.re) >= 0.0
    };
    if inside(a, b) && inside(b, c) && inside(c, a) {
        return 0.0;
    }
    let seg = |u: Complex64, v: Complex64| -> f64 {
        let d = v - u;
        let len2 = d.norm_sqr();
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p - u).re * d.re + (p - u).im * d.im) / len2).clamp(0.0, 1.0)
        };
        (p - (u + t * d)).norm()
    };
    seg(a, b).min(seg(b, c)).min(seg(c, a))
}

fn project_to_boundary(kind: DomainKind, v: Complex64) -> Complex64 {
    match kind {
        DomainKind::Disk => v / v.norm(),
        // grid boundary midpoints already lie on a side
        DomainKind::Rectangle { .. } => v,
        DomainKind::Annulus { r_inner, r_outer } => {
            let r = v.norm();
            let target = if (r - r_inner).abs() < (r - r_outer).abs() {
                r_inner
            } else {
                r_outer
            };
            v * (target / r)
        }
    }
}

/// Refine every triangle whose closure meets the open ball
/// B(`center`, `radius`), keeping the mesh conforming via green closures.
/// `radius <= 0` returns the mesh unchanged.
pub fn refine(mesh: &TriMesh, center: Complex64, radius: f64) -> Result<TriMesh> {
    refine_with_parents(mesh, center, radius).map(|(refined, _)| refined)
}

/// [`refine`], also reporting the parent edge of every new vertex in
/// creation order, so vertex data can be prolonged onto the refined mesh.
/// New vertex `old_count + k` is the midpoint of edge `parents[k]` (or its
/// boundary projection).
pub fn refine_with_parents(
    mesh: &TriMesh,
    center: Complex64,
    radius: f64,
) -> Result<(TriMesh, Vec<(usize, usize)>)> {
    let nt = mesh.triangle_count();
    // an edge is marked for bisection iff it appears in this set
    let mut marked: HashMap<(usize, usize), bool> = HashMap::new();
    let edge_key = |a: usize, b: usize| (a.min(b), a.max(b));

    if radius > 0.0 {
        for t in 0..nt {
            let [a, b, c] = mesh.triangles()[t];
            let d = point_triangle_distance(
                center,
                mesh.vertices()[a],
                mesh.vertices()[b],
                mesh.vertices()[c],
            );
            if d < radius {
                for e in 0..3 {
                    let tri = mesh.triangles()[t];
                    marked.insert(edge_key(tri[e], tri[(e + 1) % 3]), true);
                }
            }
        }
    }
    if marked.is_empty() {
        return Ok((mesh.clone(), Vec::new()));
    }

    // closure: two marked edges promote the third
    loop {
        let mut changed = false;
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let keys = [
                edge_key(tri[0], tri[1]),
                edge_key(tri[1], tri[2]),
                edge_key(tri[2], tri[0]),
            ];
            let n_marked = keys.iter().filter(|k| marked.contains_key(k)).count();
            if n_marked == 2 {
                for k in keys {
                    if marked.insert(k, true).is_none() {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let edge_counts = mesh.edge_counts();
    let mut vertices = mesh.vertices().to_vec();
    let mut boundary = mesh.boundary_flags().to_vec();
    let mut parents: Vec<(usize, usize)> = Vec::new();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();

    // assign midpoint indices in triangle order for determinism
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        for e in 0..3 {
            let key = edge_key(tri[e], tri[(e + 1) % 3]);
            if marked.contains_key(&key) && !midpoint.contains_key(&key) {
                let mut m = (vertices[key.0] + vertices[key.1]) / 2.0;
                let on_boundary = edge_counts[&key] == 1;
                if on_boundary {
                    m = project_to_boundary(mesh.kind(), m);
                    debug_assert!(boundary_distance(mesh.kind(), m) <= BOUNDARY_TOL);
                }
                midpoint.insert(key, vertices.len());
                vertices.push(m);
                boundary.push(on_boundary);
                parents.push(key);
            }
        }
    }

    let mut triangles = Vec::with_capacity(nt * 2);
    for t in 0..nt {
        let [a, b, c] = mesh.triangles()[t];
        let mab = midpoint.get(&edge_key(a, b)).copied();
        let mbc = midpoint.get(&edge_key(b, c)).copied();
        let mca = midpoint.get(&edge_key(c, a)).copied();
        match (mab, mbc, mca) {
            (Some(ab), Some(bc), Some(ca)) => {
                triangles.push([a, ab, ca]);
                triangles.push([ab, b, bc]);
                triangles.push([ca, bc, c]);
                triangles.push([ab, bc, ca]);
            }
            (Some(ab), None, None) => {
                triangles.push([a, ab, c]);
                triangles.push([ab, b, c]);
            }
            (None, Some(bc), None) => {
                triangles.push([b, bc, a]);
                triangles.push([bc, c, a]);
            }
            (None, None, Some(ca)) => {
                triangles.push([c, ca, b]);
                triangles.push([ca, a, b]);
            }
            (None, None, None) => triangles.push([a, b, c]),
            _ => unreachable!("closure left a triangle with exactly two marked edges"),
        }
    }

    TriMesh::new(vertices, triangles, boundary, mesh.pinned_index(), mesh.kind())
        .map(|refined| (refined, parents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn zero_radius_leaves_mesh_unchanged() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let refined = refine(&mesh, Complex64::new(0.3, 0.0), 0.0).unwrap();
        assert_eq!(refined.vertex_count(), mesh.vertex_count());
        assert_eq!(refined.triangles(), mesh.triangles());
    }

    #[test]
    fn refined_region_quadruples_and_mesh_stays_valid() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let center = Complex64::new(0.3, 0.0);
        let refined = refine(&mesh, center, 0.25).unwrap();
        refined.validate().unwrap();
        assert!(refined.triangle_count() > mesh.triangle_count());
        // triangles well inside the ball got four times smaller
        let inner_area = |m: &TriMesh| -> f64 {
            (0..m.triangle_count())
                .filter(|&t| {
                    let [a, b, c] = m.triangles()[t];
                    let bary = (m.vertices()[a] + m.vertices()[b] + m.vertices()[c]) / 3.0;
                    (bary - center).norm() < 0.15
                })
                .map(|t| m.area(t))
                .fold(f64::INFINITY, f64::min)
        };
        let ratio = inner_area(&mesh) / inner_area(&refined);
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x smaller triangles, got ratio {ratio}"
        );
        // interior refinement keeps the polygon, hence the area
        assert!(
            (refined.total_area() - mesh.total_area()).abs() / mesh.total_area() < 1e-12
        );
    }

    #[test]
    fn pinned_vertex_survives_refinement() {
        let pin = Complex64::new(0.3, 0.0);
        let mesh = build_disk_mesh(0.2, 0.0, pin).unwrap();
        let refined = refine(&mesh, pin, 0.2).unwrap();
        let p = refined.pinned_index().unwrap();
        assert_eq!(refined.vertices()[p], pin);
    }

    #[test]
    fn boundary_midpoints_land_on_unit_circle() {
        let mesh = build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        let refined = refine(&mesh, Complex64::new(0.95, 0.0), 0.2).unwrap();
        refined.validate().unwrap();
        for (i, v) in refined.vertices().iter().enumerate() {
            if refined.is_boundary(i) {
                assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }
        assert!(refined.total_area() > mesh.total_area());
    }
}
