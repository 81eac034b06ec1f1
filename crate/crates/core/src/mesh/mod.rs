//! Conforming triangulations of the disk, rectangles and annuli.
//!
//! Meshes are deterministic concentric-ring constructions (no randomized
//! mesh generator): ring radii follow the grading law, adjacent rings are
//! stitched by an angular-merge zipper, and for an off-center pin the whole
//! ring structure is pushed through the disk automorphism carrying 0 to the
//! pin. That keeps the pin an exact vertex, keeps a vertex exactly at 0,
//! preserves triangle quality (the automorphism is conformal) and realizes
//! local edge length ≈ target_edge_length · dist^grading_exponent near the
//! pin.

mod build;
mod io;
mod refine;

pub use build::{build_annulus_mesh, build_disk_mesh, build_rectangle_mesh};
pub use io::{load_mesh, save_mesh};
pub use refine::{refine, refine_with_parents};

use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Geometry of the meshed domain; used for boundary validation and for
/// projecting refined boundary midpoints back onto the exact boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Disk,
    Rectangle { width: f64, height: f64 },
    Annulus { r_inner: f64, r_outer: f64 },
}

/// Distance from a point to the exact domain boundary.
fn boundary_distance(kind: DomainKind, v: Complex64) -> f64 {
    match kind {
        DomainKind::Disk => (v.norm() - 1.0).abs(),
        DomainKind::Rectangle { width, height } => {
            let d_left = v.re.abs();
            let d_right = (width - v.re).abs();
            let d_bottom = v.im.abs();
            let d_top = (height - v.im).abs();
            d_left.min(d_right).min(d_bottom).min(d_top)
        }
        DomainKind::Annulus { r_inner, r_outer } => {
            let r = v.norm();
            (r - r_inner).abs().min((r - r_outer).abs())
        }
    }
}

/// Geometric tolerance for "lies on the domain boundary".
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Two vertices closer than this are considered duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;
/// Minimum interior angle the generators must deliver, in degrees.
pub const MIN_ANGLE_DEG: f64 = 15.0;

/// Immutable conforming triangle mesh with boundary flags and an optional
/// pinned vertex. Signed areas are cached at construction; triangles are
/// CCW by invariant.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    pinned: Option<usize>,
    kind: DomainKind,
    areas: Vec<f64>,
    total_area: f64,
    /// vertex -> list of (triangle index, corner slot of this vertex)
    incidence: Vec<Vec<(usize, usize)>>,
}

/// Signed area of the triangle (a, b, c); positive for CCW.
pub fn signed_area(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    0.5 * ((b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re))
}

impl TriMesh {
    /// Build a mesh from raw arrays, validating orientation, index ranges
    /// and flag consistency. The full invariant battery (manifoldness,
    /// connectivity, duplicates, boundary geometry) lives in [`TriMesh::validate`].
    pub fn new(
        vertices: Vec<Complex64>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        pinned: Option<usize>,
        kind: DomainKind,
    ) -> Result<Self> {
        if vertices.len() != boundary.len() {
            return Err(Error::MeshInvariant(format!(
                "boundary flag count {} != vertex count {}",
                boundary.len(),
                vertices.len()
            )));
        }
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::MeshInvariant("empty mesh".into()));
        }
        if let Some(p) = pinned {
            if p >= vertices.len() {
                return Err(Error::MeshInvariant(format!("pinned index {p} out of range")));
            }
        }
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(Error::MeshInvariant(format!(
                        "triangle {t} refers to vertex {i} out of range"
                    )));
                }
            }
            let [a, b, c] = *tri;
            let area = signed_area(vertices[a], vertices[b], vertices[c]);
            let longest = (vertices[b] - vertices[a])
                .norm()
                .max((vertices[c] - vertices[b]).norm())
                .max((vertices[a] - vertices[c]).norm());
            if area <= 1e-14 * longest * longest {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
            areas.push(area);
        }
        let total_area = crate::sum::pairwise_sum(&areas);
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for (slot, &i) in tri.iter().enumerate() {
                incidence[i].push((t, slot));
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
            boundary,
            pinned,
            kind,
            areas,
            total_area,
            incidence,
        })
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn pinned_index(&self) -> Option<usize> {
        self.pinned
    }

    /// Domain location of the pinned vertex, if any.
    pub fn pin_location(&self) -> Option<Complex64> {
        self.pinned.map(|i| self.vertices[i])
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Cached positive signed area of triangle `t`.
    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Total polygonal area; the normalization constant of the energies.
    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Triangles incident to each vertex, as (triangle, corner slot) pairs.
    pub fn incidence(&self) -> &[Vec<(usize, usize)>] {
        &self.incidence
    }

    /// Undirected edge -> incident triangle count.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Full invariant battery: CCW orientation (already enforced at
    /// construction), edge-manifoldness, connectivity, duplicate vertices,
    /// boundary flag/geometry consistency and pin exactness.
    pub fn validate(&self) -> Result<()> {
        let counts = self.edge_counts();
        for (&(a, b), &c) in &counts {
            if c > 2 {
                return Err(Error::MeshInvariant(format!(
                    "edge ({a},{b}) shared by {c} triangles"
                )));
            }
            if c == 1 && !(self.boundary[a] && self.boundary[b]) {
                return Err(Error::MeshInvariant(format!(
                    "boundary edge ({a},{b}) has an unflagged endpoint"
                )));
            }
        }

        // every flagged vertex lies on the exact domain boundary
        for (i, v) in self.vertices.iter().enumerate() {
            if self.boundary[i] && boundary_distance(self.kind, *v) > BOUNDARY_TOL {
                return Err(Error::MeshInvariant(format!(
                    "vertex {i} flagged boundary but {:.3e} away from it",
                    boundary_distance(self.kind, *v)
                )));
            }
        }

        // no duplicate vertices: sort by x then scan a window
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&i, &j| {
            self.vertices[i]
                .re
                .partial_cmp(&self.vertices[j].re)
                .unwrap()
                .then(self.vertices[i].im.partial_cmp(&self.vertices[j].im).unwrap())
        });
        for w in 0..order.len() {
            for u in (w + 1)..order.len() {
                let (i, j) = (order[w], order[u]);
                if self.vertices[j].re - self.vertices[i].re > DUPLICATE_TOL {
                    break;
                }
                if (self.vertices[i] - self.vertices[j]).norm() <= DUPLICATE_TOL {
                    return Err(Error::MeshInvariant(format!(
                        "vertices {i} and {j} coincide"
                    )));
                }
            }
        }

        // connectivity over the vertex adjacency graph
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(t, _) in &self.incidence[v] {
                for &u in &self.triangles[t] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::MeshInvariant("mesh is not connected".into()));
        }

        // isolated vertices
        if self.incidence.iter().any(|inc| inc.is_empty()) {
            return Err(Error::MeshInvariant("isolated vertex".into()));
        }
        Ok(())
    }

    /// Angles of triangle `t` in radians, one per corner slot.
    pub fn triangle_angles(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (va, vb, vc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let angle = |p: Complex64, q: Complex64, r: Complex64| -> f64 {
            let u = q - p;
            let v = r - p;
            let dot = u.re * v.re + u.im * v.im;
            let cross = u.re * v.im - u.im * v.re;
            cross.atan2(dot).abs()
        };
        [angle(va, vb, vc), angle(vb, vc, va), angle(vc, va, vb)]
    }
}

/// Summary quality report for a mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshStatistics {
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub boundary_vertex_count: usize,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub min_edge_length: f64,
    pub max_edge_length: f64,
    pub total_area: f64,
}

/// Compute angle/edge/area statistics of a mesh.
pub fn mesh_statistics(mesh: &TriMesh) -> MeshStatistics {
    let mut min_angle = f64::INFINITY;
    let mut max_angle: f64 = 0.0;
    let mut min_edge = f64::INFINITY;
    let mut max_edge: f64 = 0.0;
    for t in 0..mesh.triangle_count() {
        for a in mesh.triangle_angles(t) {
            min_angle = min_angle.min(a);
            max_angle = max_angle.max(a);
        }
        let [a, b, c] = mesh.triangles[t];
        for (i, j) in [(a, b), (b, c), (c, a)] {
            let len = (mesh.vertices[i] - mesh.vertices[j]).norm();
            min_edge = min_edge.min(len);
            max_edge = max_edge.max(len);
        }
    }
    MeshStatistics {
        vertex_count: mesh.vertex_count(),
        triangle_count: mesh.triangle_count(),
        boundary_vertex_count: mesh.boundary.iter().filter(|&&b| b).count(),
        min_angle_deg: min_angle.to_degrees(),
        max_angle_deg: max_angle.to_degrees(),
        min_edge_length: min_edge,
        max_edge_length: max_edge,
        total_area: mesh.total_area,
    }
}
