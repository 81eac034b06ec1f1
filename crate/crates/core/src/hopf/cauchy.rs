//! Cauchy transform of a piecewise-constant density.
//!
//! For a density ρ constant on each triangle the transform
//!
//! ```text
//!     F(v) = -(1/π) ∫ ρ(ζ) / (ζ - v) dA(ζ)
//! ```
//!
//! solves ∂F/∂v̄ = ρ inside the meshed region. Far triangles use the
//! centroid rule; triangles near or containing the evaluation point use
//! the exact integral, assembled as a fan of vertex-based pieces
//!
//! ```text
//!     ∫_(0,P,Q) dA/ζ = Im(conj(P) Q) · Log(Q/P) / (Q - P)
//! ```
//!
//! over the directed edges, which stays valid (with signed cancellation)
//! when the point lies outside the triangle.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calculus::wirtinger_tri;
use crate::mesh::TriMesh;
use crate::sum::pairwise_sum_complex;
use crate::{Error, Result};

/// Barycenter distance, in triangle diameters, past which the centroid
/// rule replaces the exact kernel.
const NEAR_FACTOR: f64 = 2.5;

/// ∫_T dA(ζ)/(ζ - v), exact. Edges incident to v contribute nothing and
/// are skipped, which also makes the formula safe at mesh vertices.
fn triangle_kernel(corners: [Complex64; 3], v: Complex64) -> Complex64 {
    let mut kernel = Complex64::new(0.0, 0.0);
    for e in 0..3 {
        let a = corners[e] - v;
        let b = corners[(e + 1) % 3] - v;
        if a.norm_sqr() == 0.0 || b.norm_sqr() == 0.0 {
            continue;
        }
        let cross = (a.conj() * b).im;
        if cross == 0.0 {
            continue;
        }
        kernel += cross * (b / a).ln() / (b - a);
    }
    kernel
}

/// Evaluates the Cauchy transform of the per-triangle `density` at each
/// of `points`.
pub fn cauchy_transform(
    mesh: &TriMesh,
    density: &[Complex64],
    points: &[Complex64],
) -> Result<Vec<Complex64>> {
    if density.len() != mesh.triangle_count() {
        return Err(Error::InvalidParameter(format!(
            "{} density values for {} triangles",
            density.len(),
            mesh.triangle_count()
        )));
    }
    let z = mesh.vertices();
    let corners: Vec<[Complex64; 3]> = mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| [z[a], z[b], z[c]])
        .collect();
    let barycenters: Vec<Complex64> =
        corners.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
    let diameters: Vec<f64> = corners
        .iter()
        .map(|c| {
            (c[1] - c[0])
                .norm()
                .max((c[2] - c[1]).norm())
                .max((c[0] - c[2]).norm())
        })
        .collect();

    Ok(points
        .par_iter()
        .map(|&v| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..corners.len() {
                let kernel = if (barycenters[t] - v).norm() <= NEAR_FACTOR * diameters[t] {
                    triangle_kernel(corners[t], v)
                } else {
                    mesh.area(t) / (barycenters[t] - v)
                };
                acc += density[t] * kernel;
            }
            -acc / std::f64::consts::PI
        })
        .collect())
}

/// Cauchy transform of the distortion excess IK^p - 1 of a map, at every
/// mesh vertex: the potential F with ∂F/∂v̄ = IK^p - 1 up to quadrature.
/// Identically zero for conformal maps.
pub fn distortion_excess_transform(map: &crate::calculus::PLMap, p: f64) -> Result<Vec<Complex64>> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "distortion exponent {p} must be finite and ≥ 1"
        )));
    }
    let mesh = map.mesh();
    let f = crate::calculus::field(map);
    let mut density = Vec::with_capacity(mesh.triangle_count());
    for (t, &ik) in f.distortion().iter().enumerate() {
        if !ik.is_finite() {
            return Err(Error::MapInvariant(format!(
                "unbounded distortion on triangle {t}"
            )));
        }
        density.push(Complex64::new(ik.powf(p) - 1.0, 0.0));
    }
    cauchy_transform(mesh, &density, mesh.vertices())
}

/// |Σ_T A_T (F_z φ_z̄ - F_z̄ φ_z)| for vertex data F and a test field φ
/// vanishing on the boundary; the continuum integral is zero for any F,
/// so the residual measures how far the sampled F is from a consistent
/// potential.
pub fn symmetric_derivative_residual(
    mesh: &TriMesh,
    potential: &[Complex64],
    test_values: &[Complex64],
) -> Result<f64> {
    for (name, data) in [("potential", potential), ("test field", test_values)] {
        if data.len() != mesh.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "{} has {} values for {} vertices",
                name,
                data.len(),
                mesh.vertex_count()
            )));
        }
    }
    let z = mesh.vertices();
    let terms: Vec<Complex64> = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, &[a, b, c])| {
            let corners = [z[a], z[b], z[c]];
            let (f_z, f_zbar) =
                wirtinger_tri(corners, [potential[a], potential[b], potential[c]])
                    .expect("mesh invariant: nondegenerate triangles");
            let (phi_z, phi_zbar) =
                wirtinger_tri(corners, [test_values[a], test_values[b], test_values[c]])
                    .expect("mesh invariant: nondegenerate triangles");
            mesh.area(t) * (f_z * phi_zbar - f_zbar * phi_z)
        })
        .collect();
    Ok(pairwise_sum_complex(&terms).norm())
}
