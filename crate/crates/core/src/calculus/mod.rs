//! Wirtinger calculus for piecewise-affine maps.
//!
//! A map is affine on each triangle, so its complex derivatives f_z, f_z̄
//! are constant there: with domain edges dz1 = z2−z1, dz2 = z3−z1, image
//! edges dw1, dw2 and D = dz1·conj(dz2) − dz2·conj(dz1) = −4i·area,
//!
//!   f_z  = (dw1·conj(dz2) − dw2·conj(dz1)) / D,
//!   f_z̄ = (dz1·dw2 − dz2·dw1) / D.
//!
//! Both are complex-linear in the image positions, which is what makes the
//! energy gradients exact. Distortion follows the convention
//! IK = (|f_z|²+|f_z̄|²)/(|f_z|²−|f_z̄|²) for positive Jacobian, IK = 1 at
//! a vanishing derivative, and +∞ (the barrier) on orientation-reversed
//! triangles.

mod io;

pub use io::{load_map, save_map};

use crate::mesh::TriMesh;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Boundary behavior of a [`PLMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// Every boundary vertex maps to its domain position, bitwise.
    Identity,
    /// Boundary vertex i maps to the i-th entry (interior entries unused).
    Prescribed(Vec<Complex64>),
}

/// Piecewise-affine map: one image position per mesh vertex, with its
/// boundary condition and optional pin target validated at construction.
#[derive(Debug, Clone)]
pub struct PLMap {
    mesh: Arc<TriMesh>,
    images: Vec<Complex64>,
    boundary_condition: BoundaryCondition,
    pin_target: Option<Complex64>,
}

impl PLMap {
    pub fn new(
        mesh: Arc<TriMesh>,
        images: Vec<Complex64>,
        boundary_condition: BoundaryCondition,
        pin_target: Option<Complex64>,
    ) -> Result<Self> {
        if images.len() != mesh.vertex_count() {
            return Err(Error::MapInvariant(format!(
                "{} images for {} vertices",
                images.len(),
                mesh.vertex_count()
            )));
        }
        match &boundary_condition {
            BoundaryCondition::Identity => {
                for (i, v) in mesh.vertices().iter().enumerate() {
                    if mesh.is_boundary(i) && images[i] != *v {
                        return Err(Error::MapInvariant(format!(
                            "identity boundary condition violated at vertex {i}: {} != {v}",
                            images[i]
                        )));
                    }
                }
            }
            BoundaryCondition::Prescribed(values) => {
                if values.len() != mesh.vertex_count() {
                    return Err(Error::MapInvariant(format!(
                        "{} prescribed boundary values for {} vertices",
                        values.len(),
                        mesh.vertex_count()
                    )));
                }
                for i in 0..mesh.vertex_count() {
                    if mesh.is_boundary(i) && images[i] != values[i] {
                        return Err(Error::MapInvariant(format!(
                            "prescribed boundary condition violated at vertex {i}"
                        )));
                    }
                }
            }
        }
        if let Some(target) = pin_target {
            match mesh.pinned_index() {
                Some(p) => {
                    if images[p] != target {
                        return Err(Error::MapInvariant(format!(
                            "pinned vertex {p} maps to {} instead of {target}",
                            images[p]
                        )));
                    }
                }
                None => {
                    return Err(Error::MapInvariant(
                        "pin target set but the mesh has no pinned vertex".into(),
                    ))
                }
            }
        }
        Ok(PLMap {
            mesh,
            images,
            boundary_condition,
            pin_target,
        })
    }

    /// The identity map on `mesh`.
    pub fn identity(mesh: Arc<TriMesh>) -> Self {
        let images = mesh.vertices().to_vec();
        PLMap {
            mesh,
            images,
            boundary_condition: BoundaryCondition::Identity,
            pin_target: None,
        }
    }

    /// Same constraints, new interior images; boundary and pin entries must
    /// still satisfy the invariants.
    pub fn with_images(&self, images: Vec<Complex64>) -> Result<Self> {
        PLMap::new(
            self.mesh.clone(),
            images,
            self.boundary_condition.clone(),
            self.pin_target,
        )
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<TriMesh> {
        self.mesh.clone()
    }

    pub fn images(&self) -> &[Complex64] {
        &self.images
    }

    pub fn image(&self, v: usize) -> Complex64 {
        self.images[v]
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.boundary_condition
    }

    pub fn pin_target(&self) -> Option<Complex64> {
        self.pin_target
    }

    /// Vertices the optimizer may move: neither boundary nor pinned.
    pub fn is_free(&self, v: usize) -> bool {
        !self.mesh.is_boundary(v) && self.mesh.pinned_index() != Some(v)
    }

    /// Largest |f(z) - z| over vertices.
    pub fn max_displacement(&self) -> f64 {
        self.images
            .iter()
            .zip(self.mesh.vertices())
            .map(|(w, z)| (w - z).norm())
            .fold(0.0, f64::max)
    }
}

/// Wirtinger derivatives of the affine map taking triangle (z1,z2,z3) to
/// (w1,w2,w3). Errors on a degenerate domain triangle.
pub fn wirtinger_tri(
    z: [Complex64; 3],
    w: [Complex64; 3],
) -> Result<(Complex64, Complex64)> {
    let dz1 = z[1] - z[0];
    let dz2 = z[2] - z[0];
    let d = dz1 * dz2.conj() - dz2 * dz1.conj();
    if d.norm() == 0.0 {
        return Err(Error::DegenerateTriangle {
            index: 0,
            area: 0.0,
        });
    }
    let dw1 = w[1] - w[0];
    let dw2 = w[2] - w[0];
    let fz = (dw1 * dz2.conj() - dw2 * dz1.conj()) / d;
    let fzbar = (dz1 * dw2 - dz2 * dw1) / d;
    Ok((fz, fzbar))
}

/// Wirtinger derivatives of `map` on triangle `t`. The mesh construction
/// invariant rules out degenerate domain triangles, so this cannot fail.
pub fn wirtinger(map: &PLMap, t: usize) -> (Complex64, Complex64) {
    let [a, b, c] = map.mesh().triangles()[t];
    let z = map.mesh().vertices();
    wirtinger_tri(
        [z[a], z[b], z[c]],
        [map.images[a], map.images[b], map.images[c]],
    )
    .expect("mesh invariant: nondegenerate triangles")
}

/// Gradients of (f_z, f_z̄) of triangle `t` with respect to the three image
/// positions: f_z = Σ cᵢ wᵢ and f_z̄ = Σ dᵢ wᵢ with the returned (c, d).
pub fn derivative_coefficients(
    mesh: &TriMesh,
    t: usize,
) -> ([Complex64; 3], [Complex64; 3]) {
    let [a, b, c] = mesh.triangles()[t];
    let z = mesh.vertices();
    let dz1 = z[b] - z[a];
    let dz2 = z[c] - z[a];
    let d = dz1 * dz2.conj() - dz2 * dz1.conj();
    let cs = [
        (dz1.conj() - dz2.conj()) / d,
        dz2.conj() / d,
        -dz1.conj() / d,
    ];
    let ds = [(dz2 - dz1) / d, -dz2 / d, dz1 / d];
    (cs, ds)
}

/// Distortion IK from the raw derivatives; total by the barrier policy:
/// +∞ on orientation-reversed or collapsed (J ≤ 0, nonzero derivative)
/// triangles, 1 at a vanishing derivative.
pub fn distortion(fz: Complex64, fzbar: Complex64) -> f64 {
    let s = fz.norm_sqr();
    let t = fzbar.norm_sqr();
    if s == 0.0 && t == 0.0 {
        return 1.0;
    }
    let j = s - t;
    if j > 0.0 {
        (s + t) / j
    } else {
        f64::INFINITY
    }
}

/// Beltrami coefficient μ = f_z̄ / f_z.
pub fn beltrami(fz: Complex64, fzbar: Complex64) -> Result<Complex64> {
    if fz.norm() == 0.0 {
        return Err(Error::UndefinedBeltrami { fzbar });
    }
    Ok(fzbar / fz)
}

/// Per-triangle derivative data of a map, assembled in parallel with
/// deterministic ordering.
#[derive(Debug, Clone)]
pub struct WirtingerField {
    fz: Vec<Complex64>,
    fzbar: Vec<Complex64>,
    jacobian: Vec<f64>,
    distortion: Vec<f64>,
}

impl WirtingerField {
    pub fn fz(&self) -> &[Complex64] {
        &self.fz
    }

    pub fn fzbar(&self) -> &[Complex64] {
        &self.fzbar
    }

    /// J = |f_z|² − |f_z̄|² per triangle.
    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    pub fn distortion(&self) -> &[f64] {
        &self.distortion
    }

    /// μ on triangle `t`; error where f_z = 0.
    pub fn beltrami(&self, t: usize) -> Result<Complex64> {
        beltrami(self.fz[t], self.fzbar[t])
    }

    pub fn min_jacobian(&self) -> f64 {
        self.jacobian.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// True when J > 0 on every triangle.
    pub fn orientation_preserving(&self) -> bool {
        self.jacobian.iter().all(|&j| j > 0.0)
    }

    pub fn max_distortion(&self) -> f64 {
        self.distortion.iter().cloned().fold(1.0, f64::max)
    }
}

/// Assemble the full Wirtinger field of a map.
pub fn field(map: &PLMap) -> WirtingerField {
    let nt = map.mesh().triangle_count();
    let per: Vec<(Complex64, Complex64)> =
        (0..nt).into_par_iter().map(|t| wirtinger(map, t)).collect();
    let fz: Vec<Complex64> = per.iter().map(|p| p.0).collect();
    let fzbar: Vec<Complex64> = per.iter().map(|p| p.1).collect();
    let jacobian: Vec<f64> = per
        .iter()
        .map(|p| p.0.norm_sqr() - p.1.norm_sqr())
        .collect();
    let distortion: Vec<f64> = per.iter().map(|p| distortion(p.0, p.1)).collect();
    WirtingerField {
        fz,
        fzbar,
        jacobian,
        distortion,
    }
}
