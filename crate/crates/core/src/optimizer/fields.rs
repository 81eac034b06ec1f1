//! Smooth compactly supported vector fields used to probe stationarity.
//!
//! An inner variation replaces a candidate map f by f ∘ (id + ε φ)⁻¹ for a
//! vector field φ vanishing on the boundary and near the pinned point. At a
//! minimizer of the distortion energy the derivative in ε vanishes for every
//! admissible φ, which in Wirtinger form reads
//!
//!   2p ∫ 𝕂ᵖ (f_z conj(f_z̄) / (|f_z|² + |f_z̄|²)) φ_z̄ dA  =  ∫ 𝕂ᵖ φ_z dA.
//!
//! The quotient is the Beltrami coefficient folded against |Df|², written so
//! that triangles with vanishing derivative contribute zero instead of 0/0.

use num_complex::Complex64;

use crate::calculus::{distortion, field, wirtinger_tri, PLMap};
use crate::mesh::TriMesh;
use crate::sum::pairwise_sum_complex;
use crate::{Error, Result};

/// Radius of the disk around the pinned vertex on which test fields are
/// required to vanish identically.
pub const PIN_EXCLUSION_RADIUS: f64 = 0.05;

/// A piecewise linear vector field sampled at mesh vertices.
#[derive(Debug, Clone)]
pub struct TestField {
    pub name: String,
    pub values: Vec<Complex64>,
}

impl TestField {
    /// Checks admissibility on the given mesh: exact zeros on every boundary
    /// vertex and on every vertex within [`PIN_EXCLUSION_RADIUS`] of the pin.
    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if self.values.len() != mesh.vertex_count() {
            return Err(Error::InvalidTestField(format!(
                "field {} has {} samples for a mesh with {} vertices",
                self.name,
                self.values.len(),
                mesh.vertex_count()
            )));
        }
        for (i, v) in mesh.vertices().iter().enumerate() {
            let phi = self.values[i];
            if mesh.is_boundary(i) && phi != Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidTestField(format!(
                    "field {} is nonzero at boundary vertex {}",
                    self.name, i
                )));
            }
            if let Some(pin) = mesh.pin_location() {
                if (v - pin).norm() < PIN_EXCLUSION_RADIUS && phi != Complex64::new(0.0, 0.0) {
                    return Err(Error::InvalidTestField(format!(
                        "field {} is nonzero at vertex {} near the pin",
                        self.name, i
                    )));
                }
            }
        }
        Ok(())
    }
}

/// C^∞ bump profile: exp(1 - 1/(1-u²)) on [0,1), identically zero outside,
/// normalized to 1 at the center.
fn bump(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

enum Direction {
    Constant(Complex64),
    Radial,
    Rotational,
}

fn sample_bump_field(
    mesh: &TriMesh,
    name: &str,
    center: Complex64,
    radius: f64,
    direction: Direction,
) -> TestField {
    let values = mesh
        .vertices()
        .iter()
        .map(|&z| {
            let offset = z - center;
            let amp = bump(offset.norm() / radius);
            if amp == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let dir = match direction {
                Direction::Constant(c) => c,
                Direction::Radial => offset,
                Direction::Rotational => Complex64::i() * offset,
            };
            amp * dir
        })
        .collect();
    TestField {
        name: name.to_string(),
        values,
    }
}

/// The fixed bank of five bump fields used throughout the verification
/// suite. Supports stay inside the unit disk and clear both the origin and
/// the point 0.3 by more than [`PIN_EXCLUSION_RADIUS`], so the same bank is
/// admissible on either side of the problem for pins on the segment [0, 0.3].
pub fn standard_test_fields(mesh: &TriMesh) -> Result<Vec<TestField>> {
    let specs: [(&str, Complex64, f64, Direction); 5] = [
        (
            "bump_left_const",
            Complex64::new(-0.40, 0.0),
            0.28,
            Direction::Constant(Complex64::new(1.0, 0.0)),
        ),
        (
            "bump_top_const",
            Complex64::new(0.0, 0.45),
            0.28,
            Direction::Constant(Complex64::i()),
        ),
        (
            "bump_right_const",
            Complex64::new(0.62, 0.0),
            0.22,
            Direction::Constant(Complex64::new(1.0, 0.0)),
        ),
        (
            "bump_bottom_radial",
            Complex64::new(0.0, -0.45),
            0.28,
            Direction::Radial,
        ),
        (
            "bump_corner_rot",
            Complex64::new(0.3, -0.45),
            0.28,
            Direction::Rotational,
        ),
    ];
    let fields: Vec<TestField> = specs
        .into_iter()
        .map(|(name, center, radius, dir)| sample_bump_field(mesh, name, center, radius, dir))
        .collect();
    for field in &fields {
        field.validate(mesh)?;
    }
    Ok(fields)
}

/// Inner-variation residual of `map` against one test field, for the power-p
/// distortion energy. Zero (to discretization error) at interior critical
/// points; identically zero for the identity map because both sides reduce
/// to area-weighted sums of φ_z over the mesh.
pub fn inner_variation_residual(map: &PLMap, p: f64, test_field: &TestField) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inner variation requires finite p >= 1, got {p}"
        )));
    }
    let mesh = map.mesh();
    test_field.validate(mesh)?;

    let derivatives = field(map);
    let mut terms = Vec::with_capacity(mesh.triangle_count());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let zs = [
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        ];
        let phis = [
            test_field.values[tri[0]],
            test_field.values[tri[1]],
            test_field.values[tri[2]],
        ];
        let (phi_z, phi_zbar) = wirtinger_tri(zs, phis)?;
        let fz = derivatives.fz()[t];
        let fzbar = derivatives.fzbar()[t];
        let s = fz.norm_sqr();
        let tt = fzbar.norm_sqr();
        let ik = distortion(fz, fzbar);
        if !ik.is_finite() {
            return Err(Error::MapInvariant(format!(
                "inner variation evaluated on an orientation-reversing map (triangle {t})"
            )));
        }
        let weight = mesh.areas()[t] * ik.powf(p);
        let beltrami_term = if s + tt > 0.0 {
            fz * fzbar.conj() / (s + tt)
        } else {
            Complex64::new(0.0, 0.0)
        };
        terms.push(weight * (2.0 * p * beltrami_term * phi_zbar - phi_z));
    }
    Ok(pairwise_sum_complex(&terms).norm())
}

/// Residuals of `map` against every field in the bank, in bank order.
pub fn inner_variation_residuals(map: &PLMap, p: f64, fields: &[TestField]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|field| inner_variation_residual(map, p, field))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use std::sync::Arc;

    #[test]
    fn bank_is_admissible_on_both_sides() {
        for pin in [Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0)] {
            let mesh = Arc::new(build_disk_mesh(0.15, 0.0, pin).unwrap());
            let fields = standard_test_fields(&mesh).unwrap();
            assert_eq!(fields.len(), 5);
            for field in &fields {
                assert!(field.values.iter().any(|v| v.norm() > 0.0), "{}", field.name);
            }
        }
    }

    #[test]
    fn boundary_violation_is_rejected() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let mut values = vec![Complex64::new(0.0, 0.0); mesh.vertex_count()];
        let boundary = (0..mesh.vertex_count())
            .find(|&i| mesh.is_boundary(i))
            .unwrap();
        values[boundary] = Complex64::new(0.1, 0.0);
        let field = TestField {
            name: "bad".into(),
            values,
        };
        assert!(matches!(
            field.validate(&mesh),
            Err(Error::InvalidTestField(_))
        ));
    }

    #[test]
    fn pin_neighborhood_violation_is_rejected() {
        let mesh = Arc::new(build_disk_mesh(0.1, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let mut values = vec![Complex64::new(0.0, 0.0); mesh.vertex_count()];
        values[mesh.pinned_index().unwrap()] = Complex64::new(0.0, 0.01);
        let field = TestField {
            name: "bad".into(),
            values,
        };
        assert!(matches!(
            field.validate(&mesh),
            Err(Error::InvalidTestField(_))
        ));
    }

    #[test]
    fn identity_residuals_vanish() {
        let mesh = Arc::new(build_disk_mesh(0.12, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = PLMap::identity(Arc::clone(&mesh));
        let fields = standard_test_fields(&mesh).unwrap();
        for field in &fields {
            let r = inner_variation_residual(&map, 2.0, field).unwrap();
            assert!(r <= 1e-13, "{}: residual {r}", field.name);
        }
    }

    #[test]
    fn distorted_map_has_visible_residual() {
        let mesh = Arc::new(build_disk_mesh(0.12, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = crate::oracle::random_feasible_map(Arc::clone(&mesh), 7, 0.25).unwrap();
        let fields = standard_test_fields(&mesh).unwrap();
        let residuals = inner_variation_residuals(&map, 2.0, &fields).unwrap();
        assert!(residuals.iter().any(|&r| r > 1e-6), "{residuals:?}");
    }
}
