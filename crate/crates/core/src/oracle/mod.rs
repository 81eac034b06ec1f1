//! Closed-form reference maps, reference problems and independent oracles.
//!
//! Everything here has an answer known in closed form or computable by a
//! method independent of the main solver: reference maps with exact
//! derivatives and distortion, the Grötzsch problem whose minimizer is the
//! affine stretch (polyconvexity), a mutually inverse PL pair realizing the
//! change-of-variables identity exactly, finite-difference gradients, and
//! seeded random feasible maps for property tests. The calibration battery
//! measures these against the calculus/energy modules and is what numeric
//! tolerances elsewhere are justified by.

use crate::calculus::{field, BoundaryCondition, PLMap};
use crate::energy::{energy, FunctionalKind};
use crate::mesh::{build_rectangle_mesh, TriMesh};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Maps with closed-form value, derivatives and distortion everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMap {
    Identity,
    /// x + iy ↦ a·x + iy, a > 0.
    AffineStretch(f64),
    /// z ↦ |z|^{α−1}·z, α ≥ 1.
    RadialStretch(f64),
    /// Disk automorphism z ↦ (z + t)/(1 + conj(t)·z), |t| < 1.
    MobiusTranslate(Complex64),
    /// z ↦ z + ε·z̄, |ε| < 1.
    ConjugatePerturbation(f64),
}

impl ReferenceMap {
    /// Closed-form (image, f_z, f_z̄, IK) at a point. RadialStretch at 0
    /// returns the continuous limit (0 derivative, IK by limit).
    pub fn evaluate(&self, z: Complex64) -> (Complex64, Complex64, Complex64, f64) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            ReferenceMap::Identity => (z, one, zero, 1.0),
            ReferenceMap::AffineStretch(a) => (
                Complex64::new(a * z.re, z.im),
                Complex64::new((a + 1.0) / 2.0, 0.0),
                Complex64::new((a - 1.0) / 2.0, 0.0),
                (a * a + 1.0) / (2.0 * a),
            ),
            ReferenceMap::RadialStretch(alpha) => {
                let ik = (alpha * alpha + 1.0) / (2.0 * alpha);
                let r = z.norm();
                if r == 0.0 {
                    let scale = if alpha > 1.0 { 0.0 } else { 1.0 };
                    return (
                        zero,
                        Complex64::new(scale * (alpha + 1.0) / 2.0, 0.0),
                        Complex64::new(scale * (alpha - 1.0) / 2.0, 0.0),
                        ik,
                    );
                }
                let pow = r.powf(alpha - 1.0);
                let phase = (z / r) * (z / r);
                (
                    pow * z,
                    Complex64::new(pow * (alpha + 1.0) / 2.0, 0.0),
                    pow * (alpha - 1.0) / 2.0 * phase,
                    ik,
                )
            }
            ReferenceMap::MobiusTranslate(t) => {
                let denom = one + t.conj() * z;
                (
                    (z + t) / denom,
                    (one - Complex64::new(t.norm_sqr(), 0.0)) / (denom * denom),
                    zero,
                    1.0,
                )
            }
            ReferenceMap::ConjugatePerturbation(eps) => (
                z + eps * z.conj(),
                one,
                Complex64::new(eps, 0.0),
                (1.0 + eps * eps) / (1.0 - eps * eps),
            ),
        }
    }

    /// Exact energy of the map when its distortion is constant.
    pub fn constant_distortion(&self) -> Option<f64> {
        match *self {
            ReferenceMap::Identity | ReferenceMap::MobiusTranslate(_) => Some(1.0),
            ReferenceMap::AffineStretch(a) => Some((a * a + 1.0) / (2.0 * a)),
            ReferenceMap::RadialStretch(alpha) => Some((alpha * alpha + 1.0) / (2.0 * alpha)),
            ReferenceMap::ConjugatePerturbation(eps) => {
                Some((1.0 + eps * eps) / (1.0 - eps * eps))
            }
        }
    }
}

/// Vertex-sampled PL interpolant of a reference map. When every boundary
/// vertex moves by at most 1e-12 the boundary images are snapped to their
/// exact domain positions and the map carries the identity boundary
/// condition; otherwise the sampled values are recorded as prescribed.
pub fn sample_to_plmap(reference: ReferenceMap, mesh: Arc<TriMesh>) -> Result<PLMap> {
    let mut images: Vec<Complex64> = mesh
        .vertices()
        .iter()
        .map(|&z| reference.evaluate(z).0)
        .collect();
    let boundary_fixed = (0..mesh.vertex_count())
        .filter(|&i| mesh.is_boundary(i))
        .all(|i| (images[i] - mesh.vertices()[i]).norm() <= 1e-12);
    let bc = if boundary_fixed {
        for i in 0..mesh.vertex_count() {
            if mesh.is_boundary(i) {
                images[i] = mesh.vertices()[i];
            }
        }
        BoundaryCondition::Identity
    } else {
        BoundaryCondition::Prescribed(images.clone())
    };
    let pin_target = mesh.pinned_index().map(|p| images[p]);
    PLMap::new(mesh, images, bc, pin_target)
}

/// The Grötzsch stretching problem: map the unit square onto [0,a]×[0,1]
/// with the affine boundary correspondence. Polyconvexity makes the affine
/// stretch the exact discrete minimizer for every p ≥ 1, with energy
/// ((a²+1)/(2a))^p.
pub struct GrotzschProblem {
    pub mesh: Arc<TriMesh>,
    pub boundary_images: Vec<Complex64>,
    pub minimizer: PLMap,
    pub a: f64,
}

impl GrotzschProblem {
    pub fn exact_energy(&self, p: f64) -> f64 {
        ((self.a * self.a + 1.0) / (2.0 * self.a)).powf(p)
    }
}

pub fn grotzsch_problem(a: f64, target_edge_length: f64) -> Result<GrotzschProblem> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Grötzsch stretch factor {a} must be positive"
        )));
    }
    let mesh = Arc::new(build_rectangle_mesh(1.0, 1.0, target_edge_length)?);
    let images: Vec<Complex64> = mesh
        .vertices()
        .iter()
        .map(|z| Complex64::new(a * z.re, z.im))
        .collect();
    let minimizer = PLMap::new(
        mesh.clone(),
        images.clone(),
        BoundaryCondition::Prescribed(images.clone()),
        None,
    )?;
    Ok(GrotzschProblem {
        mesh,
        boundary_images: images,
        minimizer,
        a,
    })
}

/// A mutually inverse PL diffeomorphism pair (f, h): f is a seeded smooth
/// perturbation of the identity on `mesh`, h is its exact PL inverse living
/// on the image mesh (same triangles, image positions as vertices). The
/// pair realizes Σ area'·IK_h^p·J_h = Σ area·IK_f^p exactly, triangle by
/// triangle.
pub fn inverse_pair(mesh: Arc<TriMesh>, amplitude: f64, seed: u64) -> Result<(PLMap, PLMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c1 = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let c2 = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let smooth = |z: Complex64, amp: f64| -> Complex64 {
        let cut = 1.0 - z.norm_sqr();
        z + amp * cut * (c1 * z * z + c2 * z.conj() + Complex64::new(0.3, -0.2))
    };
    let mut amp = amplitude;
    for _ in 0..40 {
        let mut images: Vec<Complex64> = mesh
            .vertices()
            .iter()
            .map(|&z| smooth(z, amp))
            .collect();
        for i in 0..mesh.vertex_count() {
            if mesh.is_boundary(i) {
                images[i] = mesh.vertices()[i];
            }
        }
        if let Some(p) = mesh.pinned_index() {
            images[p] = mesh.vertices()[p];
        }
        let bc = BoundaryCondition::Identity;
        let pin_target = mesh.pinned_index().map(|p| images[p]);
        let forward = PLMap::new(mesh.clone(), images.clone(), bc, pin_target)?;
        if field(&forward).min_jacobian() > 0.0 {
            let image_mesh = Arc::new(TriMesh::new(
                images,
                mesh.triangles().to_vec(),
                mesh.boundary_flags().to_vec(),
                mesh.pinned_index(),
                mesh.kind(),
            )?);
            let h_images = mesh.vertices().to_vec();
            let h_pin = mesh.pinned_index().map(|p| h_images[p]);
            let inverse = PLMap::new(
                image_mesh,
                h_images,
                BoundaryCondition::Identity,
                h_pin,
            )?;
            return Ok((forward, inverse));
        }
        amp *= 0.5;
    }
    Err(Error::InfeasibleStart(format!(
        "no feasible perturbation below amplitude {amplitude}"
    )))
}

/// Central finite difference of the energy with respect to one vertex
/// image, as ∂E/∂x + i·∂E/∂y: directly comparable to the analytic
/// Wirtinger gradient 2·∂E/∂w̄.
pub fn fd_gradient(
    map: &PLMap,
    kind: FunctionalKind,
    vertex: usize,
    step: f64,
) -> Result<Complex64> {
    if !map.is_free(vertex) {
        return Err(Error::InvalidParameter(format!(
            "finite differences need a free vertex, {vertex} is boundary or pinned"
        )));
    }
    let probe = |dx: f64, dy: f64| -> Result<f64> {
        let mut images = map.images().to_vec();
        images[vertex] += Complex64::new(dx, dy);
        Ok(energy(&map.with_images(images)?, kind)?.value)
    };
    let ex = (probe(step, 0.0)? - probe(-step, 0.0)?) / (2.0 * step);
    let ey = (probe(0.0, step)? - probe(0.0, -step)?) / (2.0 * step);
    Ok(Complex64::new(ex, ey))
}

/// Seeded random interior perturbation of the identity, scaled per vertex
/// by its shortest incident edge and halved until orientation-preserving.
pub fn random_feasible_map(mesh: Arc<TriMesh>, seed: u64, amplitude: f64) -> Result<PLMap> {
    let mut local = vec![f64::INFINITY; mesh.vertex_count()];
    for tri in mesh.triangles() {
        for e in 0..3 {
            let (i, j) = (tri[e], tri[(e + 1) % 3]);
            let len = (mesh.vertices()[i] - mesh.vertices()[j]).norm();
            local[i] = local[i].min(len);
            local[j] = local[j].min(len);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Complex64> = (0..mesh.vertex_count())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut amp = amplitude;
    for _ in 0..40 {
        let images: Vec<Complex64> = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if mesh.is_boundary(i) || mesh.pinned_index() == Some(i) {
                    z
                } else {
                    z + amp * local[i] * offsets[i]
                }
            })
            .collect();
        let pin_target = mesh.pinned_index().map(|p| images[p]);
        let map = PLMap::new(
            mesh.clone(),
            images,
            BoundaryCondition::Identity,
            pin_target,
        )?;
        if field(&map).min_jacobian() > 0.0 {
            return Ok(map);
        }
        amp *= 0.5;
    }
    Err(Error::InfeasibleStart(format!(
        "random map stayed orientation-reversing down from amplitude {amplitude}"
    )))
}

/// Annulus stretching scenario: boundary data fixing the outer circle and
/// scaling the inner circle from radius `r_inner` to `s_inner`, with the
/// power-law radial map as the initial guess. A scenario generator only;
/// no optimality claim is attached.
pub fn nitsche_scenario(
    r_inner: f64,
    s_inner: f64,
    target_edge_length: f64,
) -> Result<(Arc<TriMesh>, PLMap)> {
    if !(0.0 < r_inner && r_inner < 1.0 && 0.0 < s_inner && s_inner < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "annulus radii ({r_inner} -> {s_inner}) must lie in (0, 1)"
        )));
    }
    let mesh = Arc::new(crate::mesh::build_annulus_mesh(
        r_inner,
        1.0,
        target_edge_length,
    )?);
    let beta = s_inner.ln() / r_inner.ln();
    let reference = ReferenceMap::RadialStretch(beta);
    let images: Vec<Complex64> = mesh
        .vertices()
        .iter()
        .map(|&z| reference.evaluate(z).0)
        .collect();
    let map = PLMap::new(
        mesh.clone(),
        images.clone(),
        BoundaryCondition::Prescribed(images),
        None,
    )?;
    Ok((mesh, map))
}

/// One measured-vs-expected line of the calibration battery.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CalibrationRow {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub(crate) fn row(name: &str, measured: f64, expected: f64, tolerance: f64) -> CalibrationRow {
    CalibrationRow {
        name: name.to_string(),
        measured,
        expected,
        tolerance,
        pass: (measured - expected).abs() <= tolerance,
    }
}

/// Closed-form calibration battery: sampled reference maps against their
/// exact distortion, exactness for affine kinds, first-order convergence
/// for smooth kinds, and the exact change-of-variables pair. Returns all
/// rows; errors if any row fails.
pub fn run_calibration() -> Result<Vec<CalibrationRow>> {
    let mut rows = Vec::new();
    let square = Arc::new(build_rectangle_mesh(1.0, 1.0, 0.1)?);
    let disk = Arc::new(crate::mesh::build_disk_mesh(
        0.1,
        0.0,
        Complex64::new(0.0, 0.0),
    )?);

    // affine kinds reproduce exactly
    for (name, reference) in [
        ("affine_stretch_2_ik", ReferenceMap::AffineStretch(2.0)),
        (
            "conjugate_perturbation_ik",
            ReferenceMap::ConjugatePerturbation(0.2),
        ),
    ] {
        let map = sample_to_plmap(reference, square.clone())?;
        let f = field(&map);
        let exact = reference.constant_distortion().unwrap();
        let err = f
            .distortion()
            .iter()
            .map(|ik| (ik - exact).abs())
            .fold(0.0, f64::max);
        rows.push(row(name, err, 0.0, 1e-12));
    }

    // smooth kinds converge at first order
    for (name, reference) in [
        ("radial_stretch_2", ReferenceMap::RadialStretch(2.0)),
        (
            "mobius_translate_03",
            ReferenceMap::MobiusTranslate(Complex64::new(0.3, 0.0)),
        ),
    ] {
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let mesh = Arc::new(crate::mesh::build_annulus_mesh(0.4, 1.0, h)?);
            let map = sample_to_plmap(reference, mesh)?;
            let f = field(&map);
            let err = mesh_max_ik_error(&f, reference);
            errs.push(err);
        }
        // one-sided: halving h must at least nearly halve the error, while
        // faster-than-linear decay also passes
        let ratio = errs[0] / errs[1].max(1e-300);
        rows.push(row(&format!("{name}_halving_ratio"), ratio.min(2.0), 2.0, 0.2));
    }

    // change of variables on the inverse pair is exact
    let (f_map, h_map) = inverse_pair(disk, 0.3, 11)?;
    let ef = energy(&f_map, FunctionalKind::Power(2.0))?;
    let eh = energy(&h_map, FunctionalKind::InversePower(2.0))?;
    rows.push(row(
        "inverse_pair_change_of_variables",
        (ef.unnormalized - eh.unnormalized).abs() / ef.unnormalized,
        0.0,
        1e-12,
    ));

    // Grötzsch energy of the affine minimizer matches the closed form
    let problem = grotzsch_problem(2.0, 0.1)?;
    let e = energy(&problem.minimizer, FunctionalKind::Power(2.0))?;
    rows.push(row(
        "grotzsch_affine_energy_p2",
        e.value,
        problem.exact_energy(2.0),
        1e-12,
    ));

    if rows.iter().all(|r| r.pass) {
        Ok(rows)
    } else {
        let failing: Vec<&str> = rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        Err(Error::Calibration(format!(
            "calibration rows failed: {}",
            failing.join(", ")
        )))
    }
}

fn mesh_max_ik_error(field: &crate::calculus::WirtingerField, reference: ReferenceMap) -> f64 {
    let exact = reference.constant_distortion().unwrap();
    field
        .distortion()
        .iter()
        .map(|ik| (ik - exact).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_power;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn reference_map_closed_forms() {
        let z = Complex64::new(0.5, 0.0);
        let (im, _, _, ik) = ReferenceMap::AffineStretch(2.0).evaluate(z);
        assert_eq!(im, Complex64::new(1.0, 0.0));
        assert!((ik - 1.25).abs() < 1e-15);

        let (im, _, fzbar, ik) =
            ReferenceMap::MobiusTranslate(Complex64::new(0.3, 0.0)).evaluate(Complex64::new(0.0, 0.0));
        assert_eq!(im, Complex64::new(0.3, 0.0));
        assert_eq!(fzbar, Complex64::new(0.0, 0.0));
        assert_eq!(ik, 1.0);

        let (im, _, _, ik) = ReferenceMap::RadialStretch(2.0).evaluate(z);
        assert!((im - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((ik - 1.25).abs() < 1e-15);

        let (im, fz, fzbar, _) = ReferenceMap::RadialStretch(2.0).evaluate(Complex64::new(0.0, 0.0));
        assert_eq!(im, Complex64::new(0.0, 0.0));
        assert_eq!(fz, Complex64::new(0.0, 0.0));
        assert_eq!(fzbar, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sampled_identity_and_radial_boundary_condition() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let id = sample_to_plmap(ReferenceMap::Identity, mesh.clone()).unwrap();
        assert_eq!(id.boundary_condition(), &BoundaryCondition::Identity);
        assert_eq!(id.images(), mesh.vertices());
        // |z|^{α−1}·z fixes the unit circle, so the boundary snaps to identity
        let radial = sample_to_plmap(ReferenceMap::RadialStretch(2.0), mesh.clone()).unwrap();
        assert_eq!(radial.boundary_condition(), &BoundaryCondition::Identity);
        // the Möbius translate moves the boundary: prescribed
        let mobius = sample_to_plmap(
            ReferenceMap::MobiusTranslate(Complex64::new(0.3, 0.0)),
            mesh,
        )
        .unwrap();
        assert!(matches!(
            mobius.boundary_condition(),
            BoundaryCondition::Prescribed(_)
        ));
    }

    #[test]
    fn grotzsch_energies() {
        let p1 = grotzsch_problem(1.0, 0.25).unwrap();
        assert!((energy_power(&p1.minimizer, 2.0).unwrap().value - 1.0).abs() < 1e-14);
        let p2 = grotzsch_problem(2.0, 0.25).unwrap();
        assert!((p2.exact_energy(2.0) - 25.0 / 16.0).abs() < 1e-15);
        assert!((p2.exact_energy(3.0) - 125.0 / 64.0).abs() < 1e-15);
        let e = energy_power(&p2.minimizer, 3.0).unwrap();
        assert!((e.value - 125.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_pair_change_of_variables_is_exact() {
        let mesh = Arc::new(build_disk_mesh(0.1, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let (f, h) = inverse_pair(mesh, 0.3, 7).unwrap();
        assert!(field(&f).min_jacobian() > 0.0);
        assert!(field(&h).min_jacobian() > 0.0);
        for p in [1.5, 2.0, 4.0] {
            let ef = energy(&f, FunctionalKind::Power(p)).unwrap();
            let eh = energy(&h, FunctionalKind::InversePower(p)).unwrap();
            assert!(
                (ef.unnormalized - eh.unnormalized).abs() <= 1e-12 * ef.unnormalized,
                "p = {p}: {} vs {}",
                ef.unnormalized,
                eh.unnormalized
            );
        }
    }

    #[test]
    fn fd_gradient_matches_analytic_gradient() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = random_feasible_map(mesh, 42, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let free: Vec<usize> = (0..map.mesh().vertex_count())
            .filter(|&i| map.is_free(i))
            .collect();
        for kind in [
            FunctionalKind::Power(2.0),
            FunctionalKind::Power(1.5),
            FunctionalKind::InversePower(2.0),
            FunctionalKind::Exponential(1.0),
        ] {
            let report = energy(&map, kind).unwrap();
            for _ in 0..5 {
                let v = free[rng.gen_range(0..free.len())];
                let fd = fd_gradient(&map, kind, v, 1e-6).unwrap();
                let an = report.gradient[v];
                let denom = an.norm().max(1e-8);
                assert!(
                    (fd - an).norm() / denom <= 1e-5,
                    "{kind:?} vertex {v}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn random_feasible_map_is_deterministic_and_feasible() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap());
        let a = random_feasible_map(mesh.clone(), 9, 0.3).unwrap();
        let b = random_feasible_map(mesh, 9, 0.3).unwrap();
        assert_eq!(a.images(), b.images());
        assert!(field(&a).min_jacobian() > 0.0);
        assert_eq!(a.pin_target(), Some(Complex64::new(0.3, 0.0)));
    }

    #[test]
    fn nitsche_scenario_builds_feasible_boundary_data() {
        let (_, map) = nitsche_scenario(0.5, 0.3, 0.1).unwrap();
        assert!(field(&map).min_jacobian() > 0.0);
        let e = energy_power(&map, 2.0).unwrap();
        assert!(e.value > 1.0);
    }

    #[test]
    fn calibration_battery_passes() {
        let rows = run_calibration().unwrap();
        assert!(rows.len() >= 6);
        assert!(rows.iter().all(|r| r.pass));
    }
}
