//! Energy functionals over piecewise-affine maps and their exact gradients.
//!
//! Every functional here is an area-weighted sum of a per-triangle integrand
//! Φ(s, t) of s = |f_z|², t = |f_z̄|², normalized by the total mesh area
//! π_mesh so the identity map scores exactly 1 at every resolution:
//!
//!   power(p):          Φ = IK^p,            IK = (s+t)/(s−t)
//!   inverse_power(p):  Φ = IK^p·J = (s+t)^p (s−t)^{1−p}
//!   exponential(p):    Φ = exp(p·IK)
//!
//! f_z and f_z̄ are complex-linear in the vertex images (see the calculus
//! module), so the chain rule gives the exact gradient of the discrete sum:
//! with ∂IK/∂s = −2t/(s−t)² and ∂IK/∂t = 2s/(s−t)², the Wirtinger gradient
//! at vertex i is
//!
//!   g_i = (2/π_mesh) Σ_T area·[Φ_s·f_z·conj(c_i) + Φ_t·f_z̄·conj(d_i)],
//!
//! where c_i, d_i are the derivative coefficients of triangle T at the
//! corner holding vertex i. At the identity t = 0 and f_z̄ = 0 exactly, so
//! the gradient vanishes bitwise; x = 0 solves terminate at the exact
//! identity. On orientation-reversed triangles the barrier applies: the
//! value is +∞ and no gradient is evaluated.

use crate::calculus::{derivative_coefficients, wirtinger, PLMap};
use crate::sum::pairwise_sum;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufWriter, Write};
use std::path::Path;

/// Which energy is being assembled; the payload is the exponent p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum FunctionalKind {
    Power(f64),
    Exponential(f64),
    InversePower(f64),
}

impl FunctionalKind {
    pub fn p(&self) -> f64 {
        match *self {
            FunctionalKind::Power(p)
            | FunctionalKind::Exponential(p)
            | FunctionalKind::InversePower(p) => p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionalKind::Power(_) => "power",
            FunctionalKind::Exponential(_) => "exponential",
            FunctionalKind::InversePower(_) => "inverse_power",
        }
    }

    /// Checks the exponent range. Returns whether the functional is
    /// diagnostic-only (p = 1, where the minimizer is not unique).
    pub fn validate(&self) -> Result<bool> {
        match *self {
            FunctionalKind::Power(p) | FunctionalKind::InversePower(p) => {
                if p < 1.0 || !p.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "exponent p = {p} below 1 (p = 1 is admitted for diagnostics only)"
                    )))
                } else {
                    Ok(p == 1.0)
                }
            }
            FunctionalKind::Exponential(p) => {
                if p <= 0.0 || !p.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "exponential exponent p = {p} must be positive"
                    )))
                } else {
                    Ok(false)
                }
            }
        }
    }
}

/// Value, per-triangle contributions, exact gradient and the Hölder check
/// of one functional on one map.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub kind: FunctionalKind,
    /// Normalized energy (1/π_mesh)·Σ area·Φ.
    pub value: f64,
    /// ln(value), computed in log-sum-exp form so it stays finite for the
    /// exponential functional even when `value` overflows.
    pub log_value: f64,
    /// Σ area·Φ without the 1/π_mesh normalization; the change-of-variables
    /// identity between the two sides is exact for this sum.
    pub unnormalized: f64,
    /// area·Φ/π_mesh per triangle; sums to `value` up to round-off.
    pub per_triangle: Vec<f64>,
    /// Wirtinger gradient 2·∂E/∂w̄ per vertex; zero on boundary and pin.
    pub gradient: Vec<Complex64>,
    pub gradient_norm: f64,
    /// [Σ area·‖Df‖^{2p/(p+1)}]^{p+1} with ‖Df‖² = |f_z|²+|f_z̄|².
    pub holder_lhs: f64,
    /// [Σ area·IK^p]·[Σ area·J]^p.
    pub holder_rhs: f64,
    /// Set when p = 1 was admitted read-only.
    pub diagnostic_only: bool,
}

impl EnergyReport {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.name(),
            "p": self.kind.p(),
            "value": self.value,
            "log_value": self.log_value,
            "unnormalized": self.unnormalized,
            "gradient_norm": self.gradient_norm,
            "holder_lhs": self.holder_lhs,
            "holder_rhs": self.holder_rhs,
            "diagnostic_only": self.diagnostic_only,
        })
    }
}

/// Integrand value and its partials with respect to s and t. The guards
/// return zero partials at the measure-zero corner s = t = 0 and on the
/// barrier set J ≤ 0 (where no gradient is ever consumed).
fn integrand(kind: FunctionalKind, s: f64, t: f64) -> (f64, f64, f64) {
    let j = s - t;
    if s == 0.0 && t == 0.0 {
        return match kind {
            FunctionalKind::Power(_) => (1.0, 0.0, 0.0),
            FunctionalKind::InversePower(_) => (0.0, 0.0, 0.0),
            FunctionalKind::Exponential(p) => (p.exp(), 0.0, 0.0),
        };
    }
    if j <= 0.0 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let ik = (s + t) / j;
    let ik_s = -2.0 * t / (j * j);
    let ik_t = 2.0 * s / (j * j);
    match kind {
        FunctionalKind::Power(p) => {
            let ikp1 = ik.powf(p - 1.0);
            let phi = ikp1 * ik;
            (phi, p * ikp1 * ik_s, p * ikp1 * ik_t)
        }
        FunctionalKind::InversePower(p) => {
            // Φ = IK^p·J; Φ_s = IK^{p−1}·(p + (1−p)·IK), Φ_t by symmetry
            let ikp1 = ik.powf(p - 1.0);
            let phi = ikp1 * ik * j;
            let phi_s = ikp1 * (p + (1.0 - p) * ik);
            let phi_t = ikp1 * (p + (p - 1.0) * ik);
            (phi, phi_s, phi_t)
        }
        FunctionalKind::Exponential(p) => {
            let e = (p * ik).exp();
            (e, p * e * ik_s, p * e * ik_t)
        }
    }
}

struct TriangleData {
    fz: Complex64,
    fzbar: Complex64,
    s: f64,
    t: f64,
    phi: f64,
    phi_s: f64,
    phi_t: f64,
}

/// Assemble value, gradient and Hölder sides for any functional kind.
pub fn energy(map: &PLMap, kind: FunctionalKind) -> Result<EnergyReport> {
    let diagnostic_only = kind.validate()?;
    let mesh = map.mesh();
    let nt = mesh.triangle_count();
    let pi_mesh = mesh.total_area();
    let p = kind.p();

    let data: Vec<TriangleData> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let (fz, fzbar) = wirtinger(map, t);
            let (s, tt) = (fz.norm_sqr(), fzbar.norm_sqr());
            let (phi, phi_s, phi_t) = integrand(kind, s, tt);
            TriangleData {
                fz,
                fzbar,
                s,
                t: tt,
                phi,
                phi_s,
                phi_t,
            }
        })
        .collect();

    let infeasible = data
        .iter()
        .any(|d| d.s - d.t <= 0.0 && !(d.s == 0.0 && d.t == 0.0));

    // log-sum-exp evaluation keeps the exponential functional meaningful
    // past the f64 overflow threshold
    let (value, log_value, unnormalized, per_triangle): (f64, f64, f64, Vec<f64>) =
        if let (FunctionalKind::Exponential(pe), false) = (kind, infeasible) {
            let exponents: Vec<f64> = data
                .iter()
                .map(|d| {
                    if d.s == 0.0 && d.t == 0.0 {
                        pe
                    } else {
                        pe * (d.s + d.t) / (d.s - d.t)
                    }
                })
                .collect();
            let peak = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scaled: Vec<f64> = exponents
                .iter()
                .zip(mesh.areas())
                .map(|(e, a)| a * (e - peak).exp())
                .collect();
            let log_unnorm = peak + pairwise_sum(&scaled).ln();
            let log_value = log_unnorm - pi_mesh.ln();
            let per: Vec<f64> = exponents
                .iter()
                .zip(mesh.areas())
                .map(|(e, a)| a * e.exp() / pi_mesh)
                .collect();
            (log_value.exp(), log_value, log_unnorm.exp(), per)
        } else {
            let contributions: Vec<f64> = data
                .iter()
                .zip(mesh.areas())
                .map(|(d, a)| a * d.phi)
                .collect();
            let unnorm = pairwise_sum(&contributions);
            let per: Vec<f64> = contributions.iter().map(|c| c / pi_mesh).collect();
            let value = unnorm / pi_mesh;
            (value, value.ln(), unnorm, per)
        };

    // gradient: zero on boundary/pin, parallel gather over incident
    // triangles in index order for determinism
    let overflow = !value.is_finite() && !infeasible;
    let gradient: Vec<Complex64> = if infeasible || overflow {
        vec![Complex64::new(0.0, 0.0); mesh.vertex_count()]
    } else {
        (0..mesh.vertex_count())
            .into_par_iter()
            .map(|i| {
                if !map.is_free(i) {
                    return Complex64::new(0.0, 0.0);
                }
                let mut g = Complex64::new(0.0, 0.0);
                for &(t, slot) in &mesh.incidence()[i] {
                    let d = &data[t];
                    let (cs, ds) = derivative_coefficients(mesh, t);
                    g += mesh.area(t)
                        * (d.phi_s * d.fz * cs[slot].conj()
                            + d.phi_t * d.fzbar * ds[slot].conj());
                }
                2.0 * g / pi_mesh
            })
            .collect()
    };
    let norms: Vec<f64> = gradient.iter().map(|g| g.norm_sqr()).collect();
    let gradient_norm = if infeasible || overflow {
        f64::NAN
    } else {
        pairwise_sum(&norms).sqrt()
    };

    let (holder_lhs, holder_rhs) = if infeasible {
        (f64::NAN, f64::NAN)
    } else {
        holder_sides(mesh.areas(), &data, p)
    };

    Ok(EnergyReport {
        kind,
        value,
        log_value,
        unnormalized,
        per_triangle,
        gradient,
        gradient_norm,
        holder_lhs,
        holder_rhs,
        diagnostic_only,
    })
}

/// Both sides of the discrete Hölder inequality
/// [Σ area·‖Df‖^{2p/(p+1)}]^{p+1} ≤ [Σ area·IK^p]·[Σ area·J]^p.
fn holder_sides(areas: &[f64], data: &[TriangleData], p: f64) -> (f64, f64) {
    let q = 2.0 * p / (p + 1.0);
    let lhs_terms: Vec<f64> = data
        .iter()
        .zip(areas)
        .map(|(d, a)| a * (d.s + d.t).powf(q / 2.0))
        .collect();
    let ik_terms: Vec<f64> = data
        .iter()
        .zip(areas)
        .map(|(d, a)| {
            if d.s == 0.0 && d.t == 0.0 {
                *a
            } else {
                a * ((d.s + d.t) / (d.s - d.t)).powf(p)
            }
        })
        .collect();
    let j_terms: Vec<f64> = data.iter().zip(areas).map(|(d, a)| a * (d.s - d.t)).collect();
    let lhs = pairwise_sum(&lhs_terms).powf(p + 1.0);
    let rhs = pairwise_sum(&ik_terms) * pairwise_sum(&j_terms).powf(p);
    (lhs, rhs)
}

/// L^p mean distortion (1/π_mesh)·Σ area·IK^p.
pub fn energy_power(map: &PLMap, p: f64) -> Result<EnergyReport> {
    energy(map, FunctionalKind::Power(p))
}

/// Jacobian-weighted inverse-side energy (1/π_mesh)·Σ area·IK^p·J.
pub fn energy_inverse_power(map: &PLMap, p: f64) -> Result<EnergyReport> {
    energy(map, FunctionalKind::InversePower(p))
}

/// Exponential mean (1/π_mesh)·Σ area·exp(p·IK).
pub fn energy_exponential(map: &PLMap, p: f64) -> Result<EnergyReport> {
    energy(map, FunctionalKind::Exponential(p))
}

/// Wirtinger gradient 2·∂E/∂w̄ at a single vertex, ignoring the free-vertex
/// mask that [`energy`] applies. The pin-penalty phase of the solver moves
/// the pinned vertex and needs the energy gradient there.
pub fn vertex_gradient(map: &PLMap, kind: FunctionalKind, vertex: usize) -> Result<Complex64> {
    kind.validate()?;
    let mesh = map.mesh();
    if vertex >= mesh.vertex_count() {
        return Err(Error::InvalidParameter(format!(
            "vertex {vertex} out of range for {} vertices",
            mesh.vertex_count()
        )));
    }
    let mut g = Complex64::new(0.0, 0.0);
    for &(t, slot) in &mesh.incidence()[vertex] {
        let (fz, fzbar) = wirtinger(map, t);
        let (_, phi_s, phi_t) = integrand(kind, fz.norm_sqr(), fzbar.norm_sqr());
        let (cs, ds) = derivative_coefficients(mesh, t);
        g += mesh.area(t) * (phi_s * fz * cs[slot].conj() + phi_t * fzbar * ds[slot].conj());
    }
    Ok(2.0 * g / mesh.total_area())
}

/// (Σ area·‖Df‖^q)^{1/q} with ‖Df‖² = |f_z|² + |f_z̄|², for q ∈ (1, 2].
pub fn sobolev_seminorm(map: &PLMap, q: f64) -> Result<f64> {
    if !(q > 1.0 && q <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "Sobolev exponent q = {q} outside (1, 2]"
        )));
    }
    let mesh = map.mesh();
    let terms: Vec<f64> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let (fz, fzbar) = wirtinger(map, t);
            mesh.area(t) * (fz.norm_sqr() + fzbar.norm_sqr()).powf(q / 2.0)
        })
        .collect();
    Ok(pairwise_sum(&terms).powf(1.0 / q))
}

/// Dirichlet energy Σ area·(|f_z|²+|f_z̄|²) over triangles whose barycenter
/// lies in B(center, rho). Unnormalized: this is the quantity whose growth
/// under refinement witnesses failure of W^{1,2} membership.
pub fn local_dirichlet(map: &PLMap, center: Complex64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "local Dirichlet radius {rho} must be positive"
        )));
    }
    let mesh = map.mesh();
    let terms: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.triangles()[t];
            let bary =
                (mesh.vertices()[a] + mesh.vertices()[b] + mesh.vertices()[c]) / 3.0;
            if (bary - center).norm() < rho {
                let (fz, fzbar) = wirtinger(map, t);
                mesh.area(t) * (fz.norm_sqr() + fzbar.norm_sqr())
            } else {
                0.0
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Per-triangle CSV: tri_index, area, IK, J, contribution.
pub fn write_per_triangle_csv(map: &PLMap, report: &EnergyReport, path: &Path) -> Result<()> {
    let mesh = map.mesh();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "tri_index,area,IK,J,contribution").map_err(|e| Error::io(path, e))?;
    for t in 0..mesh.triangle_count() {
        let (fz, fzbar) = wirtinger(map, t);
        let ik = crate::calculus::distortion(fz, fzbar);
        let j = fz.norm_sqr() - fzbar.norm_sqr();
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            t,
            mesh.area(t),
            ik,
            j,
            report.per_triangle[t]
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::BoundaryCondition;
    use crate::mesh::{build_disk_mesh, build_rectangle_mesh};
    use std::sync::Arc;

    fn affine_stretch_on_square(a: f64) -> PLMap {
        let mesh = Arc::new(build_rectangle_mesh(1.0, 1.0, 0.25).unwrap());
        let images: Vec<Complex64> = mesh
            .vertices()
            .iter()
            .map(|z| Complex64::new(a * z.re, z.im))
            .collect();
        let bc = BoundaryCondition::Prescribed(images.clone());
        PLMap::new(mesh, images, bc, None).unwrap()
    }

    #[test]
    fn identity_energy_is_exactly_one_with_zero_gradient() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.3, 0.0)).unwrap());
        let map = PLMap::identity(mesh);
        for p in [1.5, 2.0, 4.0] {
            let r = energy_power(&map, p).unwrap();
            assert_eq!(r.value, 1.0);
            assert_eq!(r.gradient_norm, 0.0);
            assert!(r.gradient.iter().all(|g| g.norm() == 0.0));
            assert!(!r.diagnostic_only);
        }
        // the J factor makes the inverse-power gradient only analytically
        // zero at the identity (the area sum telescopes), not bitwise
        let r = energy_inverse_power(&map, 2.0).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.gradient_norm <= 1e-12);
    }

    #[test]
    fn affine_stretch_energy_matches_closed_form() {
        let map = affine_stretch_on_square(2.0);
        let r = energy_power(&map, 2.0).unwrap();
        assert!((r.value - 1.5625).abs() < 1e-12);
        let r3 = energy_power(&map, 3.0).unwrap();
        assert!((r3.value - 1.25f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn vertex_gradient_agrees_with_assembled_gradient() {
        let mesh = Arc::new(build_disk_mesh(0.25, 0.0, Complex64::new(0.3, 0.0)).unwrap());
        let map = crate::oracle::random_feasible_map(Arc::clone(&mesh), 11, 0.2).unwrap();
        let kind = FunctionalKind::Power(2.0);
        let report = energy(&map, kind).unwrap();
        let mut checked = 0;
        for v in 0..mesh.vertex_count() {
            if map.is_free(v) {
                assert_eq!(vertex_gradient(&map, kind, v).unwrap(), report.gradient[v]);
                checked += 1;
            }
        }
        assert!(checked > 5);
        // the pinned vertex has a genuine gradient even though the assembled
        // report masks it to zero
        let pin = mesh.pinned_index().unwrap();
        assert_eq!(report.gradient[pin], Complex64::new(0.0, 0.0));
        assert!(vertex_gradient(&map, kind, pin).unwrap().norm() > 0.0);
    }

    #[test]
    fn exponential_energy_values() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = PLMap::identity(mesh);
        let r = energy_exponential(&map, 1.0).unwrap();
        assert!((r.value - 1f64.exp()).abs() < 1e-12);
        let stretch = affine_stretch_on_square(2.0);
        let r = energy_exponential(&stretch, 2.0).unwrap();
        assert!((r.value - 2.5f64.exp()).abs() / 2.5f64.exp() < 1e-12);
        assert!((r.log_value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_overflow_is_reported_in_log_form() {
        // IK = (a²+1)/(2a) ≈ 500 at a ≈ 1000; p·IK ≈ 1000 overflows exp
        let map = affine_stretch_on_square(1000.0);
        let r = energy_exponential(&map, 2.0).unwrap();
        assert!(r.value.is_infinite());
        let ik = (1000.0f64 * 1000.0 + 1.0) / 2000.0;
        assert!((r.log_value - 2.0 * ik).abs() < 1e-6);
    }

    #[test]
    fn p_below_one_rejected_p_equal_one_flagged() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = PLMap::identity(mesh);
        assert!(energy_power(&map, 0.5).is_err());
        let r = energy_power(&map, 1.0).unwrap();
        assert!(r.diagnostic_only);
    }

    #[test]
    fn barrier_returns_infinite_value() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let images: Vec<Complex64> = mesh.vertices().iter().map(|z| z.conj()).collect();
        let bc = BoundaryCondition::Prescribed(images.clone());
        let map = PLMap::new(mesh, images, bc, None).unwrap();
        let r = energy_power(&map, 2.0).unwrap();
        assert!(r.value.is_infinite());
    }

    #[test]
    fn value_equals_sum_of_contributions() {
        let map = affine_stretch_on_square(2.0);
        for kind in [
            FunctionalKind::Power(2.0),
            FunctionalKind::InversePower(2.0),
            FunctionalKind::Exponential(1.5),
        ] {
            let r = energy(&map, kind).unwrap();
            let s: f64 = r.per_triangle.iter().sum();
            assert!(
                (r.value - s).abs() <= 1e-12 * r.value.abs(),
                "{kind:?}: {} vs {s}",
                r.value
            );
        }
    }

    #[test]
    fn inverse_power_change_of_variables_is_exact_for_affine() {
        // forward: a = 2 stretch of the unit square onto [0,2]x[0,1];
        // inverse: a = 1/2 stretch of [0,2]x[0,1] back onto the square.
        // The unnormalized sums obey Σ IK_h^p·J_h dA = Σ IK_f^p dA exactly.
        let fwd = affine_stretch_on_square(2.0);
        let mesh_back = Arc::new(build_rectangle_mesh(2.0, 1.0, 0.25).unwrap());
        let images: Vec<Complex64> = mesh_back
            .vertices()
            .iter()
            .map(|z| Complex64::new(0.5 * z.re, z.im))
            .collect();
        let bc = BoundaryCondition::Prescribed(images.clone());
        let inv = PLMap::new(mesh_back, images, bc, None).unwrap();
        let ef = energy_power(&fwd, 2.0).unwrap();
        let eh = energy_inverse_power(&inv, 2.0).unwrap();
        assert!(
            (ef.unnormalized - eh.unnormalized).abs() <= 1e-10 * ef.unnormalized,
            "{} vs {}",
            ef.unnormalized,
            eh.unnormalized
        );
    }

    #[test]
    fn sobolev_seminorm_examples() {
        let mesh = Arc::new(build_disk_mesh(0.1, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let pi_mesh = mesh.total_area();
        let map = PLMap::identity(mesh);
        let s = sobolev_seminorm(&map, 2.0).unwrap();
        assert!((s - pi_mesh.sqrt()).abs() < 1e-12);
        // a = 2: ‖Df‖² = |fz|²+|fz̄|² = 9/4 + 1/4 = 5/2 on the unit square
        let stretch = affine_stretch_on_square(2.0);
        let s = sobolev_seminorm(&stretch, 2.0).unwrap();
        assert!((s - 2.5f64.sqrt()).abs() < 1e-12);
        assert!(sobolev_seminorm(&map, 1.0).is_err());
        assert!(sobolev_seminorm(&map, 2.5).is_err());
    }

    #[test]
    fn local_dirichlet_examples() {
        let mesh = Arc::new(build_disk_mesh(0.05, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let map = PLMap::identity(mesh.clone());
        let center = Complex64::new(0.0, 0.0);
        let d = local_dirichlet(&map, center, 0.5).unwrap();
        let exact = std::f64::consts::PI * 0.25;
        assert!((d - exact).abs() < 0.07 * exact, "{d} vs {exact}");
        let images: Vec<Complex64> = mesh
            .vertices()
            .iter()
            .map(|z| Complex64::new(2.0 * z.re, z.im))
            .collect();
        let bc = BoundaryCondition::Prescribed(images.clone());
        let stretch = PLMap::new(mesh, images, bc, None).unwrap();
        let d2 = local_dirichlet(&stretch, center, 0.5).unwrap();
        assert!((d2 / d - 2.5).abs() < 1e-9, "ratio {}", d2 / d);
    }

    #[test]
    fn holder_inequality_on_examples() {
        let map = affine_stretch_on_square(2.0);
        for p in [1.5, 2.0, 4.0] {
            let r = energy_power(&map, p).unwrap();
            assert!(
                r.holder_lhs <= r.holder_rhs * (1.0 + 1e-12),
                "p = {p}: lhs {} rhs {}",
                r.holder_lhs,
                r.holder_rhs
            );
        }
    }

    #[test]
    fn energy_is_monotone_in_p() {
        let map = affine_stretch_on_square(2.0);
        let values: Vec<f64> = [1.1, 2.0, 3.0]
            .iter()
            .map(|&p| energy_power(&map, p).unwrap().value)
            .collect();
        assert!(values[0] <= values[1] && values[1] <= values[2]);
    }

    #[test]
    fn rotation_of_domain_and_image_preserves_energy() {
        let mesh = Arc::new(build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap());
        let squeeze = |z: Complex64| z + Complex64::new(0.05, 0.02) * z * z.conj();
        let images: Vec<Complex64> = mesh.vertices().iter().map(|&z| squeeze(z)).collect();
        let bc = BoundaryCondition::Prescribed(images.clone());
        let map = PLMap::new(mesh.clone(), images, bc, None).unwrap();
        let base = energy_power(&map, 2.0).unwrap().value;

        let rot = Complex64::from_polar(1.0, 0.7);
        let rotated_vertices: Vec<Complex64> =
            mesh.vertices().iter().map(|&z| rot * z).collect();
        let rotated_mesh = Arc::new(
            crate::mesh::TriMesh::new(
                rotated_vertices.clone(),
                mesh.triangles().to_vec(),
                mesh.boundary_flags().to_vec(),
                mesh.pinned_index(),
                mesh.kind(),
            )
            .unwrap(),
        );
        let rotated_images: Vec<Complex64> = rotated_vertices
            .iter()
            .map(|&z| rot * squeeze(rot.conj() * z))
            .collect();
        let bc = BoundaryCondition::Prescribed(rotated_images.clone());
        let rotated = PLMap::new(rotated_mesh, rotated_images, bc, None).unwrap();
        let rotated_value = energy_power(&rotated, 2.0).unwrap().value;
        assert!((rotated_value - base).abs() <= 1e-10 * base);
    }
}
