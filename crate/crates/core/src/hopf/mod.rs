//! Ahlfors-Hopf differential diagnostics.
//!
//! At a minimizer h of the distortion energy the field
//!
//! ```text
//!     Φ = 𝕂^{p-1} h_w conj(h_w̄)
//! ```
//!
//! is holomorphic away from the pinned point, where it develops an
//! isolated singularity whose residue carries the Lagrange multiplier of
//! the point constraint. Both facts are measurable on a piecewise-linear
//! map: holomorphy as a discrete Cauchy-Riemann residual built from
//! one-ring contour integrals of the piecewise-constant Φ, and the
//! singularity as a contour residue a₋₁ together with the log-log growth
//! rate of |Φ| on shrinking circles around the pin. Circle integrals of a
//! piecewise-constant field are evaluated exactly: on each arc lying in a
//! single triangle the integral equals the field value times the chord.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;

use crate::calculus::{distortion, wirtinger, PLMap};
use crate::mesh::{signed_area, DomainKind, TriMesh};
use crate::oracle::{row, CalibrationRow};
use crate::sum::pairwise_sum;
use crate::{Error, Result};

mod cauchy;

pub use cauchy::{cauchy_transform, distortion_excess_transform, symmetric_derivative_residual};

/// Fewest circle-edge crossings for a probe radius to count as resolved.
const MIN_ARCS: usize = 4;
/// Crossing angles closer than this are treated as one intersection.
const ANGLE_MERGE: f64 = 1e-10;
/// A probe radius must exceed this multiple of the crossed edge lengths.
const EDGE_CLEARANCE: f64 = 2.0;

/// The discrete Ahlfors-Hopf field of a map, constant on each triangle.
#[derive(Debug, Clone)]
pub struct HopfField {
    mesh: Arc<TriMesh>,
    p: f64,
    phi: Vec<Complex64>,
}

impl HopfField {
    /// Computes Φ = 𝕂^{p-1} h_w conj(h_w̄) triangle by triangle. Errors if
    /// some triangle has unbounded distortion.
    pub fn new(map: &PLMap, p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "hopf exponent must be a finite p >= 1, got {p}"
            )));
        }
        let mesh = map.mesh_arc();
        let mut phi = Vec::with_capacity(mesh.triangle_count());
        for t in 0..mesh.triangle_count() {
            let (fz, fzbar) = wirtinger(map, t);
            let ik = distortion(fz, fzbar);
            if !ik.is_finite() {
                return Err(Error::MapInvariant(format!(
                    "unbounded distortion on triangle {t}"
                )));
            }
            phi.push(ik.powf(p - 1.0) * fz * fzbar.conj());
        }
        Ok(Self { mesh, p, phi })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Per-triangle values of Φ.
    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    /// Area-weighted L¹ mass ∫|Φ|.
    pub fn l1_mass(&self) -> f64 {
        let terms: Vec<f64> = self
            .phi
            .iter()
            .zip(self.mesh.areas())
            .map(|(phi, a)| a * phi.norm())
            .collect();
        pairwise_sum(&terms)
    }

    /// Discrete Cauchy-Riemann residual per vertex: the contour integral
    /// of Φ around the one-ring boundary, normalized by ring area. The
    /// boundary of the ring consists of the edges opposite the vertex, so
    /// the integral is Σ_T Φ_T (w_b - w_a) over those directed edges; it
    /// vanishes identically for a constant field. Boundary vertices have
    /// no ring and report zero.
    pub fn cr_residuals(&self) -> Vec<f64> {
        let mesh = self.mesh.as_ref();
        let z = mesh.vertices();
        (0..mesh.vertex_count())
            .map(|v| {
                if mesh.is_boundary(v) {
                    return 0.0;
                }
                let mut circulation = Complex64::new(0.0, 0.0);
                let mut ring_area = 0.0;
                for &(t, slot) in &mesh.incidence()[v] {
                    let [a, b, c] = mesh.triangles()[t];
                    let (ea, eb) = match slot {
                        0 => (b, c),
                        1 => (c, a),
                        _ => (a, b),
                    };
                    circulation += self.phi[t] * (z[eb] - z[ea]);
                    ring_area += mesh.area(t);
                }
                circulation.norm() / ring_area
            })
            .collect()
    }

    /// Largest Cauchy-Riemann residual over interior vertices at least
    /// `exclusion_radius` away from the pin. The one-ring of the pin
    /// encloses the singularity, so its residual measures the residue,
    /// not the holomorphy defect.
    pub fn max_cr_residual(&self, exclusion_radius: f64) -> f64 {
        let pin = self.mesh.pin_location();
        self.cr_residuals()
            .iter()
            .enumerate()
            .filter(|&(v, _)| match pin {
                Some(c) => (self.mesh.vertices()[v] - c).norm() >= exclusion_radius,
                None => true,
            })
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }

    /// Fits the singularity of Φ at the mesh pin; see [`pole_fit`].
    pub fn pole_fit(&self, radii: &[f64]) -> Result<PoleFit> {
        let center = self.mesh.pin_location().ok_or_else(|| {
            Error::InvalidParameter("pole fit requires a pinned mesh".into())
        })?;
        pole_fit(&self.mesh, &self.phi, center, radii)
    }
}

/// Contour residue and growth rate of a piecewise-constant field near an
/// isolated singularity.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PoleFit {
    /// Probe radii that the mesh actually resolved, largest first.
    pub radii: Vec<f64>,
    /// (1/2πi) ∮ Φ dw on each probe circle.
    pub residues: Vec<Complex64>,
    /// Area-weighted mean of |Φ| on the annulus r/√2 ≤ |w-c| ≤ r√2.
    pub ring_means: Vec<f64>,
    /// Mean of the per-circle residues.
    pub a_minus_1: Complex64,
    /// Least-squares slope of log ring mean against log radius; zero when
    /// the field vanishes on the probe annuli. Near a simple pole the
    /// slope is -1, near a double pole -2.
    pub loglog_slope: f64,
}

/// Measures the singularity of the per-triangle field `phi` at `center`.
///
/// On each circle the crossings with mesh edges split it into arcs lying
/// inside single triangles, so ∮ Φ dw = Σ Φ_T (chord) with no quadrature
/// error beyond locating the arcs. A radius is discarded when the circle
/// meets fewer than four edges, when it is not at least twice as large as
/// the local edge length, or when the probe annulus contains no triangle
/// barycenters; fewer than three surviving radii is an error. `radii`
/// must be strictly decreasing.
pub fn pole_fit(
    mesh: &TriMesh,
    phi: &[Complex64],
    center: Complex64,
    radii: &[f64],
) -> Result<PoleFit> {
    if phi.len() != mesh.triangle_count() {
        return Err(Error::InvalidParameter(format!(
            "{} field values for {} triangles",
            phi.len(),
            mesh.triangle_count()
        )));
    }
    if radii.len() < 3 {
        return Err(Error::InvalidParameter(
            "pole fit needs at least three probe radii".into(),
        ));
    }
    for pair in radii.windows(2) {
        if !(pair[1] > 0.0 && pair[1] < pair[0] && pair[0].is_finite()) {
            return Err(Error::InvalidParameter(
                "probe radii must be finite, positive and strictly decreasing".into(),
            ));
        }
    }
    if let DomainKind::Disk = mesh.kind() {
        if center.norm() + radii[0] >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "probe circle of radius {} around {center} leaves the disk",
                radii[0]
            )));
        }
    }

    let z = mesh.vertices();
    let mut edges: Vec<(usize, usize)> = mesh
        .triangles()
        .iter()
        .flat_map(|&[a, b, c]| [(a.min(b), a.max(b)), (b.min(c), b.max(c)), (c.min(a), c.max(a))])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let barycenters: Vec<Complex64> = mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| (z[a] + z[b] + z[c]) / 3.0)
        .collect();

    let mut kept_radii = Vec::new();
    let mut residues = Vec::new();
    let mut ring_means = Vec::new();
    'radius: for &r in radii {
        let mut angles = Vec::new();
        let mut crossed_lengths = Vec::new();
        for &(u, v) in &edges {
            let p0 = z[u] - center;
            let d = z[v] - z[u];
            let a = d.norm_sqr();
            if a == 0.0 {
                continue;
            }
            let b = 2.0 * (p0.re * d.re + p0.im * d.im);
            let c = p0.norm_sqr() - r * r;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let mut crossed = false;
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if (0.0..=1.0).contains(&t) {
                    let q = p0 + t * d;
                    angles.push(q.im.atan2(q.re));
                    crossed = true;
                }
            }
            if crossed {
                crossed_lengths.push(a.sqrt());
            }
        }
        if angles.len() < MIN_ARCS {
            continue;
        }
        let mean_len =
            crossed_lengths.iter().sum::<f64>() / crossed_lengths.len() as f64;
        if r < EDGE_CLEARANCE * mean_len {
            continue;
        }
        angles.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
        let mut merged: Vec<f64> = Vec::with_capacity(angles.len());
        for theta in angles {
            if merged.last().is_none_or(|last| theta - last > ANGLE_MERGE) {
                merged.push(theta);
            }
        }
        if merged.len() > 1 && merged[0] + TAU - merged.last().unwrap() <= ANGLE_MERGE {
            merged.pop();
        }
        if merged.len() < MIN_ARCS {
            continue;
        }

        let points: Vec<Complex64> = merged
            .iter()
            .map(|&theta| center + r * Complex64::new(theta.cos(), theta.sin()))
            .collect();
        let mut circulation = Complex64::new(0.0, 0.0);
        for k in 0..merged.len() {
            let next = (k + 1) % merged.len();
            let wrap = if next == 0 { TAU } else { 0.0 };
            let mid = 0.5 * (merged[k] + merged[next] + wrap);
            let probe = center + r * Complex64::new(mid.cos(), mid.sin());
            let Some(t) = locate_triangle(mesh, probe) else {
                continue 'radius;
            };
            circulation += phi[t] * (points[next] - points[k]);
        }

        let (lo, hi) = (r / 2.0_f64.sqrt(), r * 2.0_f64.sqrt());
        let mut mass = 0.0;
        let mut area = 0.0;
        for t in 0..mesh.triangle_count() {
            let dist = (barycenters[t] - center).norm();
            if (lo..=hi).contains(&dist) {
                mass += mesh.area(t) * phi[t].norm();
                area += mesh.area(t);
            }
        }
        if area == 0.0 {
            continue;
        }

        kept_radii.push(r);
        residues.push(circulation / Complex64::new(0.0, TAU));
        ring_means.push(mass / area);
    }

    if kept_radii.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "only {} of {} probe radii are resolved by the mesh",
            kept_radii.len(),
            radii.len()
        )));
    }

    let a_minus_1 = residues.iter().sum::<Complex64>() / residues.len() as f64;
    let samples: Vec<(f64, f64)> = kept_radii
        .iter()
        .zip(&ring_means)
        .filter(|&(_, m)| *m > 0.0)
        .map(|(r, m)| (r.ln(), m.ln()))
        .collect();
    let loglog_slope = if samples.len() < 2 {
        0.0
    } else {
        let n = samples.len() as f64;
        let xbar = samples.iter().map(|s| s.0).sum::<f64>() / n;
        let ybar = samples.iter().map(|s| s.1).sum::<f64>() / n;
        let num: f64 = samples.iter().map(|s| (s.0 - xbar) * (s.1 - ybar)).sum();
        let den: f64 = samples.iter().map(|s| (s.0 - xbar) * (s.0 - xbar)).sum();
        num / den
    };

    Ok(PoleFit {
        radii: kept_radii,
        residues,
        ring_means,
        a_minus_1,
        loglog_slope,
    })
}

/// Geometric ladder of probe radii for [`pole_fit`].
pub fn geometric_radii(start: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && start.is_finite() && ratio > 0.0 && ratio < 1.0) || count < 3 {
        return Err(Error::InvalidParameter(format!(
            "radius ladder needs start > 0, ratio in (0,1) and count >= 3, \
             got start {start}, ratio {ratio}, count {count}"
        )));
    }
    Ok((0..count).map(|k| start * ratio.powi(k as i32)).collect())
}

fn locate_triangle(mesh: &TriMesh, q: Complex64) -> Option<usize> {
    let z = mesh.vertices();
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let (za, zb, zc) = (z[a], z[b], z[c]);
        if q.re < za.re.min(zb.re).min(zc.re) - 1e-9
            || q.re > za.re.max(zb.re).max(zc.re) + 1e-9
            || q.im < za.im.min(zb.im).min(zc.im) - 1e-9
            || q.im > za.im.max(zb.im).max(zc.im) + 1e-9
        {
            continue;
        }
        if signed_area(za, zb, q) >= -1e-12
            && signed_area(zb, zc, q) >= -1e-12
            && signed_area(zc, za, q) >= -1e-12
        {
            return Some(t);
        }
    }
    None
}

/// Battery of synthetic pole fits with known answers: a simple pole must
/// come back with slope -1 and its planted residue, a double pole with
/// slope -2 and vanishing residue. Returns all rows; errors if any fails.
pub fn synthetic_pole_calibration() -> Result<Vec<CalibrationRow>> {
    let center = Complex64::new(0.3, 0.0);
    let mesh = crate::mesh::build_disk_mesh(0.1, 1.0, center)?;
    let radii = geometric_radii(0.25, 0.8, 5)?;
    let barycenters: Vec<Complex64> = mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| {
            (mesh.vertices()[a] + mesh.vertices()[b] + mesh.vertices()[c]) / 3.0
        })
        .collect();

    let planted = Complex64::new(0.7, -0.2);
    let simple: Vec<Complex64> =
        barycenters.iter().map(|&w| planted / (w - center)).collect();
    let fit = pole_fit(&mesh, &simple, center, &radii)?;
    let mut rows = vec![
        row("simple_pole_slope", fit.loglog_slope, -1.0, 0.1),
        row(
            "simple_pole_residue",
            (fit.a_minus_1 - planted).norm() / planted.norm(),
            0.0,
            0.05,
        ),
    ];

    let strength = Complex64::new(0.4, 0.1);
    let double: Vec<Complex64> = barycenters
        .iter()
        .map(|&w| strength / ((w - center) * (w - center)))
        .collect();
    let fit = pole_fit(&mesh, &double, center, &radii)?;
    rows.push(row("double_pole_slope", fit.loglog_slope, -2.0, 0.15));
    rows.push(row("double_pole_residue", fit.a_minus_1.norm(), 0.0, 0.05));

    let failing: Vec<&str> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.as_str())
        .collect();
    if failing.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Calibration(format!(
            "pole calibration failed: {}",
            failing.join(", ")
        )))
    }
}
