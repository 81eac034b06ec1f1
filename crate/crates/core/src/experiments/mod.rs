//! Structured studies built on the solver.
//!
//! Three families: [`sweep_p`] follows the minimizer along a ladder of
//! exponents with warm starts, recording the W^{1,1} distance to the
//! identity and the spread of the distortion; [`blowup_study`] refines
//! the mesh in shrinking balls around the pin, prolongs the previous
//! solution onto each refined mesh and watches the Dirichlet mass in a
//! fixed window at the pin; [`exponential_study`] does the same for the
//! exponential functional and probes each level with the local mass of
//! exp(q·IK) for a probe exponent q above the solved coefficient.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::{field, BoundaryCondition, PLMap};
use crate::energy::{local_dirichlet, FunctionalKind};
use crate::mesh::{refine_with_parents, TriMesh};
use crate::optimizer::{
    build_solve_mesh, solve_on_mesh, solve_problem, Side, SolveConfig, SolveReport,
};
use crate::sum::pairwise_sum;
use crate::{Error, Result};

/// Default ball radius around the pin whose local masses the refinement
/// studies track across levels.
pub const DEFAULT_WINDOW: f64 = 0.1;
/// A trend only counts as strict when consecutive values differ by more
/// than this.
pub const TREND_SLACK: f64 = 1e-10;
/// Default ratio of the probe exponent to the solved exponential
/// coefficient.
pub const PROBE_FACTOR: f64 = 1.5;

/// One solved exponent of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ∫ (|f_z - 1| + |f_z̄|): the W^{1,1} distance to the identity.
    pub w11_distance: f64,
    pub max_displacement: f64,
    /// Area-weighted mean of the distortion.
    pub ik_mean: f64,
    /// Area-weighted standard deviation of the distortion.
    pub ik_stddev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub side: Side,
    pub pin_target: Complex64,
    pub rows: Vec<SweepRow>,
}

/// Solves the power family along `p_values`, warm-starting each exponent
/// from the previous minimizer on a shared mesh. Rows keep the given
/// order; a solve that stops without converging is flagged in its row,
/// not dropped.
pub fn sweep_p(base: &SolveConfig, p_values: &[f64]) -> Result<SweepResult> {
    if p_values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one exponent".into()));
    }
    if !matches!(base.kind, FunctionalKind::Power(_)) {
        return Err(Error::InvalidParameter(
            "sweep follows the power family; set a power functional".into(),
        ));
    }
    let mesh = Arc::new(build_solve_mesh(base)?);
    let mut rows = Vec::with_capacity(p_values.len());
    let mut current: Option<PLMap> = None;
    for &p in p_values {
        let mut config = base.clone();
        config.kind = FunctionalKind::Power(p);
        config.validate()?;
        let report = match &current {
            None => solve_on_mesh(&config, mesh.clone())?,
            Some(map) => solve_problem(map, config.effective_kind(), &config.optimizer)?,
        };
        rows.push(sweep_row(p, &report));
        current = Some(report.map);
    }
    Ok(SweepResult {
        side: base.side,
        pin_target: base.pin_target,
        rows,
    })
}

fn sweep_row(p: f64, report: &SolveReport) -> SweepRow {
    let (ik_mean, ik_stddev) = distortion_stats(&report.map);
    SweepRow {
        p,
        energy: report.energy.value,
        gradient_norm: report.gradient_norm,
        iterations: report.iterations,
        converged: report.converged,
        w11_distance: w11_distance(&report.map),
        max_displacement: report.map.max_displacement(),
        ik_mean,
        ik_stddev,
    }
}

/// ∫ (|f_z - 1| + |f_z̄|) dA, the integrated operator-norm distance of Df
/// from the identity differential.
pub fn w11_distance(map: &PLMap) -> f64 {
    let mesh = map.mesh();
    let f = field(map);
    let terms: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| {
            mesh.area(t)
                * ((f.fz()[t] - Complex64::new(1.0, 0.0)).norm() + f.fzbar()[t].norm())
        })
        .collect();
    pairwise_sum(&terms)
}

/// Area-weighted mean and standard deviation of the distortion.
pub fn distortion_stats(map: &PLMap) -> (f64, f64) {
    let mesh = map.mesh();
    let f = field(map);
    let total = mesh.total_area();
    let weighted: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| mesh.area(t) * f.distortion()[t])
        .collect();
    let mean = pairwise_sum(&weighted) / total;
    let spread: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| {
            let d = f.distortion()[t] - mean;
            mesh.area(t) * d * d
        })
        .collect();
    (mean, (pairwise_sum(&spread) / total).sqrt())
}

/// Transfers a solved map onto a refinement of its mesh: old vertices keep
/// their images, an interior midpoint takes the average of its parent
/// images, and a boundary midpoint follows the boundary condition.
pub fn prolong(
    map: &PLMap,
    refined: Arc<TriMesh>,
    parents: &[(usize, usize)],
) -> Result<PLMap> {
    let old_count = map.mesh().vertex_count();
    if refined.vertex_count() != old_count + parents.len() {
        return Err(Error::MeshInvariant(format!(
            "refined mesh has {} vertices, expected {} + {} midpoints",
            refined.vertex_count(),
            old_count,
            parents.len()
        )));
    }
    let mut images = map.images().to_vec();
    images.reserve(parents.len());
    for (k, &(a, b)) in parents.iter().enumerate() {
        let v = old_count + k;
        let image = if refined.is_boundary(v) {
            match map.boundary_condition() {
                BoundaryCondition::Identity => refined.vertices()[v],
                BoundaryCondition::Prescribed(_) => (images[a] + images[b]) / 2.0,
            }
        } else {
            (images[a] + images[b]) / 2.0
        };
        images.push(image);
    }
    let condition = match map.boundary_condition() {
        BoundaryCondition::Identity => BoundaryCondition::Identity,
        BoundaryCondition::Prescribed(_) => BoundaryCondition::Prescribed(images.clone()),
    };
    PLMap::new(refined, images, condition, map.pin_target())
}

/// Runs the shared refinement cascade: solve on the configured mesh, then
/// refine in each given ball around the pin, prolonging the previous
/// minimizer as a warm start (falling back to a cold solve if the
/// prolonged map is infeasible). `record` turns each level's report into
/// a row; the first call gets `None` for the base level.
fn refinement_levels<T>(
    config: &SolveConfig,
    refine_radii: &[f64],
    mut record: impl FnMut(Option<f64>, &SolveReport) -> Result<T>,
) -> Result<Vec<T>> {
    config.validate()?;
    validate_refine_radii(refine_radii)?;

    let mut mesh = Arc::new(build_solve_mesh(config)?);
    let center = mesh
        .pin_location()
        .expect("solve meshes carry a pinned vertex");
    let mut report = solve_on_mesh(config, mesh.clone())?;
    let mut levels = vec![record(None, &report)?];
    for &radius in refine_radii {
        let (refined, parents) = refine_with_parents(&mesh, center, radius)?;
        let refined = Arc::new(refined);
        let start = prolong(&report.map, refined.clone(), &parents)?;
        report = if field(&start).min_jacobian() > 0.0 {
            solve_problem(&start, config.effective_kind(), &config.optimizer)?
        } else {
            solve_on_mesh(config, refined.clone())?
        };
        mesh = refined;
        levels.push(record(Some(radius), &report)?);
    }
    Ok(levels)
}

/// Distortion range over the triangles whose barycenter lies in
/// B(center, radius); `None` when the window catches no triangle.
fn distortion_range(map: &PLMap, center: Complex64, radius: f64) -> Option<(f64, f64)> {
    let mesh = map.mesh();
    let z = mesh.vertices();
    let f = field(map);
    let mut range: Option<(f64, f64)> = None;
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        if ((z[a] + z[b] + z[c]) / 3.0 - center).norm() < radius {
            let ik = f.distortion()[t];
            range = Some(match range {
                None => (ik, ik),
                Some((lo, hi)) => (lo.min(ik), hi.max(ik)),
            });
        }
    }
    range
}

/// Checks a refinement ladder: at least two radii (three levels counting
/// the base solve), all positive and strictly decreasing.
pub fn validate_refine_radii(refine_radii: &[f64]) -> Result<()> {
    if refine_radii.len() < 2 {
        return Err(Error::InvalidParameter(
            "refinement studies need at least two radii (three levels with the base)".into(),
        ));
    }
    if !(refine_radii[0] > 0.0 && refine_radii[0].is_finite()) {
        return Err(Error::InvalidParameter(
            "refinement radii must be positive and finite".into(),
        ));
    }
    for pair in refine_radii.windows(2) {
        if !(pair[1] > 0.0 && pair[1] < pair[0]) {
            return Err(Error::InvalidParameter(
                "refinement radii must be positive and strictly decreasing".into(),
            ));
        }
    }
    Ok(())
}

/// Checks a window radius for the local integrals.
pub fn validate_window(window: f64) -> Result<()> {
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window radius {window} outside (0, 1)"
        )));
    }
    Ok(())
}

/// One refinement level of a blow-up study.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupLevel {
    /// Ball radius refined at this level; the base solve has none.
    pub refine_radius: Option<f64>,
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// Dirichlet mass in the window ball at the pin.
    pub local_dirichlet: f64,
    /// Distortion range over the window triangles.
    pub ik_min: f64,
    pub ik_max: f64,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupResult {
    pub side: Side,
    pub pin_target: Complex64,
    pub window_radius: f64,
    pub levels: Vec<BlowupLevel>,
}

/// Solves on the configured mesh, then repeatedly refines in shrinking
/// balls around the pin, prolonging each minimizer onto the next mesh as
/// a warm start. The Dirichlet mass in the window at the pin tracks
/// whether the derivative concentrates there as resolution grows.
pub fn blowup_study(
    config: &SolveConfig,
    refine_radii: &[f64],
    window: f64,
) -> Result<BlowupResult> {
    validate_window(window)?;
    let levels = refinement_levels(config, refine_radii, |refine_radius, report| {
        let center = report
            .map
            .mesh()
            .pin_location()
            .expect("solve meshes carry a pinned vertex");
        let (ik_min, ik_max) = distortion_range(&report.map, center, window).ok_or_else(|| {
            Error::InsufficientResolution(format!(
                "window radius {window} catches no triangle at mesh size {}",
                report.map.mesh().vertex_count()
            ))
        })?;
        Ok(BlowupLevel {
            refine_radius,
            vertex_count: report.map.mesh().vertex_count(),
            triangle_count: report.map.mesh().triangle_count(),
            local_dirichlet: local_dirichlet(&report.map, center, window)?,
            ik_min,
            ik_max,
            energy: report.energy.value,
            gradient_norm: report.gradient_norm,
            iterations: report.iterations,
            converged: report.converged,
        })
    })?;
    Ok(BlowupResult {
        side: config.side,
        pin_target: config.pin_target,
        window_radius: window,
        levels,
    })
}

/// One refinement level of an exponential study.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentialLevel {
    /// Ball radius refined at this level; the base solve has none.
    pub refine_radius: Option<f64>,
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// ln of (1/π_mesh)·Σ area·exp(q·IK) over the window triangles.
    pub log_local_probe: f64,
    /// ln of (1/π_mesh)·Σ area·IK·exp(p·IK) over the whole mesh.
    pub log_distortion_mass: f64,
    /// ln of the exponential energy.
    pub energy_log: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentialStudy {
    pub pin_target: Complex64,
    /// Coefficient of the solved functional exp(p·IK).
    pub p: f64,
    /// Probe exponent, strictly above `p`.
    pub q: f64,
    pub window_radius: f64,
    pub levels: Vec<ExponentialLevel>,
}

/// Minimizes the exponential functional across a refinement cascade at
/// the pin and probes each level with the window mass of exp(q·IK) for a
/// probe exponent q > p. Growth of the probe across levels is the
/// discrete signature that exp(q·IK) fails to stay locally integrable
/// above the solved coefficient. Every mass is carried in log space.
pub fn exponential_study(
    config: &SolveConfig,
    q_probe: f64,
    refine_radii: &[f64],
    window: f64,
) -> Result<ExponentialStudy> {
    let FunctionalKind::Exponential(p) = config.kind else {
        return Err(Error::InvalidParameter(
            "exponential study needs an exponential functional".into(),
        ));
    };
    if !matches!(config.side, Side::ForwardF) {
        return Err(Error::InvalidParameter(
            "the exponential functional is a forward-side energy".into(),
        ));
    }
    if !(q_probe > p) || !q_probe.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "probe exponent {q_probe} must exceed the coefficient {p}"
        )));
    }
    validate_window(window)?;
    let levels = refinement_levels(config, refine_radii, |refine_radius, report| {
        let center = report
            .map
            .mesh()
            .pin_location()
            .expect("solve meshes carry a pinned vertex");
        Ok(ExponentialLevel {
            refine_radius,
            vertex_count: report.map.mesh().vertex_count(),
            triangle_count: report.map.mesh().triangle_count(),
            log_local_probe: log_exponential_mass(&report.map, q_probe, 0.0, Some((center, window)))?,
            log_distortion_mass: log_exponential_mass(&report.map, p, 1.0, None)?,
            energy_log: report.energy.log_value,
            gradient_norm: report.gradient_norm,
            iterations: report.iterations,
            converged: report.converged,
        })
    })?;
    Ok(ExponentialStudy {
        pin_target: config.pin_target,
        p,
        q: q_probe,
        window_radius: window,
        levels,
    })
}

/// ln of (1/π_mesh)·Σ area·IK^weight·exp(coeff·IK), restricted to a
/// barycenter window when one is given, assembled as a log-sum-exp so
/// that large coefficients stay finite.
fn log_exponential_mass(
    map: &PLMap,
    coeff: f64,
    ik_log_weight: f64,
    window: Option<(Complex64, f64)>,
) -> Result<f64> {
    let mesh = map.mesh();
    let z = mesh.vertices();
    let f = field(map);
    let mut terms = Vec::with_capacity(mesh.triangle_count());
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        if let Some((center, radius)) = window {
            if ((z[a] + z[b] + z[c]) / 3.0 - center).norm() >= radius {
                continue;
            }
        }
        let ik = f.distortion()[t];
        if !ik.is_finite() {
            return Err(Error::MapInvariant(format!(
                "unbounded distortion on triangle {t}"
            )));
        }
        terms.push(mesh.area(t).ln() + ik_log_weight * ik.ln() + coeff * ik);
    }
    if terms.is_empty() {
        return Err(Error::InsufficientResolution(
            "window catches no triangle".into(),
        ));
    }
    let shift = terms.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t));
    let sum: f64 = terms.iter().map(|&t| (t - shift).exp()).sum();
    Ok(shift + sum.ln() - mesh.total_area().ln())
}

/// Strictly decreasing with a [`TREND_SLACK`] strictness margin.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0] - TREND_SLACK)
}

/// Strictly increasing with a [`TREND_SLACK`] strictness margin.
pub fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0] + TREND_SLACK)
}
