//! Minimization of distortion energies over piecewise-affine disk self-maps.
//!
//! The decision variables are the free vertex images (interior, non-pinned),
//! flattened into real coordinates. Minimization runs limited-memory BFGS
//! with an Armijo backtracking line search that checks orientation before it
//! evaluates the energy, so every accepted iterate stays inside the open set
//! {min_T J > 0} where the functionals are finite and smooth.
//!
//! A solve has up to three stages. The initial map composes two disk
//! automorphisms so the pinned vertex lands exactly on its target and blends
//! toward the identity until the start is orientation-preserving. If the
//! blend had to retreat, the pin is no longer on target and a short penalty
//! phase minimizes E + λ|w_pin - target|² for a growing ladder of weights λ,
//! snapping the pin once it is within 1e-9. The main phase then eliminates
//! the pinned vertex and boundary from the variable set and minimizes the
//! energy itself to the requested gradient tolerance.

mod fields;
mod lbfgs;

pub use fields::{
    inner_variation_residual, inner_variation_residuals, standard_test_fields, TestField,
    PIN_EXCLUSION_RADIUS,
};

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calculus::{field, BoundaryCondition, PLMap};
use crate::energy::{energy, vertex_gradient, EnergyReport, FunctionalKind};
use crate::mesh::{build_disk_mesh, DomainKind, TriMesh};
use crate::{Error, Result};
use lbfgs::{minimize, LbfgsOptions, Objective};

const PENALTY_INITIAL_WEIGHT: f64 = 1.0;
const PENALTY_GROWTH: f64 = 30.0;
const PENALTY_MAX_ROUNDS: usize = 24;
const PENALTY_ROUND_ITERATIONS: usize = 8;
const PIN_SNAP_TOLERANCE: f64 = 1e-9;
const BLEND_SHRINK: f64 = 0.6;

/// Which side of the problem a solve works on. The forward side pins a
/// vertex at the origin and sends it to the target; the inverse side pins a
/// vertex at the target and sends it to the origin, minimizing the
/// Jacobian-weighted energy so that its minimizer is the inverse map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    ForwardF,
    InverseH,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Side::ForwardF => "forward_f",
            Side::InverseH => "inverse_h",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshParams {
    pub target_edge_length: f64,
    pub grading_exponent: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            target_edge_length: 0.1,
            grading_exponent: 0.0,
        }
    }
}

impl MeshParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_edge_length > 0.0 && self.target_edge_length < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mesh edge length {} outside (0, 1)",
                self.target_edge_length
            )));
        }
        if self.grading_exponent < 0.0 || !self.grading_exponent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grading exponent {} must be finite and ≥ 0",
                self.grading_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub line_search_shrink: f64,
    pub memory: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            max_iterations: 2000,
            gradient_tolerance: 1e-7,
            line_search_shrink: 0.5,
            memory: 8,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) || !self.gradient_tolerance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gradient tolerance {} must be positive",
                self.gradient_tolerance
            )));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "line search shrink {} outside (0, 1)",
                self.line_search_shrink
            )));
        }
        if self.memory == 0 {
            return Err(Error::InvalidParameter("memory must be ≥ 1".into()));
        }
        Ok(())
    }

    fn lbfgs(&self, max_iterations: usize) -> LbfgsOptions {
        LbfgsOptions {
            max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            shrink: self.line_search_shrink,
            memory: self.memory,
            diagonal: None,
        }
    }
}

/// Everything needed to reproduce one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub kind: FunctionalKind,
    pub side: Side,
    pub pin_target: Complex64,
    pub mesh: MeshParams,
    pub optimizer: OptimizerParams,
    pub seed: u64,
    /// Relative amplitude of the seeded perturbation applied to the start
    /// (scaled by the local edge length); zero disables it.
    pub perturbation: f64,
}

impl SolveConfig {
    pub fn power(p: f64, pin_target: Complex64) -> Self {
        SolveConfig {
            kind: FunctionalKind::Power(p),
            side: Side::ForwardF,
            pin_target,
            mesh: MeshParams::default(),
            optimizer: OptimizerParams::default(),
            seed: 0,
            perturbation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.validate()? {
            return Err(Error::InvalidParameter(format!(
                "{} with p = 1 is admitted for evaluation only, not optimization",
                self.kind.name()
            )));
        }
        self.mesh.validate()?;
        self.optimizer.validate()?;
        let t = self.pin_target.norm();
        if !t.is_finite() || t >= 1.0 - self.mesh.target_edge_length {
            return Err(Error::InvalidParameter(format!(
                "pin target {} too close to the boundary for edge length {}",
                self.pin_target, self.mesh.target_edge_length
            )));
        }
        if self.perturbation < 0.0 || !self.perturbation.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "perturbation amplitude {} must be finite and ≥ 0",
                self.perturbation
            )));
        }
        Ok(())
    }

    /// The functional actually minimized. On the inverse side the power
    /// energy picks up the Jacobian weight, which is exactly the forward
    /// energy written in the image variable; its minimizer is the inverse of
    /// the forward minimizer.
    pub fn effective_kind(&self) -> FunctionalKind {
        match (self.side, self.kind) {
            (Side::InverseH, FunctionalKind::Power(p)) => FunctionalKind::InversePower(p),
            _ => self.kind,
        }
    }

    /// Domain position of the pinned vertex for this side.
    pub fn pin_vertex(&self) -> Complex64 {
        match self.side {
            Side::ForwardF => Complex64::new(0.0, 0.0),
            Side::InverseH => self.pin_target,
        }
    }

    /// Image the pinned vertex must reach for this side.
    pub fn pin_image(&self) -> Complex64 {
        match self.side {
            Side::ForwardF => self.pin_target,
            Side::InverseH => Complex64::new(0.0, 0.0),
        }
    }
}

/// Outcome of a solve: the map, its energy report and the optimization
/// diagnostics needed to judge it.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub map: PLMap,
    pub energy: EnergyReport,
    /// Accepted steps in the main phase.
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub line_search_failed: bool,
    pub min_jacobian: f64,
    /// Energy after each accepted main-phase step, starting at the value of
    /// the main-phase start; strictly decreasing.
    pub energy_trace: Vec<f64>,
    pub initial_energy: f64,
    pub penalty_rounds: usize,
    /// Residuals against the standard test-field bank, in bank order. Only
    /// populated for the power functional on disk meshes whose pin clears
    /// the bank supports; empty otherwise.
    pub inner_variation_residuals: Vec<f64>,
}

impl SolveReport {
    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "energy": self.energy.summary_json(),
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "line_search_failed": self.line_search_failed,
            "min_jacobian": self.min_jacobian,
            "initial_energy": self.initial_energy,
            "penalty_rounds": self.penalty_rounds,
            "inner_variation_residuals": self.inner_variation_residuals,
            "max_displacement": self.map.max_displacement(),
            "energy_trace_len": self.energy_trace.len(),
        })
    }
}

struct PinPenalty {
    vertex: usize,
    target: Complex64,
    weight: f64,
}

/// Bridge between a map template and the flat coordinates the optimizer
/// sees. Free vertices are listed explicitly so the penalty phase can keep
/// the pinned vertex as a variable while the main phase eliminates it.
struct MapObjective<'a> {
    template: &'a PLMap,
    free: Vec<usize>,
    kind: FunctionalKind,
    penalty: Option<PinPenalty>,
}

impl MapObjective<'_> {
    fn x0(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.free.len());
        for &v in &self.free {
            let w = self.template.image(v);
            x.push(w.re);
            x.push(w.im);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> PLMap {
        let mut images = self.template.images().to_vec();
        for (k, &v) in self.free.iter().enumerate() {
            images[v] = Complex64::new(x[2 * k], x[2 * k + 1]);
        }
        self.template
            .with_images(images)
            .expect("free vertices preserve the boundary and pin invariants")
    }

}

impl Objective for MapObjective<'_> {
    fn is_feasible(&self, x: &[f64]) -> bool {
        field(&self.unpack(x)).min_jacobian() > 0.0
    }

    fn value(&self, x: &[f64]) -> f64 {
        let map = self.unpack(x);
        let report = energy(&map, self.kind).expect("functional kind validated before solving");
        let mut value = report.value;
        if let Some(pen) = &self.penalty {
            value += pen.weight * (map.image(pen.vertex) - pen.target).norm_sqr();
        }
        value
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let map = self.unpack(x);
        let report = energy(&map, self.kind).expect("functional kind validated before solving");
        let mut value = report.value;
        let mut grad = vec![0.0; 2 * self.free.len()];
        for (k, &v) in self.free.iter().enumerate() {
            let mut g = report.gradient[v];
            if let Some(pen) = &self.penalty {
                if v == pen.vertex {
                    g = vertex_gradient(&map, self.kind, v).expect("vertex index in range")
                        + 2.0 * pen.weight * (map.image(v) - pen.target);
                }
            }
            grad[2 * k] = g.re;
            grad[2 * k + 1] = g.im;
        }
        if let Some(pen) = &self.penalty {
            value += pen.weight * (map.image(pen.vertex) - pen.target).norm_sqr();
        }
        (value, grad)
    }
}

/// Displacement-seeded start: f(z) = z + c·(1 − |z|²) with
/// c = (target − pin) / (1 − |pin|²) fixes the boundary, carries the
/// pinned vertex exactly onto `target`, and has J = 1 − 2 Re(c z̄), which
/// stays positive wherever 2|c| < 1. If the sampled start still breaks
/// orientation somewhere, the displacement is shrunk until it is
/// feasible; the returned flag records whether the pinned image still
/// equals `target` exactly (when it does not, a penalty phase has to
/// finish the pinning).
pub fn initial_map(mesh: Arc<TriMesh>, target: Complex64) -> Result<(PLMap, bool)> {
    let pin = mesh.pinned_index().ok_or_else(|| {
        Error::MeshInvariant("initial map construction needs a pinned mesh".into())
    })?;
    if !(target.norm() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pin image target {target} outside the open disk"
        )));
    }
    let a = mesh.vertices()[pin];
    let c = (target - a) / (1.0 - a.norm_sqr());

    let mut s = 1.0;
    while s >= 1e-3 {
        let images: Vec<Complex64> = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if mesh.is_boundary(i) {
                    z
                } else if i == pin && s == 1.0 {
                    target
                } else {
                    z + (s * c) * (1.0 - z.norm_sqr())
                }
            })
            .collect();
        let exact = images[pin] == target;
        let candidate = PLMap::new(
            Arc::clone(&mesh),
            images,
            BoundaryCondition::Identity,
            if exact { Some(target) } else { None },
        )?;
        if field(&candidate).min_jacobian() > 0.0 {
            return Ok((candidate, exact));
        }
        s *= BLEND_SHRINK;
    }
    let map = PLMap::identity(Arc::clone(&mesh));
    let exact = map.image(pin) == target;
    if exact {
        let map = PLMap::new(
            mesh,
            map.images().to_vec(),
            BoundaryCondition::Identity,
            Some(target),
        )?;
        Ok((map, true))
    } else {
        Ok((map, false))
    }
}

/// Seeded perturbation of the free vertices, each offset scaled by the
/// shortest incident edge, halved globally until orientation-preserving.
pub fn jitter_map(map: &PLMap, seed: u64, amplitude: f64) -> Result<PLMap> {
    if amplitude == 0.0 {
        return Ok(map.clone());
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "perturbation amplitude {amplitude} must be finite and ≥ 0"
        )));
    }
    let mesh = map.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = vec![Complex64::new(0.0, 0.0); mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        if !map.is_free(v) {
            continue;
        }
        let z = mesh.vertices()[v];
        let mut local = f64::INFINITY;
        for &(t, _) in &mesh.incidence()[v] {
            for &u in &mesh.triangles()[t] {
                if u != v {
                    local = local.min((mesh.vertices()[u] - z).norm());
                }
            }
        }
        offsets[v] = amplitude
            * local
            * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }

    let mut scale = 1.0;
    for _ in 0..40 {
        let images: Vec<Complex64> = map
            .images()
            .iter()
            .zip(&offsets)
            .map(|(w, o)| w + scale * o)
            .collect();
        let candidate = map.with_images(images)?;
        if field(&candidate).min_jacobian() > 0.0 {
            return Ok(candidate);
        }
        scale *= 0.5;
    }
    Err(Error::InfeasibleStart(
        "seeded perturbation never became orientation-preserving".into(),
    ))
}

/// Drags the pinned vertex onto `target` by minimizing E + λ|w_pin - t|²
/// for a growing ladder of weights, then snaps it exactly. The rounds are
/// deliberately short: the wake of the drag is a usefully crude start for
/// the main phase, not a converged map.
fn penalty_phase(
    start: PLMap,
    kind: FunctionalKind,
    target: Complex64,
    opts: &OptimizerParams,
) -> Result<(PLMap, usize)> {
    let mesh = start.mesh_arc();
    let pin = mesh
        .pinned_index()
        .expect("penalty phase runs only on pinned meshes");
    let free: Vec<usize> = (0..mesh.vertex_count())
        .filter(|&v| !mesh.is_boundary(v))
        .collect();

    let mut current = start;
    let mut weight = PENALTY_INITIAL_WEIGHT;
    for round in 1..=PENALTY_MAX_ROUNDS {
        let objective = MapObjective {
            template: &current,
            free: free.clone(),
            kind,
            penalty: Some(PinPenalty {
                vertex: pin,
                target,
                weight,
            }),
        };
        let outcome = minimize(
            &objective,
            objective.x0(),
            &opts.lbfgs(PENALTY_ROUND_ITERATIONS),
        );
        let next = objective.unpack(&outcome.x);
        current = next;

        if (current.image(pin) - target).norm() <= PIN_SNAP_TOLERANCE {
            let mut images = current.images().to_vec();
            images[pin] = target;
            let snapped = PLMap::new(
                Arc::clone(&mesh),
                images,
                current.boundary_condition().clone(),
                Some(target),
            )?;
            if field(&snapped).min_jacobian() > 0.0 {
                return Ok((snapped, round));
            }
        }
        weight *= PENALTY_GROWTH;
    }
    Err(Error::InfeasibleStart(format!(
        "pinned vertex stalled {:.3e} away from its target after {PENALTY_MAX_ROUNDS} penalty rounds",
        (current.image(pin) - target).norm()
    )))
}

fn main_phase(
    template: &PLMap,
    kind: FunctionalKind,
    opts: &OptimizerParams,
) -> (PLMap, lbfgs::LbfgsOutcome) {
    let free: Vec<usize> = (0..template.mesh().vertex_count())
        .filter(|&v| template.is_free(v))
        .collect();
    let objective = MapObjective {
        template,
        free,
        kind,
        penalty: None,
    };
    let outcome = minimize(&objective, objective.x0(), &opts.lbfgs(opts.max_iterations));
    (objective.unpack(&outcome.x), outcome)
}

fn build_report(
    map: PLMap,
    kind: FunctionalKind,
    outcome: lbfgs::LbfgsOutcome,
    penalty_rounds: usize,
) -> Result<SolveReport> {
    let report = energy(&map, kind)?;
    let min_jacobian = field(&map).min_jacobian();
    let residuals = if map.mesh().kind() == DomainKind::Disk
        && matches!(kind, FunctionalKind::Power(_))
    {
        match standard_test_fields(map.mesh()) {
            Ok(bank) => inner_variation_residuals(&map, kind.p(), &bank)?,
            Err(Error::InvalidTestField(_)) => Vec::new(),
            Err(e) => return Err(e),
        }
    } else {
        Vec::new()
    };
    Ok(SolveReport {
        map,
        energy: report,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: outcome.gradient_norm,
        line_search_failed: outcome.line_search_failed,
        min_jacobian,
        initial_energy: outcome.trace[0],
        energy_trace: outcome.trace,
        penalty_rounds,
        inner_variation_residuals: residuals,
    })
}

/// Builds the mesh a [`SolveConfig`] asks for: pinned at the origin on the
/// forward side, at the target on the inverse side, graded toward the pin.
pub fn build_solve_mesh(config: &SolveConfig) -> Result<TriMesh> {
    config.validate()?;
    build_disk_mesh(
        config.mesh.target_edge_length,
        config.mesh.grading_exponent,
        config.pin_vertex(),
    )
}

/// Full pipeline: mesh, seeded start, penalty phase if the pin is not yet
/// exact, then the main minimization.
pub fn solve(config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    let mesh = Arc::new(build_solve_mesh(config)?);
    solve_on_mesh(config, mesh)
}

/// Same pipeline on a caller-provided mesh (refinement studies build their
/// own). The mesh must be pinned at [`SolveConfig::pin_vertex`].
pub fn solve_on_mesh(config: &SolveConfig, mesh: Arc<TriMesh>) -> Result<SolveReport> {
    config.validate()?;
    let expected = config.pin_vertex();
    match mesh.pin_location() {
        Some(p) if p == expected => {}
        other => {
            return Err(Error::MeshInvariant(format!(
                "solve mesh pinned at {other:?}, expected {expected}"
            )))
        }
    }
    let target = config.pin_image();
    let kind = config.effective_kind();
    let (mut start, exact) = initial_map(Arc::clone(&mesh), target)?;
    if config.perturbation > 0.0 {
        start = jitter_map(&start, config.seed, config.perturbation)?;
    }
    let (template, penalty_rounds) = if exact {
        (start, 0)
    } else {
        penalty_phase(start, kind, target, &config.optimizer)?
    };
    let (map, outcome) = main_phase(&template, kind, &config.optimizer);
    build_report(map, kind, outcome, penalty_rounds)
}

/// Minimizes `kind` from a given feasible start, freezing the boundary and
/// the pinned vertex exactly where the start puts them. This is the driver
/// for prescribed-boundary problems and warm-started refinement studies.
pub fn solve_problem(
    initial: &PLMap,
    kind: FunctionalKind,
    opts: &OptimizerParams,
) -> Result<SolveReport> {
    kind.validate()?;
    opts.validate()?;
    let start_jacobian = field(initial).min_jacobian();
    if start_jacobian <= 0.0 {
        return Err(Error::InfeasibleStart(format!(
            "initial map has min Jacobian {start_jacobian:.3e}"
        )));
    }
    let (map, outcome) = main_phase(initial, kind, opts);
    build_report(map, kind, outcome, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{grotzsch_problem, random_feasible_map};

    fn coarse_config(p: f64, t: Complex64) -> SolveConfig {
        let mut config = SolveConfig::power(p, t);
        config.mesh.target_edge_length = 0.2;
        config.mesh.grading_exponent = 0.0;
        config
    }

    #[test]
    fn zero_target_solves_at_the_exact_identity() {
        let config = coarse_config(2.0, Complex64::new(0.0, 0.0));
        let report = solve(&config).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.penalty_rounds, 0);
        assert_eq!(report.energy.value, 1.0);
        assert_eq!(report.map.max_displacement(), 0.0);
        assert!(report
            .inner_variation_residuals
            .iter()
            .all(|&r| r <= 1e-13));
    }

    #[test]
    fn pinned_solve_reaches_target_exactly_and_decreases_energy() {
        let t = Complex64::new(0.3, 0.0);
        let config = coarse_config(2.0, t);
        let report = solve(&config).unwrap();
        assert!(report.converged, "gradient norm {}", report.gradient_norm);
        let pin = report.map.mesh().pinned_index().unwrap();
        assert_eq!(report.map.image(pin), t);
        assert!(report.min_jacobian > 0.0);
        assert!(report
            .energy_trace
            .windows(2)
            .all(|w| w[1] < w[0]));
        assert!(report.energy.value > 1.0);
        for (i, v) in report.map.mesh().vertices().iter().enumerate() {
            if report.map.mesh().is_boundary(i) {
                assert_eq!(report.map.image(i), *v);
            }
        }
    }

    #[test]
    fn inverse_side_agrees_with_forward_energy() {
        let t = Complex64::new(0.3, 0.0);
        let forward = solve(&coarse_config(2.0, t)).unwrap();
        let mut config = coarse_config(2.0, t);
        config.side = Side::InverseH;
        let inverse = solve(&config).unwrap();
        assert!(inverse.converged);
        let pin = inverse.map.mesh().pinned_index().unwrap();
        assert_eq!(inverse.map.image(pin), Complex64::new(0.0, 0.0));
        // the Jacobian-weighted inverse energy equals the forward energy at
        // the common minimizer; coarse meshes agree to a few percent
        let rel = (inverse.energy.value - forward.energy.value).abs() / forward.energy.value;
        assert!(rel < 0.05, "forward {} inverse {}", forward.energy.value, inverse.energy.value);
    }

    #[test]
    fn penalty_phase_drags_pin_from_identity() {
        let mesh = Arc::new(
            build_disk_mesh(0.2, 0.0, Complex64::new(0.0, 0.0)).unwrap(),
        );
        let start = PLMap::identity(Arc::clone(&mesh));
        let target = Complex64::new(0.3, 0.0);
        let (map, rounds) = penalty_phase(
            start,
            FunctionalKind::Power(2.0),
            target,
            &OptimizerParams::default(),
        )
        .unwrap();
        assert!(rounds >= 1);
        assert_eq!(map.image(mesh.pinned_index().unwrap()), target);
        assert_eq!(map.pin_target(), Some(target));
        assert!(field(&map).min_jacobian() > 0.0);
    }

    #[test]
    fn grotzsch_solve_recovers_the_affine_minimizer() {
        let problem = grotzsch_problem(2.0, 0.2).unwrap();
        let start = jitter_map(&problem.minimizer, 3, 0.3).unwrap();
        assert!(start.max_displacement() > 0.0);
        let mut opts = OptimizerParams::default();
        opts.gradient_tolerance = 1e-9;
        let report = solve_problem(&start, FunctionalKind::Power(2.0), &opts).unwrap();
        assert!(report.converged);
        let deviation = report
            .map
            .images()
            .iter()
            .zip(problem.minimizer.images())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(deviation < 1e-5, "deviation {deviation}");
        assert!((report.energy.value - problem.exact_energy(2.0)).abs() < 1e-8);
    }

    #[test]
    fn rotation_equivariance_of_inverse_side_solutions() {
        // the inverse side meshes at the pin itself, and those meshes are
        // exact rotations of each other, so the two discrete problems are
        // conjugate and the solved energies must coincide up to solver gap.
        // (The forward side always meshes with the pin at the origin; its
        // ring counts are not 4-fold symmetric, so rotating the target there
        // changes the discretization error at O(h²) and equivariance is only
        // approximate.)
        let t = 0.3;
        let mut ca = coarse_config(2.0, Complex64::new(t, 0.0));
        ca.side = Side::InverseH;
        let mut cb = coarse_config(2.0, Complex64::new(0.0, t));
        cb.side = Side::InverseH;
        let a = solve(&ca).unwrap();
        let b = solve(&cb).unwrap();
        assert!(a.converged && b.converged);
        assert!(
            (a.energy.value - b.energy.value).abs() < 1e-9,
            "E(0.3) = {:.12e} ({} its), E(0.3i) = {:.12e} ({} its)",
            a.energy.value,
            a.iterations,
            b.energy.value,
            b.iterations
        );
        let rot = Complex64::i();
        let worst = a
            .map
            .images()
            .iter()
            .zip(b.map.images())
            .map(|(wa, wb)| (rot * wa - wb).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "worst vertex disagreement {worst}");
    }

    #[test]
    fn conjugation_symmetry_of_solutions() {
        let report = solve(&coarse_config(2.0, Complex64::new(0.3, 0.0))).unwrap();
        let mesh = report.map.mesh();
        let key = |v: Complex64| ((v.re + 0.0).to_bits(), (v.im + 0.0).to_bits());
        let index: std::collections::HashMap<_, _> = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &v)| (key(v), i))
            .collect();
        let mut worst: f64 = 0.0;
        for (i, &v) in mesh.vertices().iter().enumerate() {
            let j = *index.get(&key(v.conj())).expect("mirror vertex exists");
            worst = worst.max((report.map.image(j) - report.map.image(i).conj()).norm());
        }
        assert!(worst <= 1e-6, "conjugation asymmetry {worst}");
    }

    #[test]
    fn line_search_never_accepts_an_infeasible_iterate() {
        let mesh = Arc::new(
            build_disk_mesh(0.3, 0.0, Complex64::new(0.0, 0.0)).unwrap(),
        );
        for seed in 0..50 {
            let start = random_feasible_map(Arc::clone(&mesh), seed, 0.4).unwrap();
            let mut opts = OptimizerParams::default();
            opts.max_iterations = 5;
            let report = solve_problem(&start, FunctionalKind::Power(2.0), &opts).unwrap();
            assert!(report.min_jacobian > 0.0, "seed {seed}");
            assert!(
                report.energy.value <= report.initial_energy,
                "seed {seed} increased the energy"
            );
        }
    }

    #[test]
    fn jitter_is_deterministic_per_seed() {
        let mesh = Arc::new(
            build_disk_mesh(0.25, 0.0, Complex64::new(0.0, 0.0)).unwrap(),
        );
        let base = PLMap::identity(Arc::clone(&mesh));
        let a = jitter_map(&base, 9, 0.2).unwrap();
        let b = jitter_map(&base, 9, 0.2).unwrap();
        let c = jitter_map(&base, 10, 0.2).unwrap();
        assert_eq!(a.images(), b.images());
        assert_ne!(a.images(), c.images());
        assert!(field(&a).min_jacobian() > 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let mut config = SolveConfig::power(2.0, Complex64::new(0.95, 0.0));
        assert!(config.validate().is_err());
        config.pin_target = Complex64::new(0.3, 0.0);
        assert!(config.validate().is_ok());
        config.optimizer.gradient_tolerance = 0.0;
        assert!(config.validate().is_err());
        config.optimizer.gradient_tolerance = 1e-7;
        config.mesh.grading_exponent = -1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn initial_map_hits_target_or_reports_inexact_pin() {
        let mesh = Arc::new(
            build_disk_mesh(0.1, 0.0, Complex64::new(0.0, 0.0)).unwrap(),
        );
        let target = Complex64::new(0.3, 0.0);
        let (map, exact) = initial_map(Arc::clone(&mesh), target).unwrap();
        assert!(field(&map).min_jacobian() > 0.0);
        let pin = mesh.pinned_index().unwrap();
        if exact {
            assert_eq!(map.image(pin), target);
            assert_eq!(map.pin_target(), Some(target));
        } else {
            assert!(map.pin_target().is_none());
        }
    }
}
