//! Command-line pipeline: configs in, reproducible artifacts out.
//!
//! Each subcommand reads one flat config file, runs the corresponding
//! solve or study, and writes its outputs plus a manifest into the output
//! directory. Numeric output uses fixed-precision formatting and
//! deterministic ordering, so reruns with the same config and seed are
//! byte-identical; the manifest's wall time is the single exception.
//!
//! Exit codes: 0 success (solves additionally require convergence), 2
//! config error, 3 solver failure, 1 calibration failure in `oracle`.

pub mod config;

pub use config::{load_config, RunConfig, Scenario, StudyParams};

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calculus::{load_map, save_map};
use crate::energy::write_per_triangle_csv;
use crate::experiments::{
    blowup_study, exponential_study, sweep_p, validate_refine_radii, validate_window,
    BlowupResult, ExponentialStudy, SweepResult, PROBE_FACTOR,
};
use crate::hopf::{distortion_excess_transform, geometric_radii, synthetic_pole_calibration, HopfField};
use crate::mesh::{load_mesh, mesh_statistics, save_mesh};
use crate::optimizer::{
    build_solve_mesh, jitter_map, solve, solve_on_mesh, solve_problem, SolveReport,
};
use crate::oracle::{grotzsch_problem, nitsche_scenario, run_calibration, CalibrationRow};
use crate::{Error, FunctionalKind, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliCommand {
    Solve,
    Sweep,
    Blowup,
    Hopf,
    Oracle,
}

impl CliCommand {
    pub fn name(&self) -> &'static str {
        match self {
            CliCommand::Solve => "solve",
            CliCommand::Sweep => "sweep",
            CliCommand::Blowup => "blowup",
            CliCommand::Hopf => "hopf",
            CliCommand::Oracle => "oracle",
        }
    }
}

/// One invocation of the tool, after argument parsing.
#[derive(Debug, Clone)]
pub struct CliRequest {
    pub command: CliCommand,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub dry_run: bool,
}

/// Record of one run: what produced it, what it wrote, how long it took.
/// The wall time is the only field that varies between identical reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Raw config entries in file order.
    pub config: Vec<(String, String)>,
    /// SHA-256 of the mesh file backing the run, when one exists.
    pub mesh_hash: Option<String>,
    pub wall_time_seconds: f64,
    /// Output file names in the order they were written.
    pub outputs: Vec<String>,
}

/// Runs one command end to end and maps the outcome to an exit code.
pub fn run(request: &CliRequest) -> i32 {
    if let Some(threads) = request.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut config = match load_config(&request.config_path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Some(seed) = request.seed {
        config.solve.seed = seed;
    }
    let outcome = match request.command {
        CliCommand::Solve => cmd_solve(&config, &request.out_dir, request.dry_run),
        CliCommand::Sweep => cmd_sweep(&config, &request.out_dir, request.dry_run),
        CliCommand::Blowup => cmd_blowup(&config, &request.out_dir, request.dry_run),
        CliCommand::Hopf => cmd_hopf(&config, &request.out_dir, request.dry_run),
        CliCommand::Oracle => cmd_oracle(&config, &request.out_dir, request.dry_run),
    };
    match outcome {
        Ok(code) => code,
        Err(Error::Config(message)) => {
            eprintln!("config error: {message}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            let body = serde_json::json!({ "error": e.to_string() });
            if std::fs::create_dir_all(&request.out_dir).is_ok() {
                let text = serde_json::to_string_pretty(&body).unwrap_or_default() + "\n";
                let _ = std::fs::write(request.out_dir.join("error.json"), text);
            }
            if request.command == CliCommand::Oracle {
                1
            } else {
                3
            }
        }
    }
}

/// Accumulates the output files of one command and closes the run by
/// writing the manifest; every listed file must exist and be non-empty.
struct Artifacts {
    dir: PathBuf,
    outputs: Vec<String>,
    mesh_hash: Option<String>,
    started: Instant,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            mesh_hash: None,
            started: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn hash_mesh_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(2 * digest.len());
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        self.mesh_hash = Some(hex);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.path(name);
        write_json_file(&path, value)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn finish(self, command: CliCommand, config: &RunConfig) -> Result<()> {
        for name in &self.outputs {
            let path = self.dir.join(name);
            let metadata = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?;
            if metadata.len() == 0 {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::WriteZero, "listed output is empty"),
                ));
            }
        }
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.name().to_string(),
            config: config.entries.clone(),
            mesh_hash: self.mesh_hash,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        write_json_file(&self.dir.join("manifest.json"), &to_json(&manifest)?)
    }
}

fn write_json_file(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParameter(format!("json serialization failed: {e}")))?
        + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    serde_json::to_value(value)
        .map_err(|e| Error::InvalidParameter(format!("json serialization failed: {e}")))
}

fn cmd_solve(config: &RunConfig, outdir: &Path, dry_run: bool) -> Result<i32> {
    if dry_run {
        let (vertices, triangles) = match config.scenario {
            Scenario::DiskPin => {
                let mesh = match &config.mesh_file {
                    Some(path) => load_mesh(path)?,
                    None => build_solve_mesh(&config.solve)?,
                };
                let stats = mesh_statistics(&mesh);
                (stats.vertex_count, stats.triangle_count)
            }
            Scenario::Grotzsch { stretch } => {
                let problem = grotzsch_problem(stretch, config.solve.mesh.target_edge_length)?;
                (problem.mesh.vertex_count(), problem.mesh.triangle_count())
            }
            Scenario::NitscheAnnulus { r_inner, s_inner } => {
                let (mesh, _) =
                    nitsche_scenario(r_inner, s_inner, config.solve.mesh.target_edge_length)?;
                (mesh.vertex_count(), mesh.triangle_count())
            }
        };
        println!("dry run ok: {vertices} vertices, {triangles} triangles");
        return Ok(0);
    }

    let mut artifacts = Artifacts::new(outdir)?;
    let (report, exact_energy) = run_solve(config)?;

    let mesh_path = artifacts.path("mesh.txt");
    save_mesh(report.map.mesh(), &mesh_path)?;
    artifacts.hash_mesh_file(&mesh_path)?;
    let map_path = artifacts.path("map.txt");
    save_map(&report.map, &map_path)?;
    let triangles_path = artifacts.path("triangles.csv");
    write_per_triangle_csv(&report.map, &report.energy, &triangles_path)?;

    let mut body = serde_json::json!({
        "scenario": config.scenario.name(),
        "config": to_json(&config.solve)?,
        "convergence_flag": report.converged,
        "summary": report.summary_json(),
        "energy_trace": report.energy_trace,
    });
    if let Some(exact) = exact_energy {
        body["exact_energy"] = serde_json::json!(exact);
    }
    artifacts.write_json("report.json", &body)?;
    artifacts.finish(CliCommand::Solve, config)?;
    println!(
        "solve: converged={} energy={:.12e} iterations={}",
        report.converged, report.energy.value, report.iterations
    );
    Ok(if report.converged { 0 } else { 3 })
}

fn run_solve(config: &RunConfig) -> Result<(SolveReport, Option<f64>)> {
    match config.scenario {
        Scenario::DiskPin => {
            let report = match &config.mesh_file {
                Some(path) => solve_on_mesh(&config.solve, Arc::new(load_mesh(path)?))?,
                None => solve(&config.solve)?,
            };
            Ok((report, None))
        }
        Scenario::Grotzsch { stretch } => {
            let problem = grotzsch_problem(stretch, config.solve.mesh.target_edge_length)?;
            let exact = matches!(config.solve.effective_kind(), FunctionalKind::Power(_))
                .then(|| problem.exact_energy(config.solve.kind.p()));
            let start = if config.solve.perturbation > 0.0 {
                jitter_map(&problem.minimizer, config.solve.seed, config.solve.perturbation)?
            } else {
                problem.minimizer
            };
            let report =
                solve_problem(&start, config.solve.effective_kind(), &config.solve.optimizer)?;
            Ok((report, exact))
        }
        Scenario::NitscheAnnulus { r_inner, s_inner } => {
            let (_, start) =
                nitsche_scenario(r_inner, s_inner, config.solve.mesh.target_edge_length)?;
            let start = if config.solve.perturbation > 0.0 {
                jitter_map(&start, config.solve.seed, config.solve.perturbation)?
            } else {
                start
            };
            let report =
                solve_problem(&start, config.solve.effective_kind(), &config.solve.optimizer)?;
            Ok((report, None))
        }
    }
}

fn require_disk_pin(config: &RunConfig, command: &str) -> Result<()> {
    if config.scenario != Scenario::DiskPin {
        return Err(Error::Config(format!(
            "key `scenario`: the {command} command supports disk_pin only"
        )));
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, outdir: &Path, dry_run: bool) -> Result<i32> {
    require_disk_pin(config, "sweep")?;
    let p_list = config
        .study
        .p_list
        .as_deref()
        .ok_or_else(|| Error::Config("key `study.p_list`: required for the sweep command".into()))?;
    if dry_run {
        let mesh = build_solve_mesh(&config.solve)?;
        println!(
            "dry run ok: {} exponents on {} vertices",
            p_list.len(),
            mesh.vertex_count()
        );
        return Ok(0);
    }

    let mut artifacts = Artifacts::new(outdir)?;
    let result = sweep_p(&config.solve, p_list)?;

    let mesh_path = artifacts.path("base_mesh.txt");
    save_mesh(&build_solve_mesh(&config.solve)?, &mesh_path)?;
    artifacts.hash_mesh_file(&mesh_path)?;
    artifacts.write_text("sweep.csv", &sweep_csv(&result))?;
    artifacts.write_json("sweep.json", &to_json(&result)?)?;
    artifacts.finish(CliCommand::Sweep, config)?;

    let all_converged = result.rows.iter().all(|row| row.converged);
    println!(
        "sweep: {} exponents, converged={}",
        result.rows.len(),
        all_converged
    );
    Ok(if all_converged { 0 } else { 3 })
}

fn sweep_csv(result: &SweepResult) -> String {
    let mut text = String::from(
        "p,energy,gradient_norm,iterations,converged,w11_distance,\
         max_displacement,ik_mean,ik_stddev\n",
    );
    for row in &result.rows {
        text += &format!(
            "{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            row.p,
            row.energy,
            row.gradient_norm,
            row.iterations,
            row.converged,
            row.w11_distance,
            row.max_displacement,
            row.ik_mean,
            row.ik_stddev
        );
    }
    text
}

fn cmd_blowup(config: &RunConfig, outdir: &Path, dry_run: bool) -> Result<i32> {
    require_disk_pin(config, "blowup")?;
    let radii = config.study.refine_radii.as_deref().ok_or_else(|| {
        Error::Config("key `study.refine_radii`: required for the blowup command".into())
    })?;
    validate_refine_radii(radii).map_err(|e| Error::Config(e.to_string()))?;
    validate_window(config.study.window()).map_err(|e| Error::Config(e.to_string()))?;
    if dry_run {
        let mesh = build_solve_mesh(&config.solve)?;
        println!(
            "dry run ok: {} refinement levels on {} base vertices",
            radii.len() + 1,
            mesh.vertex_count()
        );
        return Ok(0);
    }

    let mut artifacts = Artifacts::new(outdir)?;
    let mesh_path = artifacts.path("base_mesh.txt");
    save_mesh(&build_solve_mesh(&config.solve)?, &mesh_path)?;
    artifacts.hash_mesh_file(&mesh_path)?;

    let all_converged = match config.solve.kind {
        FunctionalKind::Exponential(p) => {
            let q_probe = config.study.q_probe.unwrap_or(PROBE_FACTOR * p);
            let study = exponential_study(&config.solve, q_probe, radii, config.study.window())?;
            artifacts.write_text("exponential.csv", &exponential_csv(&study))?;
            artifacts.write_json("exponential.json", &to_json(&study)?)?;
            study.levels.iter().all(|level| level.converged)
        }
        _ => {
            let study = blowup_study(&config.solve, radii, config.study.window())?;
            artifacts.write_text("blowup.csv", &blowup_csv(&study))?;
            artifacts.write_json("blowup.json", &to_json(&study)?)?;
            study.levels.iter().all(|level| level.converged)
        }
    };
    artifacts.finish(CliCommand::Blowup, config)?;
    println!(
        "blowup: {} levels, converged={}",
        radii.len() + 1,
        all_converged
    );
    Ok(if all_converged { 0 } else { 3 })
}

fn radius_field(radius: Option<f64>) -> String {
    match radius {
        Some(r) => format!("{r:.16e}"),
        None => String::new(),
    }
}

fn blowup_csv(study: &BlowupResult) -> String {
    let mut text = String::from(
        "refine_radius,vertex_count,triangle_count,local_dirichlet,ik_min,ik_max,\
         energy,gradient_norm,iterations,converged\n",
    );
    for level in &study.levels {
        text += &format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            radius_field(level.refine_radius),
            level.vertex_count,
            level.triangle_count,
            level.local_dirichlet,
            level.ik_min,
            level.ik_max,
            level.energy,
            level.gradient_norm,
            level.iterations,
            level.converged
        );
    }
    text
}

fn exponential_csv(study: &ExponentialStudy) -> String {
    let mut text = String::from(
        "refine_radius,vertex_count,triangle_count,log_local_probe,\
         log_distortion_mass,energy_log,gradient_norm,iterations,converged\n",
    );
    for level in &study.levels {
        text += &format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            radius_field(level.refine_radius),
            level.vertex_count,
            level.triangle_count,
            level.log_local_probe,
            level.log_distortion_mass,
            level.energy_log,
            level.gradient_norm,
            level.iterations,
            level.converged
        );
    }
    text
}

fn cmd_hopf(config: &RunConfig, outdir: &Path, dry_run: bool) -> Result<i32> {
    let mesh_file = config.mesh_file.as_ref().ok_or_else(|| {
        Error::Config("key `mesh.file`: required for the hopf command".into())
    })?;
    let map_file = config.map_file.as_ref().ok_or_else(|| {
        Error::Config("key `map.file`: required for the hopf command".into())
    })?;
    let mesh = Arc::new(load_mesh(mesh_file)?);
    let map = load_map(map_file, mesh.clone())?;
    if dry_run {
        println!(
            "dry run ok: {} vertices, {} triangles",
            mesh.vertex_count(),
            mesh.triangle_count()
        );
        return Ok(0);
    }

    let mut artifacts = Artifacts::new(outdir)?;
    artifacts.hash_mesh_file(mesh_file)?;
    let p = config.solve.kind.p();
    let field = HopfField::new(&map, p)?;

    let mut field_csv = String::from("tri_index,re_phi,im_phi,abs_phi\n");
    for (t, phi) in field.phi().iter().enumerate() {
        field_csv += &format!("{t},{:.16e},{:.16e},{:.16e}\n", phi.re, phi.im, phi.norm());
    }
    artifacts.write_text("hopf_field.csv", &field_csv)?;

    let residuals = field.cr_residuals();
    let transform = distortion_excess_transform(&map, p)?;
    let mut vertex_csv = String::from("vertex_index,x,y,cr_residual,re_F,im_F\n");
    for (v, z) in mesh.vertices().iter().enumerate() {
        vertex_csv += &format!(
            "{v},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            z.re, z.im, residuals[v], transform[v].re, transform[v].im
        );
    }
    artifacts.write_text("vertices.csv", &vertex_csv)?;

    let fit_body = match mesh.pin_location() {
        Some(center) => {
            let radii = match &config.study.pole_radii {
                Some(radii) => radii.clone(),
                None => geometric_radii(0.25, 0.8, 5)?,
            };
            let fit = field.pole_fit(&radii)?;
            serde_json::json!({
                "center": [center.re, center.im],
                "residue": [fit.a_minus_1.re, fit.a_minus_1.im],
                "residue_norm": fit.a_minus_1.norm(),
                "loglog_slope": fit.loglog_slope,
                "fit": to_json(&fit)?,
            })
        }
        None => serde_json::json!({
            "fit": null,
            "reason": "mesh has no pinned vertex",
        }),
    };
    artifacts.write_json("pole_fit.json", &fit_body)?;
    artifacts.finish(CliCommand::Hopf, config)?;
    println!(
        "hopf: {} triangles, max interior CR residual {:.6e}",
        mesh.triangle_count(),
        field.max_cr_residual(2.0 * config.solve.mesh.target_edge_length)
    );
    Ok(0)
}

fn cmd_oracle(config: &RunConfig, outdir: &Path, dry_run: bool) -> Result<i32> {
    if dry_run {
        println!("dry run ok: calibration battery");
        return Ok(0);
    }
    let mut artifacts = Artifacts::new(outdir)?;
    let mut rows = run_calibration()?;
    rows.extend(synthetic_pole_calibration()?);
    artifacts.write_text("calibration.csv", &calibration_csv(&rows))?;
    artifacts.write_json("calibration.json", &to_json(&rows)?)?;
    artifacts.finish(CliCommand::Oracle, config)?;
    println!("oracle: {} calibration rows, all pass", rows.len());
    Ok(0)
}

fn calibration_csv(rows: &[CalibrationRow]) -> String {
    let mut text = String::from("name,measured,expected,tolerance,pass\n");
    for row in rows {
        text += &format!(
            "{},{:.16e},{:.16e},{:.16e},{}\n",
            row.name, row.measured, row.expected, row.tolerance, row.pass
        );
    }
    text
}
