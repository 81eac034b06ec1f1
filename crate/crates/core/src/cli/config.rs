//! Flat key-value run configuration.
//!
//! The format is one `key = value` pair per line, with `#` starting a
//! comment line and dotted prefixes standing in for sections
//! (`mesh.target_edge_length`, `optimizer.memory`, `study.p_list`).
//! Unknown keys are hard errors: a silently ignored typo in a tolerance
//! key would invalidate a whole run.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::energy::FunctionalKind;
use crate::experiments::DEFAULT_WINDOW;
use crate::optimizer::{MeshParams, OptimizerParams, Side, SolveConfig};
use crate::{Error, Result};

/// Which problem family a run sets up. The disk pin problem is the
/// default; the other scenarios reuse the same solver on prescribed
/// boundary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    DiskPin,
    Grotzsch { stretch: f64 },
    NitscheAnnulus { r_inner: f64, s_inner: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::DiskPin => "disk_pin",
            Scenario::Grotzsch { .. } => "grotzsch",
            Scenario::NitscheAnnulus { .. } => "nitsche_annulus",
        }
    }
}

/// Study-specific knobs; each subcommand reads the subset it needs and
/// ignores the rest.
#[derive(Debug, Clone, Default)]
pub struct StudyParams {
    pub p_list: Option<Vec<f64>>,
    pub refine_radii: Option<Vec<f64>>,
    pub window: Option<f64>,
    pub q_probe: Option<f64>,
    pub pole_radii: Option<Vec<f64>>,
}

impl StudyParams {
    pub fn window(&self) -> f64 {
        self.window.unwrap_or(DEFAULT_WINDOW)
    }
}

/// A parsed and validated run configuration: the solve it describes, the
/// study knobs, optional input files, and the raw entries in file order
/// for the manifest echo.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub solve: SolveConfig,
    pub study: StudyParams,
    pub mesh_file: Option<PathBuf>,
    pub map_file: Option<PathBuf>,
    pub entries: Vec<(String, String)>,
}

fn config_error(key: &str, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}` (line {line}): {message}"))
}

fn parse_number<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| config_error(key, line, format!("cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, line: usize, value: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(config_error(key, line, "empty list"));
    }
    items
        .into_iter()
        .map(|item| parse_number::<f64>(key, line, item))
        .collect()
}

fn parse_pin(key: &str, line: usize, value: &str) -> Result<Complex64> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(config_error(
            key,
            line,
            format!("expected two coordinates `re im`, got `{value}`"),
        ));
    }
    Ok(Complex64::new(
        parse_number(key, line, parts[0])?,
        parse_number(key, line, parts[1])?,
    ))
}

/// Reads and validates a configuration file. Every failure is an
/// [`Error::Config`] whose message names the offending key and line.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let number = index + 1;
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {number}: expected `key = value`, got `{line}`"
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "line {number}: empty key or value in `{line}`"
            )));
        }
        if !seen.insert(key.clone()) {
            return Err(config_error(&key, number, "duplicate key"));
        }
        entries.push((key, value, number));
    }

    let mut scenario_name = "disk_pin".to_string();
    let mut kind_name = "power".to_string();
    let mut p = 2.0;
    let mut side = Side::ForwardF;
    let mut pin = Complex64::new(0.0, 0.0);
    let mut seed = 0u64;
    let mut perturbation = 0.0;
    let mut mesh = MeshParams::default();
    let mut optimizer = OptimizerParams::default();
    let mut study = StudyParams::default();
    let mut mesh_file = None;
    let mut map_file = None;
    let mut stretch: f64 = 2.0;
    let mut r_inner = None;
    let mut s_inner = None;

    for (key, value, line) in &entries {
        let line = *line;
        match key.as_str() {
            "scenario" => scenario_name = value.clone(),
            "kind" => kind_name = value.clone(),
            "p" => p = parse_number(key, line, value)?,
            "side" => {
                side = match value.as_str() {
                    "forward_f" => Side::ForwardF,
                    "inverse_h" => Side::InverseH,
                    other => {
                        return Err(config_error(
                            key,
                            line,
                            format!("unknown side `{other}` (forward_f | inverse_h)"),
                        ))
                    }
                }
            }
            "pin" => pin = parse_pin(key, line, value)?,
            "seed" => seed = parse_number(key, line, value)?,
            "perturbation" => perturbation = parse_number(key, line, value)?,
            "mesh.target_edge_length" => {
                mesh.target_edge_length = parse_number(key, line, value)?
            }
            "mesh.grading_exponent" => mesh.grading_exponent = parse_number(key, line, value)?,
            "mesh.file" => mesh_file = Some(PathBuf::from(value)),
            "map.file" => map_file = Some(PathBuf::from(value)),
            "optimizer.max_iterations" => {
                optimizer.max_iterations = parse_number(key, line, value)?
            }
            "optimizer.gradient_tolerance" => {
                optimizer.gradient_tolerance = parse_number(key, line, value)?
            }
            "optimizer.line_search_shrink" => {
                optimizer.line_search_shrink = parse_number(key, line, value)?
            }
            "optimizer.memory" => optimizer.memory = parse_number(key, line, value)?,
            "study.p_list" => study.p_list = Some(parse_list(key, line, value)?),
            "study.refine_radii" => study.refine_radii = Some(parse_list(key, line, value)?),
            "study.window" => study.window = Some(parse_number(key, line, value)?),
            "study.q_probe" => study.q_probe = Some(parse_number(key, line, value)?),
            "study.pole_radii" => study.pole_radii = Some(parse_list(key, line, value)?),
            "scenario.stretch" => stretch = parse_number(key, line, value)?,
            "scenario.r_inner" => r_inner = Some(parse_number(key, line, value)?),
            "scenario.s_inner" => s_inner = Some(parse_number(key, line, value)?),
            other => return Err(config_error(other, line, "unknown key")),
        }
    }

    let kind = match kind_name.as_str() {
        "power" => FunctionalKind::Power(p),
        "inverse_power" => FunctionalKind::InversePower(p),
        "exponential" => FunctionalKind::Exponential(p),
        other => {
            return Err(Error::Config(format!(
                "key `kind`: unknown functional `{other}` (power | inverse_power | exponential)"
            )))
        }
    };

    let scenario = match scenario_name.as_str() {
        "disk_pin" => Scenario::DiskPin,
        "grotzsch" => {
            if !(stretch > 0.0 && stretch.is_finite()) {
                return Err(Error::Config(format!(
                    "key `scenario.stretch`: stretch {stretch} must be positive"
                )));
            }
            Scenario::Grotzsch { stretch }
        }
        "nitsche_annulus" => {
            let r_inner: f64 = r_inner.ok_or_else(|| {
                Error::Config("key `scenario.r_inner`: required for nitsche_annulus".into())
            })?;
            let s_inner: f64 = s_inner.ok_or_else(|| {
                Error::Config("key `scenario.s_inner`: required for nitsche_annulus".into())
            })?;
            if !(0.0 < r_inner && r_inner < 1.0 && 0.0 < s_inner && s_inner < 1.0) {
                return Err(Error::Config(format!(
                    "keys `scenario.r_inner`/`scenario.s_inner`: radii \
                     ({r_inner} -> {s_inner}) must lie in (0, 1)"
                )));
            }
            Scenario::NitscheAnnulus { r_inner, s_inner }
        }
        other => {
            return Err(Error::Config(format!(
                "key `scenario`: unknown scenario `{other}` \
                 (disk_pin | grotzsch | nitsche_annulus)"
            )))
        }
    };

    let solve = SolveConfig {
        kind,
        side,
        pin_target: pin,
        mesh,
        optimizer,
        seed,
        perturbation,
    };
    solve.validate().map_err(|e| Error::Config(e.to_string()))?;

    Ok(RunConfig {
        scenario,
        solve,
        study,
        mesh_file,
        map_file,
        entries: entries
            .into_iter()
            .map(|(key, value, _)| (key, value))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(body: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(body.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn parses_a_full_solve_config() {
        let file = write_config(
            "# pinned solve\n\
             kind = power\n\
             p = 3\n\
             side = inverse_h\n\
             pin = 0.3 -0.1\n\
             seed = 7\n\
             mesh.target_edge_length = 0.2\n\
             mesh.grading_exponent = 1.0\n\
             optimizer.max_iterations = 500\n\
             optimizer.memory = 40\n\
             study.p_list = 1.5, 2, 4\n",
        );
        let config = load_config(file.path()).unwrap();
        assert_eq!(config.scenario, Scenario::DiskPin);
        assert!(matches!(config.solve.kind, FunctionalKind::Power(p) if p == 3.0));
        assert_eq!(config.solve.side, Side::InverseH);
        assert_eq!(config.solve.pin_target, Complex64::new(0.3, -0.1));
        assert_eq!(config.solve.seed, 7);
        assert_eq!(config.solve.mesh.target_edge_length, 0.2);
        assert_eq!(config.solve.optimizer.memory, 40);
        assert_eq!(config.study.p_list.as_deref(), Some(&[1.5, 2.0, 4.0][..]));
        assert_eq!(config.entries.len(), 10);
        assert_eq!(config.entries[0].0, "kind");
    }

    #[test]
    fn defaults_describe_the_identity_problem() {
        let file = write_config("p = 2\n");
        let config = load_config(file.path()).unwrap();
        assert_eq!(config.scenario, Scenario::DiskPin);
        assert_eq!(config.solve.pin_target, Complex64::new(0.0, 0.0));
        assert_eq!(config.solve.side, Side::ForwardF);
        assert_eq!(config.solve.mesh.target_edge_length, 0.1);
        assert_eq!(config.study.window(), DEFAULT_WINDOW);
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let file = write_config("optimzer.memory = 5\n");
        let err = load_config(file.path()).unwrap_err();
        let message = err.to_string();
        assert!(
            message.contains("optimzer.memory") && message.contains("unknown key"),
            "{message}"
        );
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        let file = write_config("p = 2\np = 3\n");
        assert!(load_config(file.path())
            .unwrap_err()
            .to_string()
            .contains("duplicate"));

        let file = write_config("p 2\n");
        assert!(load_config(file.path())
            .unwrap_err()
            .to_string()
            .contains("key = value"));
    }

    #[test]
    fn semantic_validation_is_a_config_error() {
        let file = write_config("pin = 0.99 0\n");
        assert!(matches!(
            load_config(file.path()),
            Err(Error::Config(message)) if message.contains("too close to the boundary")
        ));

        let file = write_config("kind = power\np = 1\n");
        assert!(matches!(
            load_config(file.path()),
            Err(Error::Config(message)) if message.contains("evaluation only")
        ));
    }

    #[test]
    fn nitsche_scenario_requires_both_radii() {
        let file = write_config("scenario = nitsche_annulus\nscenario.r_inner = 0.4\n");
        let err = load_config(file.path()).unwrap_err();
        assert!(err.to_string().contains("scenario.s_inner"));
    }
}
