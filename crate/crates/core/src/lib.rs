//! Mesh-based minimization of L^p mean distortion on the unit disk.
//!
//! The problem: among orientation-preserving piecewise-linear maps of the
//! disk that fix the boundary pointwise and send a prescribed interior
//! point (the pin) to a prescribed target, minimize the p-th mean of the
//! distortion
//!
//!   IK(z, f) = (|f_z|² + |f_z̄|²) / (|f_z|² − |f_z̄|²),
//!
//! i.e. the functional (1/π_mesh) Σ_T area(T) · IK_T^p, together with its
//! inverse-side, exponential and Sobolev relatives. The crate provides the
//! triangulations, the discrete Wirtinger calculus, the energies and their
//! exact gradients, a quasi-Newton solver with an orientation barrier,
//! Ahlfors-Hopf diagnostics (Cauchy-Riemann residuals, pole fitting, a
//! discrete Cauchy transform), reference maps with closed-form distortion
//! for calibration, and the refinement/sweep experiments built on top.

pub mod calculus;
pub mod cli;
pub mod energy;
pub mod experiments;
pub mod hopf;
pub mod mesh;
pub mod optimizer;
pub mod oracle;
pub mod sum;

pub use calculus::{PLMap, WirtingerField};
pub use energy::{EnergyReport, FunctionalKind};
pub use hopf::{HopfField, PoleFit};
pub use mesh::{DomainKind, MeshStatistics, TriMesh};
pub use optimizer::{SolveConfig, SolveReport};

use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across mesh construction, calculus,
/// optimization and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate triangle {index}: area {area:e} below threshold")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("Beltrami coefficient undefined: f_z = 0 with f_z̄ = {fzbar}")]
    UndefinedBeltrami { fzbar: Complex64 },

    #[error("mesh invariant violated: {0}")]
    MeshInvariant(String),

    #[error("map invariant violated: {0}")]
    MapInvariant(String),

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("line search failed: {0}")]
    LineSearchFailure(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("test field invalid: {0}")]
    InvalidTestField(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("oracle calibration failed: {0}")]
    Calibration(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
