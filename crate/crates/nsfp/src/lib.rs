//! Desk-scale simulator for the nonlocal-in-time (subdiffusive)
//! Navier-Stokes-Fokker-Planck system for dilute polymers.
//!
//! The library couples a 2D incompressible pseudospectral flow solver with a
//! conservative finite-volume solver for the Maxwellian-scaled configuration
//! density on the FENE ball, driven by an L1-type discretization of the
//! nonlocal derivative `d/dt (k * [y - y0])` for Sonine kernel pairs.
//!
//! Module map:
//! * [`kernel`] - kernel tabulation, discrete Sonine resolvents, nonlocal
//!   derivatives and the Alikhanov check,
//! * [`config_space`] - FENE potential, Maxwellian quadrature table, Kramers
//!   stress in both forms, truncation operators,
//! * [`fokker_planck`] - time stepping for the scaled density with mass,
//!   sign and entropy structure,
//! * [`navier_stokes`] - spectral flow solver with Leray projection,
//! * [`driver`] - two-way coupling, diagnostics, energy report and the
//!   perturbation experiment,
//! * [`io`] / [`cli`] - config parsing, CSV/snapshot output, subcommands.

pub mod cli;
pub mod config_space;
pub mod driver;
pub mod fokker_planck;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod navier_stokes;
pub mod special;

/// 2x2 tensor in row-major layout, used for velocity gradients and stress.
pub type Tensor2 = [[f64; 2]; 2];

/// Frobenius norm of a 2x2 tensor.
pub fn tensor_norm(t: &Tensor2) -> f64 {
    (t[0][0] * t[0][0] + t[0][1] * t[0][1] + t[1][0] * t[1][0] + t[1][1] * t[1][1]).sqrt()
}

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid kernel spec: {0}")]
    KernelSpec(String),
    #[error("singular discrete Sonine system: leading kernel cell is zero")]
    SingularKernel,
    #[error("history/kernel mismatch: {0}")]
    HistoryMismatch(String),
    #[error("invalid spring potential: {0}")]
    Potential(String),
    #[error("invalid quadrature table request: {0}")]
    Quadrature(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("CFL violation: {0}")]
    Cfl(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("diagnostics error: {0}")]
    Diagnostics(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the simulation step index to an error bubbling out of a sub-step.
    pub fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
