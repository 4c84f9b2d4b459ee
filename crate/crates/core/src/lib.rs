//! Random matrix product states and PEPS: transfer operators, parent
//! Hamiltonians, correlation functions, expander channels, and the seeded
//! Monte Carlo campaigns that measure them.

pub mod campaign;
pub mod correlations;
pub mod error;
pub mod expander;
pub mod parent_ham;
pub mod rand_gauss;
pub mod spectral;
pub mod tensors;
pub mod transfer;

pub use campaign::{run_campaign, Experiment, ExperimentConfig};
pub use correlations::Observable;
pub use error::{Error, Result};
pub use faer::{c64, Mat, MatRef};
pub use rand_gauss::{MpsTensor, PepsTensor, SeedSpec};
pub use spectral::{GapCertificate, SolverMethod, SpectralSummary};
