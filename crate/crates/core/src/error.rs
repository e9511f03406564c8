use thiserror::Error;

use crate::duality::DualPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A dual variable lies outside the region where the per-state
    /// maximizer is defined (for example `lambda >= 1/sigma^2`).
    #[error("infeasible dual variable: {0}")]
    InfeasibleDual(String),

    #[error("energy target {target:.6e} W is outside [0, {max:.6e}] W")]
    InfeasibleTarget { target: f64, max: f64 },

    #[error(
        "dual search did not converge after {iterations} iterations \
         (last iterate lambda={:.6e}, beta={:.6e}, energy residual {energy_residual:.3e}, \
         power residual {power_residual:.3e})",
        last.lambda, last.beta
    )]
    NonConvergence {
        last: DualPoint,
        iterations: usize,
        energy_residual: f64,
        power_residual: f64,
    },

    #[error("{antennas} antennas exceed the exhaustive-search limit of {limit}")]
    Capacity { antennas: usize, limit: usize },

    #[error("region comparison failed: {0}")]
    Comparison(String),

    #[error("solver failed at energy target {target:.6e} W: {source}")]
    AtTarget {
        target: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
