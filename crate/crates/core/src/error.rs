use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its physical domain (non-positive length, bad index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature gave up before reaching the requested tolerance.
    #[error("quadrature did not converge after {nodes} integrand evaluations (estimated error {estimate:e}, target {target:e})")]
    Quadrature { nodes: usize, estimate: f64, target: f64 },

    /// The spectral lattice is too coarse for the field being propagated.
    #[error("spectral aliasing: tail power fraction {tail_fraction:e} above 0.9 k_max exceeds {threshold:e} (lattice {points} points, dx = {dx:e} m)")]
    Aliasing { tail_fraction: f64, threshold: f64, points: usize, dx: f64 },

    /// Malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
