use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two points that must differ coincide (zero-length direction).
    #[error("domain error: {0}")]
    Domain(&'static str),

    /// Receiver position parallel to its own axis; no surface normal exists.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    /// Transmit axis parallel to the propagation direction; no polarization direction.
    #[error("degenerate polarization: transmit axis is parallel to the propagation direction")]
    DegeneratePolarization,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported configuration: {users} users exceed {antennas} transmit antennas")]
    TooManyUsers { users: usize, antennas: usize },

    #[error("singular channel: condition number {condition:.3e} exceeds limit")]
    SingularChannel { condition: f64 },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("separation projection did not converge after {sweeps} sweeps (residual {residual:.3e} m)")]
    ProjectionFailure { sweeps: usize, residual: f64 },

    #[error("infeasible layout: {0}")]
    Infeasible(String),

    #[error("empty sample set")]
    EmptySampleSet,
}
