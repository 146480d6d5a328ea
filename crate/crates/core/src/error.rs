use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror the failure modes of the individual subsystems so that
/// callers (and the command-line driver) can map them onto exit codes
/// without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input: zero field where a nonzero one is
    /// required, a non-mean-free field passed to an operator that needs
    /// one, and similar.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A configuration value is rejected before any numerics run.
    #[error("configuration error: {0}")]
    ConfigError(String),

    /// An ensemble estimator was asked to work with too few paths.
    #[error("insufficient ensemble: {0}")]
    InsufficientEnsemble(String),

    /// The requested matrix lies outside the certified positivity ball of
    /// the direction-set decomposition.
    #[error("outside positivity ball: {0}")]
    OutsidePositivityBall(String),

    /// No admissible disjoint placement of jet supports was found.
    #[error("jet placement failed: {0}")]
    PlacementError(String),

    /// The grid cannot resolve the requested structure.
    #[error("resolution error: {0}")]
    ResolutionError(String),

    /// A time window is too short for the requested operation.
    #[error("window error: {0}")]
    WindowError(String),

    /// The prescribed energy profile violates its declared bounds.
    #[error("energy profile error: {0}")]
    EnergyProfileError(String),

    /// A parameter fails one of the exact lower bounds of the ladder.
    #[error("lower bound violated: {0}")]
    LowerBoundError(String),

    /// A structural desk-parameter check failed.
    #[error("structural error: {0}")]
    StructuralError(String),

    /// A cascade level exceeded its residual gate.
    #[error("residual gate exceeded: {0}")]
    ResidualGateError(String),

    /// A snapshot file is malformed.
    #[error("snapshot format error: {0}")]
    FormatError(String),

    /// A snapshot file has an unsupported version.
    #[error("snapshot version error: {0}")]
    VersionError(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the command-line driver: validation failures map to 1,
    /// numerical gate failures to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResidualGateError(_) => 2,
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
