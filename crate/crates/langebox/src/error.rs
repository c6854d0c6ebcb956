use thiserror::Error;

/// Errors produced by simulation, estimation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A lattice sum was requested for a potential without tail-decay constants.
    #[error("lattice sum tail cannot be certified: potential declares no tail decay")]
    NonSummableTail,

    /// A requested truncation radius does not meet the target error.
    #[error("truncation radius {shells} leaves certified tail {tail:.3e} > target {target:.3e}")]
    TailAboveTarget { shells: u32, tail: f64, target: f64 },

    /// Two configurations expected to be disjoint share a point.
    #[error("configurations overlap at point index {index}")]
    OverlappingConfigurations { index: usize },

    /// A coordinate difference equals the half side exactly, so the periodic
    /// energy decomposition is ambiguous.
    #[error("configuration does not have strict distances: coordinate difference equals half side")]
    DistancesNotStrict,

    /// Two particles coincide after wrapping; forces are undefined.
    #[error("coincident particles {i} and {j}")]
    CoincidentParticles { i: usize, j: usize },

    /// The repulsion envelope does not diverge fast enough at the origin.
    #[error("repulsion check failed: {0}")]
    NotRepulsiveEnough(String),

    /// Richardson refinement did not reach the requested tolerance.
    #[error("quadrature not converged: estimate {estimate:.6e}, error {error:.3e}, tol {tol:.3e}")]
    QuadratureNotConverged { estimate: f64, error: f64, tol: f64 },

    /// An initial state has infinite energy and could not be repaired.
    #[error("initial configuration has non-finite energy and jitter repair failed")]
    SingularStart,

    /// The requested particle density exceeds the configured maximum.
    #[error("density {rho:.4} exceeds configured maximum {rho_max:.4}")]
    DensityExceedsRhoMax { rho: f64, rho_max: f64 },

    /// A test function's spatial support does not fit in the open box.
    #[error("test function support [{lo:.3}, {hi:.3}] exceeds open box (-{lambda}, {lambda})")]
    SupportTooLarge { lo: f64, hi: f64, lambda: f64 },

    /// A force kick exceeded the configured guard; the timestep is too large.
    #[error("force blowup: |force|*dt = {kick:.3e} exceeds guard {guard:.3e}; reduce dt")]
    ForceBlowup { kick: f64, guard: f64 },

    /// Snapshot payload does not match its checksum.
    #[error("snapshot checksum mismatch")]
    ChecksumMismatch,

    /// Snapshot was written by an unsupported format version.
    #[error("snapshot version {0} unsupported")]
    VersionUnsupported(u32),

    /// Malformed snapshot container.
    #[error("snapshot malformed: {0}")]
    SnapshotMalformed(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
