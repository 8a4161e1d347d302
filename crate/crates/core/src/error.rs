//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by scenario validation, geometry construction and the
/// numerical pipeline.
#[derive(Debug, Error)]
pub enum SimError {
    /// The directional-array spacing formula produced a non-positive
    /// antenna spacing; the geometry is infeasible as configured.
    #[error(
        "active-array spacing is non-positive (d_A = {spacing:.6} m); \
         keep the array-RIS distance below {max_distance:.6} m or narrow \
         the sector below {max_sector:.6} rad"
    )]
    NonPositiveSpacing {
        spacing: f64,
        max_distance: f64,
        max_sector: f64,
    },

    /// Matrix/vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Every eigenvalue of the composite Gram matrix is zero.
    #[error("degenerate channel: all eigenvalues of the composite Gram matrix are zero")]
    DegenerateChannel,

    /// The stacked training matrix has no nonzero singular values.
    #[error("rank-deficient training matrix: all singular values are zero")]
    RankDeficient,

    /// The reduced observation covariance cannot be inverted.
    #[error("singular observation covariance in the LMMSE estimator")]
    SingularCovariance,

    /// A desired-signal gain is non-positive, so the SINR system is
    /// ill-posed.
    #[error("ill-posed power control: desired-signal gain a[{0}] <= 0")]
    IllPosed(usize),

    /// No positive power allocation meets even the lower SINR target.
    #[error("max-min power control infeasible at t = {0:.6e}")]
    Infeasible(f64),

    /// A precoder would be built from an identically-zero composite
    /// estimate.
    #[error("zero composite channel estimate for UE {0}; cannot normalize precoder")]
    ZeroEstimate(usize),

    /// Scenario configuration violates an invariant.
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),

    /// A module error annotated with the Monte Carlo drop it came from.
    #[error("drop {index}: {source}")]
    Drop {
        index: u64,
        #[source]
        source: Box<SimError>,
    },

    /// Campaign input/output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Scenario or manifest file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl SimError {
    /// Attach the index of the drop an error surfaced in.
    pub fn in_drop(self, index: u64) -> SimError {
        SimError::Drop {
            index,
            source: Box::new(self),
        }
    }
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, SimError>;
