//! Link-level simulator and numerical-optimization library for an antenna
//! architecture in which a small active array illuminates a reconfigurable
//! intelligent surface (RIS).
//!
//! The library covers the full downlink evaluation pipeline:
//!
//! * [`geometry`] / [`channel`]: array/RIS layout, the deterministic
//!   RIS-to-array coupling matrix, log-distance path loss and Rayleigh
//!   UE channels;
//! * [`metrics`]: favourable-propagation and channel-hardening
//!   diagnostics (closed form and Monte Carlo);
//! * [`estimation`]: multi-epoch pilot training and reduced-dimensionality
//!   LMMSE channel estimation on a truncated-SVD basis;
//! * [`ris`]: RIS configuration optimizers (per-element grid search for
//!   passive surfaces, projected gradient on the unit sphere for active
//!   ones), power-split amplitude scaling and phase quantization;
//! * [`power`]: max-min SINR power control via bisection over linear
//!   feasibility solves;
//! * [`se`]: conjugate-beamforming precoders, perfect-CSI SINR, the
//!   spectral-efficiency upper bound and the hardening lower bound (Monte
//!   Carlo and closed form);
//! * [`sim`]: deterministic Monte Carlo campaign orchestration with CSV
//!   and manifest emission.
//!
//! All randomness flows through explicit [`rand_chacha::ChaCha8Rng`]
//! handles; campaigns derive one independent stream per drop so results do
//! not depend on thread count.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod metrics;
pub mod power;
pub mod ris;
pub mod rng;
pub mod scenario;
pub mod se;
pub mod sim;

pub use error::SimError;
pub use scenario::{PhaseBits, RisMode, ScenarioConfig};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dynamically sized complex vector.
pub type CVector = nalgebra::DVector<C64>;
