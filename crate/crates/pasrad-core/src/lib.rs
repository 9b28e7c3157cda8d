//! Two-channel distributed MIMO passive radar target detection.
//!
//! The library models a communication-centric radar network: `Nt` opportunity
//! transmitters on disjoint carriers and `Nr` spatially separated two-channel
//! receivers, each providing a reference channel (direct path) and a
//! surveillance channel (target path) with its own unknown noise variance.
//! On top of that model it provides
//!
//! * [`scenario`] — geometry, carriers, noise floors, and channel amplitudes
//!   realizing requested DNR/SNR/MNR power ratios,
//! * [`signal`] — waveform generation, the unitary DFT-based delay–Doppler
//!   operator, observation synthesis under both hypotheses, and delay/Doppler
//!   compensation,
//! * [`detectors`] — the LRT eigen-difference statistic, the unified
//!   Wald/Gradient/Rao-Durbin family, their MLE and Fisher-information
//!   helpers, and three single-channel baseline statistics,
//! * [`montecarlo`] — a deterministic, parallel Monte-Carlo engine for
//!   fixed-level threshold calibration and false-alarm/detection curves,
//! * [`oracle`] — slow, dense reference implementations used by the self-test
//!   command and the verification suites.

pub mod detectors;
pub mod montecarlo;
pub mod oracle;
pub mod scenario;
pub mod signal;

/// Complex sample type used throughout (`nalgebra` and `rustfft` share it).
pub type C64 = nalgebra::Complex<f64>;

/// Complex matrix with runtime dimensions, column-major.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Complex column vector with runtime dimension.
pub type CVector = nalgebra::DVector<C64>;

/// Real matrix with runtime dimensions.
pub type RMatrix = nalgebra::DMatrix<f64>;
