//! Sequential analysis with nonanticipating estimation.
//!
//! The crate implements two families of procedures over one shared core:
//!
//! - **Power-one tests** ([`powerone`]): open-ended likelihood-ratio tests
//!   whose unknown parameter is replaced, one observation ahead, by a
//!   running estimate. Stopping under the null has probability at most
//!   e^{−b}, and the overshoot at stopping defines the correction
//!   constant γ.
//! - **Changepoint detectors** ([`detectors`]): Shiryaev–Roberts statistics
//!   whose per-origin likelihood ratios use the same nonanticipating
//!   estimates, plus the fixed-parameter and mixture baselines they are
//!   compared against.
//!
//! [`montecarlo`] supplies the calibration machinery: adaptive-measure
//! samplers, the ladder-averaging estimator of γ, ARL and detection-delay
//! estimation, and threshold calibration, all with reproducible
//! per-run random streams.

pub mod detectors;
pub mod error;
pub mod estimators;
pub mod models;
pub mod montecarlo;
pub mod powerone;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
