//! Configuration, seeded experiment drivers and CSV output for `cgpt-core`.
//!
//! Four experiments are available:
//!
//! * `spectrum`: eigenvalues of `CᵀC` and `D CᵀC D` per aperture and the
//!   condition number of the MSR operator per order.
//! * `recon-vs-aperture`: first-two-order CGPT error of least squares and
//!   best-grid Tikhonov against the aperture, for several noise levels.
//! * `track-fullview`: EKF tracking with a full-view array at two target
//!   scales and two noise levels.
//! * `track-limited`: EKF tracking with a uniform half-ring versus five
//!   rotated arcs.

pub mod config;
pub mod csv;
pub mod error;
pub mod experiments;
pub mod targets;

pub use crate::config::{load_config, ExperimentConfig, ExperimentId, LayoutConfig};
pub use crate::error::{ConfigError, HarnessError};
pub use crate::experiments::{run_experiment, RunReport};
