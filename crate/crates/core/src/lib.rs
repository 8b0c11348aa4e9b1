//! Multistatic response (MSR) simulation and inversion for a small
//! conductivity target described by its contracted generalized polarization
//! tensors (CGPTs).
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`acquisition`]: the circular source/receiver array,
//!   the `C` and `D` matrices, the forward operator `L(M) = C D M D Cᵀ` and
//!   its spectral analysis in full and limited view.
//! * [`algebra`]: complex CGPTs and the rigid-motion transform `T` with its
//!   analytic derivatives.
//! * [`reconstruct`]: least squares, Tikhonov and the interpolation-kernel
//!   left inverse used for limited-view recovery.
//! * [`dynamics`]: ground-truth targets, the white-noise-acceleration motion
//!   model and MSR stream synthesis.
//! * [`tracker`]: Kalman and extended Kalman filtering on MSR streams.
//!
//! Lengths inside CGPT matrices are expressed in units of the target scale
//! `δ`; positions of the target are physical and are divided by `δ` before
//! entering the transform operator.

pub mod acquisition;
pub mod algebra;
pub mod cgpt;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod reconstruct;
pub mod rng;
pub mod tracker;

pub use crate::acquisition::{MsrOperator, SpectrumReport};
pub use crate::algebra::{ComplexCgpt, RigidMotion};
pub use crate::cgpt::{CgptMatrix, MsrMatrix};
pub use crate::dynamics::{MaterialParams, MotionModel, NoiseSpec, TargetState};
pub use crate::error::{Error, Result};
pub use crate::geometry::{AcquisitionGeometry, ArcGroup, Layout};
pub use crate::tracker::{GaussianBelief, ObservationModel};
