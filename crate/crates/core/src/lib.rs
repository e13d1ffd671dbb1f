//! Gaussian-mixture PHD filtering with Poisson multi-Bernoulli backward
//! trajectory smoothing.
//!
//! The forward pass is an ordinary GM-PHD filter, except that every update
//! keeps the intermediate Poisson multi-Bernoulli (PMB) posterior it produces
//! before collapsing it into a Poisson intensity. The backward pass draws sets
//! of trajectories from those stored PMB densities, one particle at a time,
//! by sampling global association hypotheses of the PMBM backward kernel.
//!
//! Module map:
//!
//! * [`gaussian`]: dense Gaussian and Gaussian-mixture primitives
//! * [`models`]: motion, measurement, birth and clutter models, and the
//!   scenario generator
//! * [`phd`]: the forward recursion and its [`phd::ForwardRecord`]
//! * [`assignment`]: linear assignment and Murty's ranked assignment
//! * [`smoother`]: backward simulation over sets of trajectories
//! * [`metrics`]: GOSPA and trajectory GOSPA
//!
//! Everything here is `no_std` with `alloc`. Randomness is always passed in
//! explicitly; [`seed`] derives independent streams for runs and particles.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assignment;
mod error;
pub mod gaussian;
mod math;
pub mod metrics;
pub mod models;
pub mod phd;
pub mod seed;
pub mod smoother;

pub use error::{Error, Result};
pub use gaussian::{Gaussian, GaussianMixture, LinearGaussian, Matrix, Vector};
pub use models::{BirthModel, ClutterModel, MeasurementModel, MotionModel, SystemModel};
pub use phd::{BernoulliComponent, ForwardRecord, PmbDensity};
pub use smoother::{SmootherConfig, Trajectory, TrajectoryParticle};
