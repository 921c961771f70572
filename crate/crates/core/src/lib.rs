//! Closed-loop simulator for autonomous small-body proximity operations.
//!
//! The pipeline renders a sunlit triaxial ellipsoid from the spacecraft camera,
//! extracts lit-limb pixels, solves horizon-based optical navigation with a
//! first-order measurement covariance, filters the Hill-frame state with an
//! EKF, and steers with a Lyapunov controller on Milankovitch slow elements
//! whose exponential penalties keep the spacecraft out of the dark-side
//! keep-out cone and inside a safe range band.
//!
//! Modules map one-to-one onto the pipeline stages:
//!
//! * [`dynamics`]: Hill three-body equations, units, Milankovitch elements, propagation
//! * [`imaging`]: camera model, ray-cast renderer, image noise, gradient edge detection
//! * [`opnav`]: limb-based position fix and its covariance
//! * [`ekf`]: Hill-frame extended Kalman filter
//! * [`control`]: path constraints, penalties and the constrained Lyapunov law
//! * [`harness`]: scenarios, closed loop, Monte Carlo, sweeps and file output

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod ekf;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod opnav;

pub use error::{Error, Result};
