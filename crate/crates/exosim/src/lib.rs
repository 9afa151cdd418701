//! Co-simulation of a 1-DOF geared hand exoskeleton coupled to a simplified
//! planar finger musculoskeletal model.
//!
//! The engine couples a prescribed finger motion (inverse dynamics side) to
//! the exoskeleton's single motor degree of freedom (forward dynamics side)
//! through a tri-directional spring-damper at the index ring. The motor is
//! driven either by a passive damper or by an admittance controller that
//! integrates a virtual end-effector mass and tracks it with a PD torque law.
//! Desired finger-joint torques are redistributed over six muscles by a
//! box-constrained quadratic program.
//!
//! The `signals` module reimplements the experimental processing pipeline
//! (Butterworth filtering, resampling, cycle segmentation, EMG envelopes) so
//! recorded sessions and simulator output go through identical code.

pub mod calibrate;
pub mod config;
pub mod contact;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod model;
pub mod muscles;
pub mod signals;
pub mod sweep;
pub mod vec2;

pub use error::{Error, Result};
