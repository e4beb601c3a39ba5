//! Adaptive nonlinear system identification with interpolated low-rank tensors.
//!
//! The crate provides CPD-decomposed lookup tensors whose outputs are
//! multilinearly interpolated between grid points, the Hammerstein (tensor
//! followed by FIR) and Wiener (FIR followed by tensor) cascades built on
//! them, normalized stochastic-gradient updates, the classical
//! non-interpolated baselines, a Monte-Carlo experiment harness and a
//! per-sample arithmetic cost model.
//!
//! Module map:
//!
//! - [`tensor`]: dense tensors, CPD factor sets and the primitive products.
//! - [`quantize`]: grid discretization, interpolation weights, tapped delay lines.
//! - [`interp`]: multilinear interpolation over subtensors and factor sets.
//! - [`adaptive`]: single-block learners (NLMS, dense interpolated grid,
//!   decomposed tensor with and without interpolation).
//! - [`cascade`]: Tensor-LMS and LMS-Tensor cascades.
//! - [`experiments`]: input processes, unknown systems, identification loop, NMSE.
//! - [`complexity`]: closed-form operation counts and runtime op counters.

pub mod adaptive;
pub mod cascade;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod interp;
pub mod quantize;
pub mod tensor;

pub use error::{Error, Result};
