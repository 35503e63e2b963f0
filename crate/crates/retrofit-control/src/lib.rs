//! Retrofit controller synthesis and verification for linear interconnected
//! systems.
//!
//! A network is modeled as a subsystem of interest coupled to an unknown
//! environment through interconnection signals. A retrofit controller is one
//! that preserves internal stability of the whole interconnection for every
//! environment that keeps the original (controller-free) system stable. This
//! crate characterizes such controllers through a constrained Youla
//! parameterization, constructs the output-rectifying subclass explicitly
//! from relative-degree normal forms, and verifies both the algebraic
//! constraint and Monte Carlo closed-loop stability.
//!
//! The pipeline mirrors the module layout:
//!
//! - [`statespace`]: realizations and their interconnection algebra;
//! - [`coprime`]: doubly coprime factorization, stabilizing-gain synthesis,
//!   and admissible-environment sampling;
//! - [`geometry`]: relative-degree analysis and normal-form coordinates;
//! - [`rectifier`]: the measurement rectifier and reduced design model;
//! - [`retrofit`]: controller assembly and verification verdicts;
//! - [`sim`]: closed-loop assembly and time-domain integration;
//! - [`cli`]/[`model`]: the command-line pipeline and its file formats.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability, and the `retrofit` binary for the file-driven pipeline.

pub mod cli;
pub mod coprime;
pub mod error;
pub mod fixtures;
pub mod geometry;
mod linalg;
pub mod model;
pub mod rectifier;
pub mod retrofit;
pub mod sim;
pub mod statespace;

pub use error::{Error, Result};
pub use statespace::{Realization, Sign, StabilityVerdict, ZeroCheck};
