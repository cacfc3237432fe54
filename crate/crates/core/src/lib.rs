//! Adaptive cellular automata engine.
//!
//! Cellular automata whose per-cell update-rule parameters live inside the
//! state itself: a multi-channel toroidal grid carries both dynamical
//! channels and rule-parameter channels, and synchronous data-parallel passes
//! update them together. On top of the generic engine this crate implements
//! three models:
//!
//! - an Ising model whose temperature is a feedback-controlled field
//!   (per-cell or global) that drives the system toward its critical point,
//! - a Wilson-Cowan rate network with excitatory/inhibitory cell types,
//!   Hebbian and homeostatic plasticity and synapse-type normalization,
//! - an energy-gated leaky integrate-and-fire network with five coupled
//!   channels (voltage, spikes, energy, adaptive threshold, spike trace).
//!
//! All numeric kernels are generic over the [`Real`] scalar; `f32` is the
//! storage format used by the snapshot container (see [`io`]).

pub mod analysis;
pub mod engine;
pub mod error;
pub mod float;
pub mod grid;
pub mod io;
pub mod ising;
pub mod kernels;
pub mod rate;
pub mod rng;
pub mod spiking;

pub use error::{Error, Result};
pub use float::Real;

/// Single-precision grid (the on-disk scalar type).
pub type GridF32 = grid::Grid<f32>;
/// Double-precision grid for oracles and reference computations.
pub type GridF64 = grid::Grid<f64>;
