//! Finite-volume tools for disordered lattice spin systems: exact and Monte
//! Carlo Gibbs measures, joint spin-disorder measures, their conditional
//! disorder probabilities, and numerical probes of (non-)Gibbsianness.

pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod mc;
pub mod model;
pub mod diagnostics;
pub mod disorder;
pub mod identities;
pub mod joint;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::{Bond, Metric, Site, Volume};
pub use model::{DisorderConfig, DisorderedPotential, JointConfig, ModelKind, Spin, SpinConfig, Symbol};
