//! Plane-strain SPH soil coupled to rigid blocks through soft contact.
//!
//! The soil is an elasto-plastic Drucker–Prager continuum discretized with
//! smoothed particle hydrodynamics; blocks are rigid bodies carried by
//! boundary particles; the two interact through spring–dashpot contacts
//! with Coulomb friction. [`scene`] turns a scene file into a [`World`] and
//! drives a full run.

pub mod constitutive;
pub mod contact;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod particles;
pub mod rigid;
pub mod scene;
pub mod solver;
pub mod validation;

/// 2D vector in SI units.
pub type Vec2 = nalgebra::Vector2<f64>;

pub use constitutive::{MaterialParams, RateInput, StressState};
pub use contact::{ContactBook, ContactKey, ContactParams, ContactState, FrictionMap};
pub use error::{ConfigError, Error, Result};
pub use grid::NeighborGrid;
pub use kernel::KernelSpec;
pub use particles::{ParticleKind, ParticleSet, Polygon};
pub use rigid::RigidBlock;
pub use solver::{SolverControls, StabilizationParams, World};
