//! Phase-field topology optimization of microfluidic channels and mixers.

pub mod adjoint;
pub mod catalog;
pub mod config;
pub mod driver;
pub mod io;
pub mod error;
pub mod expr;
pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod phasefield;
pub mod sensitivity;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use fem::{ScalarField, SparseOperator, VectorField};
pub use linsolve::{NewtonSettings, SolveReport};
pub use mesh::{BBox, BoundaryTag, Mesh};
pub use state::{BoundaryData, PhysicsParams, StateFields};
pub use adjoint::{AdjointFields, ObjectiveWeights};
pub use phasefield::OptimParams;
pub use sensitivity::SensitivityField;
