//! Atomic congestion games with cost-sharing taxes: game model, Poisson
//! kernel analysis of basis functions, tax construction from a convex
//! relaxation, exhaustive equilibrium oracles, learning dynamics and
//! instance generators.

pub mod basis;
pub mod error;
pub mod forge;
pub mod game;
pub mod kernel;
pub mod learning;
pub mod oracle;
pub mod pipeline;
pub mod relaxation;
pub mod tax;

pub use basis::{BasisFunction, PolyTerm};
pub use error::{Error, Result};
pub use game::{Allocation, GameInstance, Player, Resource, ResourceTax, TaxProfile};
pub use kernel::KernelConfig;
pub use relaxation::{FractionalProfile, SolverOptions, StepRule};
