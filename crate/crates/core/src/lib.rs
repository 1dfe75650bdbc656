//! p-refined RBF-FD for Poisson problems with Dirichlet data on scattered nodes.
//!
//! Local operators are approximated with polyharmonic splines augmented by
//! monomials whose degree may vary from node to node. The pipeline is
//! [`geometry`] (nodes and stencils) → [`refinement`] (per-node order) →
//! [`weights`] (local saddle solves) → [`pde`] (global assembly and solve),
//! with [`harness`] driving convergence and timing sweeps.

pub mod basis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pde;
pub mod refinement;
pub mod weights;

pub use error::{BasisError, GeometryError, HarnessError, PipelineError, RefinementError, SolveError, WeightsError};
