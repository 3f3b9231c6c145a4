//! Domain-of-dependence stabilized DG spectral elements for linear advection
//! on one-dimensional cut-cell meshes.
//!
//! The crate assembles the semidiscrete operator `L` of `∂_t u = L u`,
//! measures its mass-weighted operator norm, tunes the penalty cutoff `λ_c`,
//! and runs the fully discrete stability and accuracy experiments.
//!
//! ```
//! use dodlab::{CutMesh, GlobalOperator, NodeKind, PenaltyConfig, QuadratureRule, AdvectionConfig};
//!
//! let rule = QuadratureRule::new(NodeKind::GaussLegendre, 2).unwrap();
//! let mesh = CutMesh::new((0.0, 1.0), 50, 25, 1e-4).unwrap();
//! let op = GlobalOperator::assemble(&mesh, &rule, AdvectionConfig::default(), PenaltyConfig::new(1.0).unwrap()).unwrap();
//! let norm = dodlab::norms::global_operator_norm(&op).unwrap();
//! assert!(norm * mesh.dx() < 100.0);
//! ```

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lagrange;
pub mod mesh;
pub mod norms;
pub mod operator;
pub mod quadrature;
pub mod timestepping;

pub use analysis::{
    opnorm_sweep, optimize_lambda, scaling_fit, sharp_cfl_search, CflResult, CflSearch, LambdaChoice, MeshLayout,
    OptimizerGrid, OptimizerResult, SweepRow, SweepSpec,
};
pub use error::{Error, Result};
pub use lagrange::{CutInterpolation, LagrangeOperators};
pub use mesh::{Cut, CutMesh, StateVector};
pub use norms::{NormMethod, NormOptions, WeightedNorm};
pub use operator::{AdvectionConfig, GlobalOperator, PenaltyConfig, StabilizedBlock};
pub use quadrature::{NodeKind, QuadratureRule};
pub use timestepping::{evolve, step, RKMethod, Trajectory};
