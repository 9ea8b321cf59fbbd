//! Discrete spectral geometry on weighted complexes.
//!
//! The crate models a manifold with metric as a weighted complex, assembles
//! its positive Laplacian with mixed Neumann/dirichlet conditions, and
//! provides the experiments built on top of it: covering complexes from
//! voltage assignments, fundamental domains seeded by the ascent basins of
//! the first eigenfunction, killed random walks, and randomized metric
//! perturbations.

pub mod complex;
pub mod covering;
pub mod domain;
pub mod error;
pub mod fixtures;
pub mod genericity;
pub mod group;
mod lanczos;
pub mod laplacian;
pub mod morse;
pub mod rng;
pub mod spectral;
pub mod stochastic;

pub use complex::{restrict, Edge, ExhaustionSpec, Tag, Vertex, WeightedComplex};
pub use error::{Error, Result};
pub use laplacian::{assemble_laplacian, LaplacianOperator, SparseMatrix};
pub use spectral::{
    barta_bound, deflated_resolvent, exhaustion_lambda0, lowest_eigenpairs, lowest_eigenpairs_with,
    rayleigh, BartaBound, SolverOptions, SpectralResult,
};
pub use covering::{derive_cover, floquet_lambda0, lift_function, Cover, CoverSpec, VoltageAssignment};
pub use domain::{build_fundamental_domain, improve_domain, lambda0_of_domain, superlevel_check, FundamentalDomain};
pub use genericity::{continuity_sweep, morse_experiment, perturb, simplicity_experiment, PerturbMode, PerturbationSpec};
pub use group::{DeckGroup, GroupElement};
pub use morse::{ascend_basins, classify_critical, BasinDecomposition, CriticalKind, CriticalReport};
pub use stochastic::{harmonic_extension_mc, heat_kernel_oracle, simulate_survival, SurvivalCurve, WalkConfig};
