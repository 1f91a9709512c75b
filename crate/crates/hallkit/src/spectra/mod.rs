//! Eigensolvers, ground-multiplet detection, projectors and the eigen cache.

pub mod cache;
pub mod eigen;
pub mod linop;
pub mod multiplet;

pub use eigen::{
    dense_eigh, eigensolve, eigensolve_from, EigenDecomposition, EigenMode, SolverOptions,
    DEFAULT_DENSE_THRESHOLD, KRYLOV_SEED,
};
pub use cache::{EigenCache, CACHE_ENV};
pub use linop::LinearOp;
pub use multiplet::{
    detect_multiplet, multiplet_expectation, projector, DetectOptions, GroundMultiplet, Projector,
};
