//! Sparse operators, Krylov solvers, eigensolvers and dense fallbacks.

pub mod dense;
pub mod eigen;
pub mod krylov;
pub mod sparse;

pub use eigen::{smallest_eigenpairs, EigenPair};
pub use krylov::{
    cg_solve, deflated_cg_solve, normal_cg_solve, orthonormalize, NormalSide, Solution,
    SolverConfig,
};
pub use sparse::SparseOperator;
