//! Exact steady states of the finite-`N` master equation.
//!
//! [`space`] builds the Hilbert spaces (full product basis for `N <= 3`, Dicke
//! basis otherwise), [`superop`] turns operator terms into sparse superoperators,
//! [`liouvillian`] assembles the generator and [`steady`] extracts its kernel.

pub mod liouvillian;
pub mod space;
pub mod steady;
pub mod superop;

pub use liouvillian::{
    build_liouvillian, build_liouvillian_full, build_liouvillian_pi, liouvillian_terms, pt_check, LiouvillianForm,
    PtCheck,
};
pub use space::{dicke_degeneracy, BasisKind, Block, BlockOp, Species, SpinSpace};
pub use steady::{
    correlators, steady_state, CorrelatorSet, DensityHeader, DensityMatrix, SteadyMethod, SteadyState,
    SteadyStateOptions,
};
pub use superop::{OperatorBasis, Superoperator, Term, DEFAULT_MAX_DIMENSION};
