//! Skeleton-chain regularization of `B·x′ = x + f(t)` with a possibly
//! singular square operator `B`.
//!
//! [`chain::build_chain`] factors `B` repeatedly until the iterate is
//! invertible (regular) or zero (degenerate). The solvers in [`solver`] then
//! integrate or evaluate the reduced problem and rebuild `x(t)`.

pub mod chain;
pub mod cli;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod signal;
pub mod solver;

pub use chain::{build_chain, verify_chain, ChainKind, SkeletonChain};
pub use linalg::Matrix;
pub use signal::{parse_signal, Signal};
pub use solver::{
    solve_degenerate, solve_regular, DegenerateProblem, RegularizedIVP, TimeGrid, Trajectory,
};
