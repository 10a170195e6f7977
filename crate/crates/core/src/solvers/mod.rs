//! Exact ℓ1 solvers: the weighted block decomposition and the
//! equality-constrained filter LP, both reduced to a constrained weighted
//! least-absolute-deviations problem.

mod block;
mod lad;
mod lp;

pub use block::{solve_block_l1, BlockProblem, BlockSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use lad::{LadProblem, LadSolution};
pub(crate) use lp::FilterLp;
pub use lp::{solve_constrained_l1_lp, ConstrainedLpSolution};
