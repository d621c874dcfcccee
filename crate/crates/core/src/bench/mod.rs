//! Ground truth for tests: a closed-form QP, reference solvers and gradient
//! checks.

mod brute;
mod desk_qp;
mod fdcheck;

pub use brute::{
    brute_force_solve, grid_solve, kkt_residual, primal_dual_solve, BruteConfig, BruteSolution,
    GridConfig, PrimalDualConfig,
};
pub use desk_qp::{desk_qp_solution, DeskQp, DeskQpSample, DeskQpSolution};
pub use fdcheck::{finite_diff_check, FdConfig, FdReport};
