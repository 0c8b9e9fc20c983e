//! Finite-difference discretisation of `a_ij D_ij + b_i D_i` on disks and the
//! linear Dirichlet solver, with the maximum-principle, Hölder and
//! convergence-order checks built on it.

mod checks;
mod field;
mod grid;
mod operator;
mod solver;
mod validation;

pub use checks::{
    abp_check, constant_coeff_solve, convergence_order, holder_seminorm, least_squares_slope, manufactured_error,
    sample, solve_with, AbpReport, OrderReport, FAR_PAIRS,
};
pub use field::{DiscreteField, Role};
pub use grid::{Arm, DiskGrid, DIRECTIONS};
pub use operator::{
    assemble, first_difference_weights, second_difference_weights, solve_dirichlet, AssembleOptions, Factorized,
    LinearOperator, Stencil, ANISOTROPY_LIMIT,
};
pub use solver::{bicgstab, Csr, Ilu0, SolveStats, SolverConfig, DEFAULT_RTOL};
pub use validation::{
    dmp_suite, random_operator, validate_solver, validation_problem, DmpCase, DmpReport, ValidationProblem,
    ValidationReport, VALIDATION_PROBLEMS,
};
