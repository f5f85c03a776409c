//! Optimization backends: an exact internal MaxSMT engine over linear real
//! arithmetic, and SMT-LIB2 emission for external optimizing solvers.

pub mod affine;
pub mod lp;
pub mod maxsmt;
pub mod smtlib;

pub use affine::Affine;
pub use lp::{solve_lp, solve_lp_certified, LpProblem, LpResult, NumericalFailure};
pub use maxsmt::{
    solve_maxsmt, Atom, Choice, MaxSmtProblem, MaxSmtSolution, PathFormula, PrunedNode, RelOp, SolverConfig,
    SolverStats,
};
pub use smtlib::{emit_smtlib, parse_smt_model, Encoding, SmtConfig, SmtError};
