//! Repairing the transition parameters of robot state machines from a few
//! corrected steps of logged traces.

pub mod dsl;
pub mod interp;
pub mod peval;
pub mod repair;
pub mod scalar;
pub mod sim;
pub mod solver;

use num_rational::BigRational;

pub type AffineF64 = solver::Affine<f64>;
pub type AffineRational = solver::Affine<BigRational>;
pub type LpProblemF64 = solver::LpProblem<f64>;
pub type LpProblemRational = solver::LpProblem<BigRational>;
pub type AtomF64 = solver::Atom<f64>;
pub type PathFormulaF64 = solver::PathFormula<f64>;
