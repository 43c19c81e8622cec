//! A SAT decision procedure built on special coverings of the clause set.
//!
//! A CNF formula over `n` variables and `m` clauses induces a *special
//! decomposition* of the clause set: pair `i` holds the clauses containing
//! `x_i` and those containing `¬x_i`. The formula is satisfiable exactly when
//! one component can be picked from every pair so that the picks cover all
//! clauses. The decision pipeline searches for such a covering through
//! replaceability graphs, cycle cleaning and incompatibility elimination; a
//! brute-force oracle and a differential harness check it against ground
//! truth.

pub mod cnf;
pub mod decomposition;
pub mod graph;
pub mod oracle;
pub mod procedures;
pub mod solver;

pub use cnf::{parse_dimacs, write_dimacs, Assignment, CnfFormula};
pub use decomposition::{CoveringSelection, SpecialDecomposition};
pub use solver::{decide, Verdict, VerdictKind};
