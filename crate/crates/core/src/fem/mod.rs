//! Lagrange finite elements on the two-subdomain mesh: spaces, quadrature, forms,
//! sparse algebra and nonlinear solves.

pub mod dirichlet;
pub mod dual;
pub mod field;
pub mod forms;
pub mod newton;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use dirichlet::{apply_dirichlet, DirichletSet};
pub use dual::{Dual, Real};
pub use field::FieldVec;
pub use forms::{assemble, Form};
pub use newton::{newton_solve, NewtonOptions, NewtonReport};
pub use space::{build_space, Domain, FeSpace};
pub use sparse::{solve_linear, LuCache, SparseLu, SparseOp, Triplets};
