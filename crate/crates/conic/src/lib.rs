//! Primal-dual interior-point solver for linear, second-order, rotated
//! second-order and real positive semidefinite cone programs.
//!
//! ```
//! use opfrelax_conic::{solve, ConeBlock, ConicProgram, SolveStatus, SolverSettings, SparseMatrix};
//!
//! // minimize t  subject to  (t, 3, 4) in the second-order cone
//! let prog = ConicProgram {
//!     num_vars: 1,
//!     objective: vec![1.0],
//!     objective_offset: 0.0,
//!     eq_matrix: SparseMatrix::zeros(0, 1),
//!     eq_rhs: vec![],
//!     cone_matrix: SparseMatrix::from_triplets(3, 1, &[(0, 0, -1.0)]).unwrap(),
//!     cone_rhs: vec![0.0, 3.0, 4.0],
//!     cones: vec![ConeBlock::SecondOrder { dim: 3 }],
//!     labels: vec![],
//! };
//! let sol = solve(&prog, &SolverSettings::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert!((sol.objective - 5.0).abs() < 1e-7);
//! ```

mod certify;
mod cones;
mod error;
mod kkt;
mod program;
mod solver;

pub use certify::{certify, CertificateReport};
pub use error::ConicError;
pub use program::{svec_index, ConeBlock, ConicProgram, SparseMatrix};
pub use solver::{solve, ConicSolution, IterationInfo, Residuals, SolveStatus, SolverSettings};
