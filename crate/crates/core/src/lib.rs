//! Spectral Galerkin simulation and potential-well analysis for the
//! semilinear wave equation `u_tt − u_xx = f(x, u)` on `(0, L)` with
//! homogeneous Dirichlet conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod expr;
pub mod functionals;
pub mod nonlinearity;
pub mod ode;
pub mod scenarios;
pub mod solver;
pub mod well;

#[cfg(test)]
mod oracle;

pub use basis::{Domain, GridFunction, SpectralField};
pub use error::{Error, Result};
pub use expr::Expr;
pub use functionals::{FunctionalSnapshot, State};
pub use nonlinearity::{Form, Nonlinearity, PowerTerm, TermKind};
