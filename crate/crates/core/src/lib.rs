//! Thick-spray kinetic model: collision kernels, a stochastic particle/gas simulator,
//! a 1D moment solver coupling Euler gas to Lagrangian particles, and verification studies.
//!
//! - [`kernels`]: friction and pressure kernels, closed forms and quadrature.
//! - [`collision`]: binary collision laws and scaling parameters.
//! - [`spray_solver`]: finite-volume gas, particle push, Strang splitting, remainder diagnostics.
//! - [`verify`]: convergence studies, the drag limit, weak identities, stochastic comparison.
//! - [`cli_io`]: config grammar, CSV/JSON outputs, snapshots, subcommands.

// Negated float comparisons reject NaN; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli_io;
pub mod collision;
pub mod kernels;
pub mod spray_solver;
pub mod verify;
