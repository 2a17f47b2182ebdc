//! Lifshitz–Slyozov coarsening with a nucleation inflow at the origin.

pub mod characteristics;
pub mod diagnostics;
pub mod error;
pub mod initial;
pub mod kinetics;
pub mod linear_transport;
pub mod nonlinear_solver;
pub mod ode;
pub mod presets;
pub mod quadrature;
pub mod reference_oracle;

pub use error::{Error, Result};
