//! Spectral toolkit for Jacobi matrices whose off-diagonal entries grow fast
//! enough that `sum 1/a_n` converges, with a separate path for the Carleman case.

pub mod ansatz;
pub mod carleman;
pub mod coefficients;
pub mod error;
pub mod logscaled;
pub mod model_file;
pub mod solutions;
pub mod spectral;
pub mod volterra;

pub use coefficients::{CoefficientModel, Diagonal, OffDiagonal, Regime, RegimeKind, Verdict};
pub use error::{JacobiError, Result};
pub use logscaled::LogComplex;
