//! Numerical toolkit for the white noise measure on the space of tempered
//! distributions.
//!
//! Distributions and test functions are modelled by truncated coefficient
//! vectors in the Hermite-function basis `e_0, e_1, ...`. The scale of
//! Hilbert norms uses the eigenvalues `lambda_k = 2k + 2` of the harmonic
//! oscillator `A = -d^2/dt^2 + t^2 + 1`:
//!
//! ```text
//! |phi|_p^2  = sum_k (2k+2)^{ 2p} c_k^2      (test functions)
//! |x|_{-p}^2 = sum_k (2k+2)^{-2p} x_k^2      (distributions)
//! ```
//!
//! Modules:
//!
//! - [`hermite`]: basis functions, Gauss-Hermite rules, projection.
//! - [`scale`]: dual norms, pairings, balls and the hemicompact exhaustion.
//! - [`charfun`]: characteristic functionals, Monte-Carlo estimators,
//!   positive-definiteness and equicontinuity diagnostics.
//! - [`donsker`]: the scaled random-walk measures `P_n` and their convergence
//!   to white noise.

pub mod charfun;
pub mod coeffs;
pub mod csv;
pub mod donsker;
mod error;
pub mod hermite;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod scale;

pub use error::{Error, Result};
pub use hermite::{BasisConfig, TestFunction};
pub use num_complex::Complex64;
pub use scale::DistributionVector;
