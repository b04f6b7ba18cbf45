//! Quasi-stationary distribution of the Shiryaev–Roberts diffusion
//! `dR = dt + R dB` on `[0, A]` with absorption at `A`.
//!
//! The crate is organised bottom-up:
//!
//! - [`quad`] and [`roots`]: adaptive Gauss–Legendre quadrature and a bracketing
//!   root finder.
//! - [`specfun`]: exponential integral, modified Bessel `K` of real and purely
//!   imaginary order (exponentially scaled), and the Whittaker `W_{0,b}` /
//!   `W_{1,b}` functions through their Bessel reductions.
//! - [`eigen`]: the smallest eigenvalue `λ_A` and the critical boundary `Ã`.
//! - [`qsd`]: closed-form quasi-stationary and stationary laws, their bounds,
//!   and the convergence-rate diagnostics.
//! - [`mc`]: an Euler–Maruyama Monte Carlo oracle for the conditional law.
//! - [`report`]: CSV/JSON/table emitters shared by the command-line tool.

pub mod eigen;
pub mod error;
pub mod mc;
pub mod qsd;
pub mod quad;
pub mod report;
pub mod roots;
pub mod specfun;

pub use eigen::{critical_a, eigenfunction, solve_lambda, EigenSolution, Regime};
pub use error::{Error, Result};
pub use specfun::Order;
