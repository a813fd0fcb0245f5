//! Finite-precision difference-quotient calculus over Q_p.
//!
//! The crate is organised bottom-up: [`padic`] arithmetic, sparse
//! polynomials ([`poly`]) over coefficient [`ring`]s, clopen [`balls`],
//! piecewise-polynomial [`calculus`], finite-dimensional algebras ([`cia`]),
//! ball diffeomorphisms ([`diffeo`]) and weak direct products ([`weakprod`]).
//! [`json`] holds the interchange formats and [`suites`] the seeded
//! verification suites used by the command-line tool.

pub mod balls;
pub mod calculus;
pub mod cia;
pub mod diffeo;
pub mod error;
pub mod integral;
pub mod json;
pub mod padic;
pub mod poly;
pub mod ring;
pub mod suites;
pub mod weakprod;

pub use error::{Error, Result};
pub use padic::{Approx, PadicContext, PadicScalar, PadicVector, Val};
