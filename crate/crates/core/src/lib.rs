//! Exact derivations in the perfect-matching and tour ideals, the
//! symmetric-SDP-to-sum-of-squares transformer, the TSP doubling reduction
//! and a Lasserre moment-relaxation builder.

pub mod cert;
pub mod cli;
pub mod error;
pub mod lasserre;
pub mod limits;
pub mod linsolve;
pub mod matching;
pub mod perm;
pub mod poly;
pub mod rational;
mod reduce;
pub mod symmetry;
pub mod tour;
pub mod tsp;

pub use cert::{Certificate, Generator, Violation};
pub use error::{Error, Result};
pub use limits::Limits;
pub use perm::Permutation;
pub use poly::{Kind, Monomial, Polynomial, Var};
pub use rational::Rational;
