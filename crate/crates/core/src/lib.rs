//! Numerical laboratory for the Hopf-Lax semigroup and the hypercontractivity
//! and log-Sobolev deficits built on it.

pub mod deficits;
pub mod error;
pub mod extremizer;
pub mod families;
pub mod funcrep;
pub mod harness;
pub mod hopflax;
pub mod pl;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
