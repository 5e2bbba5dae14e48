pub mod counterexamples;
pub mod dense;
pub mod error;
pub mod fracpow;
pub mod grid;
pub mod potentials;
pub mod quadrature;
pub mod riesz;
pub mod rzf;
pub mod semigroup;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
