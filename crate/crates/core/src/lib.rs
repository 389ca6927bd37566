//! Numerical toolkit for quantum dichotomies: divergences, hypothesis-testing
//! and max-relative entropies, channel synthesis and asymptotic rates.

pub mod error;
pub mod linalg;
pub mod states;
pub mod divergences;
pub mod conic;
pub mod blocks;
pub mod oneshot;
pub mod channels;
pub mod asymptotics;
pub mod resource;
pub mod io;

pub use error::{Error, Result};
