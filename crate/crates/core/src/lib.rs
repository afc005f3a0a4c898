//! Deep-random secrecy toolkit.
//!
//! Bernoulli estimators, a laboratory for distributions over {0,1}^n,
//! sleeking transforms, adversary strategies, a deep-random generator, the
//! key-agreement protocol engine and an experiment harness.

pub mod bernoulli;
pub mod adversary;
pub mod bits;
pub mod campaign;
pub mod cli;
pub mod dist;
pub mod drg;
pub mod error;
pub mod irpa;
pub mod lab;
pub mod law;
pub mod perm;
pub mod protocol;
pub mod quad;
pub mod rng;
pub mod search;
pub mod seeds;
pub mod sleek;
pub mod split;
pub mod verify;

pub use bits::{BitVector, ParamVector};
pub use dist::Dist;
pub use error::{Error, Result};
pub use perm::Permutation;
pub use rng::Stream;
