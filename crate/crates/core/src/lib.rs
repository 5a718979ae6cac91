//! Bayesian knowledge tracing as a two-state hidden Markov model, the
//! logistic item response family, and the closed-form map from the long-run
//! behaviour of the former to the latter.
//!
//! The guide in `book/` walks through the mathematics; every Rust snippet in
//! it is compiled and run as a doctest of this crate.

pub mod bkt;
pub mod bridge;
pub mod error;
pub mod experiment;
pub mod irt;
pub mod ising;
pub mod markov;
pub mod panel;
pub mod params;
pub mod rng;

pub use error::{Error, Result};
pub use params::{validate_bkt, BktParams, Constraints, DynamicIrtConfig, Irf4pl, MirtIrf};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bkt.md")]
    mod bkt {}
    #[doc = include_str!("../../../book/src/stationary.md")]
    mod stationary {}
    #[doc = include_str!("../../../book/src/irt.md")]
    mod irt {}
    #[doc = include_str!("../../../book/src/bridge.md")]
    mod bridge {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/ising.md")]
    mod ising {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
