//! Protograph LDPC codes for binary-input inter-symbol-interference channels.
//!
//! This crate holds the algorithmic core: protomatrices and their nested and
//! rate-compatible extensions, partial-response channel trellises with log-MAP
//! detection, detector EXIT surfaces, protograph EXIT (PEXIT) threshold
//! analysis, the protograph searches, two-stage quasi-cyclic lifting, encoding,
//! belief-propagation decoding and turbo equalization.
//!
//! It is `no_std` and only needs `alloc`. File IO, parallel execution and the
//! command line live in the companion `rcldpc` crate; anything here that can
//! fan out work takes a [`runner::Runner`] so the caller decides how to
//! schedule it.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod builtin;
pub mod channel;
pub mod decoder;
pub mod encoder;
pub mod exit;
pub mod jfun;
pub mod lifting;
pub mod pexit;
pub mod protograph;
pub mod rng;
pub mod runner;
pub mod search;
pub mod sim;
pub mod sparse;
pub mod turbo;

mod interp;

pub use channel::{ChannelPoly, NoiseModel, Trellis};
pub use exit::ExitSurface;

pub use protograph::{ExtensionColumns, Protomatrix, RcExtension, Rate};
pub use runner::{Runner, Sequential};
