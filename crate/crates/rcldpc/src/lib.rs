//! Std companion of `rcldpc-core`: a rayon-backed [`Runner`](rcldpc_core::Runner),
//! CSV/JSON file formats with replay manifests, and the `rcldpc` command line.

pub mod cli;
pub mod formats;
pub mod parallel;

pub use parallel::Parallel;
pub use rcldpc_core;
