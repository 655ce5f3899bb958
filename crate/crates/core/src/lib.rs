//! Exact spectral analysis of Gibbs samplers on finite product spaces.
//!
//! The crate builds the small-step, deterministic-scan and random-scan
//! transition operators of a full-conditional Gibbs sampler as dense tables,
//! measures them in the Hilbert space `L²(π)`, and checks the classical
//! alternating-projection bounds that relate the scans to each other:
//!
//! * [`measure`]: product state spaces, target laws and the π-weighted geometry.
//! * [`operators`]: Markov operators, adjoints, centred norms and spectral radii.
//! * [`geometry`]: generalized Friedrichs angle and inclination of the
//!   subspaces `M_i` of functions constant in coordinate `i`.
//! * [`bounds`]: closed-form norm and gap bounds with slack reporting.
//! * [`sampler`]: seeded simulation plus CLT and Hoeffding diagnostics.
//! * [`counterexample`]: the truncated ladder chain whose additive
//!   reversibilization loses its spectral gap.
//! * [`cli`]: the command-line front end.
//!
//! Coordinates are 0-based in the library API and 1-based in the CLI grammar
//! and in operator labels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod counterexample;
pub mod error;
pub mod geometry;
pub mod measure;
pub mod operators;
pub mod sampler;
mod table;

pub use error::{Error, Result};
