//! Numerical machinery for one-parameter analytic families of maps:
//! periodic-orbit search and continuation, multiplier derivatives and
//! transversality certificates, parabolic petal geometry, finite-truncation
//! holomorphic motions, and real bifurcation analysis with full
//! bifurcation-diagram generation.
//!
//! The crate is organized around [`family::Family`], a two-variable analytic
//! map `(w, z) -> G_w(z)` evaluated through truncated Taylor jets
//! ([`jet::Jet2`]). Everything downstream (cycle solvers, transversality
//! reports, petal geometry, motions, bifurcation detection) consumes jets;
//! finite differences appear only in test oracles.

pub mod error;
pub mod family;
pub mod jet;
pub mod region;
pub mod series;
pub mod util;

pub mod cycles;
pub mod transversality;

pub mod motions;
pub mod parabolic;

pub mod bifurcation;

pub mod cli;
pub mod output;

pub use error::{Error, Result};
pub use family::Family;
