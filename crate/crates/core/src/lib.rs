//! Security analysis for measurement-device-independent QKD with a
//! misalignment-tolerant test basis.
//!
//! The crate is `no_std` (with `alloc`) so the estimation core can be embedded
//! in post-processing firmware. IO, sampling, configuration and the command
//! line live in the companion `mdiqkd` crate.
//!
//! Pipeline, bottom to top:
//!
//! * [`qstate`]: the four-state encoding of each user and Bell-state overlaps.
//! * [`channel`]: honest-relay yield model and weak-coherent-pulse gains.
//! * [`security`]: coefficient recovery, bit/phase error rates, single-photon key rate.
//! * [`decoy`]: joint-category pooling, Poisson weights, asymptotic yield bounds, WCP key rate.
//! * [`finitekey`]: Chernoff intervals, per-category linear programs, phase-error NLP.
//! * [`optimizer`]: constrained Nelder-Mead search over the eight source parameters.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod channel;
pub mod decoy;
mod error;
pub mod finitekey;
pub(crate) mod math;
pub mod optimizer;
pub mod qstate;
pub mod rng;
pub mod security;

pub use error::{Error, Result};
