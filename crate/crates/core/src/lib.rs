//! Reservoir computing toolkit: shallow, deep and heterogeneous
//! (multi-timescale, delayed-state) echo state networks with a closed-form
//! ridge readout, a Bark-scale log filterbank speech front-end, and a
//! frame-level classification harness.
//!
//! Module map:
//!
//! - [`dsp`]: framing, Hamming window, power spectrum, Bark filterbank,
//!   LHCB features, per-utterance normalization, context stacking and the
//!   `FEAT1` feature file format.
//! - [`reservoir`]: layer initialization, spectral radius, the four update
//!   regimes and the `ESNM1` model container.
//! - [`readout`]: extended states, streaming ridge regression, prediction.
//! - [`pipeline`]: manifests, speaker splits, training, evaluation, seeded
//!   trials and grid search.
//! - [`bench`]: memory-capacity and synthetic frame classification tasks.

// Range checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dsp;
pub mod error;
pub mod pipeline;
pub mod readout;
pub mod reservoir;
pub mod rng;

pub use error::{Error, Result};
