//! Classification of digitally modulated radio signals from raw I/Q samples
//! with a capsule-style convolutional network, built from first principles.
//!
//! The crate is organised as a small stack of independent layers:
//!
//! - [`nn`] — tensors, layer primitives with hand-written backward passes,
//!   and an SGD-with-momentum optimizer. No autograd, no external BLAS.
//! - [`capsnet`] — the network itself: a shared feature stage fanned out
//!   into one capsule branch per modulation class, plus checkpointing.
//! - [`modsig`] — synthetic signal generation: constellation mapping,
//!   square-root raised-cosine pulse shaping, MSK, carrier frequency
//!   offset, calibrated in-band noise, and measurement/demodulation
//!   oracles used to validate the chain.
//! - [`dataio`] — dataset persistence (sample blob + text manifest),
//!   stratified splits, merging, and import adapters.
//! - [`trainer`] — the training loop (mini-batch SGDM, validation-based
//!   model selection, early stopping).
//! - [`eval`] — confusion matrices, accuracy-versus-SNR curves, the
//!   train/test distribution-shift experiment, and CSV reports.
//!
//! All stochastic components are seeded explicitly and produce identical
//! results for identical seeds; see the module docs for the guarantees.

pub mod capsnet;
pub mod dataio;
pub mod eval;
pub mod modsig;
pub mod nn;
pub mod trainer;
