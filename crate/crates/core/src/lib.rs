//! Receiver-side identification of nonlinear frequency-selective OFDM channels.
//!
//! The transmitted OFDM block passes through a memoryless AM-AM distortion and
//! then a complex FIR channel. The receiver replicates that chain with a
//! [`DctNeuron`](dct_neuron::DctNeuron) (a short cosine expansion of the
//! amplitude curve) feeding a linear FIR estimate, alternating a closed-form
//! Wiener solve for the taps with normalized-LMS sweeps over the neuron
//! coefficients. The learned model then drives either transmitter
//! predistortion or an iterative distortion-cancelling decoder.
//!
//! Module map:
//!
//! - [`signal`]: Gray QAM mapping, orthonormal OFDM modulation, cyclic prefix.
//! - [`channel`]: ground-truth AM-AM curves, FIR taps, AWGN.
//! - [`dct_neuron`]: the cosine basis, evaluation and the LMS update.
//! - [`estimator`]: Wiener solve, LMS sweeps, the alternating loop and metrics.
//! - [`detect`]: inverse learning, predistortion, ZF and iterative decoding, BER.
//! - [`harness`]: seeded Monte Carlo experiments and CSV output.

pub mod channel;
pub mod dct_neuron;
pub mod detect;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod signal;

mod csv_io;

pub use error::{Error, Result};

pub use num_complex::Complex64;
