//! Turbo-code simulation toolkit built around iterative Log-MAP decoding with
//! pluggable early-stopping rules.
//!
//! The crate is organised bottom-up:
//!
//! - [`trellis`]: the recursive systematic convolutional constituent code,
//!   random interleavers, rate-1/2 PCCC encoding and depuncturing.
//! - [`channel`]: BPSK over AWGN or fast Rayleigh fading, channel LLRs.
//! - [`decoder`]: the max* primitive, the BCJR Log-MAP constituent decoder and
//!   the iterative turbo loop.
//! - [`metrics`]: per-iteration convergence scalars (mutual information and its
//!   hard-decision approximation, the epsilon metric, cross-entropy, ...).
//! - [`rules`]: the stopping-rule contract and its implementations.
//! - [`sim`]: the Monte-Carlo harness producing BER / FER / average-iteration
//!   sweeps, MI trajectories and ratio curves.
//!
//! Bits are `u8` values in `{0, 1}`. BPSK maps bit 0 to +1 and bit 1 to -1,
//! and every LLR is `ln P(x = +1) / P(x = -1)`, so a non-negative LLR decides
//! bit 0.

pub mod channel;
pub mod decoder;
mod error;
pub mod metrics;
pub mod rules;
pub mod sim;
pub mod trellis;

pub use error::{Error, Result};

/// Hard decision on an LLR under the crate-wide mapping (LLR >= 0 -> bit 0).
#[inline]
pub fn hard_bit(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// Hard decisions for a whole LLR vector.
pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| hard_bit(l)).collect()
}
