//! Baseband MIMO-OFDM link simulator with joint estimation and compensation of
//! receiver IQ imbalance and Wiener phase noise.
//!
//! The pipeline runs transmit framing, a multipath channel, receiver
//! impairments, preamble-stage estimation of the effective channel and IQ
//! parameters, per-symbol common-phase tracking from pilots, and ZF/MMSE
//! detection over mirror-subcarrier pairs. [`harness`] drives seeded
//! Monte-Carlo campaigns over it.

pub mod channel;
pub mod equalization;
pub mod estimation;
pub mod error;
pub mod framing;
pub mod harness;
pub mod impairments;
pub mod numerics;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use harness::{run_campaign, CampaignResult, Mode, ResultRow, ScenarioConfig};
