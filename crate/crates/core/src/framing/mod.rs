//! Transmit-side framing: the 802.11a-style subcarrier plan, Gray 16-QAM, the
//! subcarrier-multiplexed long training pair, the short training symbol used
//! for noise statistics, and CP-OFDM (de)modulation.

mod frame;
mod ofdm;
mod preamble;
mod qam;
mod subcarriers;

pub use frame::{assemble_frame, pilot_values, unload_symbol, Frame, FrameConfig, FrameTruth, PilotValues};
pub use ofdm::{ofdm_demodulate, ofdm_demodulate_frame, ofdm_modulate, ofdm_modulate_frame};
pub use preamble::{build_preamble, build_short_symbol, PreambleSet, PREAMBLE_SEED, SHORT_SEED};
pub use qam::{qam16_demap, qam16_map, qam16_slice, QAM16_POINTS};
pub use subcarriers::SubcarrierMap;
