//! Shared fixtures for the pipeline benchmarks.

use rfcomp_core::harness::{Link, ReceivedFrame, ScenarioConfig};
use rfcomp_core::numerics::RandomSource;

/// A `m x m` link at the default frame layout and one received frame at
/// 25 dB, 5 kHz.
pub fn fixture(m: usize) -> (Link, ReceivedFrame) {
    let mut cfg = ScenarioConfig::default();
    cfg.frame.m_t = m;
    cfg.frame.m_r = m;
    let link = Link::new(&cfg).expect("default config is valid");
    let rx = link.receive(25.0, 5e3, &RandomSource::new(1), 0).expect("frame");
    (link, rx)
}
