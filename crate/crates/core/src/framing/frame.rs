use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_preamble, build_short_symbol, qam16_demap, qam16_map, PreambleSet, SubcarrierMap, PREAMBLE_SEED, SHORT_SEED};
use crate::error::{config_err, Error, Result};
use crate::numerics::ComplexGrid;

/// OFDM numerology and frame layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub n: usize,
    pub n_cp: usize,
    pub m_t: usize,
    pub m_r: usize,
    /// Total symbols, training included.
    pub symbols_per_frame: usize,
    pub n_short: usize,
    /// Sample period in seconds.
    pub ts: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n: 64,
            n_cp: 16,
            m_t: 2,
            m_r: 2,
            symbols_per_frame: 50,
            n_short: 1,
            ts: 5e-8,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_t == 0 || self.m_r == 0 {
            return config_err("antenna counts must be positive");
        }
        if self.n_cp >= self.n {
            return config_err("cyclic prefix must be shorter than the FFT");
        }
        if self.n_short == 0 {
            return config_err("at least one short training symbol is required");
        }
        if self.symbols_per_frame < self.n_short + 3 {
            return config_err("frame too short for training plus one data symbol");
        }
        if self.ts <= 0.0 {
            return config_err("sample period must be positive");
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.n + self.n_cp
    }

    pub fn data_symbols(&self) -> usize {
        self.symbols_per_frame - self.n_short - 2
    }

    /// Index of the first long training symbol within the frame.
    pub fn long1_index(&self) -> usize {
        self.n_short
    }

    pub fn first_data_index(&self) -> usize {
        self.n_short + 2
    }

    pub fn frame_samples(&self) -> usize {
        self.symbols_per_frame * self.symbol_len()
    }

    pub fn bits_per_symbol(&self, map: &SubcarrierMap) -> usize {
        map.data().len() * 4 * self.m_t
    }

    pub fn payload_bits(&self, map: &SubcarrierMap) -> usize {
        self.data_symbols() * self.bits_per_symbol(map)
    }
}

/// Pilot values `d(l)` per antenna, in ascending pilot-bin order.
///
/// Antenna `p` uses row `p mod 4` of the order-4 Walsh-Hadamard matrix, so up
/// to four antennas superimpose distinguishably over the four pilot bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotValues {
    pub bins: Vec<i32>,
    /// `values[p][l]`
    pub values: Vec<Vec<Complex64>>,
}

impl PilotValues {
    /// Transmitted pilot vector at bin `k` (one entry per antenna).
    pub fn at(&self, k: i32) -> Option<Vec<Complex64>> {
        let l = self.bins.iter().position(|&b| b == k)?;
        Some(self.values.iter().map(|row| row[l]).collect())
    }
}

pub fn pilot_values(m_t: usize, map: &SubcarrierMap) -> PilotValues {
    const WALSH: [[f64; 4]; 4] = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let bins = map.pilots().to_vec();
    let values = (0..m_t)
        .map(|p| (0..bins.len()).map(|l| Complex64::new(WALSH[p % 4][l % 4], 0.0)).collect())
        .collect();
    PilotValues { bins, values }
}

/// What the receiver is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub n_bits: usize,
    /// Payload packed MSB-first.
    #[serde(with = "hex_bits")]
    pub bits: Vec<u8>,
    pub pilots: PilotValues,
}

mod hex_bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        let packed: Vec<u8> = bits
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
            .collect();
        s.serialize_str(&hex::encode(packed))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        Ok(bytes.iter().flat_map(|&byte| (0..8).map(move |i| (byte >> (7 - i)) & 1)).collect())
    }
}

impl FrameTruth {
    pub fn bits(&self) -> &[u8] {
        &self.bits[..self.n_bits]
    }
}

/// One transmitted frame in the frequency domain.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `[short..., long1, long2, data...]`, each `N x m_t`.
    pub symbols: Vec<ComplexGrid>,
    pub truth: FrameTruth,
}

impl Frame {
    pub fn data_symbols(&self, cfg: &FrameConfig) -> &[ComplexGrid] {
        &self.symbols[cfg.first_data_index()..]
    }
}

/// Bits of one data symbol laid out antenna-major, ascending data bins.
pub(crate) fn load_symbol(grid: &mut ComplexGrid, map: &SubcarrierMap, bits: &[u8]) -> Result<()> {
    let syms = qam16_map(bits)?;
    let per_ant = map.data().len();
    for (p, chunk) in syms.chunks(per_ant).enumerate() {
        for (&k, &s) in map.data().iter().zip(chunk) {
            grid.set(k, p, s);
        }
    }
    Ok(())
}

/// Inverse of [`load_symbol`] for a grid of detected symbols.
pub fn unload_symbol(grid: &ComplexGrid, map: &SubcarrierMap) -> Vec<u8> {
    let syms: Vec<Complex64> = (0..grid.m()).flat_map(|p| map.data().iter().map(move |&k| grid.at(k, p))).collect();
    qam16_demap(&syms)
}

/// Builds `[short x n_short, T1, T2, data...]` with pilots on every data symbol.
pub fn assemble_frame(cfg: &FrameConfig, map: &SubcarrierMap, payload: &[u8], pilots: &PilotValues) -> Result<Frame> {
    cfg.validate()?;
    let want = cfg.payload_bits(map);
    if payload.len() != want {
        return Err(Error::Config(format!("payload has {} bits, frame carries {want}", payload.len())));
    }
    let preamble: PreambleSet = build_preamble(cfg.m_t, map, PREAMBLE_SEED);
    let short = build_short_symbol(map, cfg.m_t, SHORT_SEED);
    let mut symbols = Vec::with_capacity(cfg.symbols_per_frame);
    symbols.extend(std::iter::repeat_n(short, cfg.n_short));
    symbols.push(preamble.t1().clone());
    symbols.push(preamble.t2().clone());
    for bits in payload.chunks(cfg.bits_per_symbol(map)) {
        let mut g = ComplexGrid::zeros(cfg.n, cfg.m_t);
        load_symbol(&mut g, map, bits)?;
        for (p, row) in pilots.values.iter().enumerate() {
            for (&k, &d) in pilots.bins.iter().zip(row) {
                g.set(k, p, d);
            }
        }
        symbols.push(g);
    }
    Ok(Frame {
        symbols,
        truth: FrameTruth {
            n_bits: payload.len(),
            bits: payload.to_vec(),
            pilots: pilots.clone(),
        },
    })
}
