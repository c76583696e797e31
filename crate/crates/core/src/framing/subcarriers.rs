use crate::error::{config_err, Result};

/// Partition of the logical subcarriers `-N/2..N/2` into data, pilot and
/// null bins.
///
/// For `N = 64` this is the 802.11a plan: pilots at +-7 and +-21, DC and the
/// guard bands `-32..=-27`, `27..=31` null, the remaining 48 bins data. Other
/// power-of-two sizes scale the edges and pilot positions proportionally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    n: usize,
    data: Vec<i32>,
    pilots: Vec<i32>,
    nulls: Vec<i32>,
    used: Vec<i32>,
}

impl SubcarrierMap {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return config_err(format!("subcarrier map needs a power-of-two size >= 16, got {n}"));
        }
        let edge = (26 * n / 64) as i32;
        let inner = ((7 * n) as f64 / 64.0).round() as i32;
        let outer = ((21 * n) as f64 / 64.0).round() as i32;
        let pilots = vec![-outer, -inner, inner, outer];
        let half = (n / 2) as i32;
        let (mut data, mut nulls, mut used) = (Vec::new(), Vec::new(), Vec::new());
        for k in -half..half {
            if k == 0 || k.abs() > edge {
                nulls.push(k);
            } else {
                used.push(k);
                if !pilots.contains(&k) {
                    data.push(k);
                }
            }
        }
        Ok(Self {
            n,
            data,
            pilots,
            nulls,
            used,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Data bins in ascending logical order.
    pub fn data(&self) -> &[i32] {
        &self.data
    }

    /// Pilot bins in ascending logical order.
    pub fn pilots(&self) -> &[i32] {
        &self.pilots
    }

    pub fn nulls(&self) -> &[i32] {
        &self.nulls
    }

    /// Data and pilot bins in ascending logical order.
    pub fn used(&self) -> &[i32] {
        &self.used
    }

    pub fn is_used(&self, k: i32) -> bool {
        self.used.binary_search(&k).is_ok()
    }

    pub fn is_data(&self, k: i32) -> bool {
        self.data.binary_search(&k).is_ok()
    }

    /// Positive-frequency data bins; with their mirrors they cover every data bin once.
    pub fn data_pairs(&self) -> impl Iterator<Item = i32> + '_ {
        self.data.iter().copied().filter(|&k| k > 0)
    }
}
