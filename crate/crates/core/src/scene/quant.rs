//! 8-bit storage codec for pre-activation values.

use serde::{Deserialize, Serialize};

use super::CHANNELS;

/// Per-channel `(lo, hi)` pre-activation bounds for the 8 stored channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub ranges: [[f64; 2]; CHANNELS],
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        let mut ranges = [[-7.0, 7.0]; CHANNELS];
        ranges[0] = [-10.0, 10.0];
        QuantizationSpec { ranges }
    }
}

impl QuantizationSpec {
    pub fn validate(&self) -> crate::Result<()> {
        for (ch, [lo, hi]) in self.ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(crate::Error::InvalidConfig(format!(
                    "quantization range of channel {ch} is empty: ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    /// Worst-case reconstruction error of one channel.
    pub fn step(&self, channel: usize) -> f64 {
        let [lo, hi] = self.ranges[channel];
        (hi - lo) / 255.0
    }

    pub fn quantize(&self, x: f64, channel: usize) -> u8 {
        quantize(x, self.ranges[channel])
    }

    pub fn dequantize(&self, code: u8, channel: usize) -> f64 {
        dequantize(code, self.ranges[channel])
    }

    pub fn quantize_texel(&self, values: &[f64; CHANNELS]) -> [u8; CHANNELS] {
        std::array::from_fn(|ch| self.quantize(values[ch], ch))
    }

    pub fn table(&self) -> DequantTable {
        DequantTable {
            values: std::array::from_fn(|ch| {
                std::array::from_fn(|code| self.dequantize(code as u8, ch))
            }),
        }
    }
}

pub fn quantize(x: f64, [lo, hi]: [f64; 2]) -> u8 {
    let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
    (255.0 * (x - lo) / (hi - lo)).round() as u8
}

pub fn dequantize(code: u8, [lo, hi]: [f64; 2]) -> f64 {
    lo + f64::from(code) * (hi - lo) / 255.0
}

/// Precomputed dequantization for every (channel, code) pair.
#[derive(Clone, Debug)]
pub struct DequantTable {
    values: [[f64; 256]; CHANNELS],
}

impl DequantTable {
    #[inline]
    pub fn get(&self, channel: usize, code: u8) -> f64 {
        self.values[channel][code as usize]
    }

    #[inline]
    pub fn texel(&self, codes: &[u8; CHANNELS]) -> [f64; CHANNELS] {
        std::array::from_fn(|ch| self.values[ch][codes[ch] as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn endpoints_and_midpoint() {
        let r = [-10.0, 10.0];
        assert_eq!(quantize(-10.0, r), 0);
        assert_eq!(dequantize(0, r), -10.0);
        assert_eq!(quantize(10.0, r), 255);
        assert_eq!(dequantize(255, r), 10.0);
        assert_eq!(quantize(0.0, r), 128);
        let expected = 10.0 * (128.0 * 2.0 / 255.0 - 1.0);
        assert!((dequantize(128, r) - expected).abs() < 1e-12);
        assert!((dequantize(128, r) - 0.0392).abs() < 1e-3);
    }

    #[test]
    fn round_trip_error_bound() {
        let spec = QuantizationSpec::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000_000 {
            let ch = rng.random_range(0..CHANNELS);
            let [lo, hi] = spec.ranges[ch];
            let x: f64 = rng.random_range(lo - 5.0..hi + 5.0);
            let back = spec.dequantize(spec.quantize(x, ch), ch);
            assert!((back - x.clamp(lo, hi)).abs() <= spec.step(ch));
        }
    }

    #[test]
    fn table_matches_formula() {
        let spec = QuantizationSpec::default();
        let t = spec.table();
        for ch in 0..CHANNELS {
            for code in 0..=255u8 {
                assert_eq!(t.get(ch, code), spec.dequantize(code, ch));
            }
        }
    }
}
