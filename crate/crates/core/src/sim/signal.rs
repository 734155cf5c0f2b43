//! Deterministic synthetic phenomena.
//!
//! Noise is drawn from a generator keyed by `(seed, key)` rather than from a
//! running stream, so a value depends only on its key and never on the order
//! in which other events were processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{CapabilityDecl, SignalParams};

/// Standard normal variate for `(seed, key)`.
pub fn keyed_gaussian(seed: u64, key: u64) -> f64 {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&key.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(s);
    StandardNormal.sample(&mut rng)
}

/// Noise-free part of the signal.
pub fn clean_signal(p: &SignalParams, t_ms: u64) -> f64 {
    let phase = (t_ms % p.period_ms) as f64 / p.period_ms as f64;
    p.base + p.amplitude * (2.0 * std::f64::consts::PI * phase).sin()
}

pub fn signal_value(p: &SignalParams, t_ms: u64) -> f64 {
    let v = clean_signal(p, t_ms);
    if p.noise_sigma > 0.0 {
        v + p.noise_sigma * keyed_gaussian(p.seed, t_ms)
    } else {
        v
    }
}

/// Value of a capability's phenomenon at `t_ms`, in the native unit.
pub fn sample_value(cap: &CapabilityDecl, t_ms: u64) -> f64 {
    signal_value(&cap.signal, t_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capability, Unit};
    use crate::sim::config::IntervalRange;

    fn cap(base: f64, amplitude: f64, sigma: f64) -> CapabilityDecl {
        CapabilityDecl {
            capability: Capability::Temperature,
            units: vec![Unit::Celsius],
            sampling_interval_ms: IntervalRange { min: 1, max: 1000 },
            signal: SignalParams {
                base,
                amplitude,
                period_ms: 1000,
                noise_sigma: sigma,
                seed: 99,
            },
        }
    }

    #[test]
    fn constant() {
        let c = cap(21.5, 0.0, 0.0);
        for t in [0, 1, 999, 123_456_789] {
            assert_eq!(sample_value(&c, t), 21.5);
        }
    }

    #[test]
    fn sine_peak_at_quarter_period() {
        let c = cap(20.0, 3.0, 0.0);
        assert_eq!(sample_value(&c, 250), 23.0);
        assert_eq!(sample_value(&c, 1250), 23.0);
    }

    #[test]
    fn replay_is_bit_identical() {
        let c = cap(20.0, 3.0, 0.4);
        let a: Vec<u64> = (0..10_000)
            .map(|t| sample_value(&c, t * 7).to_bits())
            .collect();
        let b: Vec<u64> = (0..10_000)
            .map(|t| sample_value(&c, t * 7).to_bits())
            .collect();
        assert_eq!(a, b);
        // and order-independent
        let rev: Vec<u64> = (0..10_000)
            .rev()
            .map(|t| sample_value(&c, t * 7).to_bits())
            .collect();
        assert_eq!(a, rev.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn noise_statistics_are_plausible() {
        let n = 20_000u64;
        let xs: Vec<f64> = (0..n).map(|k| keyed_gaussian(5, k)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }
}
