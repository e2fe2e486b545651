//! Rate-invariant temporal patterns.
//!
//! Channels are split into `segments` contiguous groups and the horizon into
//! `segments` equal windows. A class is a permutation of groups over
//! windows: in window `w` only the group `perm[w]` fires. Every channel emits
//! exactly `budget` spikes at distinct random steps inside its window, away
//! from the window edges by `margin` steps, so per-channel spike counts are
//! the same in every sample of every class and only the order differs.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encode::sample_seed;
use super::{EncodedDataset, EncodingDescriptor, EncodingMethod};
use crate::error::{Error, Result};
use crate::network::SpikeRaster;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTemporalConfig {
    pub classes: usize,
    pub channels: usize,
    pub horizon: usize,
    pub samples_per_class: usize,
    pub segments: usize,
    /// Spikes per channel per sample.
    pub budget: usize,
    /// Silent steps at both edges of every window.
    pub margin: usize,
}

impl Default for SyntheticTemporalConfig {
    fn default() -> Self {
        SyntheticTemporalConfig {
            classes: 4,
            channels: 30,
            horizon: 30,
            samples_per_class: 100,
            segments: 3,
            budget: 3,
            margin: 2,
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                go(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

impl SyntheticTemporalConfig {
    pub fn window(&self) -> usize {
        self.horizon / self.segments.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.channels == 0 || self.samples_per_class == 0 || self.segments == 0 {
            return Err(Error::Config(
                "synthetic task needs at least 2 classes and non-zero channels, samples and segments".into(),
            ));
        }
        if self.channels < self.segments {
            return Err(Error::Config(format!(
                "{} channels cannot fill {} groups",
                self.channels, self.segments
            )));
        }
        // segments! grows fast; stop counting once it covers the classes
        let mut orders = 1usize;
        for k in 1..=self.segments {
            orders = orders.saturating_mul(k);
        }
        if self.classes > orders {
            return Err(Error::Config(format!(
                "{} segments give only {orders} orderings for {} classes",
                self.segments, self.classes
            )));
        }
        let slots = self.window().saturating_sub(2 * self.margin);
        if self.budget == 0 || self.budget > slots {
            return Err(Error::Config(format!(
                "infeasible budget: {} spikes per channel in {slots} usable steps",
                self.budget
            )));
        }
        Ok(())
    }

    /// Group order of every class.
    pub fn class_orders(&self) -> Vec<Vec<usize>> {
        permutations(self.segments).into_iter().take(self.classes).collect()
    }

    pub fn group_of(&self, channel: usize) -> usize {
        channel * self.segments / self.channels
    }
}

pub fn gen_synthetic_temporal(cfg: &SyntheticTemporalConfig, seed: u64) -> Result<EncodedDataset> {
    cfg.validate()?;
    let orders = cfg.class_orders();
    let window = cfg.window();
    let slots = window - 2 * cfg.margin;
    let n = cfg.classes * cfg.samples_per_class;
    let mut rasters = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % cfg.classes;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, 0, i));
        let mut steps = vec![Vec::new(); cfg.horizon];
        for c in 0..cfg.channels {
            let g = cfg.group_of(c);
            let w = orders[class].iter().position(|&x| x == g).expect("orders are permutations");
            let start = w * window + cfg.margin;
            for k in sample(&mut rng, slots, cfg.budget) {
                steps[start + k].push(c as u32);
            }
        }
        for s in &mut steps {
            s.sort_unstable();
        }
        rasters.push(SpikeRaster::from_steps(cfg.channels, steps)?);
        labels.push(class);
    }
    EncodedDataset::from_rasters(
        &rasters,
        labels,
        cfg.classes,
        EncodingDescriptor {
            method: EncodingMethod::SyntheticTemporal,
            horizon: cfg.horizon,
            seed,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_are_identical_across_samples() {
        let cfg = SyntheticTemporalConfig::default();
        let d = gen_synthetic_temporal(&cfg, 5).unwrap();
        let expected = vec![cfg.budget as f64 / cfg.horizon as f64; cfg.channels];
        for s in 0..d.samples {
            assert_eq!(d.channel_rates(s), expected);
        }
    }

    #[test]
    fn classes_differ_in_timing() {
        let cfg = SyntheticTemporalConfig::default();
        let orders = cfg.class_orders();
        assert_eq!(orders.len(), 4);
        for a in 0..4 {
            for b in a + 1..4 {
                assert_ne!(orders[a], orders[b]);
            }
        }
        let d = gen_synthetic_temporal(&cfg, 1).unwrap();
        // channel 0 belongs to group 0, which fires first in class 0 and
        // second in class 2
        let first = |s: usize| (0..d.horizon).find(|&t| d.get(s, 0, t) == 1).unwrap();
        assert!(first(0) < cfg.window());
        assert!(first(2) >= cfg.window());
    }

    #[test]
    fn seeded_and_validated() {
        let cfg = SyntheticTemporalConfig::default();
        assert_eq!(gen_synthetic_temporal(&cfg, 9).unwrap(), gen_synthetic_temporal(&cfg, 9).unwrap());
        assert_ne!(gen_synthetic_temporal(&cfg, 9).unwrap(), gen_synthetic_temporal(&cfg, 10).unwrap());
        let bad = SyntheticTemporalConfig { budget: 7, ..cfg.clone() };
        assert!(gen_synthetic_temporal(&bad, 0).is_err());
        let bad = SyntheticTemporalConfig { classes: 7, ..cfg };
        assert!(gen_synthetic_temporal(&bad, 0).is_err());
    }

    #[test]
    fn rate_only_logistic_is_at_chance() {
        // multinomial logistic regression on per-channel rates, plain
        // gradient descent; the features are constant so nothing beats the
        // class prior
        let cfg = SyntheticTemporalConfig::default();
        let train = gen_synthetic_temporal(&cfg, 1).unwrap();
        let test = gen_synthetic_temporal(&cfg, 2).unwrap();
        let (c, n) = (cfg.classes, cfg.channels);
        let mut w = vec![0.0f64; c * (n + 1)];
        for _ in 0..200 {
            let mut g = vec![0.0; w.len()];
            for s in 0..train.samples {
                let x = train.channel_rates(s);
                let logits: Vec<f64> = (0..c)
                    .map(|k| w[k * (n + 1) + n] + (0..n).map(|i| w[k * (n + 1) + i] * x[i]).sum::<f64>())
                    .collect();
                let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
                for k in 0..c {
                    let p = (logits[k] - m).exp() / z - (train.labels[s] == k) as u8 as f64;
                    for i in 0..n {
                        g[k * (n + 1) + i] += p * x[i];
                    }
                    g[k * (n + 1) + n] += p;
                }
            }
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= 0.5 * gi / train.samples as f64;
            }
        }
        let correct = (0..test.samples)
            .filter(|&s| {
                let x = test.channel_rates(s);
                let score = |k: usize| w[k * (n + 1) + n] + (0..n).map(|i| w[k * (n + 1) + i] * x[i]).sum::<f64>();
                let pred = (0..c).max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a))).unwrap();
                pred == test.labels[s]
            })
            .count();
        let acc = correct as f64 / test.samples as f64;
        assert!(acc <= 1.0 / c as f64 + 0.05, "{acc}");
    }
}
