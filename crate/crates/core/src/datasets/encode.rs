use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EncodedDataset, EncodingDescriptor, EncodingMethod, LabeledDense, SpikeSource};
use crate::error::{Error, Result};
use crate::network::SpikeRaster;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample RNG seed, independent of iteration order and thread count.
pub fn sample_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ epoch as u64) ^ index as u64)
}

/// Bernoulli spike train with per-step probability equal to each feature.
pub(crate) fn rate_raster(features: &[f32], horizon: usize, seed: u64) -> SpikeRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = vec![Vec::new(); horizon];
    for step in steps.iter_mut() {
        for (i, &p) in features.iter().enumerate() {
            let fire = if p <= 0.0 {
                false
            } else if p >= 1.0 {
                true
            } else {
                rng.gen::<f64>() < p as f64
            };
            if fire {
                step.push(i as u32);
            }
        }
    }
    SpikeRaster::from_steps(features.len(), steps).expect("indices are in range")
}

/// Rate-codes every sample once with a fixed seed.
pub fn encode_rate(data: &LabeledDense, horizon: usize, seed: u64) -> Result<EncodedDataset> {
    if horizon == 0 {
        return Err(Error::Config("encoding horizon must be at least one step".into()));
    }
    let rasters: Vec<SpikeRaster> = (0..data.samples)
        .into_par_iter()
        .map(|i| rate_raster(data.row(i), horizon, sample_seed(seed, 0, i)))
        .collect();
    EncodedDataset::from_rasters(
        &rasters,
        data.labels.clone(),
        data.classes,
        EncodingDescriptor {
            method: EncodingMethod::Rate,
            horizon,
            seed,
        },
    )
}

/// Rate coding on the fly. With `resample` set, every epoch draws fresh
/// spikes; epoch 0 matches [`encode_rate`] with the same seed.
#[derive(Clone, Copy, Debug)]
pub struct RateCoded<'a> {
    pub data: &'a LabeledDense,
    pub horizon: usize,
    pub seed: u64,
    pub resample: bool,
}

impl SpikeSource for RateCoded<'_> {
    fn len(&self) -> usize {
        self.data.samples
    }
    fn neurons(&self) -> usize {
        self.data.dims
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn classes(&self) -> usize {
        self.data.classes
    }
    fn label(&self, index: usize) -> usize {
        self.data.labels[index]
    }
    fn raster(&self, index: usize, epoch: usize) -> SpikeRaster {
        let epoch = if self.resample { epoch } else { 0 };
        rate_raster(self.data.row(index), self.horizon, sample_seed(self.seed, epoch, index))
    }
}
