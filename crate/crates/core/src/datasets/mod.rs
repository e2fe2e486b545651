//! Dataset loading and spike encoding.

mod container;
mod encode;
mod idx;
mod synthetic;

pub use container::{load_encoded, save_encoded, ENCODED_MAGIC, ENCODED_VERSION};
pub use encode::{encode_rate, sample_seed, RateCoded};
pub use idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::{gen_synthetic_temporal, SyntheticTemporalConfig};

use crate::error::{Error, Result};
use crate::network::SpikeRaster;

/// Static feature vectors in `[0, 1]` with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDense {
    pub samples: usize,
    pub dims: usize,
    pub classes: usize,
    /// Row-major `(samples, dims)`.
    pub features: Vec<f32>,
    pub labels: Vec<usize>,
}

impl LabeledDense {
    pub fn new(dims: usize, classes: usize, features: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        if dims == 0 || features.len() != labels.len() * dims {
            return Err(Error::Shape(format!(
                "{} features for {} samples of {dims} dims",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Shape("features must lie in [0, 1]".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(LabeledDense {
            samples: labels.len(),
            dims,
            classes,
            features,
            labels,
        })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> LabeledDense {
        let n = n.min(self.samples);
        LabeledDense {
            samples: n,
            dims: self.dims,
            classes: self.classes,
            features: self.features[..n * self.dims].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodingMethod {
    Rate,
    SyntheticTemporal,
    External,
}

impl EncodingMethod {
    pub(crate) fn code(self) -> u8 {
        match self {
            EncodingMethod::Rate => 0,
            EncodingMethod::SyntheticTemporal => 1,
            EncodingMethod::External => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EncodingMethod::Rate),
            1 => Some(EncodingMethod::SyntheticTemporal),
            2 => Some(EncodingMethod::External),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingDescriptor {
    pub method: EncodingMethod,
    pub horizon: usize,
    pub seed: u64,
}

/// Spike trains `(samples, neurons, horizon)` with labels, bit-packed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedDataset {
    pub samples: usize,
    pub neurons: usize,
    pub horizon: usize,
    pub classes: usize,
    /// LSB-first bits in `(sample, neuron, t)` order.
    pub bits: Vec<u8>,
    pub labels: Vec<usize>,
    pub descriptor: EncodingDescriptor,
}

impl EncodedDataset {
    pub fn from_rasters(
        rasters: &[SpikeRaster],
        labels: Vec<usize>,
        classes: usize,
        descriptor: EncodingDescriptor,
    ) -> Result<Self> {
        if rasters.len() != labels.len() {
            return Err(Error::Shape(format!("{} rasters but {} labels", rasters.len(), labels.len())));
        }
        let first = rasters.first().ok_or(Error::EmptyInput("encoded dataset"))?;
        let (n, t) = (first.neurons(), first.horizon());
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        let per = n * t;
        let mut bits = vec![0u8; (rasters.len() * per).div_ceil(8)];
        for (s, r) in rasters.iter().enumerate() {
            if r.neurons() != n || r.horizon() != t {
                return Err(Error::Shape("all samples must share neurons and horizon".into()));
            }
            for step in 0..t {
                for &i in r.active_at(step) {
                    let bit = s * per + i as usize * t + step;
                    bits[bit / 8] |= 1 << (bit % 8);
                }
            }
        }
        Ok(EncodedDataset {
            samples: rasters.len(),
            neurons: n,
            horizon: t,
            classes,
            bits,
            labels,
            descriptor,
        })
    }

    #[inline]
    pub fn get(&self, sample: usize, neuron: usize, t: usize) -> u8 {
        let bit = (sample * self.neurons + neuron) * self.horizon + t;
        (self.bits[bit / 8] >> (bit % 8)) & 1
    }

    pub fn sample_raster(&self, sample: usize) -> SpikeRaster {
        let steps: Vec<Vec<u32>> = (0..self.horizon)
            .map(|t| {
                (0..self.neurons)
                    .filter(|&i| self.get(sample, i, t) == 1)
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();
        SpikeRaster::from_steps(self.neurons, steps).expect("indices are in range")
    }

    pub fn spike_count(&self, sample: usize) -> usize {
        (0..self.neurons)
            .flat_map(|i| (0..self.horizon).map(move |t| (i, t)))
            .filter(|&(i, t)| self.get(sample, i, t) == 1)
            .count()
    }

    /// Mean rate of every channel of one sample.
    pub fn channel_rates(&self, sample: usize) -> Vec<f64> {
        (0..self.neurons)
            .map(|i| (0..self.horizon).map(|t| self.get(sample, i, t) as f64).sum::<f64>() / self.horizon as f64)
            .collect()
    }
}

/// Anything that can serve labelled spike trains to the trainer.
pub trait SpikeSource: Sync {
    fn len(&self) -> usize;
    fn neurons(&self) -> usize;
    fn horizon(&self) -> usize;
    fn classes(&self) -> usize;
    fn label(&self, index: usize) -> usize;
    /// Spike train of sample `index` as presented in `epoch`. Sources with
    /// fixed encodings ignore the epoch.
    fn raster(&self, index: usize, epoch: usize) -> SpikeRaster;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SpikeSource for EncodedDataset {
    fn len(&self) -> usize {
        self.samples
    }
    fn neurons(&self) -> usize {
        self.neurons
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn classes(&self) -> usize {
        self.classes
    }
    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }
    fn raster(&self, index: usize, _epoch: usize) -> SpikeRaster {
        self.sample_raster(index)
    }
}

impl<T: SpikeSource + ?Sized> SpikeSource for &T {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn neurons(&self) -> usize {
        (**self).neurons()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn classes(&self) -> usize {
        (**self).classes()
    }
    fn label(&self, index: usize) -> usize {
        (**self).label(index)
    }
    fn raster(&self, index: usize, epoch: usize) -> SpikeRaster {
        (**self).raster(index, epoch)
    }
}
