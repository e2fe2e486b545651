use crate::error::{Error, Result};

/// Sparse spike train of one sample: for each timestep, the indices of the
/// neurons that fired.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeRaster {
    neurons: usize,
    horizon: usize,
    offsets: Vec<usize>,
    active: Vec<u32>,
}

impl SpikeRaster {
    /// Builds a raster from per-step active lists.
    pub fn from_steps<I, S>(neurons: usize, steps: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u32]>,
    {
        let mut offsets = vec![0];
        let mut active = Vec::new();
        for step in steps {
            for &i in step.as_ref() {
                if i as usize >= neurons {
                    return Err(Error::Shape(format!("neuron index {i} >= {neurons}")));
                }
                active.push(i);
            }
            offsets.push(active.len());
        }
        let horizon = offsets.len() - 1;
        Ok(SpikeRaster {
            neurons,
            horizon,
            offsets,
            active,
        })
    }

    /// From a dense `(neurons, horizon)` neuron-major 0/1 array.
    pub fn from_dense(neurons: usize, horizon: usize, dense: &[u8]) -> Result<Self> {
        if dense.len() != neurons * horizon {
            return Err(Error::Shape(format!(
                "dense raster has {} entries, expected {neurons} x {horizon}",
                dense.len()
            )));
        }
        let mut steps = vec![Vec::new(); horizon];
        for i in 0..neurons {
            for (t, step) in steps.iter_mut().enumerate() {
                if dense[i * horizon + t] != 0 {
                    step.push(i as u32);
                }
            }
        }
        Self::from_steps(neurons, steps)
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn active_at(&self, t: usize) -> &[u32] {
        &self.active[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn spike_count(&self) -> usize {
        self.active.len()
    }

    /// Dense neuron-major `(neurons, horizon)` 0/1 array.
    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.neurons * self.horizon];
        for t in 0..self.horizon {
            for &i in self.active_at(t) {
                out[i as usize * self.horizon + t] = 1;
            }
        }
        out
    }

    /// First `t` steps.
    pub fn truncated(&self, t: usize) -> SpikeRaster {
        let t = t.min(self.horizon);
        SpikeRaster {
            neurons: self.neurons,
            horizon: t,
            offsets: self.offsets[..=t].to_vec(),
            active: self.active[..self.offsets[t]].to_vec(),
        }
    }
}

/// Binary spike array indexed `(sample, neuron, timestep)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrainBatch {
    pub batch: usize,
    pub neurons: usize,
    pub horizon: usize,
    pub data: Vec<u8>,
}

impl SpikeTrainBatch {
    pub fn zeros(batch: usize, neurons: usize, horizon: usize) -> Self {
        SpikeTrainBatch {
            batch,
            neurons,
            horizon,
            data: vec![0; batch * neurons * horizon],
        }
    }

    pub fn new(batch: usize, neurons: usize, horizon: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != batch * neurons * horizon {
            return Err(Error::Shape(format!(
                "spike data has {} entries, expected {batch} x {neurons} x {horizon}",
                data.len()
            )));
        }
        if data.iter().any(|&x| x > 1) {
            return Err(Error::Shape("spike entries must be 0 or 1".into()));
        }
        Ok(SpikeTrainBatch {
            batch,
            neurons,
            horizon,
            data,
        })
    }

    #[inline]
    pub fn get(&self, sample: usize, neuron: usize, t: usize) -> u8 {
        self.data[(sample * self.neurons + neuron) * self.horizon + t]
    }

    #[inline]
    pub fn set(&mut self, sample: usize, neuron: usize, t: usize, value: u8) {
        self.data[(sample * self.neurons + neuron) * self.horizon + t] = value;
    }

    pub fn sample(&self, b: usize) -> &[u8] {
        let n = self.neurons * self.horizon;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn raster(&self, b: usize) -> SpikeRaster {
        SpikeRaster::from_dense(self.neurons, self.horizon, self.sample(b))
            .expect("batch slices are consistent by construction")
    }

    pub fn from_rasters(rasters: &[SpikeRaster]) -> Result<Self> {
        let first = rasters.first().ok_or(Error::EmptyInput("spike batch"))?;
        let (n, t) = (first.neurons(), first.horizon());
        let mut data = Vec::with_capacity(rasters.len() * n * t);
        for r in rasters {
            if r.neurons() != n || r.horizon() != t {
                return Err(Error::Shape("rasters in a batch must share shape".into()));
            }
            data.extend(r.to_dense());
        }
        Ok(SpikeTrainBatch {
            batch: rasters.len(),
            neurons: n,
            horizon: t,
            data,
        })
    }
}

/// Mean firing rate per `(sample, neuron)`, row-major.
pub fn mean_rate(spikes: &SpikeTrainBatch) -> Vec<f64> {
    let t = spikes.horizon.max(1) as f64;
    spikes
        .data
        .chunks(spikes.horizon.max(1))
        .map(|row| row.iter().map(|&s| s as f64).sum::<f64>() / t)
        .collect()
}
