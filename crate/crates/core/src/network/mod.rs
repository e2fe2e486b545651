//! Three-layer spiking network: an input layer that emits encoded spike
//! trains, a hidden layer and an output layer of dynamic neurons.
//!
//! At every step the hidden layer receives `sigmoid(W1^T x(t))` and the
//! output layer receives `sigmoid(W2^T h(t))` where `h(t)` are the hidden
//! spikes emitted in the same step.

mod checkpoint;
mod spikes;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use spikes::{mean_rate, SpikeRaster, SpikeTrainBatch};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{diverged, sigmoid, DynamicParams, SecondOrderParams};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSizes {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl LayerSizes {
    pub const fn new(input: usize, hidden: usize, output: usize) -> Self {
        LayerSizes {
            input,
            hidden,
            output,
        }
    }

    pub const MNIST: LayerSizes = LayerSizes::new(784, 500, 10);
}

/// Neuron types of one layer: a parameter table plus a per-neuron index
/// into it.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronLayer {
    pub table: Vec<DynamicParams>,
    pub assignment: Vec<usize>,
}

impl NeuronLayer {
    pub fn uniform(params: DynamicParams, n: usize) -> Self {
        NeuronLayer {
            table: vec![params],
            assignment: vec![0; n],
        }
    }

    /// One table entry per neuron, used when dynamic parameters are learned.
    pub fn per_neuron(params: Vec<DynamicParams>) -> Self {
        let assignment = (0..params.len()).collect();
        NeuronLayer {
            table: params,
            assignment,
        }
    }

    pub fn mixed(table: Vec<DynamicParams>, assignment: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&a| a >= table.len()) {
            return Err(Error::Config(format!(
                "neuron type index {bad} out of range for {} types",
                table.len()
            )));
        }
        Ok(NeuronLayer { table, assignment })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    #[inline]
    pub fn neuron(&self, j: usize) -> &DynamicParams {
        &self.table[self.assignment[j]]
    }

    fn validate(&self, n: usize, what: &str) -> Result<()> {
        if self.assignment.len() != n {
            return Err(Error::Shape(format!(
                "{what} layer assigns {} neurons, expected {n}",
                self.assignment.len()
            )));
        }
        if self.assignment.iter().any(|&a| a >= self.table.len()) {
            return Err(Error::Config(format!("{what} layer has a dangling type index")));
        }
        for p in &self.table {
            if p.kind() == crate::dynamics::NeuronKind::IzhikevichRef {
                return Err(Error::Config(
                    "Izhikevich neurons are a reference model and cannot be used in networks".into(),
                ));
            }
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub sizes: LayerSizes,
    pub hidden: DynamicParams,
    pub output: DynamicParams,
    /// Simulation horizon T in steps.
    pub horizon: usize,
    pub dt: f64,
    /// Gives every hidden and output neuron its own learnable second-order
    /// parameters, starting from [`SecondOrderParams::INITIAL`].
    pub learn_dynamics: bool,
}

impl NetworkConfig {
    pub fn new(sizes: LayerSizes, neuron: DynamicParams, horizon: usize) -> Self {
        NetworkConfig {
            sizes,
            hidden: neuron,
            output: neuron,
            horizon,
            dt: 1.0,
            learn_dynamics: false,
        }
    }

    pub fn meta(sizes: LayerSizes, horizon: usize) -> Self {
        let p = DynamicParams::SecondOrder(SecondOrderParams::INITIAL);
        NetworkConfig {
            learn_dynamics: true,
            ..NetworkConfig::new(sizes, p, horizon)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub sizes: LayerSizes,
    /// `input x hidden`.
    pub w1: Matrix,
    /// `hidden x output`.
    pub w2: Matrix,
    pub hidden: NeuronLayer,
    pub output: NeuronLayer,
    pub horizon: usize,
    pub dt: f64,
    pub learn_dynamics: bool,
    pub seed: u64,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Matrix { rows, cols, data }
}

/// Builds a network with weights drawn uniformly from `+-1/sqrt(fan_in)`.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<NetworkModel> {
    let s = config.sizes;
    if s.input == 0 || s.hidden == 0 || s.output == 0 {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {}-{}-{}",
            s.input, s.hidden, s.output
        )));
    }
    if config.horizon == 0 {
        return Err(Error::Config("horizon must be at least one step".into()));
    }
    if config.dt.is_nan() || config.dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {}", config.dt)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1 = uniform_matrix(&mut rng, s.input, s.hidden);
    let w2 = uniform_matrix(&mut rng, s.hidden, s.output);
    let (hidden, output) = if config.learn_dynamics {
        let p = DynamicParams::SecondOrder(SecondOrderParams::INITIAL);
        (
            NeuronLayer::per_neuron(vec![p; s.hidden]),
            NeuronLayer::per_neuron(vec![p; s.output]),
        )
    } else {
        (
            NeuronLayer::uniform(config.hidden, s.hidden),
            NeuronLayer::uniform(config.output, s.output),
        )
    };
    let model = NetworkModel {
        sizes: s,
        w1,
        w2,
        hidden,
        output,
        horizon: config.horizon,
        dt: config.dt,
        learn_dynamics: config.learn_dynamics,
        seed,
    };
    model.validate()?;
    Ok(model)
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        let s = self.sizes;
        if self.w1.rows != s.input || self.w1.cols != s.hidden || self.w1.data.len() != s.input * s.hidden {
            return Err(Error::Shape("W1 does not match layer sizes".into()));
        }
        if self.w2.rows != s.hidden || self.w2.cols != s.output || self.w2.data.len() != s.hidden * s.output {
            return Err(Error::Shape("W2 does not match layer sizes".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one step".into()));
        }
        self.hidden.validate(s.hidden, "hidden")?;
        self.output.validate(s.output, "output")?;
        if self.learn_dynamics
            && self
                .hidden
                .table
                .iter()
                .chain(&self.output.table)
                .any(|p| !matches!(p, DynamicParams::SecondOrder(_)))
        {
            return Err(Error::Config("dynamic-parameter learning needs second-order neurons".into()));
        }
        Ok(())
    }

    /// Replaces the neuron types of both non-input layers.
    pub fn with_neurons(mut self, hidden: NeuronLayer, output: NeuronLayer) -> Result<Self> {
        self.hidden = hidden;
        self.output = output;
        self.validate()?;
        Ok(self)
    }
}

/// How the spike nonlinearity is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpikeMode {
    /// Heaviside threshold with hard reset. Used for training and inference.
    Hard,
    /// `sigmoid(k (V - v_th))` with a blended reset, so the whole forward
    /// pass is differentiable. Used to check gradients against finite
    /// differences.
    Smooth { steepness: f64 },
}

impl SpikeMode {
    #[inline]
    pub(crate) fn spike(self, params: &DynamicParams, v_pre: f64) -> f64 {
        match self {
            SpikeMode::Hard => params.fires(v_pre) as u8 as f64,
            SpikeMode::Smooth { steepness } => sigmoid(steepness * (v_pre - params.v_th())),
        }
    }

    /// `(v, u)` after applying the reset rule with spike value `s`.
    #[inline]
    pub(crate) fn apply_reset(self, params: &DynamicParams, v_pre: f64, u_pre: f64, s: f64) -> (f64, f64) {
        match self {
            SpikeMode::Hard => {
                if s > 0.0 {
                    params.reset(u_pre)
                } else {
                    (v_pre, u_pre)
                }
            }
            SpikeMode::Smooth { .. } => {
                let (v_reset, du) = reset_targets(params);
                (v_pre * (1.0 - s) + v_reset * s, u_pre + du * s)
            }
        }
    }
}

/// Reset potential and recovery increment.
#[inline]
pub(crate) fn reset_targets(params: &DynamicParams) -> (f64, f64) {
    match params {
        DynamicParams::FirstOrder(p) => (p.v_reset, 0.0),
        DynamicParams::SecondOrder(p) => (p.theta_c, p.theta_d),
        DynamicParams::Izhikevich(p) => (p.c, p.d),
    }
}

/// Per-step record of one layer, stored time-major (`[t * n + j]`).
///
/// `v` and `u` are the values right after the Euler update and before the
/// reset rule; `current` is the post-sigmoid input and `spikes` the emitted
/// spike values.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub neurons: usize,
    pub current: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub spikes: Vec<f64>,
}

impl LayerTrace {
    fn with_capacity(neurons: usize, horizon: usize) -> Self {
        let n = neurons * horizon;
        LayerTrace {
            neurons,
            current: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            spikes: Vec::with_capacity(n),
        }
    }

    #[inline]
    pub fn at(&self, t: usize) -> std::ops::Range<usize> {
        t * self.neurons..(t + 1) * self.neurons
    }

    pub fn horizon(&self) -> usize {
        self.v.len() / self.neurons.max(1)
    }

    /// Spike count per neuron.
    pub fn counts(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.neurons];
        for row in self.spikes.chunks(self.neurons) {
            for (acc, s) in c.iter_mut().zip(row) {
                *acc += s;
            }
        }
        c
    }
}

/// Everything the backward pass needs for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCache {
    pub input: SpikeRaster,
    pub hidden: LayerTrace,
    pub output: LayerTrace,
    pub mode: SpikeMode,
}

impl SampleCache {
    /// Mean output firing rate per output neuron.
    pub fn output_rates(&self) -> Vec<f64> {
        let t = self.output.horizon().max(1) as f64;
        self.output.counts().into_iter().map(|c| c / t).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub samples: Vec<SampleCache>,
}

/// Steps one layer through time. `drive(t, acc)` fills `acc` with the raw
/// summed input for step `t`.
fn run_layer(
    layer: &NeuronLayer,
    horizon: usize,
    dt: f64,
    mode: SpikeMode,
    name: &'static str,
    mut drive: impl FnMut(usize, &mut [f64]),
) -> Result<LayerTrace> {
    let n = layer.len();
    let mut trace = LayerTrace::with_capacity(n, horizon);
    let mut v = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for j in 0..n {
        let (v0, u0) = layer.neuron(j).initial_state();
        v.push(v0);
        u.push(u0);
    }
    let mut acc = vec![0.0; n];
    for t in 0..horizon {
        acc.iter_mut().for_each(|a| *a = 0.0);
        drive(t, &mut acc);
        for j in 0..n {
            let p = layer.neuron(j);
            let current = sigmoid(acc[j]);
            let (v_pre, u_pre) = p.integrate(v[j], u[j], current, dt);
            let s = mode.spike(p, v_pre);
            let (v_post, u_post) = mode.apply_reset(p, v_pre, u_pre, s);
            if diverged(v_pre, u_post) {
                return Err(Error::NetworkDivergence {
                    layer: name,
                    step: t,
                    neuron: j,
                    v: v_pre,
                    u: u_post,
                });
            }
            trace.current.push(current);
            trace.v.push(v_pre);
            trace.u.push(u_pre);
            trace.spikes.push(s);
            v[j] = v_post;
            u[j] = u_post;
        }
    }
    Ok(trace)
}

/// Runs one sample through the network.
pub fn forward_sample(model: &NetworkModel, input: &SpikeRaster, mode: SpikeMode) -> Result<SampleCache> {
    if input.neurons() != model.sizes.input {
        return Err(Error::Shape(format!(
            "input has {} neurons, network expects {}",
            input.neurons(),
            model.sizes.input
        )));
    }
    let horizon = input.horizon();
    let w1 = &model.w1;
    let hidden = run_layer(&model.hidden, horizon, model.dt, mode, "hidden", |t, acc| {
        for &i in input.active_at(t) {
            for (a, w) in acc.iter_mut().zip(w1.row(i as usize)) {
                *a += w;
            }
        }
    })?;
    let w2 = &model.w2;
    let h = model.sizes.hidden;
    let output = run_layer(&model.output, horizon, model.dt, mode, "output", |t, acc| {
        let spikes = &hidden.spikes[t * h..(t + 1) * h];
        for (k, &s) in spikes.iter().enumerate() {
            if s != 0.0 {
                for (a, w) in acc.iter_mut().zip(w2.row(k)) {
                    *a += s * w;
                }
            }
        }
    })?;
    Ok(SampleCache {
        input: input.clone(),
        hidden,
        output,
        mode,
    })
}

/// Runs a batch through the network with hard spikes. Samples are
/// independent; results keep input order.
pub fn forward(model: &NetworkModel, input: &SpikeTrainBatch) -> Result<(SpikeTrainBatch, ForwardCache)> {
    if input.neurons != model.sizes.input {
        return Err(Error::Shape(format!(
            "input has {} neurons, network expects {}",
            input.neurons, model.sizes.input
        )));
    }
    if input.horizon == 0 {
        return Err(Error::Shape("input horizon must be at least one step".into()));
    }
    let samples: Vec<SampleCache> = (0..input.batch)
        .into_par_iter()
        .map(|b| forward_sample(model, &input.raster(b), SpikeMode::Hard))
        .collect::<Result<_>>()?;
    let (o, t) = (model.sizes.output, input.horizon);
    let mut out = SpikeTrainBatch::zeros(input.batch, o, t);
    for (b, cache) in samples.iter().enumerate() {
        for step in 0..t {
            for k in 0..o {
                out.set(b, k, step, cache.output.spikes[step * o + k] as u8);
            }
        }
    }
    Ok((out, ForwardCache { samples }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(neuron: DynamicParams, horizon: usize) -> NetworkModel {
        init_network(&NetworkConfig::new(LayerSizes::new(6, 4, 3), neuron, horizon), 7).unwrap()
    }

    fn random_batch(batch: usize, n: usize, t: usize, seed: u64) -> SpikeTrainBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..batch * n * t).map(|_| rng.gen_bool(0.3) as u8).collect();
        SpikeTrainBatch::new(batch, n, t, data).unwrap()
    }

    #[test]
    fn mnist_sizes_and_initial_dynamics() {
        let cfg = NetworkConfig::meta(LayerSizes::MNIST, 20);
        let m = init_network(&cfg, 1).unwrap();
        assert_eq!((m.w1.rows, m.w1.cols, m.w2.rows, m.w2.cols), (784, 500, 500, 10));
        for p in m.hidden.table.iter().chain(&m.output.table) {
            match p {
                DynamicParams::SecondOrder(p) => {
                    assert_eq!(p.thetas(), [0.02, 0.2, 0.0, 0.08]);
                }
                _ => panic!("expected second-order"),
            }
            assert_eq!(p.initial_state(), (0.0, 0.08));
        }
        let bound = 1.0 / 784f64.sqrt();
        assert!(m.w1.data.iter().all(|w| w.abs() <= bound));
        let bound = 1.0 / 500f64.sqrt();
        assert!(m.w2.data.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let cfg = NetworkConfig::new(LayerSizes::new(10, 5, 2), DynamicParams::lif(), 4);
        assert_eq!(init_network(&cfg, 3).unwrap(), init_network(&cfg, 3).unwrap());
        assert_ne!(init_network(&cfg, 3).unwrap().w1, init_network(&cfg, 4).unwrap().w1);
    }

    #[test]
    fn zero_sized_layer_is_rejected() {
        let cfg = NetworkConfig::new(LayerSizes::new(10, 0, 2), DynamicParams::lif(), 4);
        assert!(matches!(init_network(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn one_step_with_zero_weights() {
        let mut m = tiny(DynamicParams::lif(), 1);
        m.w1.data.iter_mut().for_each(|w| *w = 0.0);
        m.w2.data.iter_mut().for_each(|w| *w = 0.0);
        for seed in 0..3 {
            let input = random_batch(2, 6, 1, seed);
            let (out, cache) = forward(&m, &input).unwrap();
            for s in &cache.samples {
                // sigmoid(0) = 0.5, V' = 0.5 is not above threshold
                assert!(s.hidden.current.iter().all(|&c| c == 0.5));
                assert!(s.hidden.v.iter().all(|&v| v == 0.5));
                assert!(s.hidden.spikes.iter().all(|&x| x == 0.0));
                assert!(s.output.current.iter().all(|&c| c == 0.5));
            }
            assert!(out.data.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn output_shape_and_sample_independence() {
        let m = tiny(DynamicParams::SecondOrder(SecondOrderParams::FS), 8);
        let input = random_batch(4, 6, 8, 11);
        let (out, cache) = forward(&m, &input).unwrap();
        assert_eq!((out.batch, out.neurons, out.horizon), (4, 3, 8));
        assert_eq!(cache.samples.len(), 4);

        let perm = [2usize, 0, 3, 1];
        let rasters: Vec<SpikeRaster> = perm.iter().map(|&b| input.raster(b)).collect();
        let permuted = SpikeTrainBatch::from_rasters(&rasters).unwrap();
        let (out_p, _) = forward(&m, &permuted).unwrap();
        for (i, &b) in perm.iter().enumerate() {
            assert_eq!(out_p.sample(i), out.sample(b));
        }
    }

    #[test]
    fn cache_replays_and_is_causal() {
        let m = tiny(DynamicParams::SecondOrder(SecondOrderParams::RS), 10);
        let input = random_batch(1, 6, 10, 5);
        let (out, cache) = forward(&m, &input).unwrap();
        let c = &cache.samples[0];
        for step in 0..10 {
            for k in 0..3 {
                assert_eq!(out.get(0, k, step) as f64, c.output.spikes[step * 3 + k]);
            }
        }
        let replay = forward_sample(&m, &c.input, SpikeMode::Hard).unwrap();
        assert_eq!(&replay, c);

        for t in 1..10 {
            let part = forward_sample(&m, &c.input.truncated(t), SpikeMode::Hard).unwrap();
            assert_eq!(part.hidden.v[..], c.hidden.v[..t * 4]);
            assert_eq!(part.hidden.u[..], c.hidden.u[..t * 4]);
            assert_eq!(part.output.spikes[..], c.output.spikes[..t * 3]);
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let m = tiny(DynamicParams::lif(), 3);
        let input = random_batch(1, 5, 3, 0);
        assert!(matches!(forward(&m, &input), Err(Error::Shape(_))));
    }

    #[test]
    fn mixed_hidden_layer() {
        let m = tiny(DynamicParams::lif(), 6);
        let table = vec![DynamicParams::lif(), DynamicParams::SecondOrder(SecondOrderParams::SDS)];
        let hidden = NeuronLayer::mixed(table, vec![0, 1, 0, 1]).unwrap();
        let out = NeuronLayer::uniform(DynamicParams::lif(), 3);
        let m = m.with_neurons(hidden, out).unwrap();
        let input = random_batch(1, 6, 6, 2);
        let (_, cache) = forward(&m, &input).unwrap();
        // LIF neurons carry no recovery variable
        let c = &cache.samples[0].hidden;
        for t in 0..6 {
            assert_eq!(c.u[t * 4], 0.0);
        }
        assert!(NeuronLayer::mixed(vec![DynamicParams::lif()], vec![0, 1]).is_err());
    }
}
