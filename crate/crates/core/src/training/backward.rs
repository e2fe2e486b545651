//! Reverse-time gradient accumulation through the spiking network.
//!
//! The spike nonlinearity is replaced by a rectangular window around the
//! threshold. Reset assignments are gradient-stopping in hard mode: a neuron
//! that spiked passes no gradient from `V(t+1)` back into `V(t)`, and the
//! reset potential and recovery increment only receive the direct
//! assignment terms. In smooth mode the reset is blended by the real-valued
//! spike and differentiated exactly.

use crate::dynamics::DynamicParams;
use crate::error::{Error, Result};
use crate::network::{reset_targets, LayerTrace, Matrix, NetworkModel, NeuronLayer, SampleCache, SpikeMode};

/// Rectangular pseudo-derivative of the spike function.
#[inline]
pub fn surrogate_grad(v: f64, v_th: f64, v_window: f64) -> f64 {
    if (v - v_th).abs() < v_window {
        1.0
    } else {
        0.0
    }
}

/// Gradients of the batch loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub dw1: Matrix,
    pub dw2: Matrix,
    /// Per table entry `(theta_a, theta_b, theta_c, theta_d)` gradients,
    /// present when dynamic parameters are learned.
    pub d_hidden: Option<Vec<[f64; 4]>>,
    pub d_output: Option<Vec<[f64; 4]>>,
}

impl GradientSet {
    pub fn zeros(model: &NetworkModel) -> Self {
        let theta = |layer: &NeuronLayer| model.learn_dynamics.then(|| vec![[0.0; 4]; layer.table.len()]);
        GradientSet {
            dw1: Matrix::zeros(model.w1.rows, model.w1.cols),
            dw2: Matrix::zeros(model.w2.rows, model.w2.cols),
            d_hidden: theta(&model.hidden),
            d_output: theta(&model.output),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.dw1.data.iter_mut().zip(&other.dw1.data) {
            *a += b;
        }
        for (a, b) in self.dw2.data.iter_mut().zip(&other.dw2.data) {
            *a += b;
        }
        for (mine, theirs) in [(&mut self.d_hidden, &other.d_hidden), (&mut self.d_output, &other.d_output)] {
            if let (Some(a), Some(b)) = (mine.as_mut(), theirs.as_ref()) {
                for (x, y) in a.iter_mut().zip(b) {
                    for k in 0..4 {
                        x[k] += y[k];
                    }
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        let thetas = self
            .d_hidden
            .iter()
            .chain(&self.d_output)
            .flatten()
            .flat_map(|t| t.iter());
        self.dw1
            .data
            .iter()
            .chain(&self.dw2.data)
            .chain(thetas)
            .all(|x| x.is_finite())
    }
}

/// Previous post-reset state of neuron `j` before step `t`.
#[inline]
fn state_before(p: &DynamicParams, trace: &LayerTrace, mode: SpikeMode, t: usize, j: usize) -> (f64, f64) {
    if t == 0 {
        p.initial_state()
    } else {
        let idx = (t - 1) * trace.neurons + j;
        mode.apply_reset(p, trace.v[idx], trace.u[idx], trace.spikes[idx])
    }
}

/// Backpropagates one layer through time. `g_spike` holds `dL/dS` per step
/// (time-major). Returns `dL/d(raw input)` per step.
fn layer_backward(
    layer: &NeuronLayer,
    trace: &LayerTrace,
    dt: f64,
    mode: SpikeMode,
    v_window: f64,
    g_spike: &[f64],
    mut d_theta: Option<&mut [[f64; 4]]>,
) -> Result<Vec<f64>> {
    let n = trace.neurons;
    let horizon = trace.horizon();
    let mut carry_v = vec![0.0; n];
    let mut carry_u = vec![0.0; n];
    let mut d_input = vec![0.0; n * horizon];
    for t in (0..horizon).rev() {
        for j in 0..n {
            let idx = t * n + j;
            let p = layer.neuron(j);
            let (v_pre, s, current) = (trace.v[idx], trace.spikes[idx], trace.current[idx]);
            let (v_prev, u_prev) = state_before(p, trace, mode, t, j);
            let (v_reset, du) = reset_targets(p);

            let (ds, dvpost_dvpre, dupost_dvpre) = match mode {
                SpikeMode::Hard => (surrogate_grad(v_pre, p.v_th(), v_window), 1.0 - s, 0.0),
                SpikeMode::Smooth { steepness } => {
                    let ds = steepness * s * (1.0 - s);
                    (ds, (1.0 - s) + (v_reset - v_pre) * ds, du * ds)
                }
            };
            let g_vpost = carry_v[j];
            let g_upost = carry_u[j];
            let g_vpre = g_vpost * dvpost_dvpre + g_upost * dupost_dvpre + g_spike[idx] * ds;
            let g_upre = g_upost;

            let (g_v, g_u) = match p {
                DynamicParams::SecondOrder(q) => {
                    if let Some(dth) = d_theta.as_deref_mut() {
                        let e = &mut dth[layer.assignment[j]];
                        e[0] += g_upre * dt * (q.theta_b * v_prev - u_prev);
                        e[1] += g_upre * dt * q.theta_a * v_prev;
                        e[2] += g_vpost * s;
                        e[3] += g_upost * s;
                    }
                    (
                        g_vpre * (1.0 + dt * (2.0 * v_prev - 1.0)) + g_upre * dt * q.theta_a * q.theta_b,
                        -g_vpre * dt + g_upre * (1.0 - dt * q.theta_a),
                    )
                }
                DynamicParams::FirstOrder(q) => (g_vpre * (1.0 - dt * q.g), 0.0),
                DynamicParams::Izhikevich(_) => {
                    return Err(Error::Config("cannot backpropagate through Izhikevich neurons".into()))
                }
            };
            if !(g_v.is_finite() && g_u.is_finite()) {
                return Err(Error::NonFiniteGradient { step: t });
            }
            carry_v[j] = g_v;
            carry_u[j] = g_u;
            d_input[idx] = g_vpre * dt * current * (1.0 - current);
        }
    }
    Ok(d_input)
}

/// Accumulates the gradient of `scale * sum_k (rate_k - target_k)^2` for
/// one sample into `grads`. Returns the unscaled sample loss.
pub fn backward_sample(
    model: &NetworkModel,
    cache: &SampleCache,
    target: &[f64],
    scale: f64,
    v_window: f64,
    grads: &mut GradientSet,
) -> Result<f64> {
    let (h, o) = (model.sizes.hidden, model.sizes.output);
    if target.len() != o {
        return Err(Error::Shape(format!("target has {} entries, network has {o} outputs", target.len())));
    }
    let horizon = cache.output.horizon();
    if horizon == 0 || cache.hidden.horizon() != horizon || cache.input.horizon() != horizon {
        return Err(Error::Shape("forward cache is incomplete".into()));
    }
    if cache.hidden.neurons != h || cache.output.neurons != o {
        return Err(Error::Shape("forward cache does not match the model".into()));
    }
    let rates = cache.output_rates();
    let mut loss = 0.0;
    let mut g_out_spike = vec![0.0; horizon * o];
    for k in 0..o {
        let diff = rates[k] - target[k];
        loss += diff * diff;
        let g = scale * 2.0 * diff / horizon as f64;
        for t in 0..horizon {
            g_out_spike[t * o + k] = g;
        }
    }

    let d_out = layer_backward(
        &model.output,
        &cache.output,
        model.dt,
        cache.mode,
        v_window,
        &g_out_spike,
        grads.d_output.as_deref_mut(),
    )?;

    let mut g_hidden_spike = vec![0.0; horizon * h];
    for t in 0..horizon {
        let delta = &d_out[t * o..(t + 1) * o];
        let spikes = &cache.hidden.spikes[t * h..(t + 1) * h];
        let g_row = &mut g_hidden_spike[t * h..(t + 1) * h];
        for j in 0..h {
            let w = model.w2.row(j);
            g_row[j] = w.iter().zip(delta).map(|(a, b)| a * b).sum();
            let s = spikes[j];
            if s != 0.0 {
                for (g, d) in grads.dw2.row_mut(j).iter_mut().zip(delta) {
                    *g += s * d;
                }
            }
        }
    }

    let d_hidden = layer_backward(
        &model.hidden,
        &cache.hidden,
        model.dt,
        cache.mode,
        v_window,
        &g_hidden_spike,
        grads.d_hidden.as_deref_mut(),
    )?;

    for t in 0..horizon {
        let delta = &d_hidden[t * h..(t + 1) * h];
        for &i in cache.input.active_at(t) {
            for (g, d) in grads.dw1.row_mut(i as usize).iter_mut().zip(delta) {
                *g += d;
            }
        }
    }
    Ok(loss)
}

/// Gradient of the batch-averaged rate loss for the samples in `cache`.
pub fn backward(
    model: &NetworkModel,
    cache: &crate::network::ForwardCache,
    targets: &[Vec<f64>],
    v_window: f64,
) -> Result<GradientSet> {
    if targets.len() != cache.samples.len() {
        return Err(Error::Shape(format!(
            "{} targets for {} cached samples",
            targets.len(),
            cache.samples.len()
        )));
    }
    let mut grads = GradientSet::zeros(model);
    let scale = 1.0 / cache.samples.len().max(1) as f64;
    for (c, target) in cache.samples.iter().zip(targets) {
        backward_sample(model, c, target, scale, v_window, &mut grads)?;
    }
    Ok(grads)
}
