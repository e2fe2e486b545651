use crate::dynamics::DynamicParams;
use crate::error::{Error, Result};
use crate::network::{NetworkModel, NeuronLayer};

use super::GradientSet;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Bias-corrected Adam step for time step `step` (starting at 1).
pub fn adam_update(params: &mut [f64], grads: &[f64], moments: &mut Moments, lr: f64, step: u64) {
    debug_assert_eq!(params.len(), grads.len());
    let bc1 = 1.0 - BETA1.powi(step as i32);
    let bc2 = 1.0 - BETA2.powi(step as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(moments.m.iter_mut())
        .zip(moments.v.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

/// Optimizer state for a whole network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    /// Base learning rate for synaptic weights.
    pub lr_w: f64,
    /// Base learning rate for dynamic parameters.
    pub lr_d: f64,
    /// Per-epoch multiplicative decay of both learning rates.
    pub decay: f64,
    pub epoch: usize,
    w1: Moments,
    w2: Moments,
    hidden: Moments,
    output: Moments,
}

fn theta_vec(layer: &NeuronLayer) -> Vec<f64> {
    layer
        .table
        .iter()
        .flat_map(|p| match p {
            DynamicParams::SecondOrder(q) => q.thetas(),
            _ => [0.0; 4],
        })
        .collect()
}

fn write_thetas(layer: &mut NeuronLayer, flat: &[f64]) {
    for (p, t) in layer.table.iter_mut().zip(flat.chunks_exact(4)) {
        if let DynamicParams::SecondOrder(q) = p {
            q.set_thetas([t[0], t[1], t[2], t[3]]);
            // keep the reset strictly below threshold
            q.theta_c = q.theta_c.min(q.v_th - 1e-6);
        }
    }
}

impl OptimizerState {
    pub fn new(model: &NetworkModel, lr_w: f64, lr_d: f64, decay: f64) -> Self {
        OptimizerState {
            step: 0,
            lr_w,
            lr_d,
            decay,
            epoch: 0,
            w1: Moments::new(model.w1.data.len()),
            w2: Moments::new(model.w2.data.len()),
            hidden: Moments::new(model.hidden.table.len() * 4),
            output: Moments::new(model.output.table.len() * 4),
        }
    }

    /// Learning rates `(weights, dynamics)` for the current epoch.
    pub fn current_lr(&self) -> (f64, f64) {
        let f = self.decay.powi(self.epoch as i32);
        (self.lr_w * f, self.lr_d * f)
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    /// Applies one Adam step to every parameter group of `model`.
    pub fn apply(&mut self, model: &mut NetworkModel, grads: &GradientSet) -> Result<()> {
        if !grads.dw1.same_shape(&model.w1) || !grads.dw2.same_shape(&model.w2) {
            return Err(Error::Shape("gradient shapes do not match the model".into()));
        }
        self.step += 1;
        let (lr_w, lr_d) = self.current_lr();
        adam_update(&mut model.w1.data, &grads.dw1.data, &mut self.w1, lr_w, self.step);
        adam_update(&mut model.w2.data, &grads.dw2.data, &mut self.w2, lr_w, self.step);
        if model.learn_dynamics {
            for (layer, g, moments) in [
                (&mut model.hidden, &grads.d_hidden, &mut self.hidden),
                (&mut model.output, &grads.d_output, &mut self.output),
            ] {
                let Some(g) = g else { continue };
                let flat_g: Vec<f64> = g.iter().flatten().copied().collect();
                let mut flat = theta_vec(layer);
                if flat.len() != flat_g.len() || moments.m.len() != flat.len() {
                    return Err(Error::Shape("dynamic-parameter gradients do not match the model".into()));
                }
                adam_update(&mut flat, &flat_g, moments, lr_d, self.step);
                write_thetas(layer, &flat);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.3, -1.2, 4.0];
        let mut m = Moments::new(3);
        for step in 1..=10 {
            adam_update(&mut p, &[0.0; 3], &mut m, 1e-3, step);
        }
        assert_eq!(p, vec![0.3, -1.2, 4.0]);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        // with g constant, m_hat = g and v_hat = g^2 exactly, so each step
        // moves by lr * |g| / (|g| + eps)
        let lr = 1e-3;
        let g = 0.37;
        let mut p = vec![0.0];
        let mut m = Moments::new(1);
        let mut prev = 0.0;
        for step in 1..=500 {
            adam_update(&mut p, &[g], &mut m, lr, step);
            let delta = prev - p[0];
            assert_abs_diff_eq!(delta, lr * g / (g + EPSILON), epsilon = 1e-12);
            prev = p[0];
        }
    }

    #[test]
    fn step_counter_increments_once_per_apply() {
        use crate::network::{init_network, LayerSizes, NetworkConfig};
        let mut model = init_network(&NetworkConfig::meta(LayerSizes::new(3, 2, 2), 4), 0).unwrap();
        let mut opt = OptimizerState::new(&model, 1e-3, 1e-3, 0.9);
        let g = GradientSet::zeros(&model);
        for k in 1..=3 {
            opt.apply(&mut model, &g).unwrap();
            assert_eq!(opt.step, k);
        }
        opt.set_epoch(2);
        let (w, d) = opt.current_lr();
        assert_abs_diff_eq!(w, 1e-3 * 0.81, epsilon = 1e-18);
        assert_abs_diff_eq!(d, 1e-3 * 0.81, epsilon = 1e-18);
        assert!(opt.w1.v.iter().all(|&v| v >= 0.0));
    }
}
