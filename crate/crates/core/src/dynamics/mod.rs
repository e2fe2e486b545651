//! Neuron models and single-step integration.
//!
//! Three models are supported:
//!
//! ```text
//! first order (LIF):   dV/dt = -g V + I
//! second order (MDN):  dV/dt = V^2 - V - U + I
//!                      dU/dt = theta_a (theta_b V - U)
//! Izhikevich:          dV/dt = 0.04 V^2 + 5 V + 140 - U + I
//!                      dU/dt = a (b V - U)
//! ```
//!
//! For the first two the current `I` is the sigmoid of the summed weighted
//! input. All integration is explicit Euler. A spike resets `V` (and bumps
//! `U` for the two-variable models) in the same step it is detected.

mod attractor;
mod probe;

pub use attractor::{analyze_attractors, lif_attractor, AttractorReport, FixedPoint, Stability};
pub use probe::{probe_response, DynamicsTrace, ProbeConfig, Stimulus, STANDARD_PROBE_STD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default firing threshold shared by LIF and second-order neurons.
pub const DEFAULT_V_TH: f64 = 0.5;

/// |V| or |U| beyond this aborts the simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Izhikevich spike peak in mV.
pub const IZHIKEVICH_PEAK: f64 = 30.0;

/// Initial recovery variable for second-order neurons.
pub const INITIAL_U: f64 = 0.08;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronKind {
    FirstOrder,
    SecondOrder,
    IzhikevichRef,
}

impl NeuronKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NeuronKind::FirstOrder => "first_order",
            NeuronKind::SecondOrder => "second_order",
            NeuronKind::IzhikevichRef => "izhikevich",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "first_order" => Some(NeuronKind::FirstOrder),
            "second_order" => Some(NeuronKind::SecondOrder),
            "izhikevich" => Some(NeuronKind::IzhikevichRef),
            _ => None,
        }
    }
}

/// Leaky integrate-and-fire parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifParams {
    /// Leak conductance, must be positive.
    pub g: f64,
    pub v_th: f64,
    pub v_reset: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            g: 0.8,
            v_th: DEFAULT_V_TH,
            v_reset: 0.0,
        }
    }
}

/// Dynamic parameters of a second-order meta-dynamic neuron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrderParams {
    /// Recovery rate.
    pub theta_a: f64,
    /// Recovery coupling to V.
    pub theta_b: f64,
    /// Reset potential.
    pub theta_c: f64,
    /// Recovery increment per spike.
    pub theta_d: f64,
    pub v_th: f64,
}

impl SecondOrderParams {
    pub const fn new(theta_a: f64, theta_b: f64, theta_c: f64, theta_d: f64) -> Self {
        SecondOrderParams {
            theta_a,
            theta_b,
            theta_c,
            theta_d,
            v_th: DEFAULT_V_TH,
        }
    }

    /// Starting point for dynamic-parameter learning.
    pub const INITIAL: SecondOrderParams = SecondOrderParams::new(0.02, 0.2, 0.0, 0.08);
    /// Fast spiking.
    pub const FS: SecondOrderParams = SecondOrderParams::new(0.060, 0.219, -0.065, 0.003);
    /// Regular spiking.
    pub const RS: SecondOrderParams = SecondOrderParams::new(0.060, 0.219, -0.010, 0.050);
    /// Strong-depression spiking.
    pub const SDS: SecondOrderParams = SecondOrderParams::new(-0.009, 0.246, -0.058, 0.065);
    /// Weak-depression spiking.
    pub const WDS: SecondOrderParams = SecondOrderParams::new(0.005, 0.158, -0.058, 0.065);

    pub fn thetas(&self) -> [f64; 4] {
        [self.theta_a, self.theta_b, self.theta_c, self.theta_d]
    }

    pub fn set_thetas(&mut self, t: [f64; 4]) {
        self.theta_a = t[0];
        self.theta_b = t[1];
        self.theta_c = t[2];
        self.theta_d = t[3];
    }
}

/// Reference Izhikevich neuron in mV units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IzhikevichParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl IzhikevichParams {
    pub const REGULAR_SPIKING: IzhikevichParams = IzhikevichParams {
        a: 0.02,
        b: 0.2,
        c: -65.0,
        d: 8.0,
    };
}

/// Parameters of one neuron type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DynamicParams {
    FirstOrder(LifParams),
    SecondOrder(SecondOrderParams),
    Izhikevich(IzhikevichParams),
}

impl DynamicParams {
    pub fn kind(&self) -> NeuronKind {
        match self {
            DynamicParams::FirstOrder(_) => NeuronKind::FirstOrder,
            DynamicParams::SecondOrder(_) => NeuronKind::SecondOrder,
            DynamicParams::Izhikevich(_) => NeuronKind::IzhikevichRef,
        }
    }

    pub fn v_th(&self) -> f64 {
        match self {
            DynamicParams::FirstOrder(p) => p.v_th,
            DynamicParams::SecondOrder(p) => p.v_th,
            DynamicParams::Izhikevich(_) => IZHIKEVICH_PEAK,
        }
    }

    pub fn lif() -> Self {
        DynamicParams::FirstOrder(LifParams::default())
    }

    /// Look up a built-in neuron type by its report name
    /// (`2nd-FS`, `2nd-RS`, `2nd-SDS`, `2nd-WDS`, `1st-order`).
    pub fn preset(name: &str) -> Option<Self> {
        let p = match name.trim().to_ascii_uppercase().as_str() {
            "2ND-FS" | "FS" => DynamicParams::SecondOrder(SecondOrderParams::FS),
            "2ND-RS" | "RS" => DynamicParams::SecondOrder(SecondOrderParams::RS),
            "2ND-SDS" | "SDS" => DynamicParams::SecondOrder(SecondOrderParams::SDS),
            "2ND-WDS" | "WDS" => DynamicParams::SecondOrder(SecondOrderParams::WDS),
            "1ST-ORDER" | "LIF" => DynamicParams::lif(),
            "IZHIKEVICH" => DynamicParams::Izhikevich(IzhikevichParams::REGULAR_SPIKING),
            _ => return None,
        };
        Some(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DynamicParams::FirstOrder(p) => {
                if !(p.g > 0.0 && p.g.is_finite()) {
                    return Err(Error::Config(format!("leak conductance must be > 0, got {}", p.g)));
                }
                if !p.v_th.is_finite() || !p.v_reset.is_finite() {
                    return Err(Error::Config("LIF threshold and reset must be finite".into()));
                }
            }
            DynamicParams::SecondOrder(p) => {
                if p.thetas().iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("dynamic parameters must be finite".into()));
                }
                if !(p.v_th.is_finite() && p.v_th > p.theta_c) {
                    return Err(Error::Config(format!(
                        "threshold {} must exceed reset potential {}",
                        p.v_th, p.theta_c
                    )));
                }
            }
            DynamicParams::Izhikevich(p) => {
                if [p.a, p.b, p.c, p.d].iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("Izhikevich parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Resting state `(v, u)` a neuron of this type starts from.
    pub fn initial_state(&self) -> (f64, f64) {
        match self {
            DynamicParams::FirstOrder(_) => (0.0, 0.0),
            DynamicParams::SecondOrder(_) => (0.0, INITIAL_U),
            DynamicParams::Izhikevich(p) => (-65.0, p.b * -65.0),
        }
    }

    /// Maps a summed synaptic input onto the current the model integrates.
    #[inline]
    pub fn input_current(&self, raw: f64) -> f64 {
        match self {
            DynamicParams::Izhikevich(_) => raw,
            _ => sigmoid(raw),
        }
    }

    /// One Euler step without the spike/reset rule. Returns the updated
    /// `(v, u)` before any reset.
    #[inline]
    pub fn integrate(&self, v: f64, u: f64, current: f64, dt: f64) -> (f64, f64) {
        match self {
            DynamicParams::FirstOrder(p) => (v + dt * (-p.g * v + current), u),
            DynamicParams::SecondOrder(p) => (
                v + dt * (v * v - v - u + current),
                u + dt * p.theta_a * (p.theta_b * v - u),
            ),
            DynamicParams::Izhikevich(p) => (
                v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + current),
                u + dt * p.a * (p.b * v - u),
            ),
        }
    }

    /// Spike test on the updated, pre-reset potential.
    #[inline]
    pub fn fires(&self, v: f64) -> bool {
        match self {
            DynamicParams::FirstOrder(p) => v > p.v_th,
            DynamicParams::SecondOrder(p) => v > p.v_th,
            DynamicParams::Izhikevich(_) => v >= IZHIKEVICH_PEAK,
        }
    }

    /// Post-spike state.
    #[inline]
    pub fn reset(&self, u: f64) -> (f64, f64) {
        match self {
            DynamicParams::FirstOrder(p) => (p.v_reset, u),
            DynamicParams::SecondOrder(p) => (p.theta_c, u + p.theta_d),
            DynamicParams::Izhikevich(p) => (p.c, u + p.d),
        }
    }

    /// Full update for one neuron: integrate, test, reset.
    /// Returns `(v_pre_reset, v, u, spiked)`.
    #[inline]
    pub fn step(&self, v: f64, u: f64, current: f64, dt: f64) -> (f64, f64, f64, bool) {
        let (v_pre, u_pre) = self.integrate(v, u, current, dt);
        if self.fires(v_pre) {
            let (v_post, u_post) = self.reset(u_pre);
            (v_pre, v_post, u_post, true)
        } else {
            (v_pre, v_pre, u_pre, false)
        }
    }
}

#[inline]
pub(crate) fn diverged(v: f64, u: f64) -> bool {
    !(v.abs() <= DIVERGENCE_LIMIT && u.abs() <= DIVERGENCE_LIMIT)
}

/// Membrane potential and recovery variable of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronLayerState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl NeuronLayerState {
    pub fn new(v: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if v.len() != u.len() {
            return Err(Error::Shape(format!("v has {} entries, u has {}", v.len(), u.len())));
        }
        Ok(NeuronLayerState { v, u })
    }

    /// `n` neurons of one type at rest.
    pub fn resting(params: &DynamicParams, n: usize) -> Self {
        let (v, u) = params.initial_state();
        NeuronLayerState {
            v: vec![v; n],
            u: vec![u; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Advances a layer of identical neurons by one step, given currents that
/// have already been mapped through [`DynamicParams::input_current`].
pub fn step_with_currents(
    state: &NeuronLayerState,
    currents: &[f64],
    params: &DynamicParams,
    dt: f64,
) -> Result<(NeuronLayerState, Vec<u8>)> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if state.v.len() != state.u.len() || state.v.len() != currents.len() {
        return Err(Error::Shape(format!(
            "state has {} neurons but {} input currents",
            state.v.len(),
            currents.len()
        )));
    }
    let n = currents.len();
    let mut next = NeuronLayerState {
        v: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
    };
    let mut spikes = Vec::with_capacity(n);
    for (j, &i) in currents.iter().enumerate() {
        let (v_pre, v, u, spiked) = params.step(state.v[j], state.u[j], i, dt);
        if diverged(v_pre, u) {
            return Err(Error::Divergence { neuron: j, v: v_pre, u });
        }
        next.v.push(v);
        next.u.push(u);
        spikes.push(spiked as u8);
    }
    Ok((next, spikes))
}

/// Advances a layer given raw (pre-sigmoid) summed inputs.
pub fn step_layer(
    state: &NeuronLayerState,
    input_current: &[f64],
    params: &DynamicParams,
    dt: f64,
) -> Result<(NeuronLayerState, Vec<u8>)> {
    let currents: Vec<f64> = input_current.iter().map(|&x| params.input_current(x)).collect();
    step_with_currents(state, &currents, params, dt)
}

pub fn second_order_step(
    state: &NeuronLayerState,
    input_current: &[f64],
    params: &SecondOrderParams,
    dt: f64,
) -> Result<(NeuronLayerState, Vec<u8>)> {
    step_layer(state, input_current, &DynamicParams::SecondOrder(*params), dt)
}

pub fn lif_step(
    state: &NeuronLayerState,
    input_current: &[f64],
    params: &LifParams,
    dt: f64,
) -> Result<(NeuronLayerState, Vec<u8>)> {
    step_layer(state, input_current, &DynamicParams::FirstOrder(*params), dt)
}

/// Input currents are in mV-scale units and are not squashed.
pub fn izhikevich_step(
    state: &NeuronLayerState,
    input_current: &[f64],
    params: &IzhikevichParams,
    dt: f64,
) -> Result<(NeuronLayerState, Vec<u8>)> {
    step_layer(state, input_current, &DynamicParams::Izhikevich(*params), dt)
}
