//! Standardised stimulus probe used to compare neuron types by their
//! membrane-potential dynamics.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use super::{analyze_attractors, diverged, lif_attractor, DynamicParams};
use crate::error::{Error, Result};

/// Standard deviation of the standard sine probe.
pub const STANDARD_PROBE_STD: f64 = 0.723;

/// Default period of the standard probe, in steps.
pub const STANDARD_PROBE_PERIOD: f64 = 50.0;

/// Default probe length, in steps.
pub const STANDARD_PROBE_HORIZON: usize = 200;

/// A raw (pre-sigmoid) input program.
#[derive(Clone, Debug, PartialEq)]
pub enum Stimulus {
    /// Zero-mean sine wave with the given standard deviation
    /// (amplitude `std * sqrt(2)`) and period in time units.
    Sine { std: f64, period: f64 },
    Constant(f64),
    /// Explicit per-step values; the probe horizon must not exceed its length.
    Samples(Vec<f64>),
}

impl Stimulus {
    pub fn standard() -> Self {
        Stimulus::Sine {
            std: STANDARD_PROBE_STD,
            period: STANDARD_PROBE_PERIOD,
        }
    }

    /// Same waveform with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Stimulus::Sine { std, period } => Stimulus::Sine {
                std: std * factor,
                period: *period,
            },
            Stimulus::Constant(c) => Stimulus::Constant(c * factor),
            Stimulus::Samples(s) => Stimulus::Samples(s.iter().map(|x| x * factor).collect()),
        }
    }

    pub fn value(&self, step: usize, dt: f64) -> f64 {
        match self {
            Stimulus::Sine { std, period } => {
                let t = step as f64 * dt;
                std * SQRT_2 * (2.0 * PI * t / period).sin()
            }
            Stimulus::Constant(c) => *c,
            Stimulus::Samples(s) => s[step],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub stimulus: Stimulus,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            stimulus: Stimulus::standard(),
            dt: 1.0,
            horizon: STANDARD_PROBE_HORIZON,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("probe horizon must be at least one step".into()));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::Config(format!("probe dt must be positive, got {}", self.dt)));
        }
        if let Stimulus::Samples(s) = &self.stimulus {
            if s.len() < self.horizon {
                return Err(Error::Config(format!(
                    "stimulus has {} samples, horizon is {}",
                    s.len(),
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Time series recorded while probing a single neuron.
///
/// `v_series[t]` is the potential after the step-`t` update and before any
/// reset, so spikes show up as excursions above threshold. `u_series[t]` is
/// the recovery variable after the step, including the spike increment.
/// `attractor_series[t]` is the attracting potential for the state and
/// current at step `t`; a missing real attractor is recorded as
/// [`DynamicsTrace::virtual_sentinel`].
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsTrace {
    pub input_raw: Vec<f64>,
    pub input_sigmoid: Vec<f64>,
    pub v_series: Vec<f64>,
    pub u_series: Vec<f64>,
    pub attractor_series: Vec<f64>,
    pub spike_times: Vec<usize>,
    pub v_th: f64,
}

impl DynamicsTrace {
    pub fn len(&self) -> usize {
        self.v_series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_series.is_empty()
    }

    pub fn spike_count(&self) -> usize {
        self.spike_times.len()
    }

    /// Spikes in `[from, to)`.
    pub fn spikes_between(&self, from: usize, to: usize) -> usize {
        self.spike_times.iter().filter(|&&t| t >= from && t < to).count()
    }

    /// Stand-in value for "no real attractor".
    pub fn virtual_sentinel(v_th: f64) -> f64 {
        v_th + v_th.abs().max(1.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "input_raw", "input_sigmoid", "v", "u", "attractor", "spike"])?;
        let mut next_spike = self.spike_times.iter().peekable();
        for t in 0..self.len() {
            let spiked = next_spike.next_if(|&&s| s == t).is_some();
            w.write_record([
                t.to_string(),
                self.input_raw[t].to_string(),
                self.input_sigmoid[t].to_string(),
                self.v_series[t].to_string(),
                self.u_series[t].to_string(),
                self.attractor_series[t].to_string(),
                (spiked as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn attractor_for(params: &DynamicParams, u: f64, current: f64) -> f64 {
    let sentinel = DynamicsTrace::virtual_sentinel(params.v_th());
    match params {
        DynamicParams::FirstOrder(p) => lif_attractor(p, current),
        DynamicParams::SecondOrder(p) => analyze_attractors(p, u, current)
            .attractor()
            .unwrap_or(sentinel),
        DynamicParams::Izhikevich(_) => {
            // 0.04 V^2 + 5 V + 140 - u + I = 0, lower root attracts
            let disc = 25.0 - 0.16 * (140.0 - u + current);
            if disc >= 0.0 {
                (-5.0 - disc.sqrt()) / 0.08
            } else {
                sentinel
            }
        }
    }
}

/// Drives a single resting neuron with `config.stimulus` and records
/// everything needed to plot its dynamics.
pub fn probe_response(params: &DynamicParams, config: &ProbeConfig) -> Result<DynamicsTrace> {
    config.validate()?;
    params.validate()?;
    let n = config.horizon;
    let mut trace = DynamicsTrace {
        input_raw: Vec::with_capacity(n),
        input_sigmoid: Vec::with_capacity(n),
        v_series: Vec::with_capacity(n),
        u_series: Vec::with_capacity(n),
        attractor_series: Vec::with_capacity(n),
        spike_times: Vec::new(),
        v_th: params.v_th(),
    };
    let (mut v, mut u) = params.initial_state();
    for t in 0..n {
        let raw = config.stimulus.value(t, config.dt);
        let current = params.input_current(raw);
        let attractor = attractor_for(params, u, current);
        let (v_pre, v_next, u_next, spiked) = params.step(v, u, current, config.dt);
        if diverged(v_pre, u_next) {
            return Err(Error::Divergence {
                neuron: 0,
                v: v_pre,
                u: u_next,
            });
        }
        trace.input_raw.push(raw);
        trace.input_sigmoid.push(current);
        trace.v_series.push(v_pre);
        trace.u_series.push(u_next);
        trace.attractor_series.push(attractor);
        if spiked {
            trace.spike_times.push(t);
        }
        v = v_next;
        u = u_next;
    }
    Ok(trace)
}
