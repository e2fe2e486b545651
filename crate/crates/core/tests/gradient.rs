use mdn_core::dynamics::{DynamicParams, SecondOrderParams};
use mdn_core::network::{forward_sample, init_network, LayerSizes, NetworkConfig, NetworkModel, SpikeMode, SpikeRaster};
use mdn_core::training::{backward_sample, sample_loss, GradientSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const MODE: SpikeMode = SpikeMode::Smooth { steepness: 5.0 };

fn input(seed: u64) -> SpikeRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense: Vec<u8> = (0..4 * 5).map(|_| rng.gen_bool(0.5) as u8).collect();
    SpikeRaster::from_dense(4, 5, &dense).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

fn central(model: &NetworkModel, x: &SpikeRaster, target: &[f64], poke: impl Fn(&mut NetworkModel, f64)) -> f64 {
    let mut plus = model.clone();
    poke(&mut plus, H);
    let mut minus = model.clone();
    poke(&mut minus, -H);
    (sample_loss(&plus, x, target, MODE).unwrap() - sample_loss(&minus, x, target, MODE).unwrap()) / (2.0 * H)
}

fn analytic(model: &NetworkModel, x: &SpikeRaster, target: &[f64]) -> GradientSet {
    let cache = forward_sample(model, x, MODE).unwrap();
    let mut g = GradientSet::zeros(model);
    backward_sample(model, &cache, target, 1.0, 0.25, &mut g).unwrap();
    g
}

fn worst_weight_error(model: &NetworkModel, seed: u64) -> f64 {
    let x = input(seed);
    let target = [1.0, 0.0];
    let g = analytic(model, &x, &target);
    assert!(g.dw1.data.iter().any(|d| d.abs() > 1e-4), "gradient is degenerate");
    let mut worst = 0.0f64;
    for k in 0..model.w1.data.len() {
        let n = central(model, &x, &target, |m, h| m.w1.data[k] += h);
        worst = worst.max(rel_err(g.dw1.data[k], n));
    }
    for k in 0..model.w2.data.len() {
        let n = central(model, &x, &target, |m, h| m.w2.data[k] += h);
        worst = worst.max(rel_err(g.dw2.data[k], n));
    }
    worst
}

fn scaled(mut m: NetworkModel, f: f64) -> NetworkModel {
    m.w1.data.iter_mut().chain(m.w2.data.iter_mut()).for_each(|w| *w *= f);
    m
}

#[test]
fn lif_weights_match_finite_differences() {
    let cfg = NetworkConfig::new(LayerSizes::new(4, 3, 2), DynamicParams::lif(), 5);
    let m = scaled(init_network(&cfg, 11).unwrap(), 3.0);
    let e = worst_weight_error(&m, 1);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn second_order_weights_match_finite_differences() {
    for preset in [SecondOrderParams::FS, SecondOrderParams::SDS] {
        let cfg = NetworkConfig::new(LayerSizes::new(4, 3, 2), DynamicParams::SecondOrder(preset), 5);
        let m = scaled(init_network(&cfg, 12).unwrap(), 3.0);
        let e = worst_weight_error(&m, 2);
        assert!(e < 1e-4, "{e}");
    }
}

#[test]
fn dynamic_parameters_match_finite_differences() {
    let cfg = NetworkConfig::meta(LayerSizes::new(4, 3, 2), 5);
    let m = scaled(init_network(&cfg, 13).unwrap(), 3.0);
    let x = input(3);
    let target = [0.0, 1.0];
    let g = analytic(&m, &x, &target);
    assert!(g.d_hidden.as_ref().unwrap().iter().flatten().any(|d| d.abs() > 1e-4));
    let mut worst = 0.0f64;
    for (hidden, grads) in [(true, g.d_hidden.as_ref().unwrap()), (false, g.d_output.as_ref().unwrap())] {
        for (j, gj) in grads.iter().enumerate() {
            for k in 0..4 {
                let n = central(&m, &x, &target, |m, h| {
                    let layer = if hidden { &mut m.hidden } else { &mut m.output };
                    if let DynamicParams::SecondOrder(q) = &mut layer.table[j] {
                        let mut t = q.thetas();
                        t[k] += h;
                        q.set_thetas(t);
                    }
                });
                worst = worst.max(rel_err(gj[k], n));
            }
        }
    }
    assert!(worst < 1e-4, "{worst}");
}
