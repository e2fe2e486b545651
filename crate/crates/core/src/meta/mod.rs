//! Learning neuron types: co-train per-neuron dynamic parameters, cluster
//! them, combine the cluster centers into candidates and keep the ones with
//! distinct, input-sensitive membrane dynamics.

mod cluster;
mod params_file;

pub use cluster::{cluster, default_bandwidth, k_means, mean_shift, KMeansResult, Point, KMEANS_MAX_ITER};
pub use params_file::{read_params_file, write_params_file, ParamsRecord};

use rayon::prelude::*;

use crate::datasets::SpikeSource;
use crate::dynamics::{probe_response, DynamicParams, DynamicsTrace, ProbeConfig, SecondOrderParams, DEFAULT_V_TH};
use crate::error::{Error, Result};
use crate::network::{init_network, LayerSizes, NetworkConfig, NetworkModel};
use crate::training::{fit, TrainConfig, TrainRecord};

/// Learned `(theta_a, theta_b)` and `(theta_c, theta_d)` of every hidden
/// and output neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCloud {
    pub points_ab: Vec<Point>,
    pub points_cd: Vec<Point>,
    pub source: String,
}

impl ParamCloud {
    pub fn from_model(model: &NetworkModel, source: &str) -> Result<Self> {
        let mut ab = Vec::new();
        let mut cd = Vec::new();
        for layer in [&model.hidden, &model.output] {
            for j in 0..layer.len() {
                match layer.neuron(j) {
                    DynamicParams::SecondOrder(q) => {
                        ab.push([q.theta_a, q.theta_b]);
                        cd.push([q.theta_c, q.theta_d]);
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "parameter cloud needs second-order neurons, found {}",
                            other.kind().as_str()
                        )))
                    }
                }
            }
        }
        Ok(ParamCloud {
            points_ab: ab,
            points_cd: cd,
            source: source.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.points_ab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points_ab.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaTrainConfig {
    pub sizes: LayerSizes,
    pub horizon: usize,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaTrainResult {
    pub cloud: ParamCloud,
    pub model: NetworkModel,
    pub records: Vec<TrainRecord>,
    /// Final test accuracy in percent.
    pub accuracy: f64,
}

/// Trains weights and per-neuron dynamics jointly and returns the learned
/// parameter clouds.
pub fn train_dynamic_params(
    train: &dyn SpikeSource,
    test: &dyn SpikeSource,
    cfg: &MetaTrainConfig,
    source: &str,
    seed: u64,
) -> Result<MetaTrainResult> {
    let mut model = init_network(&NetworkConfig::meta(cfg.sizes, cfg.horizon), seed)?;
    let records = fit(&mut model, train, test, &cfg.train, seed, "")?;
    let accuracy = records.last().map_or(0.0, |r| r.test_acc);
    Ok(MetaTrainResult {
        cloud: ParamCloud::from_model(&model, source)?,
        model,
        records,
        accuracy,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaNeuronCandidate {
    pub params: DynamicParams,
    /// `(ab center, cd center)` indices.
    pub provenance: (usize, usize),
    pub label: Option<String>,
    /// Accuracy of the run the centers came from, percent.
    pub source_accuracy: f64,
}

/// Every pairing of an AB center with a CD center.
pub fn combine_centers(ab: &[Point], cd: &[Point], source_accuracy: f64) -> Result<Vec<MetaNeuronCandidate>> {
    if ab.is_empty() {
        return Err(Error::EmptyInput("ab centers"));
    }
    if cd.is_empty() {
        return Err(Error::EmptyInput("cd centers"));
    }
    let mut out = Vec::with_capacity(ab.len() * cd.len());
    for (i, a) in ab.iter().enumerate() {
        for (j, c) in cd.iter().enumerate() {
            out.push(MetaNeuronCandidate {
                params: DynamicParams::SecondOrder(SecondOrderParams {
                    theta_a: a[0],
                    theta_b: a[1],
                    theta_c: c[0],
                    theta_d: c[1],
                    v_th: DEFAULT_V_TH,
                }),
                provenance: (i, j),
                label: None,
                source_accuracy,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    pub probe: ProbeConfig,
    /// Amplitude factor of the contrast probe.
    pub contrast: f64,
    /// Minimum relative spike-count change between the probes.
    pub min_change: f64,
    /// V-trace correlation above which two candidates count as the same.
    pub similarity: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            probe: ProbeConfig::default(),
            contrast: 0.5,
            min_change: 0.05,
            similarity: 0.95,
        }
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// Relative spike-count change between the standard and contrast probes.
/// `None` when either probe diverges.
fn sensitivity(p: &DynamicParams, cfg: &FilterConfig) -> Option<(f64, DynamicsTrace)> {
    let standard = probe_response(p, &cfg.probe).ok()?;
    let contrast = ProbeConfig {
        stimulus: cfg.probe.stimulus.scaled(cfg.contrast),
        ..cfg.probe.clone()
    };
    let weak = probe_response(p, &contrast).ok()?;
    let (a, b) = (standard.spike_count() as f64, weak.spike_count() as f64);
    Some(((a - b).abs() / a.max(b).max(1.0), standard))
}

const LABELS: [&str; 4] = ["FS", "RS", "WDS", "SDS"];

/// Drops input-insensitive or diverging candidates, keeps one
/// representative per group of near-identical V traces (the one with the
/// highest source accuracy) and labels survivors by spike count under the
/// standard probe. Survivors keep their input order.
pub fn filter_candidates(candidates: &[MetaNeuronCandidate], cfg: &FilterConfig) -> Result<Vec<MetaNeuronCandidate>> {
    cfg.probe.validate()?;
    let probed: Vec<Option<(f64, DynamicsTrace)>> =
        candidates.par_iter().map(|c| sensitivity(&c.params, cfg)).collect();
    let mut alive: Vec<(usize, DynamicsTrace)> = probed
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| match p {
            Some((change, trace)) if change >= cfg.min_change => Some((i, trace)),
            _ => None,
        })
        .collect();
    alive.sort_by(|a, b| {
        candidates[b.0]
            .source_accuracy
            .total_cmp(&candidates[a.0].source_accuracy)
            .then(a.0.cmp(&b.0))
    });
    let mut reps: Vec<(usize, DynamicsTrace)> = Vec::new();
    for (i, trace) in alive {
        if reps.iter().all(|(_, r)| pearson(&r.v_series, &trace.v_series) <= cfg.similarity) {
            reps.push((i, trace));
        }
    }
    if reps.is_empty() {
        return Err(Error::EmptySelection(candidates.len()));
    }
    let mut by_count: Vec<(usize, usize)> = reps.iter().map(|(i, t)| (*i, t.spike_count())).collect();
    by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<MetaNeuronCandidate> = Vec::with_capacity(reps.len());
    reps.sort_by_key(|r| r.0);
    for (i, _) in &reps {
        let rank = by_count.iter().position(|(j, _)| j == i).expect("rep is ranked");
        let mut c = candidates[*i].clone();
        c.label = Some(LABELS.get(rank).map_or_else(|| format!("MDN{}", rank + 1), |s| s.to_string()));
        out.push(c);
    }
    Ok(out)
}

/// Output of [`select_neurons`].
#[derive(Clone, Debug)]
pub struct Selection {
    pub ab_centers: Vec<Point>,
    pub cd_centers: Vec<Point>,
    pub candidates: Vec<MetaNeuronCandidate>,
    pub selected: Vec<MetaNeuronCandidate>,
}

/// Clusters a cloud and filters the combined centers.
pub fn select_neurons(
    cloud: &ParamCloud,
    bandwidth: Option<f64>,
    source_accuracy: f64,
    filter: &FilterConfig,
    seed: u64,
) -> Result<Selection> {
    let ab_centers = cluster(&cloud.points_ab, bandwidth, seed)?;
    let cd_centers = cluster(&cloud.points_cd, bandwidth, seed.wrapping_add(1))?;
    let candidates = combine_centers(&ab_centers, &cd_centers, source_accuracy)?;
    let selected = filter_candidates(&candidates, filter)?;
    Ok(Selection {
        ab_centers,
        cd_centers,
        candidates,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(p: SecondOrderParams, acc: f64) -> MetaNeuronCandidate {
        MetaNeuronCandidate {
            params: DynamicParams::SecondOrder(p),
            provenance: (0, 0),
            label: None,
            source_accuracy: acc,
        }
    }

    fn presets() -> Vec<MetaNeuronCandidate> {
        [
            SecondOrderParams::FS,
            SecondOrderParams::RS,
            SecondOrderParams::SDS,
            SecondOrderParams::WDS,
        ]
        .into_iter()
        .map(|p| candidate(p, 90.0))
        .collect()
    }

    #[test]
    fn combine_is_a_cartesian_product() {
        let ab = [[0.1, 0.2]];
        let cd = [[0.0, 0.1], [-0.1, 0.0], [0.2, 0.3]];
        let c = combine_centers(&ab, &cd, 50.0).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].provenance, (0, 2));
        let ab3 = [[0.1, 0.2], [0.0, 0.0], [0.3, 0.1]];
        assert_eq!(combine_centers(&ab3, &cd[..2], 50.0).unwrap().len(), 6);
        assert!(combine_centers(&ab, &[], 50.0).is_err());
    }

    #[test]
    fn table_presets_all_survive_with_labels() {
        let out = filter_candidates(&presets(), &FilterConfig::default()).unwrap();
        let labels: Vec<&str> = out.iter().map(|c| c.label.as_deref().unwrap()).collect();
        assert_eq!(labels, ["FS", "RS", "SDS", "WDS"]);
    }

    #[test]
    fn duplicates_collapse_to_the_most_accurate() {
        let c = vec![candidate(SecondOrderParams::RS, 80.0), candidate(SecondOrderParams::RS, 85.0)];
        let out = filter_candidates(&c, &FilterConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].source_accuracy, 85.0);
    }

    #[test]
    fn always_firing_candidate_is_insensitive() {
        // every spike lowers U by 1, so after the first one the neuron
        // fires at each step whatever the input
        let hot = SecondOrderParams {
            theta_a: 0.0,
            theta_b: 0.0,
            theta_c: 0.0,
            theta_d: -1.0,
            v_th: 0.5,
        };
        let mut c = presets();
        c.push(candidate(hot, 99.0));
        let out = filter_candidates(&c, &FilterConfig::default()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(matches!(
            filter_candidates(&[candidate(hot, 1.0)], &FilterConfig::default()),
            Err(Error::EmptySelection(1))
        ));
    }

    #[test]
    fn filtering_is_idempotent() {
        let mut c = presets();
        c.push(candidate(SecondOrderParams::FS, 91.0));
        c.push(candidate(SecondOrderParams::INITIAL, 50.0));
        let once = filter_candidates(&c, &FilterConfig::default()).unwrap();
        let twice = filter_candidates(&once, &FilterConfig::default()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn pearson_edge_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 1.0]), 1.0);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }
}
