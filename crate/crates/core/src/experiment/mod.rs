//! Batch experiments: training runs over seeds and neuron types, summary
//! and capability tables, probe traces and the meta pipeline.

mod config;

pub use config::{resolve_neuron, DataConfig, ExperimentConfig, MetaConfig, TaskConfig, DEFAULT_HORIZON};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{gen_synthetic_temporal, load_encoded, load_idx, EncodedDataset, LabeledDense, RateCoded, SpikeSource};
use crate::dynamics::{probe_response, DynamicParams, ProbeConfig, SecondOrderParams};
use crate::error::{Error, Result};
use crate::meta::{
    select_neurons, train_dynamic_params, write_params_file, FilterConfig, MetaNeuronCandidate, MetaTrainConfig, ParamsRecord, Point, Selection,
};
use crate::network::{init_network, save_checkpoint, LayerSizes, NetworkConfig};
use crate::training::{fit, write_records_csv, TrainRecord};

/// Offset between the train and test rate-coding seeds of one run.
const TEST_SEED_SALT: u64 = 0x7e57_0000_0000_0001;

/// Mean and spread of one neuron type on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub neuron_type: String,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapabilityRow {
    pub task: String,
    pub neuron_type: String,
    pub cap: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score of every neuron type's mean accuracy within its task, using the
/// population standard deviation. Tasks keep their first-appearance order.
pub fn capability(rows: &[SummaryRow]) -> Result<Vec<CapabilityRow>> {
    let mut tasks: Vec<&str> = Vec::new();
    for r in rows {
        if !tasks.contains(&r.task.as_str()) {
            tasks.push(&r.task);
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    for task in tasks {
        let col: Vec<&SummaryRow> = rows.iter().filter(|r| r.task == task).collect();
        if col.len() < 2 {
            return Err(Error::Config(format!("task `{task}` needs at least two neuron types")));
        }
        let accs: Vec<f64> = col.iter().map(|r| r.mean_acc).collect();
        let (mean, std) = mean_std(&accs);
        if std.is_nan() || std <= 0.0 {
            return Err(Error::DegenerateColumn(task.to_string()));
        }
        for r in col {
            out.push(CapabilityRow {
                task: task.to_string(),
                neuron_type: r.neuron_type.clone(),
                cap: (r.mean_acc - mean) / std,
            });
        }
    }
    Ok(out)
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, path.as_ref())
}

/// One finished training run, as listed in `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub task: String,
    pub neuron_type: String,
    pub seed: u64,
    pub final_acc: f64,
    pub config_hash: String,
}

pub fn write_capability(rows: &[CapabilityRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, path.as_ref())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Train and test data of one task, loaded once and shared by all runs.
pub enum TaskData {
    Dense {
        train: LabeledDense,
        test: LabeledDense,
        horizon: usize,
        resample: bool,
    },
    Encoded {
        train: EncodedDataset,
        test: EncodedDataset,
    },
}

impl TaskData {
    pub fn load(task: &TaskConfig) -> Result<Self> {
        let limit = |d: LabeledDense, n: Option<usize>| match n {
            Some(n) => d.head(n),
            None => d,
        };
        let limit_enc = |d: EncodedDataset, n: Option<usize>| -> Result<EncodedDataset> {
            match n {
                Some(n) if n < d.samples => {
                    let rasters: Vec<_> = (0..n).map(|i| d.sample_raster(i)).collect();
                    EncodedDataset::from_rasters(&rasters, d.labels[..n].to_vec(), d.classes, d.descriptor)
                }
                _ => Ok(d),
            }
        };
        Ok(match &task.data {
            DataConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => TaskData::Dense {
                train: limit(load_idx(train_images, train_labels)?, task.train_limit),
                test: limit(load_idx(test_images, test_labels)?, task.test_limit),
                horizon: task.horizon,
                resample: task.resample,
            },
            DataConfig::Encoded { train, test } => TaskData::Encoded {
                train: limit_enc(load_encoded(train)?, task.train_limit)?,
                test: limit_enc(load_encoded(test)?, task.test_limit)?,
            },
            DataConfig::Synthetic { .. } => {
                let (train, test, seed) = task.data.synthetic().expect("synthetic data");
                TaskData::Encoded {
                    train: limit_enc(gen_synthetic_temporal(&train, seed)?, task.train_limit)?,
                    test: limit_enc(gen_synthetic_temporal(&test, seed.wrapping_add(1))?, task.test_limit)?,
                }
            }
        })
    }

    /// Train and test sources for run `seed`.
    pub fn sources(&self, seed: u64) -> (Box<dyn SpikeSource + '_>, Box<dyn SpikeSource + '_>) {
        match self {
            TaskData::Dense {
                train,
                test,
                horizon,
                resample,
            } => (
                Box::new(RateCoded {
                    data: train,
                    horizon: *horizon,
                    seed,
                    resample: *resample,
                }),
                Box::new(RateCoded {
                    data: test,
                    horizon: *horizon,
                    seed: seed ^ TEST_SEED_SALT,
                    resample: false,
                }),
            ),
            TaskData::Encoded { train, test } => (Box::new(train), Box::new(test)),
        }
    }
}

/// Trains one network and returns its per-epoch records.
pub fn run_single(
    data: &TaskData,
    task: &TaskConfig,
    neuron: DynamicParams,
    seed: u64,
    config_hash: &str,
) -> Result<(crate::network::NetworkModel, Vec<TrainRecord>)> {
    let (train, test) = data.sources(seed);
    if train.neurons() != test.neurons() || train.horizon() != test.horizon() {
        return Err(Error::Shape("train and test data differ in channels or horizon".into()));
    }
    let sizes = LayerSizes::new(train.neurons(), task.hidden, train.classes().max(test.classes()));
    let mut model = init_network(&NetworkConfig::new(sizes, neuron, train.horizon()), seed)?;
    let records = fit(&mut model, train.as_ref(), test.as_ref(), &task.train_config(), seed, config_hash)?;
    Ok((model, records))
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub summary: Vec<SummaryRow>,
    pub capability: Vec<CapabilityRow>,
    /// Final accuracy of every run as `(task, neuron type, seed, accuracy)`.
    pub runs: Vec<(String, String, u64, f64)>,
}

/// Trains every neuron type of every task once per seed. Writes
/// `<task>/<neuron>/seed_<s>.csv` and `.ckpt`, `runs.csv`, `summary.csv` and, for
/// tasks with at least two neuron types and non-zero spread,
/// `capability.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let records = cfg.params_records()?;
    fs::create_dir_all(&cfg.output)?;
    let mut summary = Vec::new();
    let mut runs = Vec::new();
    for (name, task) in &cfg.task {
        let data = TaskData::load(task).map_err(|e| e.context(format!("task `{name}`")))?;
        for neuron_name in &task.neurons {
            let neuron = resolve_neuron(neuron_name, &records)?;
            let dir = cfg.output.join(safe_name(name)).join(safe_name(neuron_name));
            fs::create_dir_all(&dir)?;
            let mut accs = Vec::with_capacity(cfg.seeds.len());
            for &seed in &cfg.seeds {
                let ctx = format!("task `{name}`, neuron `{neuron_name}`, seed {seed}");
                log::info!("{ctx}");
                let (model, recs) = run_single(&data, task, neuron, seed, &cfg.hash).map_err(|e| e.context(&ctx))?;
                write_records_csv(&recs, fs::File::create(dir.join(format!("seed_{seed}.csv")))?)?;
                save_checkpoint(&model, dir.join(format!("seed_{seed}.ckpt")))?;
                let acc = recs.last().map_or(0.0, |r| r.test_acc);
                accs.push(acc);
                runs.push((name.clone(), neuron_name.clone(), seed, acc));
            }
            let (mean, std) = mean_std(&accs);
            summary.push(SummaryRow {
                task: name.clone(),
                neuron_type: neuron_name.clone(),
                mean_acc: mean,
                std_acc: std,
                seeds: accs.len(),
            });
        }
    }
    let manifest: Vec<RunRow> = runs
        .iter()
        .map(|(task, neuron, seed, acc)| RunRow {
            task: task.clone(),
            neuron_type: neuron.clone(),
            seed: *seed,
            final_acc: *acc,
            config_hash: cfg.hash.clone(),
        })
        .collect();
    write_rows(&manifest, &cfg.output.join("runs.csv"))?;
    write_summary(&summary, cfg.output.join("summary.csv"))?;
    let mut cap = Vec::new();
    for name in cfg.task.keys() {
        let col: Vec<SummaryRow> = summary.iter().filter(|r| &r.task == name).cloned().collect();
        if col.len() < 2 {
            continue;
        }
        match capability(&col) {
            Ok(rows) => cap.extend(rows),
            Err(e) => log::warn!("no capability for task `{name}`: {e}"),
        }
    }
    if !cap.is_empty() {
        write_capability(&cap, cfg.output.join("capability.csv"))?;
    }
    Ok(ExperimentResult {
        summary,
        capability: cap,
        runs,
    })
}

/// Neuron types probed by default: the four table presets and LIF.
pub fn default_trace_set() -> Vec<(String, DynamicParams)> {
    vec![
        ("2nd-FS".into(), DynamicParams::SecondOrder(SecondOrderParams::FS)),
        ("2nd-RS".into(), DynamicParams::SecondOrder(SecondOrderParams::RS)),
        ("2nd-SDS".into(), DynamicParams::SecondOrder(SecondOrderParams::SDS)),
        ("2nd-WDS".into(), DynamicParams::SecondOrder(SecondOrderParams::WDS)),
        ("1st-order".into(), DynamicParams::lif()),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStatus {
    pub neuron_type: String,
    pub spikes: usize,
    pub first_half: usize,
    pub second_half: usize,
    pub status: String,
}

/// Probes every neuron type and writes one trace CSV per type plus
/// `summary.csv` into `dir`. A diverging type is recorded and skipped.
pub fn emit_traces(dir: impl AsRef<Path>, neurons: &[(String, DynamicParams)], probe: &ProbeConfig) -> Result<Vec<TraceStatus>> {
    let dir = dir.as_ref();
    probe.validate()?;
    fs::create_dir_all(dir)?;
    let half = probe.horizon / 2;
    let mut out = Vec::with_capacity(neurons.len());
    for (name, p) in neurons {
        let status = match probe_response(p, probe) {
            Ok(trace) => {
                trace.write_csv(fs::File::create(dir.join(format!("{}.csv", safe_name(name))))?)?;
                TraceStatus {
                    neuron_type: name.clone(),
                    spikes: trace.spike_count(),
                    first_half: trace.spikes_between(0, half),
                    second_half: trace.spikes_between(half, probe.horizon),
                    status: "ok".into(),
                }
            }
            Err(e @ Error::Divergence { .. }) => {
                log::warn!("{name}: {e}");
                TraceStatus {
                    neuron_type: name.clone(),
                    spikes: 0,
                    first_half: 0,
                    second_half: 0,
                    status: format!("diverged: {e}"),
                }
            }
            Err(e) => return Err(e.context(format!("probing `{name}`"))),
        };
        out.push(status);
    }
    write_rows(&out, &dir.join("summary.csv"))?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaReport {
    pub accuracy: f64,
    pub ab_centers: Vec<Point>,
    pub cd_centers: Vec<Point>,
    pub candidates: Vec<MetaNeuronCandidate>,
    pub selected: Vec<MetaNeuronCandidate>,
    pub output: PathBuf,
}

/// Learns dynamics on the meta source task with the first seed, clusters,
/// combines and filters. Writes `cloud.csv`, `centers.csv`,
/// `candidates.csv`, `selected.csv` (a params file) and the training log
/// into `<output>/meta`.
pub fn run_meta_pipeline(cfg: &ExperimentConfig) -> Result<MetaReport> {
    cfg.validate()?;
    let meta = cfg
        .meta
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [meta] section".into()))?;
    let task = &cfg.task[&meta.source];
    let seed = cfg.seeds[0];
    let data = TaskData::load(task)?;
    let (train, test) = data.sources(seed);
    let mut train_cfg = task.train_config();
    if let Some(e) = meta.epochs {
        train_cfg.epochs = e;
    }
    if let Some(lr) = meta.lr_d {
        train_cfg.lr_d = lr;
    }
    let sizes = LayerSizes::new(train.neurons(), meta.hidden.unwrap_or(task.hidden), train.classes());
    let mc = MetaTrainConfig {
        sizes,
        horizon: train.horizon(),
        train: train_cfg,
    };
    let result = train_dynamic_params(train.as_ref(), test.as_ref(), &mc, &meta.source, seed)
        .map_err(|e| e.context("meta training"))?;

    let dir = cfg.output.join("meta");
    fs::create_dir_all(&dir)?;
    write_records_csv(&result.records, fs::File::create(dir.join("train.csv"))?)?;

    let mut w = csv::Writer::from_path(dir.join("cloud.csv"))?;
    w.write_record(["index", "theta_a", "theta_b", "theta_c", "theta_d"])?;
    for (i, (ab, cd)) in result.cloud.points_ab.iter().zip(&result.cloud.points_cd).enumerate() {
        w.write_record([i.to_string(), ab[0].to_string(), ab[1].to_string(), cd[0].to_string(), cd[1].to_string()])?;
    }
    w.flush()?;

    let filter = FilterConfig {
        contrast: meta.contrast,
        min_change: meta.min_change,
        similarity: meta.similarity,
        ..FilterConfig::default()
    };
    let Selection {
        ab_centers: ab,
        cd_centers: cd,
        candidates,
        selected,
    } = select_neurons(&result.cloud, meta.bandwidth, result.accuracy, &filter, seed)?;
    log::info!("{} AB centers x {} CD centers", ab.len(), cd.len());
    let mut w = csv::Writer::from_path(dir.join("centers.csv"))?;
    w.write_record(["group", "index", "x", "y"])?;
    for (group, centers) in [("ab", &ab), ("cd", &cd)] {
        for (i, c) in centers.iter().enumerate() {
            w.write_record([group.to_string(), i.to_string(), c[0].to_string(), c[1].to_string()])?;
        }
    }
    w.flush()?;


    let mut w = csv::Writer::from_path(dir.join("candidates.csv"))?;
    w.write_record(["ab_index", "cd_index", "theta_a", "theta_b", "theta_c", "theta_d", "selected", "label"])?;
    for c in &candidates {
        let kept = selected.iter().find(|s| s.provenance == c.provenance);
        let t = match c.params {
            DynamicParams::SecondOrder(q) => q.thetas(),
            _ => [0.0; 4],
        };
        w.write_record([
            c.provenance.0.to_string(),
            c.provenance.1.to_string(),
            t[0].to_string(),
            t[1].to_string(),
            t[2].to_string(),
            t[3].to_string(),
            kept.is_some().to_string(),
            kept.and_then(|k| k.label.clone()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let params: Vec<ParamsRecord> = selected
        .iter()
        .map(|c| ParamsRecord::new(&c.params, c.label.as_deref().unwrap_or("")))
        .collect::<Result<_>>()?;
    write_params_file(&params, dir.join("selected.csv"))?;

    let mut report = fs::File::create(dir.join("report.txt"))?;
    writeln!(report, "source task: {}", meta.source)?;
    writeln!(report, "source accuracy: {}", result.accuracy)?;
    writeln!(report, "neurons clustered: {}", result.cloud.len())?;
    writeln!(report, "ab centers: {}", ab.len())?;
    writeln!(report, "cd centers: {}", cd.len())?;
    writeln!(report, "candidates: {}", candidates.len())?;
    writeln!(report, "selected: {}", selected.len())?;
    for s in &selected {
        writeln!(
            report,
            "  {} <- ab {} x cd {}",
            s.label.as_deref().unwrap_or("?"),
            s.provenance.0,
            s.provenance.1
        )?;
    }
    Ok(MetaReport {
        accuracy: result.accuracy,
        ab_centers: ab,
        cd_centers: cd,
        candidates,
        selected,
        output: dir,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn row(task: &str, n: &str, acc: f64) -> SummaryRow {
        SummaryRow {
            task: task.into(),
            neuron_type: n.into(),
            mean_acc: acc,
            std_acc: 0.0,
            seeds: 5,
        }
    }

    #[test]
    fn capability_columns_are_centered() {
        let rows = vec![row("a", "x", 90.0), row("a", "y", 80.0), row("b", "x", 50.0), row("b", "y", 60.0), row("b", "z", 70.0)];
        let cap = capability(&rows).unwrap();
        assert_abs_diff_eq!(cap[0].cap, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cap[1].cap, -1.0, epsilon = 1e-12);
        let s = 1.5f64.sqrt();
        assert_abs_diff_eq!(cap[2].cap, -s, epsilon = 1e-12);
        assert_abs_diff_eq!(cap[4].cap, s, epsilon = 1e-12);
        assert!(matches!(capability(&[row("a", "x", 1.0), row("a", "y", 1.0)]), Err(Error::DegenerateColumn(_))));
        assert!(capability(&[row("a", "x", 1.0)]).is_err());
    }

    #[test]
    fn summary_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = vec![row("t", "FS", 97.25)];
        write_summary(&rows, &p).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "task,neuron_type,mean_acc,std_acc,seeds\nt,FS,97.25,0.0,5\n"
        );
        assert_eq!(read_summary(&p).unwrap(), rows);
    }

    #[test]
    fn traces_cover_the_default_set() {
        let dir = tempfile::tempdir().unwrap();
        let st = emit_traces(dir.path(), &default_trace_set(), &ProbeConfig::default()).unwrap();
        assert_eq!(st.len(), 5);
        assert!(st.iter().all(|s| s.status == "ok"));
        assert!(dir.path().join("2nd-SDS.csv").exists());
        assert!(dir.path().join("summary.csv").exists());
    }
}
