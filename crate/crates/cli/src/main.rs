use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mdn_core::datasets::{encode_rate, gen_synthetic_temporal, load_idx, save_encoded, SyntheticTemporalConfig};
use mdn_core::dynamics::{ProbeConfig, Stimulus, STANDARD_PROBE_STD};
use mdn_core::experiment::{
    capability, default_trace_set, emit_traces, read_summary, run_experiment, run_meta_pipeline, write_capability,
    ExperimentConfig, TaskData,
};
use mdn_core::meta::read_params_file;
use mdn_core::network::load_checkpoint;
use mdn_core::training::evaluate;

#[derive(Parser)]
#[command(name = "mdn", version, about = "Spiking networks with learnable neuron dynamics")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured task, neuron type and seed.
    Train,
    /// Evaluate a checkpoint on the test split of a task.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Learn neuron dynamics, cluster and filter them.
    Meta,
    /// Capability table from a summary CSV.
    Capability {
        #[arg(long)]
        summary: PathBuf,
    },
    /// Probe traces of the preset neuron types, or of a params file.
    Traces {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = STANDARD_PROBE_STD)]
        std: f64,
        #[arg(long, default_value_t = 50.0)]
        period: f64,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
    },
    /// Write a spike-encoded dataset file.
    Encode {
        /// IDX images; rate-coded with `--horizon` steps.
        #[arg(long, requires = "labels")]
        images: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        /// Generate the synthetic temporal task with this many samples per class.
        #[arg(long, conflicts_with = "images")]
        synthetic: Option<usize>,
        /// Output file.
        #[arg(long)]
        file: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("--config is required for this command")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Train => {
            let cfg = load_config(&cli)?;
            let res = run_experiment(&cfg)?;
            for r in &res.summary {
                println!(
                    "{:<12} {:<10} {:7.2} +- {:.2} ({} seeds)",
                    r.task, r.neuron_type, r.mean_acc, r.std_acc, r.seeds
                );
            }
            println!("results in {}", cfg.output.display());
        }
        Command::Eval { checkpoint, task } => {
            let cfg = load_config(&cli)?;
            let t = cfg.task.get(task).with_context(|| format!("no task `{task}` in config"))?;
            let model = load_checkpoint(checkpoint)?;
            let data = TaskData::load(t)?;
            let (_, test) = data.sources(model.seed);
            println!("{:.2}", evaluate(&model, test.as_ref())?);
        }
        Command::Meta => {
            let cfg = load_config(&cli)?;
            let r = run_meta_pipeline(&cfg)?;
            println!(
                "{} AB x {} CD centers -> {} candidates, {} selected",
                r.ab_centers.len(),
                r.cd_centers.len(),
                r.candidates.len(),
                r.selected.len()
            );
            for s in &r.selected {
                println!("{:<6} {:?}", s.label.as_deref().unwrap_or(""), s.params);
            }
            println!("results in {}", r.output.display());
        }
        Command::Capability { summary } => {
            let rows = capability(&read_summary(summary)?)?;
            let dir = out_dir(&cli, ".");
            fs::create_dir_all(&dir)?;
            write_capability(&rows, dir.join("capability.csv"))?;
            for r in rows {
                println!("{:<12} {:<10} {:+.4}", r.task, r.neuron_type, r.cap);
            }
        }
        Command::Traces {
            params,
            std,
            period,
            horizon,
        } => {
            let neurons = match params {
                Some(p) => read_params_file(p)?
                    .iter()
                    .map(|r| Ok((r.label.clone(), r.params()?)))
                    .collect::<Result<Vec<_>>>()?,
                None => default_trace_set(),
            };
            let probe = ProbeConfig {
                stimulus: Stimulus::Sine {
                    std: *std,
                    period: *period,
                },
                horizon: *horizon,
                ..ProbeConfig::default()
            };
            let dir = out_dir(&cli, "traces");
            for s in emit_traces(&dir, &neurons, &probe)? {
                println!(
                    "{:<10} spikes {:4} ({} / {}) {}",
                    s.neuron_type, s.spikes, s.first_half, s.second_half, s.status
                );
            }
        }
        Command::Encode {
            images,
            labels,
            horizon,
            synthetic,
            file,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let data = match (images, labels, synthetic) {
                (Some(i), Some(l), None) => encode_rate(&load_idx(i, l)?, *horizon, seed)?,
                (None, None, Some(n)) => {
                    let cfg = SyntheticTemporalConfig {
                        samples_per_class: *n,
                        ..SyntheticTemporalConfig::default()
                    };
                    gen_synthetic_temporal(&cfg, seed)?
                }
                _ => bail!("give either --images and --labels, or --synthetic"),
            };
            save_encoded(&data, file)?;
            println!(
                "{} samples x {} channels x {} steps -> {}",
                data.samples,
                data.neurons,
                data.horizon,
                file.display()
            );
        }
    }
    Ok(())
}
