use std::fs;

use mdn_core::experiment::{read_summary, run_experiment, ExperimentConfig, RunRow};

const CONFIG: &str = r#"
seeds = [3, 4, 9]

[task.temporal]
hidden = 8
epochs = 2
batch_size = 16
neurons = ["1st-order", "2nd-WDS"]

[task.temporal.data]
kind = "synthetic"
train_per_class = 12
test_per_class = 6
"#;

fn last_acc(csv: &str) -> f64 {
    let line = csv.lines().last().unwrap();
    line.split(',').nth(2).unwrap().parse().unwrap()
}

#[test]
fn summary_matches_per_seed_files() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("output = \"out\"\n{CONFIG}");
    let cfg = ExperimentConfig::parse(&text, tmp.path()).unwrap();
    let res = run_experiment(&cfg).unwrap();
    let out = tmp.path().join("out");

    let summary = read_summary(out.join("summary.csv")).unwrap();
    assert_eq!(summary, res.summary);
    assert_eq!(summary.len(), 2);
    for row in &summary {
        let accs: Vec<f64> = [3, 4, 9]
            .iter()
            .map(|s| last_acc(&fs::read_to_string(out.join("temporal").join(&row.neuron_type).join(format!("seed_{s}.csv"))).unwrap()))
            .collect();
        let mean = accs.iter().sum::<f64>() / 3.0;
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((row.mean_acc - mean).abs() < 1e-9);
        assert!((row.std_acc - var.sqrt()).abs() < 1e-9);
        assert_eq!(row.seeds, 3);
    }

    let runs: Vec<RunRow> = csv::Reader::from_path(out.join("runs.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(runs.len(), 6);
    assert!(runs.iter().all(|r| r.config_hash == cfg.hash && r.task == "temporal"));
    assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [3, 4, 9, 3, 4, 9]);
}

#[test]
fn missing_data_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
output = "out"
seeds = [1]

[task.t]
hidden = 4
epochs = 1
neurons = ["2nd-FS"]

[task.t.data]
kind = "encoded"
train = "nope_train.spk"
test = "nope_test.spk"
"#;
    let err = ExperimentConfig::parse(text, tmp.path()).and_then(|c| run_experiment(&c));
    assert!(err.is_err());
    assert!(!tmp.path().join("out").exists());
}
