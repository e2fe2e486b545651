use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
output = "out"
seeds = [3, 4]

[task.temporal]
hidden = 8
epochs = 2
batch_size = 10
neurons = ["1st-order", "2nd-SDS"]

[task.temporal.data]
kind = "synthetic"
train_per_class = 10
test_per_class = 5

[meta]
source = "temporal"
epochs = 1
"#;

fn mdn(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_mdn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn train_is_reproducible_and_feeds_capability() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    mdn(dir.path(), &["train", "--config", "c.toml", "--threads", "1"]);
    let out = dir.path().join("out");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("task,neuron_type,mean_acc,std_acc,seeds\n"));
    assert_eq!(summary.lines().count(), 3);
    let log = fs::read(out.join("temporal/2nd-SDS/seed_4.csv")).unwrap();

    mdn(dir.path(), &["train", "--config", "c.toml", "--out", "again"]);
    let again = dir.path().join("again");
    assert_eq!(fs::read_to_string(again.join("summary.csv")).unwrap(), summary);
    assert_eq!(fs::read(again.join("temporal/2nd-SDS/seed_4.csv")).unwrap(), log);

    let acc = mdn(
        dir.path(),
        &["eval", "--config", "c.toml", "--task", "temporal", "--checkpoint", "out/temporal/2nd-SDS/seed_4.ckpt"],
    );
    let last = String::from_utf8(log).unwrap().lines().last().unwrap().split(',').nth(2).unwrap().to_string();
    assert_eq!(acc.trim().parse::<f64>().unwrap(), last.parse::<f64>().unwrap());

    let cap = dir.path().join("cap.csv");
    fs::write(&cap, "task,neuron_type,mean_acc,std_acc,seeds\nt,a,90,0,1\nt,b,80,0,1\n").unwrap();
    let printed = mdn(dir.path(), &["capability", "--summary", "cap.csv", "--out", "capout"]);
    assert!(printed.contains("+1.0000"));
    assert!(dir.path().join("capout/capability.csv").exists());
}

#[test]
fn traces_encode_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let printed = mdn(dir.path(), &["traces", "--out", "tr"]);
    assert_eq!(printed.lines().count(), 5);
    assert!(dir.path().join("tr/1st-order.csv").exists());

    mdn(dir.path(), &["encode", "--synthetic", "4", "--file", "s.spk", "--seed", "2"]);
    assert!(dir.path().join("s.spk").exists());

    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    mdn(dir.path(), &["meta", "--config", "c.toml"]);
    let meta = dir.path().join("out/meta");
    for f in ["cloud.csv", "centers.csv", "candidates.csv", "report.txt"] {
        assert!(meta.join(f).exists(), "{f}");
    }
}

#[test]
fn missing_dataset_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CONFIG.replace(
        "kind = \"synthetic\"\ntrain_per_class = 10\ntest_per_class = 5",
        "kind = \"encoded\"\ntrain = \"none.spk\"\ntest = \"none.spk\"",
    );
    fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mdn"))
        .current_dir(dir.path())
        .args(["train", "--config", "c.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.spk"));
    assert!(!dir.path().join("out").exists());
}
