use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn skyharvest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skyharvest")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A tiny config shrunk to a few short episodes.
fn write_config(dir: &Path, algorithm: &str) -> String {
    let out = skyharvest(&["config", "--preset", "tiny"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout)
        .unwrap()
        .replace("algorithm = \"sacppv\"", &format!("algorithm = \"{algorithm}\""))
        .replace("episodes = 300", "episodes = 2")
        .replace("eval_episodes = 10", "eval_episodes = 2")
        .replace("slots = 50", "slots = 10")
        .replace("hidden = 32", "hidden = 8")
        .replace("warmup_steps = 1000", "warmup_steps = 5")
        .replace("batch_size = 256", "batch_size = 8");
    let path = dir.join(format!("{algorithm}.toml"));
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn shipped_configs_match_presets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for preset in ["paper", "tiny"] {
        let out = skyharvest(&["config", "--preset", preset]);
        let shipped = fs::read_to_string(root.join(format!("{preset}.toml"))).unwrap();
        assert_eq!(String::from_utf8(out.stdout).unwrap(), shipped, "configs/{preset}.toml is stale");
    }
}

#[test]
fn missing_field_exits_2_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "random");
    let text = fs::read_to_string(&cfg).unwrap().replace("gamma = 0.99\n", "");
    fs::write(&cfg, text).unwrap();
    let o = skyharvest(&["train", "--config", &cfg, "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("agent") && stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn train_eval_plot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sacppv");
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = skyharvest(&["train", "--config", &cfg, "--seed", "3", "--out", run_s, "--ablate", "per", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run.join("seed_3/metrics.csv").exists());
    assert!(fs::read_to_string(run.join("manifest.json")).unwrap().contains("sac+pfam+vrc"));

    let again = skyharvest(&["train", "--config", &cfg, "--seed", "3", "--out", run_s, "--quiet"]);
    assert_eq!(again.status.code(), Some(2), "overwrite must need --force");

    let e = skyharvest(&["eval", "--run", run_s, "--episodes", "1"]);
    assert!(e.status.success(), "{}", stderr(&e));
    assert!(String::from_utf8_lossy(&e.stdout).contains("seed 3:"));

    let plots = tmp.path().join("plots");
    let p = skyharvest(&["plot", run_s, "--out", plots.to_str().unwrap()]);
    assert!(p.status.success(), "{}", stderr(&p));
    assert!(plots.join("trajectory.svg").exists());
}

#[test]
fn missing_checkpoint_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sacppv");
    let o = skyharvest(&["eval", "--config", &cfg, "--checkpoint", "/nonexistent/final.ckpt", "--episodes", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_needs_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "greedy");
    let out = tmp.path().join("sw");
    let o = skyharvest(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let ok = skyharvest(&["sweep", "--config", &cfg, "--seed", "1", "--sensors", "1,2", "--out", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("trend:"));
}

#[test]
fn unknown_ablation_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sacppv");
    let o = skyharvest(&["train", "--config", &cfg, "--ablate", "dropout", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
