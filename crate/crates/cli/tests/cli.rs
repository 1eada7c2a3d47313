use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use genmix_cli::config::{preset, preset_names, ExperimentConfig};

fn genmix(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genmix"))
        .args(args)
        .current_dir(cwd)
        .env("GENMIX_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config() -> serde_json::Value {
    serde_json::json!({
        "name": "tiny",
        "baseline": "kvae",
        "data": {
            "source": "synthetic",
            "gmm": { "means": [[-6.0, 0.0], [6.0, 0.0]], "variance": 0.25 },
            "n": 300
        },
        "train": {
            "k": 2,
            "rounds": 2,
            "pretrain_epochs": 1,
            "gen_epochs_per_round": 1,
            "disc_epochs_per_round": 1,
            "seed": 0,
            "backend": "discriminator",
            "model": { "kind": "gaussian_vae", "hidden": [8], "obs_variance": 0.02 },
            "discriminator": { "hidden": [8] }
        },
        "eval": { "kde_samples": 2000, "plot_samples": 100, "plot_every": 1 }
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let out = tmp.path().join("run");
    let o = genmix(
        &["run", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.exists());
    assert!(!tmp.path().join("runs").exists());
    let o = genmix(&["run", "9modes_kvae", "--dry-run"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = tiny_config();
    v["eval"]["holdout_fraction"] = serde_json::json!(0.0);
    let config = write_config(tmp.path(), &v);
    let o = genmix(&["run", config.to_str().unwrap(), "--dry-run"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("eval.holdout_fraction"), "{}", stderr(&o));

    let mut v = tiny_config();
    v["train"]["k"] = serde_json::json!(0);
    let config = write_config(tmp.path(), &v);
    let o = genmix(&["run", config.to_str().unwrap()], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("train") && stderr(&o).contains('k'), "{}", stderr(&o));

    let o = genmix(&["run", "no_such_preset_or_file"], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let mut metrics = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = genmix(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        for f in ["config.json", "inputs.sha256", "metrics.csv", "history.csv", "timing.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        for t in 0..=2 {
            assert!(out.join(format!("samples_round_{t}.svg")).exists());
        }
        for t in 1..=2 {
            let r = out.join(format!("checkpoints/round_{t}"));
            for f in ["model_0.bin", "model_1.bin", "disc_0.bin", "disc_1.bin", "assignment.csv", "state.json"] {
                assert!(r.join(f).exists(), "round {t}: {f} missing");
            }
        }
        let saved: ExperimentConfig = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
        assert_eq!(saved.name, "tiny");
        metrics.push(fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(metrics[0], metrics[1]);
    let text = String::from_utf8(metrics[0].clone()).unwrap();
    assert!(text.starts_with("run_id,round,metric,value\n"));
    assert!(text.contains("tiny_seed0,2,kde_loglik,"));
    assert!(text.contains("tiny_seed0,2,purity,"));

    let history = fs::read_to_string(tmp.path().join("a/history.csv")).unwrap();
    // header, two pre-training rows, two rounds of two components
    assert_eq!(history.lines().count(), 1 + 2 + 4);

    // another seed gives other numbers
    let c = tmp.path().join("c");
    let o = genmix(
        &["run", config.to_str().unwrap(), "--seed", "1", "--out", c.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success());
    assert_ne!(fs::read(c.join("metrics.csv")).unwrap(), metrics[0]);

    // compare ranks the finished runs
    let o = genmix(
        &[
            "compare",
            tmp.path().join("a").to_str().unwrap(),
            c.to_str().unwrap(),
            "--csv",
            tmp.path().join("cmp.csv").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("tiny_seed0") && table.contains("tiny_seed1"));
    let csv = fs::read_to_string(tmp.path().join("cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(csv.matches(",true").count(), 1);

    // samples from a checkpoint
    let samples = tmp.path().join("samples.csv");
    let o = genmix(
        &[
            "sample",
            tmp.path().join("a/checkpoints/round_2").to_str().unwrap(),
            "-n",
            "50",
            "-o",
            samples.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ds = genmix::data::Dataset::load_csv(&samples).unwrap();
    assert_eq!(ds.len(), 50);
    assert_eq!(ds.dim(), 2);
    assert!(ds.labels.unwrap().iter().all(|&c| c < 2));
}

#[test]
fn shipped_configs_match_the_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in preset_names() {
        let path = dir.join(format!("{name}.json"));
        let loaded = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(loaded, preset(&name).unwrap(), "{name}");
    }
}

#[test]
fn presets_command_lists_and_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = genmix(&["presets"], tmp.path());
    assert!(o.status.success());
    let listed: Vec<String> = String::from_utf8_lossy(&o.stdout).lines().map(String::from).collect();
    assert_eq!(listed, preset_names());
    let o = genmix(&["presets", "--write-dir", "cfg"], tmp.path());
    assert!(o.status.success());
    let c = ExperimentConfig::load(tmp.path().join("cfg/5modes_bag.json")).unwrap();
    assert_eq!(c, preset("5modes_bag").unwrap());
}
