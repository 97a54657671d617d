use std::path::Path;
use std::process::{Command, Output};

fn mcgl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcgl"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCGL_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Circles plus 30 bad edges, written as `noisy` under `dir/data`.
fn noisy_dataset(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    let o = mcgl(dir, &["generate", "circles", "--n", "60", "--seed", "1", "--out-dir", "data", "--name", "noisy"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let labels: Vec<usize> = read(data.join("noisy.labels.csv"))
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    let mut edges = read(data.join("noisy.edges"));
    let mut added = 0;
    'outer: for u in 0..60 {
        for v in (u + 1..60).step_by(7) {
            if labels[u] != labels[v] {
                edges.push_str(&format!("{u} {v}\n"));
                added += 1;
                if added == 30 {
                    break 'outer;
                }
                continue 'outer;
            }
        }
    }
    std::fs::write(data.join("noisy.edges"), edges).unwrap();
    data
}

#[test]
fn odd_n_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcgl(dir.path(), &["generate", "circles", "--n", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("even"));
}

#[test]
fn generate_graph_xor_writes_the_four_node_triple() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcgl(dir.path(), &["generate", "graph-xor"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let labels: Vec<String> = read(dir.path().join("graph_xor.labels.csv"))
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(labels, ["0", "1", "1", "0"]);
    let edges: Vec<String> = read(dir.path().join("graph_xor.edges"))
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    assert_eq!(edges, ["0 3", "1 2"]);
    assert!(read(dir.path().join("graph_xor.svg")).starts_with("<svg"));
}

#[test]
fn generate_is_deterministic_and_never_overwrites() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(code(&mcgl(d.path(), &["generate", "circles", "--n", "60", "--seed", "1"])), 0);
    }
    for f in ["circles.edges", "circles.features.csv", "circles.labels.csv", "circles.split.json", "circles.svg"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
    let again = mcgl(a.path(), &["generate", "circles", "--n", "60", "--seed", "2"]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    assert_eq!(read(a.path().join("circles.edges")), read(b.path().join("circles.edges")));
    let forced = mcgl(a.path(), &["generate", "circles", "--n", "60", "--seed", "2", "--force"]);
    assert_eq!(code(&forced), 0);
    assert_ne!(read(a.path().join("circles.edges")), read(b.path().join("circles.edges")));
}

#[test]
fn train_and_sweep_metrics_are_byte_identical_across_runs() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let data = data.to_str().unwrap();
    let mut metrics = Vec::new();
    for run in ["r1", "r2"] {
        let dir = root.path().join(run);
        std::fs::create_dir(&dir).unwrap();
        let t = mcgl(&dir, &["train", "mcgl-um", "noisy", "--data-dir", data, "--max-epochs", "5", "--seed", "4"]);
        assert_eq!(code(&t), 0, "{}", stderr(&t));
        let s = mcgl(
            &dir,
            &["sweep-noise", "noisy", "--data-dir", data, "--rates", "0,0.1", "--repeats", "2", "--max-epochs", "5", "--batches-per-epoch", "10"],
        );
        assert_eq!(code(&s), 0, "{}", stderr(&s));
        let files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        let pick = |part: &str, ext: &str| {
            let f: Vec<_> = files
                .iter()
                .filter(|p| {
                    let n = p.file_name().unwrap().to_string_lossy();
                    n.contains(part) && n.ends_with(ext) && !n.ends_with(".timing.json") && !n.ends_with(".model.json")
                })
                .collect();
            assert_eq!(f.len(), 1, "{part} {ext}: {files:?}");
            read(f[0])
        };
        metrics.push((
            pick("_train_", ".json"),
            pick("_noise_rate_", ".json"),
            pick("_noise_rate_", ".csv"),
        ));
    }
    assert_eq!(metrics[0], metrics[1]);
}

#[test]
fn sweep_records_do_not_depend_on_jobs() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let data = data.to_str().unwrap();
    let mut records = Vec::new();
    for (jobs, out) in [("1", "j1"), ("3", "j3")] {
        let o = mcgl(
            root.path(),
            &["sweep-depth", "noisy", "--data-dir", data, "--depths", "0-2", "--noise-levels", "original,0", "--repeats", "2", "--max-epochs", "20", "--jobs", jobs, "--output", out],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&read(root.path().join(format!("{out}.json")))).unwrap();
        records.push(v["records"].clone());
        let svg = read(root.path().join(format!("{out}.svg")));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
    assert_eq!(records[0], records[1]);
}

#[test]
fn single_repeat_sweep_has_zero_std() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let o = mcgl(
        root.path(),
        &["sweep-noise", "noisy", "--data-dir", data.to_str().unwrap(), "--rates", "0,0.1,0.2", "--repeats", "1", "--max-epochs", "5", "--batches-per-epoch", "5", "--output", "one"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(root.path().join("one.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert_eq!(row.split(',').nth(5), Some("0.0000"), "{row}");
    }
    assert_eq!(read(root.path().join("one.svg")).matches("<polyline").count(), 2);
    let replot = mcgl(root.path(), &["plot", "one.json", "--output", "again.svg"]);
    assert_eq!(code(&replot), 0);
    assert_eq!(read(root.path().join("one.svg")), read(root.path().join("again.svg")));
}

#[test]
fn missing_data_dir_is_exit_2_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcgl(dir.path(), &["train", "gcn", "cora", "--data-dir", "absent"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ind.cora.x"), "{}", stderr(&o));
}

#[test]
fn missing_file_in_existing_dir_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcgl(dir.path(), &["noise-rate", "citeseer", "--data-dir", "."]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("ind.citeseer"));
}

#[test]
fn data_dir_defaults_to_env_var() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let o = Command::new(env!("CARGO_BIN_EXE_mcgl"))
        .args(["noise-rate", "noisy"])
        .current_dir(root.path())
        .env("MCGL_DATA_DIR", &data)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bad_edges"], 30);
}

#[test]
fn unknown_keys_and_bad_values_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.cfg"), "n = 10\nspeed = 3\n").unwrap();
    let o = mcgl(dir.path(), &["generate", "circles", "--config", "x.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown key `speed`"));
    assert_eq!(code(&mcgl(dir.path(), &["generate", "circles", "--n", "ten"])), 2);
    assert_eq!(code(&mcgl(dir.path(), &["generate", "circles", "--speed", "3"])), 2);
    assert_eq!(code(&mcgl(dir.path(), &["generate", "spirals"])), 2);
}

#[test]
fn config_file_and_flags_resolve_into_the_record() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    std::fs::write(
        root.path().join("t.cfg"),
        format!("data-dir = {}\nhidden_units = 7\nmax_epochs = 3\nlearning_rate = 0.5\n", data.display()),
    )
    .unwrap();
    let o = mcgl(root.path(), &["train", "gcn", "noisy", "--config", "t.cfg", "--learning-rate", "0.02", "--output", "m"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(root.path().join("m.json"))).unwrap();
    assert_eq!(v["config"]["hidden_units"], "7");
    assert_eq!(v["config"]["learning_rate"], "0.02");
    assert_eq!(v["config"]["weight_decay"], "0.0005");
    assert_eq!(v["report"]["epochs_run"], 3);
    let ckpt: serde_json::Value = serde_json::from_str(&read(root.path().join("m.model.json"))).unwrap();
    assert_eq!(ckpt["model"], "gcn");
}

#[test]
fn infer_reproduces_training_predictions() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let data = data.to_str().unwrap();
    let t = mcgl(root.path(), &["train", "gcn-star", "noisy", "--data-dir", data, "--max-epochs", "30", "--output", "s"]);
    assert_eq!(code(&t), 0, "{}", stderr(&t));
    let i = mcgl(root.path(), &["infer", "s.model.json", "noisy", "--data-dir", data, "--output", "p"]);
    assert_eq!(code(&i), 0, "{}", stderr(&i));
    let train: serde_json::Value = serde_json::from_str(&read(root.path().join("s.json"))).unwrap();
    let infer: serde_json::Value = serde_json::from_str(&read(root.path().join("p.json"))).unwrap();
    assert_eq!(train["accuracy"]["test"], infer["accuracy"]["test"]);
    std::fs::write(root.path().join("bad.json"), "{\"model\": \"gcn\"}").unwrap();
    assert_eq!(code(&mcgl(root.path(), &["infer", "bad.json", "noisy", "--data-dir", data])), 2);
}

#[test]
fn reduce_noise_writes_an_edited_copy() {
    let root = tempfile::tempdir().unwrap();
    let data = noisy_dataset(root.path());
    let d = data.to_str().unwrap();
    let o = mcgl(root.path(), &["reduce-noise", "noisy", "--data-dir", d, "--target", "0", "--out-dir", d, "--name", "clean"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = mcgl(root.path(), &["noise-rate", "clean", "--data-dir", d]);
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["bad_edges"], 0);
    assert_eq!(read(data.join("clean.labels.csv")), read(data.join("noisy.labels.csv")));
    let too_high = mcgl(root.path(), &["reduce-noise", "noisy", "--data-dir", d, "--target", "0.9"]);
    assert_eq!(code(&too_high), 2);
}

#[test]
fn help_succeeds_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["generate", "train", "infer", "sweep-noise", "sweep-depth", "noise-rate", "reduce-noise", "plot"] {
        let o = mcgl(dir.path(), &[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--config"));
    }
}
