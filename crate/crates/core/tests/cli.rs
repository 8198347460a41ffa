//! Command-line behaviour: exit codes, emitted files, reruns.

use std::fs;
use std::path::Path;

use ssl_lab::cli::run_cli;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.in.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn train_config(out: &Path) -> String {
    format!(
        "kind = \"train\"\nseeds = [0]\nmethods = [\"supervised\", \"vat\"]\noutput_dir = {:?}\n\n[split]\nlabeled = 6\nunlabeled = 200\nvalidation = 50\ntest = 50\n\n[dataset]\nkind = \"two-moons\"\nn = 400\nnoise = 0.1\nseed = 0\n\n[train]\ntotal_steps = 40\neval_every = 20\n",
        out.display().to_string()
    )
}

#[test]
fn hoeffding_succeeds_without_config() {
    assert_eq!(run_cli(["ssl-lab", "hoeffding", "--confidence", "0.95", "--p", "0.01"]), 0);
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(run_cli(["ssl-lab", "no-such-command"]), 1);
    assert_eq!(run_cli(["ssl-lab", "train"]), 1);
    assert_eq!(run_cli(["ssl-lab", "hoeffding", "--confidence", "1.5", "--p", "0.01"]), 1);
    assert_eq!(run_cli(["ssl-lab", "train", "--config", "/nonexistent/spec.toml"]), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "kind = \"train\"\nseeds = [0]\nbogus_key = 3\n");
    assert_eq!(run_cli(["ssl-lab", "train", "--config", &bad]), 1);
    let wrong_kind = write_config(dir.path(), "kind = \"sweep-labeled\"\nseeds = [0, 1]\n");
    assert_eq!(run_cli(["ssl-lab", "train", "--config", &wrong_kind]), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run_cli(["ssl-lab", "--help"]), 0);
}

#[test]
fn train_writes_records_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train_config(&out));
    assert_eq!(run_cli(["ssl-lab", "train", "--config", &config]), 0);
    for name in ["spec.toml", "train_summary.csv", "runs/vat_seed0.json", "models/supervised_seed0.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let summary = fs::read_to_string(out.join("train_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let record = fs::read_to_string(out.join("runs/vat_seed0.json")).unwrap();
    assert_eq!(run_cli(["ssl-lab", "train", "--config", &config]), 0);
    assert_eq!(fs::read_to_string(out.join("runs/vat_seed0.json")).unwrap(), record);
}

#[test]
fn boundary_from_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train_config(&out));
    assert_eq!(run_cli(["ssl-lab", "train", "--config", &config, "--method", "supervised"]), 0);
    let model = out.join("models/supervised_seed0.json").display().to_string();
    let bout = dir.path().join("boundary").display().to_string();
    assert_eq!(run_cli(["ssl-lab", "boundary", "--params", &model, "--resolution", "5", "--out", &bout]), 0);
    let csv = fs::read_to_string(Path::new(&bout).join("boundary.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,p_0,p_1,argmax"));
    assert_eq!(csv.lines().count(), 26);
    assert_eq!(run_cli(["ssl-lab", "boundary", "--params", "/nonexistent.json", "--out", &bout]), 1);
}

#[test]
fn labeled_sweep_writes_cells_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(
        dir.path(),
        &format!(
            "kind = \"sweep-labeled\"\nseeds = [0, 1]\nmethods = [\"pi-model\"]\noutput_dir = {:?}\n\n[dataset]\nkind = \"two-moons\"\nn = 300\n\n[split]\nlabeled = 6\nunlabeled = 150\nvalidation = 50\ntest = 50\n\n[train]\ntotal_steps = 30\neval_every = 10\n",
            out.display().to_string()
        ),
    );
    assert_eq!(run_cli(["ssl-lab", "sweep-labeled", "--config", &config, "--values", "4,8"]), 0);
    let cells = fs::read_to_string(out.join("labeled_cells.csv")).unwrap();
    assert!(cells.starts_with("axis,value,method,seed,metric\n"));
    assert_eq!(cells.lines().count(), 1 + 2 * 2);
    let summary = fs::read_to_string(out.join("labeled_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2);
}
