use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrf-lab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn wrf-lab")
}

#[test]
fn synth_then_run_with_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = lab(
        &[
            "synth", "--n", "120", "--p", "4", "--sep", "2", "--noise", "0.05", "--out", "s.csv",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x0,x1,x2,x3,label");
    assert_eq!(csv.lines().count(), 121);

    let out = lab(
        &[
            "run",
            "--data",
            "s.csv",
            "--label",
            "label",
            "--trees",
            "8",
            "--reps",
            "2",
            "--seed",
            "3",
            "--models",
            "regular_rf,opt_auc,perf_wrf",
            "--format",
            "markdown",
            "--out",
            "t.md",
            "--dump-oof",
            "oof",
            "--dump-weights",
            "w",
            "--dump-model",
            "m",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(d.join("t.md")).unwrap();
    assert!(table.starts_with("| Dataset | RF | Opt. AUC | Perf. weighted RF |"));
    assert_eq!(table.lines().count(), 4);
    assert!(d.join("oof/s_oof_binary.csv").exists());
    assert!(d.join("w/s_opt_auc_weights.csv").exists());
    assert!(d.join("w/s_perf_wrf_weights.csv").exists());
    let model = std::fs::read_to_string(d.join("m/s_forest.json")).unwrap();
    assert!(model.contains("\"kind\""));
}

#[test]
fn csv_goes_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(lab(
        &["synth", "--n", "60", "--p", "3", "--sep", "2", "--out", "a.csv"],
        d
    )
    .status
    .success());
    let out = lab(
        &[
            "run",
            "--data",
            "a.csv",
            "--label",
            "label",
            "--trees",
            "5",
            "--reps",
            "1",
            "--models",
            "regular_rf",
        ],
        d,
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,regular_rf_mean,regular_rf_sd,best_model");
    assert!(lines[1].starts_with("a,"));
    assert!(lines[2].starts_with("Ave.,"));
}

#[test]
fn failing_dataset_gives_nonzero_exit_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(lab(
        &["synth", "--n", "60", "--p", "3", "--sep", "2", "--out", "ok.csv"],
        d
    )
    .status
    .success());
    std::fs::write(
        d.join("exp.toml"),
        "n_trees = 5\nrepetitions = 1\nmodels = [\"regular_rf\"]\nout = \"res.csv\"\n\
         [[dataset]]\npath = \"ok.csv\"\nlabel = \"label\"\n\
         [[dataset]]\npath = \"ok.csv\"\nname = \"wrong_label\"\nlabel = \"nope\"\n",
    )
    .unwrap();
    let out = lab(&["run", "--config", "exp.toml"], d);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("1 of 2 datasets failed"), "{stderr}");
    assert!(stderr.contains("wrong_label"), "{stderr}");
    let table = std::fs::read_to_string(d.join("res.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("ok,"));
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!lab(&["run"], d).status.success());
    assert!(!lab(&["run", "--data", "x.csv"], d).status.success());
    assert!(!lab(
        &["run", "--data", "x.csv", "--label", "y", "--models", "boosting"],
        d
    )
    .status
    .success());
    assert!(!lab(
        &["run", "--data", "x.csv", "--label", "y", "--reps", "0"],
        d
    )
    .status
    .success());
    assert!(!lab(
        &["synth", "--n", "5", "--p", "3", "--sep", "1", "--out", "s.csv"],
        d
    )
    .status
    .success());
}
