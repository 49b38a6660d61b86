use std::path::Path;
use std::process::{Command, Output};

fn fine(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fine"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = fine(cwd, args);
    assert!(
        out.status.success(),
        "fine {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn metric_mismatch_exits_nonzero_naming_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "multinomial-clusters",
            "--docs-per-class",
            "5",
            "--out",
            "docs",
        ],
    );
    let out = fine(
        d,
        &[
            "embed",
            "--input",
            "docs/terms.csv",
            "--pdf-kind",
            "multinomial",
            "--metric",
            "fisher_kl",
        ],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config stage failed"), "{err}");
}

#[test]
fn missing_input_names_load_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = fine(
        dir.path(),
        &[
            "distances",
            "--input",
            "nope.csv",
            "--pdf-kind",
            "kde",
            "--metric",
            "fisher_kl",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("load stage failed"));
}

#[test]
fn run_json_reproduces_artifacts_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "swiss-roll",
            "--n-sets",
            "24",
            "--samples-per-set",
            "20",
            "--noise",
            "0.4",
            "--out",
            "roll",
        ],
    );
    ok(
        d,
        &[
            "embed",
            "--input",
            "roll/collection.csv",
            "--pdf-kind",
            "kde",
            "--metric",
            "fisher_kl",
            "--geodesic",
            "--embed",
            "cmds",
            "--dim",
            "3",
            "--out",
            "a",
        ],
    );
    for f in [
        "distances.csv",
        "geodesic.csv",
        "graph.csv",
        "embedding.csv",
        "spectrum.json",
        "run.json",
    ] {
        assert!(d.join("a").join(f).is_file(), "{f}");
    }
    ok(d, &["embed", "--config", "a/run.json", "--out", "b"]);
    for f in [
        "distances.csv",
        "geodesic.csv",
        "embedding.csv",
        "spectrum.json",
    ] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
    ok(
        d,
        &[
            "embed",
            "--config",
            "a/run.json",
            "--dim",
            "2",
            "--out",
            "c",
        ],
    );
    let header = read(d.join("c/embedding.csv"))
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "set_id,label,y1,y2");
}

#[test]
fn threshold_violation_fails_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "gaussian-grid",
            "--k-steps",
            "4",
            "--l-steps",
            "4",
            "--out",
            "grid",
        ],
    );
    let out = fine(
        d,
        &[
            "embed",
            "--input",
            "grid/params.csv",
            "--pdf-kind",
            "gaussian_params",
            "--metric",
            "fisher_kl",
            "--embed",
            "cmds",
            "--max-negative-eigen-mass",
            "0",
            "--out",
            "o",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagnostics stage failed"));
    assert!(d.join("o/embedding.csv").is_file());
}

#[test]
fn plot_data_and_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "multinomial-clusters",
            "--n-classes",
            "2",
            "--dict-size",
            "40",
            "--docs-per-class",
            "12",
            "--counts-per-doc",
            "60",
            "--out",
            "docs",
        ],
    );
    ok(
        d,
        &[
            "embed",
            "--input",
            "docs/terms.csv",
            "--pdf-kind",
            "multinomial",
            "--metric",
            "hellinger",
            "--embed",
            "lem",
            "--knn-k",
            "6",
            "--lem-bridge",
            "--out",
            "e",
        ],
    );
    ok(
        d,
        &["plot-data", "--embedding", "e/embedding.csv", "--out", "p"],
    );
    let rows = read(d.join("p/class_0.dat")).lines().count()
        + read(d.join("p/class_1.dat")).lines().count();
    assert_eq!(rows, 24);

    ok(
        d,
        &[
            "eval-classify",
            "--input",
            "docs/terms.csv",
            "--pdf-kind",
            "multinomial",
            "--metric",
            "hellinger",
            "--embed",
            "ccdr",
            "--knn-k",
            "6",
            "--lem-bridge",
            "--betas",
            "0,1",
            "--dim-sweep",
            "1,2",
            "--folds",
            "3",
            "--out",
            "ev",
        ],
    );
    let report = read(d.join("ev/classification.json"));
    for key in [
        "\"fold_seeds\"",
        "\"per_fold\"",
        "\"mean\"",
        "\"std\"",
        "\"best\"",
    ] {
        assert!(report.contains(key), "{key}");
    }

    ok(
        d,
        &[
            "validate-convergence",
            "--resolutions",
            "2x1,4",
            "--out",
            "v",
        ],
    );
    let csv = read(d.join("v/convergence.csv"));
    assert!(csv.starts_with("resolution,estimate,exact,abs_error\n2x1,"));
}
