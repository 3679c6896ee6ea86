use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lisrmap(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lisrmap"));
    cmd.args(args)
        .env_remove("LISRMAP_OUTPUT_DIR")
        .env("RUST_LOG", "warn")
        .env("RUST_BACKTRACE", "0");
    if let Some(dir) = env_out {
        cmd.env("LISRMAP_OUTPUT_DIR", dir);
    }
    cmd.output().expect("spawn lisrmap")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_then_run_from_file_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.toml");
    let s = scen.to_str().unwrap();
    ok(&lisrmap(
        &[
            "--seed", "4", "--n-side", "32", "--k-aus", "3", "generate", "--out", s,
        ],
        None,
    ));
    let text = fs::read_to_string(&scen).unwrap();
    assert!(text.contains("rng_seed = 4"));

    let art = dir.path().join("art");
    let stdout = ok(&lisrmap(
        &[
            "--scenario-file",
            s,
            "--output-dir",
            art.to_str().unwrap(),
            "run",
            "--artifacts",
        ],
        None,
    ));
    assert!(stdout.contains("rpca:"));
    for f in [
        "y.lrmt",
        "stack.lrmt",
        "nlos.pgm",
        "report.csv",
        "map_2.pgm",
    ] {
        assert!(art.join(f).exists(), "{f}");
    }

    // replaying the saved observation gives the same report
    let replay = dir.path().join("replay");
    let stdout2 = ok(&lisrmap(
        &[
            "--scenario-file",
            s,
            "--output-dir",
            replay.to_str().unwrap(),
            "run",
            "--observation",
            art.join("y.lrmt").to_str().unwrap(),
        ],
        None,
    ));
    assert_eq!(stdout, stdout2);
    assert_eq!(
        fs::read(art.join("report.csv")).unwrap(),
        fs::read(replay.join("report.csv")).unwrap()
    );
}

#[test]
fn generate_is_deterministic_on_stdout() {
    let a = ok(&lisrmap(
        &["--seed", "9", "--n-side", "16", "generate"],
        None,
    ));
    let b = ok(&lisrmap(
        &["--seed", "9", "--n-side", "16", "generate"],
        None,
    ));
    assert_eq!(a, b);
    assert!(a.contains("[room]"));
}

#[test]
fn campaign_uses_env_output_dir_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--n-side",
        "32",
        "--k-values",
        "2,4",
        "--mcs-count",
        "3",
        "campaign",
    ];
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    ok(&lisrmap(&args, Some(&first)));
    let mut with_workers = args.to_vec();
    with_workers.splice(0..0, ["--workers", "2"]);
    ok(&lisrmap(&with_workers, Some(&second)));
    for f in ["realizations.csv", "summary.csv", "ccdf.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    let cfg = fs::read_to_string(first.join("config.toml")).unwrap();
    assert!(cfg.contains("k_values = [2, 4]"));
}

#[test]
fn config_file_is_loaded_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[scenario]\nsource = \"scaled\"\nn_side = 16\nr_obj = 1\nr_hum = 1\n[campaign]\nk_values = [2]\nmcs_count = 2\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&lisrmap(
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--mcs-count",
            "3",
            "--output-dir",
            out.to_str().unwrap(),
            "campaign",
        ],
        None,
    ));
    let rows = fs::read_to_string(out.join("realizations.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
}

#[test]
fn inspect_renders_a_stack_row() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("art");
    ok(&lisrmap(
        &[
            "--n-side",
            "16",
            "--k-aus",
            "2",
            "--output-dir",
            art.to_str().unwrap(),
            "run",
            "--artifacts",
        ],
        None,
    ));
    let pgm = dir.path().join("row.pgm");
    let stdout = ok(&lisrmap(
        &[
            "inspect",
            art.join("stack.lrmt").to_str().unwrap(),
            "--row",
            "1",
            "--out",
            pgm.to_str().unwrap(),
        ],
        None,
    ));
    assert!(stdout.contains("(16 x 16)"));
    assert!(fs::read(&pgm).unwrap().starts_with(b"P5\n16 16\n65535\n"));

    let bad = lisrmap(
        &[
            "inspect",
            art.join("stack.lrmt").to_str().unwrap(),
            "--row",
            "7",
        ],
        None,
    );
    assert!(!bad.status.success());
}

#[test]
fn failures_exit_nonzero_with_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = lisrmap(&["--scenario-file", missing.to_str().unwrap(), "run"], None);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stage scenario"), "{stderr}");

    let out = lisrmap(&["campaign"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("LISRMAP_OUTPUT_DIR"));

    let out = lisrmap(&["--eps=-1", "run"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("inference"));
}
