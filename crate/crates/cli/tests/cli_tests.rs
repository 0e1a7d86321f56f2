//! End-to-end subcommand behaviour through the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn slicc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicc"))
        .args(args)
        .env_remove("SLICC_SEED")
        .output()
        .expect("binary runs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

#[test]
fn check_prints_levels_in_declaration_order() {
    let out = slicc(&["check", &fixture("eight_schools.slic")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "N: data\ny: data\nsigma: data\nmu: model\ntau: model\ntheta: model\n"
    );
}

#[test]
fn check_rejects_immutability_violation_with_exit_2() {
    let out = slicc(&["check", &fixture("shred_violation.slic")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("immutable"), "{err}");
    assert!(err.contains("read at model level"), "{err}");
}

#[test]
fn three_liner_checks_and_compiles() {
    let out = slicc(&["check", &fixture("three_liner.slic")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "x: model\ny: model\n");
    let out = slicc(&["compile", &fixture("three_liner.slic")]);
    assert!(out.status.success());
}

#[test]
fn compile_emits_blocked_text_on_stdout() {
    let out = slicc(&["compile", &fixture("eight_schools.slic")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("data {"));
    assert!(text.contains("parameters {"));
}

#[test]
fn compile_refuses_discrete_parameters() {
    let out = slicc(&["compile", &fixture("coins.slic")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("marginalize"), "{err}");
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = slicc(&["check", "--frobnicate", &fixture("coins.slic")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.slic");
    std::fs::write(&path, "real x = ;\n").unwrap();
    let out = slicc(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":1:"), "{err}");
}

#[test]
fn transform_marginalize_output_rechecks() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("coins_marg.slic");
    let out = slicc(&[
        "transform",
        "--marginalize",
        &fixture("coins.slic"),
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    // closure under the toolchain: the output re-parses and re-checks
    let check = slicc(&["check", out_path.to_str().unwrap()]);
    assert!(check.status.success());
    let text = String::from_utf8(check.stdout).unwrap();
    assert!(text.contains("c1: genquant"), "{text}");
    assert!(text.contains("c2: genquant"), "{text}");
    // and now compiles (no discrete model parameters left)
    let compile = slicc(&["compile", out_path.to_str().unwrap()]);
    assert!(compile.status.success());
    let blocked = String::from_utf8(compile.stdout).unwrap();
    assert!(blocked.contains("generated quantities {"), "{blocked}");
    assert!(blocked.contains("categorical(softmax("), "{blocked}");
    // a manifest landed next to the output
    assert!(out_path.with_file_name("coins_marg.slic.manifest.json").exists());
}

#[test]
fn sample_is_byte_identical_across_runs_with_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    for (path, _) in [(&csv1, 0), (&csv2, 1)] {
        let out = slicc(&[
            "sample",
            &fixture("eight_schools.slic"),
            "--data",
            &fixture("eight_schools.data.json"),
            "--iters",
            "300",
            "--warmup",
            "100",
            "--seed",
            "7",
            "-o",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&csv1).unwrap();
    let b = std::fs::read(&csv2).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a);
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("mu,tau,theta[1]"), "{header}");
    assert!(header.ends_with("divergent__"), "{header}");
}

#[test]
fn seed_env_fallback_and_flag_priority() {
    let dir = tempfile::tempdir().unwrap();
    let by_env = dir.path().join("env.csv");
    let by_flag = dir.path().join("flag.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_slicc"))
        .args([
            "sample",
            &fixture("banana.slic"),
            "--iters",
            "120",
            "--warmup",
            "20",
            "-o",
            by_env.to_str().unwrap(),
        ])
        .env("SLICC_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_slicc"))
        .args([
            "sample",
            &fixture("banana.slic"),
            "--iters",
            "120",
            "--warmup",
            "20",
            "--seed",
            "9",
            "-o",
            by_flag.to_str().unwrap(),
        ])
        .env("SLICC_SEED", "1234")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&by_env).unwrap(), std::fs::read(&by_flag).unwrap());
}

#[test]
fn vi_writes_guide_and_elbo_trace() {
    let dir = tempfile::tempdir().unwrap();
    let guide = dir.path().join("guide.json");
    let out = slicc(&[
        "vi",
        &fixture("banana.slic"),
        "--steps",
        "50",
        "-o",
        guide.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&guide).unwrap()).unwrap();
    assert_eq!(parsed["guide"].as_array().unwrap().len(), 2);
    let elbo = dir.path().join("guide.elbo.csv");
    let trace = std::fs::read_to_string(&elbo).unwrap();
    assert!(trace.starts_with("step,elbo\n"));
    assert_eq!(trace.lines().count(), 51);
}

#[test]
fn vip_round_trips_through_transform() {
    let dir = tempfile::tempdir().unwrap();
    let lambda = dir.path().join("lambda.json");
    let out = slicc(&[
        "vip",
        &fixture("conjugate.slic"),
        "--data",
        &fixture("conjugate.data.json"),
        "--steps",
        "60",
        "--out",
        lambda.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&lambda).unwrap()).unwrap();
    assert!(parsed.get("z").is_some());
    // feed the map back through the textual transform
    let spec = format!("@{}", lambda.display());
    let out = slicc(&["transform", "--vip", &spec, &fixture("conjugate.slic")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("z_tilde"), "{text}");
}

#[test]
fn version_flag_works() {
    let out = slicc(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("slicc "));
}
