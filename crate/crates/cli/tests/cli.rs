use std::path::Path;
use std::process::{Command, Output};

fn srdo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srdo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.cfg");
    std::fs::write(
        &path,
        format!(
            "problem.N = 6\nproblem.m_bar = 4\nproblem.p = 3\nproblem.n_r = 3\ncoding.s = 1\n\
             random.H = 3\nengine.scenario = stale_gradients\nstepsize.a = 200\n\
             experiment.iters = 30\nexperiment.trials = 2\n{extra}"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = srdo(&["run", &cfg, "--out", out.to_str().unwrap(), "--trials", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("srdo_trial_0002.csv").exists());
    assert!(out.join("manifest.json").exists());

    let a = srdo(&["audit", out.join("srdo_trial_0001.csv").to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(a.status.success(), "{stdout}{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout.contains(" 0 violations"), "{stdout}");
}

#[test]
fn invalid_config_exits_2_with_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "coding.s = 3\nnetwork.mu = 2\nfoo.bar = 1\n");
    // coding.s appears twice; drop the first
    let text = std::fs::read_to_string(&cfg).unwrap().replacen("coding.s = 1\n", "", 1);
    std::fs::write(&cfg, text).unwrap();
    let o = srdo(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("foo.bar"), "{err}");
    assert!(err.contains("coding.s"), "{err}");
    assert!(err.contains("network.mu"), "{err}");
}

#[test]
fn missing_config_is_runtime_error() {
    let o = srdo(&["run", "/nonexistent/exp.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/exp.cfg"));
}

#[test]
fn verify_codec_passes_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = srdo(&["verify-codec", "--n", "5", "--s", "2", "--seeds", "4", "--dump", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("(pass)"));
    assert!(dir.path().join("codec_n5_s2_seed3_B.csv").exists());
    let bad = srdo(&["verify-codec", "--n", "3", "--s", "3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bounds_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("b");
    let o = srdo(&["bounds", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(text.lines().count(), 32);
    assert!(String::from_utf8_lossy(&o.stdout).contains("scenario-1 envelope"));
}

#[test]
fn small_theta_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "stepsize.theta = 0.35\n");
    let out = dir.path().join("w");
    let o = srdo(&["run", &cfg, "--out", out.to_str().unwrap(), "--iters", "5"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: stepsize.theta"));
    let m = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(m.contains("not summable"));
}
