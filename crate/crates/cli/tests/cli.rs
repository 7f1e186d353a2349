use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chernflow::flow::read_checkpoint;

fn chernflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chernflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn key(text: &str, k: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{k} = ")))
        .unwrap_or_else(|| panic!("no `{k}` in\n{text}"))
        .parse()
        .unwrap()
}

const HOPF2: &str = "model = hopf\nformulation = closed_form\nhopf.n = 2\nhopf.samples = 8\n\
                     dt = 1e-3\ndt_min = 1e-7\nt_end = 1.0\ncheckpoint_every = 10\noutput.dir = hopf\n";

const FLAT: &str = "model = torus\ntorus.n = 1\ntorus.N = 8\ndt = 1e-2\ndt_min = 1e-6\nt_end = 1.0\n\
                    checkpoint_every = 25\noutput.dir = flat\n";

const COSINE: &str = "model = torus\nformulation = both\ntorus.N = 16\ntorus.epsilon = 0.1\n\
                      torus.mode.x = 0 0 1 0 0 1 0\ndt = 2e-3\ndt_min = 1e-7\nt_end = 0.02\n\
                      checkpoint_every = 5\noutput.dir = cosine\n";

#[test]
fn hopf_run_blows_up_with_exit_2_and_a_fit_near_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hopf.conf", HOPF2);
    let out = chernflow(&["--quiet", "run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = fs::read_to_string(dir.path().join("hopf/fit.txt")).unwrap();
    assert!((key(&fit, "t_fit") - 0.5).abs() < 1e-3);
    assert!((key(&fit, "k") - 1.0).abs() < 0.05);
    let locus = fs::read_to_string(dir.path().join("hopf/locus.txt")).unwrap();
    assert!(locus.contains("flagged = 8"));
    assert!(
        String::from_utf8_lossy(&out.stdout).is_empty(),
        "--quiet prints nothing"
    );
}

#[test]
fn flat_torus_completes_with_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.conf", FLAT);
    let out = chernflow(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("flat/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,sup_R,inf_R,sup_ric_norm_sq,min_eig,sup_abs_phi,sup_abs_phidot,q1_min,q1_max,volume,dbar_residual,gauduchon_residual"
    );
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(v.len(), 12);
        assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 101);
    assert!(!dir.path().join("flat/fit.txt").exists());
    // Initial state, every 25th step, and the final state.
    let cps = fs::read_dir(dir.path().join("flat/checkpoints")).unwrap().count();
    assert_eq!(cps, 5);
}

#[test]
fn invalid_step_bounds_exit_1_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", &FLAT.replace("dt_min = 1e-6", "dt_min = 0.5"));
    let out = chernflow(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`dt_min`"));
}

#[test]
fn unknown_key_exit_1_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", &format!("{FLAT}torus.wobble = 3\n"));
    let out = chernflow(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`torus.wobble`"));
}

#[test]
fn identical_configs_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", COSINE);
    let a = chernflow(&["run", &cfg, "--output-dir", "a"], dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_chernflow"))
        .args(["run", &cfg, "--output-dir", "b"])
        .current_dir(dir.path())
        .env("CHERNFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    for f in [
        "diagnostics_tensor.csv",
        "diagnostics_potential.csv",
        "cross_validation.txt",
        "q_tensor.csv",
    ] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let hopf = write_config(
        dir.path(),
        "h.conf",
        &HOPF2.replace("hopf.samples = 8", "hopf.samples = 4\nseed = 11"),
    );
    for d in ["h1", "h2"] {
        chernflow(&["--quiet", "run", &hopf, "--output-dir", d], dir.path());
    }
    assert_eq!(
        fs::read(dir.path().join("h1/diagnostics.csv")).unwrap(),
        fs::read(dir.path().join("h2/diagnostics.csv")).unwrap()
    );
}

#[test]
fn both_formulations_write_cross_validation_and_readable_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", COSINE);
    let out = chernflow(&["run", &cfg, "--checkpoint-every", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(dir.path().join("cosine/cross_validation.txt")).unwrap();
    assert!(report.contains("passed = true"), "{report}");
    // 10 steps, checkpoints at 0, 2, 4, 6, 8, 10.
    let cp_dir = dir.path().join("cosine/checkpoints_potential");
    assert_eq!(fs::read_dir(&cp_dir).unwrap().count(), 6);
    let last = read_checkpoint(&fs::read_to_string(cp_dir.join("000005.chk")).unwrap()).unwrap();
    assert!((last.t - 0.02).abs() < 1e-15);
}

#[test]
fn verify_kernel_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chernflow(&["verify", "kernel"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn verify_rejects_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = chernflow(&["verify", "everything"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_recovers_synthetic_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,sup_R\n");
    for k in 0..40 {
        let t = 0.25 + 0.24 * k as f64 / 39.0;
        csv.push_str(&format!("{t:.17e},{:.17e}\n", 1.0 / (0.5 - t)));
    }
    fs::write(dir.path().join("s.csv"), csv).unwrap();
    let out = chernflow(
        &["fit", "s.csv", "--window", "0.25:0.49", "--output-dir", "fit"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!((key(&text, "t_fit") - 0.5).abs() < 1e-8);
    assert!((key(&text, "k") - 1.0).abs() < 1e-6);
    assert!((key(&text, "c") - 1.0).abs() < 1e-6);
    assert_eq!(fs::read_to_string(dir.path().join("fit/fit.txt")).unwrap(), text);
}

#[test]
fn fit_of_constant_series_is_a_contract_violation() {
    let dir = tempfile::tempdir().unwrap();
    let csv: String = std::iter::once("t,sup_R\n".to_string())
        .chain((0..20).map(|k| format!("{},3\n", k as f64 * 0.01)))
        .collect();
    fs::write(dir.path().join("c.csv"), csv).unwrap();
    let out = chernflow(&["fit", "c.csv", "--window", "0:1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("contract violation"));
}

#[test]
fn fit_of_malformed_csv_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), "t,sup_R\n0.1,abc\n").unwrap();
    let out = chernflow(&["fit", "m.csv", "--window", "0:1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    fs::write(dir.path().join("n.csv"), "time,R\n0.1,1\n").unwrap();
    let out = chernflow(&["fit", "n.csv", "--window", "0:1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_of_a_hopf_run_matches_the_singular_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hopf.conf", HOPF2);
    assert_eq!(chernflow(&["--quiet", "run", &cfg], dir.path()).status.code(), Some(2));
    let out = chernflow(&["fit", "hopf/diagnostics.csv", "--window", "0.25:0.4999"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!((key(&String::from_utf8_lossy(&out.stdout), "t_fit") - 0.5).abs() < 1e-3);
}
