use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MODEL: &str = "[model]\nn = 1\ngamma = 2\nkappa = 1\ntau = 0.05\n";

fn bgk(args: &[&str], dir: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bgk"));
    cmd.args(args).current_dir(dir).env_remove("BGK_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("bgk runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.ini",
        &format!("{MODEL}[scenario]\nname = equilibrium\n[output]\nverify_cases = 8\nverify_nv_1d = 512\nseed = 7\n"),
    );
    let a = bgk(&["verify", "--config", &cfg, "--output", "one", "--threads", "1"], tmp.path(), &[]);
    let b = bgk(&["verify", "--config", &cfg, "--output", "eight"], tmp.path(), &[("BGK_THREADS", "8")]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let x = fs::read(tmp.path().join("one/verify.csv")).unwrap();
    let y = fs::read(tmp.path().join("eight/verify.csv")).unwrap();
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# format = bgk-csv/1\n# command = verify\n# model.n = 1\n"));
    let families: std::collections::BTreeSet<&str> =
        text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(families.len() >= 5, "{families:?}");
}

#[test]
fn stability_sweep_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.ini",
        &format!("{MODEL}[scenario]\nname = equilibrium\n[output]\nsweep_cases = 12\nsweep_nv = 1024\n"),
    );
    let a = bgk(&["stability-sweep", "--config", &cfg, "--output", "one", "--threads", "1"], tmp.path(), &[]);
    let b = bgk(&["stability-sweep", "--config", &cfg, "--output", "eight", "--threads", "8"], tmp.path(), &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        fs::read(tmp.path().join("one/stability.csv")).unwrap(),
        fs::read(tmp.path().join("eight/stability.csv")).unwrap()
    );
}

#[test]
fn counterexample_below_c2_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.ini",
        "[model]\nn = 1\ngamma = 3\nkappa = 1\ntau = 1\n[scenario]\nname = equilibrium\ncounterexample_a = 0.1\n",
    );
    let out = bgk(&["counterexample", "--config", &cfg, "--output", "o"], tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a > c2"));
    let failures = fs::read_to_string(tmp.path().join("o/failures.csv")).unwrap();
    assert!(failures.contains("usage"));

    let cfg = write_config(
        tmp.path(),
        "ok.ini",
        "[model]\nn = 1\ngamma = 3\nkappa = 1\ntau = 1\n[scenario]\nname = equilibrium\n",
    );
    let out = bgk(&["counterexample", "--config", &cfg, "--output", "ok"], tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("ok/counterexample.csv")).unwrap();
    assert!(table.contains("closed_form,1e0,3.333333333333333e-1,1e0,true"), "{table}");
}

#[test]
fn equilibrium_simulation_has_a_flat_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.ini",
        &format!("{MODEL}[grid]\nnx = 16\nnv = 48\n[solver]\ndt = 0.01\nt_end = 0.05\ncheckpoint_every = 2\n[scenario]\nname = equilibrium\nrho = 0.8\nu = 0.2\n"),
    );
    let out = bgk(&["simulate", "--config", &cfg, "--output", "o"], tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ledger = fs::read_to_string(tmp.path().join("o/ledger.csv")).unwrap();
    let rows: Vec<Vec<&str>> =
        ledger.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let mass: f64 = r[1].parse().unwrap();
        let entropy: f64 = r[4].parse().unwrap();
        let m0: f64 = rows[0][1].parse().unwrap();
        let h0: f64 = rows[0][4].parse().unwrap();
        assert!((mass - m0).abs() <= 1e-12 * m0);
        assert!((entropy - h0).abs() <= 1e-12 * h0.abs());
    }
    assert!(tmp.path().join("o/manifest.csv").exists());
    assert!(tmp.path().join("o/checkpoints").read_dir().unwrap().count() >= 2);
    let resolved = fs::read_to_string(tmp.path().join("o/resolved_config.txt")).unwrap();
    assert!(resolved.contains("solver.interpolation = linear"));
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (MODEL.replace("gamma = 2", "gamma = 5"), "model.gamma"),
        (format!("{MODEL}[grid]\nnx = 4\nnx = 8\n[scenario]\nname = equilibrium\n"), "grid.nx"),
        (format!("{MODEL}[grid]\nwidth = 4\n[scenario]\nname = equilibrium\n"), "grid.width"),
        ("[model]\nn = 1\ngamma = 2\nkappa = 1\n".to_string(), "model.tau"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let text =
            if text.contains("[scenario]") { text.clone() } else { format!("{text}[scenario]\nname = equilibrium\n") };
        let cfg = write_config(tmp.path(), &format!("bad{i}.ini"), &text);
        let out = bgk(&["simulate", "--config", &cfg, "--output", &format!("o{i}")], tmp.path(), &[]);
        assert_eq!(out.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(key), "case {i}: {err}");
        assert!(tmp.path().join(format!("o{i}/failures.csv")).exists());
    }
    let out = bgk(&["simulate"], tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}
