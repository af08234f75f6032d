use std::path::Path;
use std::process::{Command, Output};

use sclrom::io::{read_model, read_snapshots};

fn sclrom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclrom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_fit_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = sclrom(d, &["simulate", "periodic", "--n", "64", "--T", "8", "--seed", "1", "--out", "h.bin"]);
    assert_eq!(sim.status.code(), Some(0));
    let fit = sclrom(d, &["fit", "h.bin", "--mode", "monomial", "--eps", "1e-10", "--out", "m.bin"]);
    assert_eq!(fit.status.code(), Some(0), "{}", String::from_utf8_lossy(&fit.stderr));
    let verify = sclrom(d, &["verify", "m.bin", "h.bin"]);
    assert_eq!(verify.status.code(), Some(0));

    let text = stdout(&verify);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Verification passed...");
    let value = lines[1]
        .strip_prefix("max{||K U^k T x0 - xk|| | 1<=k<=m} = ")
        .and_then(|rest| rest.strip_suffix(" <= eps"))
        .expect("residual line");
    assert!(value.parse::<f64>().unwrap() <= 1e-10);
    assert_eq!(&lines[2..], ["For m = 8", "For n = 64", "For eps = 1.0000e-10"]);
}

#[test]
fn paper_log_style_adds_banners() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = sclrom(d, &["--log-style", "paper", "simulate", "periodic", "--n", "8", "--T", "3", "--out", "h.bin"]);
    assert!(stdout(&sim).contains("Running simulation:"));
    sclrom(d, &["fit", "h.bin", "--out", "m.bin"]);
    let verify = sclrom(d, &["verify", "m.bin", "h.bin", "--log-style", "paper"]);
    let text = stdout(&verify);
    assert!(text.starts_with("-------------------------------------------------------------\n"));
    assert!(text.contains(" Verifying circular mimetic constraints for C[U[v1|vm]]:"));
}

#[test]
fn strict_eps_on_noisy_data_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["simulate", "almost-periodic", "--n", "32", "--T", "4", "--eps", "1e-3", "--seed", "5", "--out", "a.bin"];
    assert_eq!(sclrom(d, &args).status.code(), Some(0));
    sclrom(d, &["fit", "a.bin", "--period", "4", "--out", "m.bin"]);
    let verify = sclrom(d, &["verify", "m.bin", "a.bin", "--eps", "1e-12"]);
    assert_eq!(verify.status.code(), Some(1));
    let text = stdout(&verify);
    assert!(text.starts_with("Verification failed...\n"));
    assert!(text.contains(" > eps\n"));
}

#[test]
fn wave_simulation_writes_nt_plus_one_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = sclrom(d, &["simulate", "wave", "--nx", "100", "--nt", "40", "--out", "w.bin"]);
    assert_eq!(sim.status.code(), Some(0));
    let h = read_snapshots(d.join("w.bin")).unwrap();
    assert_eq!((h.n(), h.m()), (100, 41));
}

#[test]
fn predict_and_export_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sclrom(d, &["simulate", "periodic", "--n", "16", "--T", "4", "--seed", "2", "--out", "h.csv", "--format", "csv"]);
    sclrom(d, &["fit", "h.csv", "--out", "m.bin"]);
    let pred = sclrom(d, &["predict", "m.bin", "--from", "2", "--to", "9", "--out", "p.bin"]);
    assert_eq!(pred.status.code(), Some(0));
    let p = read_snapshots(d.join("p.bin")).unwrap();
    assert_eq!(p.m(), 8);
    let model = read_model(d.join("m.bin")).unwrap();
    assert_eq!(p.column(0), sclrom::predict(&model, 2));

    let plot = sclrom(d, &["export-plot", "h.csv", "--model", "m.bin", "--components", "0,3"]);
    assert_eq!(plot.status.code(), Some(0));
    let csv = stdout(&plot);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,residual,x0_re,x0_im,pred0_re,pred0_im,x3_re,x3_im,pred3_re,pred3_im"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn usage_and_io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["fit", "missing.bin", "--out", "m.bin"][..],
        &["simulate", "periodic", "--n", "x", "--T", "2", "--out", "h.bin"],
        &["nonsense"],
        &["export-plot", "missing.bin"],
    ] {
        let o = sclrom(d, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(String::from_utf8(o.stderr).unwrap().lines().count(), 1, "{args:?}");
    }
}
