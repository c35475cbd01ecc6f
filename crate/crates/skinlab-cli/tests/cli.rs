use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skinlab::io::{self, Manifest};
use skinlab::superop::SpectrumDump;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skinlab"))
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = bin()
        .args(args)
        .arg("-o")
        .arg(out)
        .env_remove("SKINLAB_OUT_DIR")
        .output()
        .unwrap();
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn files(o: &Output) -> Vec<PathBuf> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect()
}

#[test]
fn bistable_spectrum_has_two_zero_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["spectrum", "--model", "measure", "--bc", "pbc", "--L", "8"],
        dir.path(),
    );
    let f = files(&o);
    let d: SpectrumDump = io::read_json(&f[0]).unwrap();
    assert_eq!(d.zero_mode_count, 2);
    assert_eq!(d.eigenvalues.len(), 64);
    let m: Manifest = io::read_json(&Manifest::sidecar_path(&f[0])).unwrap();
    assert_eq!(m.command, "spectrum");
    assert_eq!(m.config["model"], "measure");
    assert_eq!(m.outputs.len(), 1);
}

#[test]
fn spectrum_real_parts_non_positive_and_modes_dumped() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "spectrum", "--model", "feedback", "--bc", "obc", "--L", "10", "--gamma", "0.6",
            "--modes", "3",
        ],
        dir.path(),
    );
    let f = files(&o);
    let d: SpectrumDump = io::read_json(&f[0]).unwrap();
    assert!(d.eigenvalues.iter().all(|z| z[0] <= 1e-8));
    let t = io::read_csv(&f[1]).unwrap();
    assert_eq!(t.rows.len(), 3 * 100);
    assert!(t.column_f64("magnitude").unwrap().iter().all(|&x| x >= 0.0));
}

#[test]
fn extended_precision_backend_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "spectrum",
            "--L",
            "4",
            "--gamma",
            "0.6",
            "--precision",
            "extended:30",
        ],
        dir.path(),
    );
    let d: SpectrumDump = io::read_json(&files(&o)[0]).unwrap();
    assert_eq!(d.precision, "extended:30");
    assert_eq!(d.zero_mode_count, 1);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["spectrum", "--L", "6", "--gamma", "0.6"],
        vec!["relax", "--bc", "pbc", "--L", "8", "--gamma", "0.8"],
        vec!["scan", "--bc", "pbc", "--L", "6:10:2", "--gamma", "0.8,1.2"],
        vec!["steady", "--bc", "obc", "--L", "12", "--gamma", "0.6"],
        vec![
            "perturb",
            "--bc",
            "pbc",
            "--L",
            "8",
            "--gamma",
            "0.05",
            "--order",
            "2",
            "--compare",
        ],
        vec![
            "traj", "--L", "6", "--N", "3", "--gamma", "1", "--ntraj", "40", "--seed", "7",
            "--t-max", "4",
        ],
        vec![
            "traj",
            "--L",
            "8",
            "--N",
            "4",
            "--ntraj",
            "20",
            "--seed",
            "3",
            "--backend",
            "gaussian",
            "--t-max",
            "4",
        ],
    ];
    for args in cases {
        let fa = files(&run(&args, a.path()));
        let fb = files(&run(&args, b.path()));
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(
                std::fs::read(x).unwrap(),
                std::fs::read(y).unwrap(),
                "{args:?}: {}",
                x.display()
            );
        }
    }
}

#[test]
fn jobs_flag_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "traj", "--L", "6", "--N", "3", "--ntraj", "30", "--seed", "11", "--t-max", "3",
    ];
    let fa = files(&run(&[&["--jobs", "1"], &args[..]].concat(), a.path()));
    let fb = files(&run(&[&["--jobs", "3"], &args[..]].concat(), b.path()));
    assert_eq!(
        std::fs::read(&fa[0]).unwrap(),
        std::fs::read(&fb[0]).unwrap()
    );
}

#[test]
fn outputs_round_trip_through_readers() {
    let dir = tempfile::tempdir().unwrap();
    let f = files(&run(
        &[
            "relax", "--bc", "obc", "--L", "10", "--gamma", "0.6", "--init", "uniform",
        ],
        dir.path(),
    ));
    let report: serde_json::Value = io::read_json(&f[0]).unwrap();
    let again: serde_json::Value =
        serde_json::from_str(&io::to_json_string(&report).unwrap()).unwrap();
    assert_eq!(again, report);
    let tau = report["report"]["tau"].as_f64().unwrap();
    assert!(std::fs::read_to_string(&f[0])
        .unwrap()
        .contains(&skinlab::io::fmt_f64(tau)));
    let evo = io::read_csv(&f[1]).unwrap();
    let d = evo.column_f64("d").unwrap();
    assert!(d[0] > 0.0 && *d.last().unwrap() < 0.01);

    let f = files(&run(
        &["steady", "--bc", "obc", "--L", "12", "--gamma", "0.6"],
        dir.path(),
    ));
    let rho = skinlab::steady::read_density_csv(&f[1]).unwrap();
    let v: serde_json::Value = io::read_json(&f[0]).unwrap();
    let diag: Vec<f64> = v["states"][0]["diagonal"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for i in 0..12 {
        assert_eq!(rho[[i, i]].re, diag[i]);
    }

    let f = files(&run(
        &[
            "scan", "--bc", "pbc", "--L", "6,8", "--gamma", "1", "--format", "json",
        ],
        dir.path(),
    ));
    let rows: Vec<skinlab::dynamics::ScanRow> = io::read_json(&f[0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(
        io::to_json_string(&rows).unwrap(),
        std::fs::read_to_string(&f[0]).unwrap()
    );

    let f = files(&run(
        &[
            "traj", "--L", "6", "--N", "3", "--ntraj", "10", "--t-max", "2",
        ],
        dir.path(),
    ));
    let ens: skinlab::manybody::TrajectoryEnsemble = io::read_json(&f[1]).unwrap();
    let csv = io::read_csv(&f[0]).unwrap();
    assert_eq!(
        csv.column_f64("n_1").unwrap(),
        ens.mean.iter().map(|m| m[0]).collect::<Vec<_>>()
    );

    let f = files(&run(
        &[
            "perturb", "--bc", "obc", "--L", "8", "--gamma", "0.05", "--order", "0",
        ],
        dir.path(),
    ));
    let d: SpectrumDump = io::read_json(&f[0]).unwrap();
    assert_eq!(d.order, Some(0));
    assert!(d.gap.is_nan());

    let f = files(&run(
        &["spectrum", "--bc", "obc", "--L", "8", "--gamma", "0.7"],
        dir.path(),
    ));
    let d: SpectrumDump = io::read_json(&f[0]).unwrap();
    assert_eq!(
        io::to_json_string(&d).unwrap(),
        std::fs::read_to_string(&f[0]).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "measure", "bc": "pbc", "L": 8, "gamma": 0.3}"#,
    )
    .unwrap();
    let o = bin()
        .args(["--config", cfg.to_str().unwrap(), "spectrum", "--L", "6"])
        .env("SKINLAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = files(&o);
    assert!(f[0].starts_with(dir.path()));
    let d: SpectrumDump = io::read_json(&f[0]).unwrap();
    assert_eq!(
        (d.l, d.gamma, d.model.as_str(), d.bc.as_str()),
        (6, 0.3, "measure", "pbc")
    );
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["spectrum", "--L", "4", "--precision", "quad"], "parse"),
        (vec!["spectrum", "--L", "200"], "dimensionCap"),
        (vec!["perturb", "--bc", "obc", "--order", "2"], "config"),
        (vec!["spectrum", "--L", "4", "--gamma=-1"], "invalidModel"),
        (vec!["spectrum", "--bogus"], "usage"),
    ];
    for (args, kind) in cases {
        let o = bin()
            .args(&args)
            .arg("-o")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(!o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(v["error"]["kind"], kind, "{args:?}");
    }
}

#[test]
fn scan_fails_only_when_every_row_fails() {
    let dir = tempfile::tempdir().unwrap();
    // A horizon too short to relax: every row records NotRelaxed.
    let o = bin()
        .args(["scan", "--bc", "pbc", "--L", "6,8", "--t-max", "1"])
        .arg("-o")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "allRowsFailed");
    let t = io::read_csv(&dir.path().join("scan_feedback_pbc_L6-8_g0.6.csv")).unwrap();
    assert!(t
        .column_str("classification")
        .unwrap()
        .iter()
        .all(|c| c.starts_with("error")));
}
