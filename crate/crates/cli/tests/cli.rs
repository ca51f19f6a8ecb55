use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn atp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atp")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_prints_derived_quantities() {
    let o = atp(&["validate", arg(&configs().join("baseline.txt"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["F_dc = 0.789", "phi_eff = 3.28", "K = 3", "engine = classical"] {
        assert!(out.contains(needle), "{needle} missing from\n{out}");
    }
}

#[test]
fn unknown_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    fs::write(&p, "[engine]\nkind = synthetic\n[synthetic]\nspcaing = 1.46 eV\n").unwrap();
    let o = atp(&["validate", arg(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spcaing"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_error() {
    let o = atp(&["validate", "/nonexistent/config.txt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_is_deterministic_and_reanalysable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = configs().join("synthetic_scan.txt");
    for out in [&a, &b] {
        let o = atp(&["scan", arg(&cfg), "--out", arg(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("critical.intensity_Wcm2"));
    }
    let ma = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(ma, fs::read_to_string(b.join("manifest.txt")).unwrap());
    for name in ["config.txt", "report.txt", "run_000.tsv", "run_000_true.tsv", "run_000_counts.tsv", "ladder_000.tsv"] {
        assert!(a.join(name).exists(), "{name}");
        assert!(ma.contains(&format!("file.{name} = ")), "{name}");
    }

    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    let o = atp(&["analyze", arg(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(a.join("report.txt")).unwrap(), report);
    assert_eq!(fs::read_to_string(a.join("manifest.txt")).unwrap(), ma);
}

#[test]
fn run_ignores_the_scan() {
    let dir = tempfile::tempdir().unwrap();
    let o = atp(&["run", arg(&configs().join("synthetic_scan.txt")), "--out", arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("run_000.tsv").exists());
    assert!(!dir.path().join("run_001.tsv").exists());
    assert!(stdout(&o).contains("need >= 3 scan points"), "{}", stdout(&o));
}

#[test]
fn plotdata_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("scan");
    let cfg = configs().join("synthetic_scan.txt");
    assert!(atp(&["scan", arg(&cfg), "--out", arg(&scan)]).status.success());
    let plots = dir.path().join("plots");
    let spectrum = scan.join("run_003_true.tsv");

    let o = atp(&["plotdata", "spectrum", arg(&spectrum), "--out", arg(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(plots.join("run_003_true_spectrum.tsv")).unwrap();
    assert!(table.contains("energy_eV\tdensity"));

    let o = atp(&["plotdata", "ladder", arg(&spectrum), "--out", arg(&plots), "--config", arg(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ladder = fs::read_to_string(plots.join("run_003_true_ladder.tsv")).unwrap();
    let spacing: f64 = ladder
        .lines()
        .find_map(|l| l.strip_prefix("# spacing_eV = "))
        .and_then(|v| v.parse().ok())
        .expect("spacing line");
    assert!((spacing - 1.46).abs() < 0.01, "{ladder}");

    let o = atp(&["plotdata", "shift", arg(&scan), "--out", arg(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written: Vec<_> = stdout(&o).lines().map(PathBuf::from).collect();
    assert!(!written.is_empty());
    for p in &written {
        assert!(fs::read_to_string(p).unwrap().contains("intensity_Wcm2\tenergy_eV"));
    }

    let o = atp(&["plotdata", "histogram", arg(&spectrum), "--out", arg(&plots)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("histogram"), "{}", stderr(&o));
}

#[test]
fn failed_runs_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.txt");
    // generator energies beyond the retarding sweep for the last point
    fs::write(
        &p,
        "[engine]\nkind = synthetic\nseed = 3\n[synthetic]\n[instrument]\nvoltage_start = 0 V\nvoltage_stop = 14 V\n\
         [scan]\nparameter = voltage\nvalues = 100, 150 V\n",
    )
    .unwrap();
    let ok = atp(&["scan", arg(&p), "--out", arg(&dir.path().join("ok"))]);
    assert!(ok.status.success(), "{}", stderr(&ok));

    fs::write(
        &p,
        "[engine]\nkind = synthetic\nseed = 3\n[synthetic]\nenergy_min = 50 eV\nenergy_max = 60 eV\ncut_on = 50 eV\n\
         [instrument]\nvoltage_start = 0 V\nvoltage_stop = 14 V\n[scan]\nparameter = intensity\nvalues = 1e11, 2e11 W/cm2\n",
    )
    .unwrap();
    let out = dir.path().join("bad");
    let o = atp(&["scan", arg(&p), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("run.000 = failed"), "{manifest}");
}
