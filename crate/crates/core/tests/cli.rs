use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_congesta"))
}

fn bench(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench").join(name)
}

fn run(cfg: &Path, out: &Path) -> Output {
    exe().arg("run").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn files_with(dir: &Path, ext: &str) -> usize {
    std::fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext)).count()
}

#[test]
fn run_writes_three_csv_and_one_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&bench("uniform.cfg"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files_with(tmp.path(), "csv"), 3);
    assert_eq!(files_with(tmp.path(), "json"), 1);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let steps = std::fs::read_to_string(tmp.path().join("steps.csv")).unwrap();
    assert!(steps.lines().next().unwrap().ends_with("config_hash,version,seed"));
}

#[test]
fn missing_block_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bench("uniform.cfg")).unwrap();
    let cut: String = text
        .lines()
        .filter(|l| !(l.starts_with("[potential]") || l.starts_with("mu0") || l.starts_with("eta0") || l.starts_with("q =")))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, cut).unwrap();
    let o = run(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line") && err.contains("potential"), "{err}");
}

#[test]
fn unreadable_or_invalid_parameters_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&tmp.path().join("nope.cfg"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(bench("uniform.cfg")).unwrap().replace("alpha = 10.0", "alpha = 0.5");
    let cfg = tmp.path().join("alpha.cfg");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(run(&cfg, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn verify_rejects_truncation_and_reports_corrupted_stress() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert_eq!(run(&bench("uniform.cfg"), &dir).status.code(), Some(0));
    let fields = dir.join("fields").join("fields.csv");
    let original = std::fs::read_to_string(&fields).unwrap();

    let keep = original.lines().count() / 2;
    let truncated: String = original.lines().take(keep).map(|l| format!("{l}\n")).collect();
    std::fs::write(&fields, truncated).unwrap();
    let o = exe().arg("verify").arg(&dir).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let mut rdr = csv::Reader::from_reader(original.as_bytes());
    let mut w = csv::Writer::from_path(&fields).unwrap();
    w.write_record(rdr.headers().unwrap()).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let row: Vec<String> = rec
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 7 { format!("{:.16e}", 2.0 * v.parse::<f64>().unwrap()) } else { v.to_string() })
            .collect();
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    let o = exe().arg("verify").arg(&dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["verdicts"]["dissipative"]["energy_pass"], false);
    assert_eq!(report["matches_run_summary"], false);
}

#[test]
fn sweep_reports_alpha_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = exe().arg("sweep").arg(bench("alpha_ladder.cfg")).arg("--out").arg(tmp.path()).arg("--workers").arg("3").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("sweep_report.json")).unwrap()).unwrap();
    let fit = report["report"]["fits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["axis"] == "alpha" && f["quantity"] == "max_overshoot_l2")
        .unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!((-1.0..=-0.25).contains(&slope), "{slope}");
    assert_eq!(report["workers"], 3);
    assert!(tmp.path().join("congestion.csv").exists() && tmp.path().join("sweep_matrix.csv").exists());
}
