use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tunemag::hysteresis::{ForcTable, HysteresisModel, PreisachParams};

const H_SAT: f64 = 5e5;
const B_SAT: f64 = 1.2;

fn tunemag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tunemag")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = tunemag(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    tunemag(args).status.code().unwrap()
}

/// Data rows of a CSV document, skipping the metadata line and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn assert_meta(text: &str) {
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# tunemag 0.1.0 config_hash="), "{first}");
    assert_eq!(first.rsplit('=').next().unwrap().len(), 16);
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert!(ok(&["--version"]).contains("0.1.0"));
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["tune", "--method", "pid", "--targets", "0.1"]), 1);
}

#[test]
fn simulate_major_loop() {
    let out = ok(&["simulate", "--sequence", "500000,-500000,500000"]);
    assert_meta(&out);
    assert_eq!(out.lines().nth(1).unwrap(), "step,h,b");
    let b: Vec<f64> = rows(&out).iter().map(|r| r[2].parse().unwrap()).collect();
    let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    assert!((hi - B_SAT).abs() < 1e-9 && (lo + B_SAT).abs() < 1e-9, "[{lo}, {hi}]");
    let r = rows(&out);
    assert_eq!(r.first().unwrap()[0], "0");
    assert_eq!(r.last().unwrap()[0], "3");
}

#[test]
fn simulate_empty_sequence_is_header_only() {
    let out = ok(&["simulate", "--sequence", ""]);
    assert_eq!(out.lines().count(), 2);
    assert_eq!(out.lines().nth(1).unwrap(), "step,h,b");
}

#[test]
fn simulate_reads_sequence_files_and_reports_bad_lines() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "seq.csv", "h\n100000\n-50000\n");
    let out = ok(&["simulate", "--sequence", s(&good)]);
    assert_eq!(rows(&out).last().unwrap()[1], "-50000");
    let bad = write(&dir, "bad.csv", "h\n100000\nfoo\n");
    let o = tunemag(&["simulate", "--sequence", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn identify_then_simulate_round_trip() {
    let dir = TempDir::new().unwrap();
    let source = std::sync::Arc::new(HysteresisModel::analytic(PreisachParams::default()).unwrap());
    let forc = ForcTable::sample_model(&source, 101, 201).unwrap();
    let mut buf = Vec::new();
    forc.write_csv(&mut buf).unwrap();
    let forc_path = dir.path().join("forc.csv");
    std::fs::write(&forc_path, buf).unwrap();
    let model_path = dir.path().join("model.toml");
    ok(&["identify", "--forc", s(&forc_path), "--grid", "101", "--out", s(&model_path)]);
    let model_text = std::fs::read_to_string(&model_path).unwrap();
    assert_meta(&model_text);

    let cfg = write(&dir, "identified.toml", "format_version = 1\n\n[magnet]\nmodel_file = \"model.toml\"\n");
    let seq = "500000,-150000,300000,-400000,50000,-500000,225000,0";
    let a = ok(&["simulate", "--sequence", seq]);
    let b = ok(&["simulate", "--config", s(&cfg), "--sequence", seq]);
    let (ra, rb) = (rows(&a), rows(&b));
    assert_eq!(ra.len(), rb.len());
    let worst = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| {
            assert_eq!(x[1], y[1]);
            (x[2].parse::<f64>().unwrap() - y[2].parse::<f64>().unwrap()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 2e-3 * B_SAT, "worst {worst} T");
}

#[test]
fn identify_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = tunemag(&["identify", "--forc", s(&missing), "--grid", "51"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.csv"));

    let source = std::sync::Arc::new(HysteresisModel::analytic(PreisachParams::default()).unwrap());
    let mut buf = Vec::new();
    ForcTable::sample_model(&source, 21, 21).unwrap().write_csv(&mut buf).unwrap();
    let p = dir.path().join("forc.csv");
    std::fs::write(&p, buf).unwrap();
    assert_eq!(code(&["identify", "--forc", s(&p), "--grid", "5"]), 1);
}

fn setpoints(row: &[String]) -> Vec<f64> {
    row[2].split(';').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn tune_emst_never_saturates() {
    let out = ok(&["tune", "--method", "emst", "--targets", "0.5,-0.3,0.7"]);
    assert_meta(&out);
    let r = rows(&out);
    assert_eq!(r.len(), 3);
    for row in &r {
        assert!(setpoints(row).iter().all(|h| h.abs() < H_SAT));
        assert!(row[5].parse::<f64>().unwrap().abs() <= 1e-4);
    }
}

#[test]
fn tune_smst_saturates_on_the_way_up() {
    let r = rows(&ok(&["tune", "--method", "smst", "--targets", "0.5"]));
    assert_eq!(setpoints(&r[0])[0], H_SAT);
}

#[test]
fn tune_to_current_state_costs_nothing() {
    for method in ["smst", "emst"] {
        let r = rows(&ok(&["tune", "--method", method, "--targets", "0"]));
        assert_eq!(setpoints(&r[0]), vec![0.0]);
        assert_eq!(r[0][6].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn tune_fallback_policy() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "strict.toml", "format_version = 1\n\n[magnet]\ninitial = \"negative\"\n\n[tuning]\ntol_b = 1e-12\n");
    let o = tunemag(&["tune", "--config", s(&cfg), "--method", "emst", "--targets", "1.0", "--fallback", "error"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unreachable"), "{}", stderr(&o));
    let r = rows(&ok(&["tune", "--config", s(&cfg), "--method", "emst", "--targets", "1.0", "--fallback", "smst"]));
    assert_eq!(r[0][7], "true");
    assert_eq!(setpoints(&r[0])[0], H_SAT);
}

#[test]
fn tune_rejects_out_of_range_targets() {
    assert_eq!(code(&["tune", "--method", "emst", "--targets", "1.5"]), 1);
}

fn force_traces(csv: &str) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for row in rows(csv) {
        let v: Vec<f64> = row.iter().map(|c| c.parse().unwrap()).collect();
        match out.last_mut() {
            Some(t) if t.0 == v[0] => {
                t.1.push(v[1]);
                t.2.push(v[2]);
            }
            _ => out.push((v[0], vec![v[1]], vec![v[2]])),
        }
    }
    out
}

const POSITIONS: &str = "-250e-6,-150e-6,-50e-6,50e-6,150e-6,250e-6";

#[test]
fn htma_force_map_is_linear() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("htma.csv");
    ok(&["actuator", "--mode", "htma", "--positions", POSITIONS, "--out", s(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_meta(&csv);
    assert_eq!(csv.lines().nth(1).unwrap(), "x_m,phi_tm_Wb,force_N");
    let traces = force_traces(&csv);
    assert_eq!(traces.len(), 6);
    for (x, phi, f) in &traces {
        assert!(r2(phi, f) >= 0.999, "x = {x}");
    }
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("htma.csv.fit.json")).unwrap()).unwrap();
    assert!(fit["fit"]["k_m"].as_f64().unwrap() > 0.0);
    assert!(fit["fit"]["k_a"].as_f64().unwrap() > 0.0);
    assert!(fit["per_position"].as_array().unwrap().iter().all(|p| p["r2"].as_f64().unwrap() >= 0.999));
}

#[test]
fn tma_force_map_is_quadratic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tma.csv");
    let fit_out = dir.path().join("fit.json");
    ok(&["actuator", "--mode", "tma", "--positions", POSITIONS, "--out", s(&out), "--fit-out", s(&fit_out)]);
    for (_, phi, f) in force_traces(&std::fs::read_to_string(&out).unwrap()) {
        // force depends on φ² only: symmetric in φ and convex
        let n = phi.len();
        for k in 0..n / 2 {
            assert!((f[k] - f[n - 1 - k]).abs() <= 1e-9 * f[0].abs());
        }
        assert!(f.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > 0.0));
    }
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit_out).unwrap()).unwrap();
    assert!(fit["per_position"].as_array().unwrap().iter().all(|p| p["quadratic_residual"].as_f64().unwrap() <= 1e-9));
}

#[test]
fn actuator_edge_cases() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("empty.csv");
    ok(&["actuator", "--mode", "htma", "--positions", "", "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
    assert_eq!(code(&["actuator", "--mode", "htma", "--positions", "400e-6"]), 1);
    assert_eq!(code(&["actuator", "--mode", "c-shape"]), 1);
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--seed", "3", "--sequences", "3", "--length", "4", "--format", "json"];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["provenance"]["generator"], "tunemag 0.1.0");
    assert_eq!(v["sequences"].as_array().unwrap().len(), 3);

    let table = ok(&["bench", "--seed", "3", "--sequences", "3", "--length", "4"]);
    assert_meta(&table);
    assert_eq!(table.matches('±').count(), 4);
    let csv = ok(&["bench", "--seed", "3", "--sequences", "3", "--length", "4", "--format", "csv"]);
    assert_eq!(csv.lines().nth(1).unwrap(), "seq,step,method,target_t,achieved_t,error_t,energy_j");
    assert_eq!(csv.lines().count(), 2 + 3 * 4 * 2);
    assert_eq!(code(&["bench", "--format", "xml"]), 1);
    assert_eq!(code(&["bench", "--sequences", "0"]), 1);
}

#[test]
fn emst_sequence_replays_without_saturation() {
    let tuned = ok(&["tune", "--method", "emst", "--targets", "0.6,-0.2,0.4,0.0,0.3,0.1"]);
    let fields: Vec<String> = rows(&tuned).iter().flat_map(|r| setpoints(r)).map(|h| h.to_string()).collect();
    let trace = ok(&["simulate", "--sequence", &fields.join(",")]);
    let h: Vec<f64> = rows(&trace).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(h.iter().all(|v| v.abs() < H_SAT));
    // the final remanence matches the last target
    let b_end: f64 = rows(&trace).last().unwrap()[2].parse().unwrap();
    assert!((b_end - 0.1).abs() <= 1e-4);
}

#[test]
fn config_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "format_version = 1\n\n[magnet]\nbogus = 3\n");
    let o = tunemag(&["simulate", "--config", s(&bad), "--sequence", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&["simulate", "--config", s(&missing), "--sequence", "0"]), 2);
    let unversioned = write(&dir, "v.toml", "[magnet]\nh_c = 1e5\n");
    assert_eq!(code(&["simulate", "--config", s(&unversioned), "--sequence", "0"]), 1);
}

#[test]
fn shipped_default_config_matches_builtin_defaults() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let args = ["bench", "--sequences", "1", "--length", "2", "--format", "csv"];
    let with: Vec<&str> = args.iter().copied().chain(["--config", s(&path)]).collect();
    assert_eq!(ok(&with), ok(&args));
}
