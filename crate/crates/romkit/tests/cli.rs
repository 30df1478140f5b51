use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn romkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_romkit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = romkit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON summary on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One small greedy archive shared by the tests that only read it.
fn greedy_model() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    let (_, model) = DIR.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let model = dir.path().join("model");
        ok_json(&[
            "offline",
            "--blocks",
            "2",
            "--mesh-n",
            "16",
            "--method",
            "greedy",
            "--tol",
            "1e-6",
            "--n-max",
            "20",
            "--train",
            "100",
            "--seed",
            "7",
            "--out",
            path(&model),
        ]);
        (dir, model)
    });
    model
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn offline_summary_and_online_reproduction() {
    let model = greedy_model();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(model.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["format_version"], "1");
    // the first greedy parameter is the domain midpoint
    let cert = ok_json(&["online", "--model", path(model), "--mu", "1,1,1,1", "--json"]);
    let eta = cert["eta_en"].as_f64().unwrap();
    let norm = cert["u_rb_norm"].as_f64().unwrap();
    assert!(eta <= 1e-8 * norm, "{eta} vs {norm}");
    let read: Vec<&str> = cert["payloads_read"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(!read.is_empty());
    assert!(!read.contains(&"basis"), "{read:?}");
}

#[test]
fn online_text_output_reports_wall_time() {
    let out = romkit(&["online", "--model", path(greedy_model()), "--mu", "0.5,2,1,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "s_rb",
        "eta_en",
        "eta_s",
        "eta_s_rel",
        "eta_v",
        "eta_v_rel",
        "alpha_lb",
        "flags",
        "online",
    ] {
        assert!(text.lines().any(|l| l.starts_with(key)), "missing {key} in\n{text}");
    }
}

#[test]
fn out_of_domain_parameter_is_answered_with_a_flag() {
    let cert = ok_json(&["online", "--model", path(greedy_model()), "--mu", "20,1,1,1", "--json"]);
    let flags: Vec<&str> = cert["flags"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(flags.contains(&"extrapolation"), "{flags:?}");
    assert!(cert["s_rb"].as_f64().unwrap().is_finite());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let model = greedy_model();
    let out_csv = dir.path().join("v.csv");
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let svg = dir.path().join("r.svg");
    let missing = dir.path().join("missing");
    let cases: Vec<Vec<&str>> = vec![
        vec!["offline", "--blocks", "3", "--mesh-n", "16", "--out", path(dir.path())],
        vec!["online", "--model", path(model), "--mu", "1,1,1"],
        vec!["online", "--model", path(model), "--mu", "1,x,1,1"],
        vec!["validate", "--model", path(model), "--samples", "0", "--out", path(&out_csv)],
        vec!["report", "--csv", path(&empty), "--out", path(&svg)],
        vec!["online", "--model", path(&missing), "--mu", "1,1,1,1"],
    ];
    for args in cases {
        let out = romkit(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn validation_table_matches_the_golden_header_and_is_rigorous() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("validate.csv");
    let summary = ok_json(&[
        "validate",
        "--model",
        path(greedy_model()),
        "--samples",
        "6",
        "--seed",
        "11",
        "--out",
        path(&csv_path),
    ]);
    assert!(summary["summary"].is_object());
    let text = fs::read_to_string(&csv_path).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/validate_header_p4.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), golden.trim_end());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        rows += 1;
        assert_eq!(record.len(), headers.len());
        for (h, v) in headers.iter().zip(record.iter()) {
            if v == "indeterminate" {
                assert!(h.starts_with("eff_") || h.ends_with("_rel"), "{h}");
                continue;
            }
            let x: f64 = v.parse().unwrap_or_else(|_| panic!("{h} = {v}"));
            assert!(x.is_finite());
            if h.starts_with("eff_") {
                assert!(x >= 1.0 - 1e-10, "{h} = {x}");
            }
        }
        let col = |name: &str| record[headers.iter().position(|h| h == name).unwrap()].to_string();
        assert_eq!(col("rigor_ok"), "1");
        assert_eq!(col("ceilings_ok"), "1");
    }
    assert_eq!(rows, 6);
}

#[test]
fn single_block_sweep_follows_the_inverse_law() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("b1");
    ok_json(&["offline", "--blocks", "1", "--mesh-n", "16", "--train", "20", "--out", path(&model)]);
    let sweep = dir.path().join("sweep.csv");
    let summary = ok_json(&["sweep", "--model", path(&model), "--points", "25", "--out", path(&sweep)]);
    assert_eq!(summary["points"], 25);
    let mut reader = csv::Reader::from_path(&sweep).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["mu_0", "s_rb", "eta_s", "eta_en"]
    );
    let mut seen = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let mu: f64 = record[0].parse().unwrap();
        let s: f64 = record[1].parse().unwrap();
        assert!((s * mu - 1.0).abs() <= 1e-8, "mu = {mu}: s_rb = {s}");
        assert!((0.1..=10.0).contains(&mu));
        seen += 1;
    }
    assert_eq!(seen, 25);
}

fn assert_svg(file: &Path) -> String {
    let svg = fs::read_to_string(file).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"), "{}", &svg[..svg.len().min(80)]);
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("href=\"http"), "must be self-contained");
    svg
}

#[test]
fn reports_are_self_contained_svg() {
    let dir = TempDir::new().unwrap();
    let decay = dir.path().join("decay.svg");
    ok_json(&["report", "--model", path(greedy_model()), "--out", path(&decay)]);
    let svg = assert_svg(&decay);
    assert!(svg.contains("<polyline") || svg.contains("<path"));

    let csv_path = dir.path().join("v.csv");
    ok_json(&[
        "validate",
        "--model",
        path(greedy_model()),
        "--samples",
        "3",
        "--out",
        path(&csv_path),
    ]);
    let hist = dir.path().join("hist.svg");
    ok_json(&["report", "--csv", path(&csv_path), "--bins", "5", "--out", path(&hist)]);
    assert!(assert_svg(&hist).contains("<rect"));
}

#[test]
fn pod_offline_selects_by_energy() {
    let dir = TempDir::new().unwrap();
    let loose = dir.path().join("loose");
    let tight = dir.path().join("tight");
    let run = |energy: &str, out: &Path| {
        ok_json(&[
            "offline",
            "--blocks",
            "2",
            "--mesh-n",
            "16",
            "--method",
            "pod",
            "--snapshots",
            "16",
            "--energy",
            energy,
            "--out",
            path(out),
        ])
    };
    let a = run("1e-2", &loose);
    let b = run("1e-8", &tight);
    let (na, nb) = (a["n"].as_u64().unwrap(), b["n"].as_u64().unwrap());
    assert!(1 <= na && na < nb && nb <= 16, "{na} {nb}");
    let prov: Value = serde_json::from_str(&fs::read_to_string(tight.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(prov["provenance"]["method"], "pod");
}

#[test]
fn unsupported_version_and_corrupt_payloads_are_reported() {
    let dir = TempDir::new().unwrap();
    let v2 = dir.path().join("v2");
    copy_dir(greedy_model(), &v2);
    let manifest = v2.join("manifest.json");
    let text = fs::read_to_string(&manifest)
        .unwrap()
        .replace("\"format_version\": \"1\"", "\"format_version\": \"2\"");
    fs::write(&manifest, text).unwrap();
    let out = romkit(&["online", "--model", path(&v2), "--mu", "1,1,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unsupported") && err.contains('2'), "{err}");

    let cut = dir.path().join("cut");
    copy_dir(greedy_model(), &cut);
    let payload = cut.join("a_rb_0.rbm");
    let bytes = fs::read(&payload).unwrap();
    fs::write(&payload, &bytes[..bytes.len() - 8]).unwrap();
    let out = romkit(&["online", "--model", path(&cut), "--mu", "1,1,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("checksum") && err.contains("a_rb_0.rbm"), "{err}");
}

#[test]
fn fom_reports_the_truth_output() {
    let s = ok_json(&["fom", "--blocks", "1", "--mesh-n", "16", "--mu", "4"]);
    assert!((s["s_delta"].as_f64().unwrap() * 4.0 - 1.0).abs() < 1e-10);
    assert_eq!(s["n_delta"], 16 * 17);
}
