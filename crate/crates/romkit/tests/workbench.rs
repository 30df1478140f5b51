use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::DVector;
use romkit::archive::{load_model, load_online, save_model, ModelArchive};
use romkit::external::{load_external, read_manifest, write_external, MANIFEST_FILE};
use romkit::{mtx, WorkbenchError};
use romkit_core::greedy::{greedy_build, GreedyOptions};
use romkit_core::problem::{make_thermal_block, SamplingStrategy};
use romkit_core::reduced::rb_solve;
use romkit_core::truth::solve_fom;
use romkit_core::{CsrMatrix, ParameterPoint};
use tempfile::TempDir;

fn romkit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_romkit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn external_round_trip_reproduces_the_single_block() {
    let dir = TempDir::new().unwrap();
    let pb = make_thermal_block(8, 1, 0.1, 10.0).unwrap();
    let manifest = write_external(&pb, dir.path()).unwrap();
    let loaded = load_external(&manifest).unwrap();
    assert_eq!(loaded.dim(), pb.dim());
    assert!(loaded.is_parametrically_coercive());
    let sol = solve_fom(&loaded, &ParameterPoint::new(vec![1.0])).unwrap();
    assert!((sol.s - 1.0).abs() < 1e-10, "s = {}", sol.s);
    for (a, b) in loaded.a_blocks().iter().zip(pb.a_blocks()) {
        assert_eq!(a, b);
    }
    assert_eq!(loaded.f_blocks(), pb.f_blocks());
}

#[test]
fn mismatched_block_sizes_are_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let a = CsrMatrix::from_triplets(10, 10, &(0..10).map(|i| (i, i, 2.0)).collect::<Vec<_>>()).unwrap();
    mtx::write_matrix(&dir.path().join("a.mtx"), &a, true).unwrap();
    mtx::write_vector(&dir.path().join("f.mtx"), &DVector::from_element(9, 1.0)).unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    fs::write(
        &manifest,
        r#"{"p": 1, "domain": [[0.1, 10.0, "log"]], "mu_bar": [1.0], "theta_a": ["mu[0]"], "theta_f": ["1"], "A": ["a.mtx"], "f": ["f.mtx"]}"#,
    )
    .unwrap();
    let err = load_external(&manifest).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(err.to_string().contains("10") && err.to_string().contains('9'), "{err}");
}

#[test]
fn unknown_manifest_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    fs::write(&manifest, r#"{"p": 1, "colour": "red"}"#).unwrap();
    assert!(matches!(read_manifest(&manifest), Err(WorkbenchError::Manifest { .. })));
}

#[test]
fn shifted_coefficient_is_non_coercive_and_greedy_offline_is_refused() {
    let dir = TempDir::new().unwrap();
    let pb = make_thermal_block(8, 1, 0.1, 10.0).unwrap();
    let manifest_path = write_external(&pb, dir.path()).unwrap();
    let text = fs::read_to_string(&manifest_path).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&text).unwrap();
    m["theta_a"] = serde_json::json!(["mu[0]-5"]);
    m["mu_bar"] = serde_json::json!([6.0]);
    fs::write(&manifest_path, m.to_string()).unwrap();
    let loaded = load_external(&manifest_path).unwrap();
    assert!(!loaded.is_parametrically_coercive());

    let out_dir = dir.path().join("model");
    let out = romkit(&[
        "offline",
        "--problem",
        "external",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--method",
        "greedy",
        "--train",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coercive"));
}

#[test]
fn archive_round_trip_is_byte_identical_and_bitwise_online() {
    let dir = TempDir::new().unwrap();
    let pb = make_thermal_block(12, 2, 0.1, 10.0).unwrap();
    let train = pb.domain().sample(40, SamplingStrategy::Random, 2);
    let g = greedy_build(
        &pb,
        &train,
        &GreedyOptions {
            tol: 1e-5,
            n_max: 8,
            mu_1: None,
        },
    )
    .unwrap();
    let archive = ModelArchive {
        problem: pb.clone(),
        basis: g.basis,
        model: g.model,
        residual: g.residual,
    };
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    save_model(&archive, &first).unwrap();
    let loaded = load_model(&first).unwrap();
    save_model(&loaded, &second).unwrap();
    let mut names: Vec<_> = fs::read_dir(&first).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let (a, b) = (first.join(name), second.join(name));
        if Path::new(&a).is_file() {
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{name:?}");
        }
    }
    let online = load_online(&first).unwrap();
    assert!(online.access_log.iter().all(|a| a.name != "basis"));
    for mu in pb.domain().sample(20, SamplingStrategy::Random, 5) {
        let x = rb_solve(&archive.model, &mu).unwrap();
        let y = rb_solve(&online.model, &mu).unwrap();
        assert_eq!(x.s_rb.to_bits(), y.s_rb.to_bits());
        assert_eq!(x.coefficients, y.coefficients);
    }
}
