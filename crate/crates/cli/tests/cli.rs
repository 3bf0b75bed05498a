use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surfdyn::io::read_grid;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn out_dir(tag: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{tag}"));
    let _ = fs::remove_dir_all(&d);
    d
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfdyn"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn degree_prints_lambda() {
    let out = out_dir("degree");
    let o = run(&out, &["degree", "--map", &fixture("monomial_cat.json")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let l = v["lambda1"].as_f64().unwrap();
    assert!((l - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!(out.join("degree.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn degree_of_iterate() {
    let out = out_dir("degree-cubed");
    let o = run(&out, &["degree", "--map", &fixture("monomial_cat_cubed.json")]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let l = ((3.0 + 5f64.sqrt()) / 2.0).powi(3);
    assert!((v["lambda1"].as_f64().unwrap() - l).abs() < 1e-9 * l);
}

#[test]
fn manifest_hashes_outputs() {
    let out = out_dir("manifest");
    run(&out, &["--seed", "7", "degree", "--map", &fixture("henon_quadratic.json")]);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["map_hashes"]["map"].as_str().unwrap().len(), 64);
    assert!(m["outputs"]["degree.json"].is_string());
    assert!(m.get("wall_time_s").is_none());
    assert!(out.join("timing.json").exists());
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&out_dir("unknown"), &["degree", "--map", &fixture("monomial_cat.json"), "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_surfaces_rejected() {
    let o = run(
        &out_dir("mismatch"),
        &["rigidity", "--map-f", &fixture("monomial_cat.json"), "--map-g", &fixture("henon_quadratic.json")],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("surface mismatch"));
}

#[test]
fn schema_error_names_field() {
    let dir = out_dir("schema");
    fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"family": "henon", "factors": [{"poly": ["1", "x"]}]}"#).unwrap();
    let o = run(&dir.join("out"), &["degree", "--map", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("$.factors[0].poly"));
}

#[test]
fn non_loxodromic_degree_is_one() {
    let o = run(&out_dir("markov"), &["degree", "--map", &fixture("markov_sz_pxy.json")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn binary_grid_matches_csv() {
    let out = out_dir("grid");
    let o = run(
        &out,
        &["green-grid", "--map", &fixture("henon_quadratic.json"), "--nx", "5", "--ny", "4", "--binary"],
    );
    assert!(o.status.success());
    let g = read_grid(&fs::read(out.join("green_grid.bin")).unwrap()).unwrap();
    assert_eq!((g.nx, g.ny), (5, 4));
    assert_eq!(g.fields, ["Gplus", "Gminus", "G", "err"]);
    let mut rdr = csv::Reader::from_path(out.join("green_grid.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 20);
    for (k, row) in rows.iter().enumerate() {
        let gcsv: f64 = row[4].parse().unwrap();
        assert_eq!(gcsv, g.data[2][k]);
    }
}

#[test]
fn exact_torus_periodic() {
    let out = out_dir("torus");
    let o = run(&out, &["periodic", "--map", &fixture("monomial_cat.json"), "--n", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["count"], 5);
}
