use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qfhe::evaluator::{self, Backend, CanonicalCircuit, Circuit};
use qfhe::fhe::FheParams;
use qfhe::qcore::PureState;
use qfhe::rng::stream;
use serde_json::Value;

fn qfhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfhe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema_validator(name: &str) -> jsonschema::Validator {
    let dir = repo().join("schemas");
    let read = |p: PathBuf| -> Value { serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap() };
    let mut registry = jsonschema::Registry::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        registry = registry
            .add(format!("https://schemas.qfhe.invalid/{file}"), read(path))
            .unwrap();
    }
    let registry = registry.prepare().unwrap();
    jsonschema::options()
        .with_registry(&registry)
        .build(&read(dir.join(format!("{name}.schema.json"))))
        .unwrap()
}

fn assert_valid(name: &str, value: &Value) {
    let v = schema_validator(name);
    let errors: Vec<String> = v
        .iter_errors(value)
        .map(|e| format!("{e} at {}", e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

/// CSV rows as JSON objects, with numbers and booleans typed.
fn csv_rows(path: &Path) -> Vec<Value> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let obj = headers
                .iter()
                .zip(r.iter())
                .map(|(h, cell)| {
                    let v = if let Ok(b) = cell.parse::<bool>() {
                        Value::from(b)
                    } else if let Ok(i) = cell.parse::<i64>() {
                        Value::from(i)
                    } else if let Ok(x) = cell.parse::<f64>() {
                        Value::from(x)
                    } else {
                        Value::from(cell)
                    };
                    (h.to_string(), v)
                })
                .collect();
            Value::Object(obj)
        })
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn case_t_on_the_qubit_backend_is_exact_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = qfhe(&["case", "t", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["case_t.json", "case_t_bloch.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let report = read_json(&a.join("case_t.json"));
    assert_valid("case_report", &report);
    assert!(report["fidelity"].as_f64().unwrap() >= 0.999);
    let rows = csv_rows(&a.join("case_t_bloch.csv"));
    assert_eq!(rows.len(), 9 * 16);
    for row in &rows {
        assert_valid("bloch_row", row);
    }
}

#[test]
fn wrong_key_case_looks_depolarizing() {
    let dir = tempfile::tempdir().unwrap();
    let o = qfhe(&[
        "case",
        "th",
        "--wrong-key",
        "--shots",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("case_th.json"));
    let f = report["fidelity"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&f), "{f}");
    assert!(report["fidelity_depolarizing"].as_f64().unwrap() >= 0.98);
}

#[test]
fn tpsc_writes_one_row_per_point_and_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let transcript = dir.path().join("transcript.json");
    let o = qfhe(&[
        "tpsc",
        "--n",
        "4",
        "--out",
        csv_path.to_str().unwrap(),
        "--transcript",
        transcript.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&csv_path);
    assert_eq!(rows.len(), 20);
    for row in &rows {
        assert_valid("sweep_row", row);
    }
    assert_valid("tpsc_transcript", &read_json(&transcript));
}

#[test]
fn hom_sweep_has_eleven_rows_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/hom.csv");
    let o = qfhe(&["hom", "--phase-pairs", "5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert_valid("hom_row", row);
    }
    let last = &rows[10];
    assert!((last["cz_success"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-10);
}

#[test]
fn fhe_selftest_prints_a_valid_report() {
    let o = qfhe(&["fhe-selftest", "--samples", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("fhe_selftest", &report);
}

#[test]
fn exit_codes_separate_usage_from_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(qfhe(&["case", "toffoli", "--out", out]).status.code(), Some(2));
    assert_eq!(
        qfhe(&["case", "t", "--noise", "paper-defaults", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qfhe(&["case", "t", "--shots", "0", "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(qfhe(&["hom", "--steps", "0"]).status.code(), Some(2));
    assert_eq!(qfhe(&["--help"]).status.code(), Some(0));
    // Background only lowers fidelity, so a target above the
    // visibility-only value has no solution.
    let cal = dir.path().join("cal.json");
    let o = qfhe(&[
        "calibrate",
        "--shots",
        "300",
        "--target",
        "0.999",
        "--out",
        cal.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!cal.exists());
}

#[test]
fn shipped_configs_match_the_circuit_schema() {
    let mut seen = 0;
    for entry in fs::read_dir(repo().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            assert_valid("optical_circuit", &read_json(&path));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn evaluation_transcripts_match_their_schema() {
    let mut rng = stream(5);
    let circuit = Circuit::canonical(CanonicalCircuit::Thp);
    for params in [FheParams::mock(), FheParams::lwe_default()] {
        let (cipher, key, _) = evaluator::prepare(&PureState::plus(), &params, &mut rng).unwrap();
        let transcript = evaluator::evaluate(&cipher, &key, &circuit, &Backend::Qubit, &mut rng).unwrap();
        let value: Value = serde_json::from_str(&transcript.to_json()).unwrap();
        assert_valid("eval_transcript", &value);
    }
}

#[test]
fn every_shipped_schema_is_a_valid_schema() {
    for entry in fs::read_dir(repo().join("schemas")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().replace(".schema.json", "");
        schema_validator(&name);
    }
}
