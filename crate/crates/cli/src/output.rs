//! Schema-checked writers. Every file is validated against its schema in
//! `schemas/` before anything touches the disk.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

pub const CASE_REPORT: (&str, &str) = ("case_report", include_str!("../../../schemas/case_report.schema.json"));
pub const BLOCH_ROW: (&str, &str) = ("bloch_row", include_str!("../../../schemas/bloch_row.schema.json"));
pub const SWEEP_ROW: (&str, &str) = ("sweep_row", include_str!("../../../schemas/sweep_row.schema.json"));
pub const HOM_ROW: (&str, &str) = ("hom_row", include_str!("../../../schemas/hom_row.schema.json"));
pub const TPSC_TRANSCRIPT: (&str, &str) = (
    "tpsc_transcript",
    include_str!("../../../schemas/tpsc_transcript.schema.json"),
);
pub const CALIBRATION: (&str, &str) = ("calibration", include_str!("../../../schemas/calibration.schema.json"));
pub const FHE_SELFTEST: (&str, &str) = (
    "fhe_selftest",
    include_str!("../../../schemas/fhe_selftest.schema.json"),
);

/// Schemas referenced from others by relative `$ref`.
const SHARED: [(&str, &str); 5] = [
    ("counts", include_str!("../../../schemas/counts.schema.json")),
    (
        "process_matrix",
        include_str!("../../../schemas/process_matrix.schema.json"),
    ),
    (
        "noise_params",
        include_str!("../../../schemas/noise_params.schema.json"),
    ),
    ("fhe_params", include_str!("../../../schemas/fhe_params.schema.json")),
    ("cipher_bit", include_str!("../../../schemas/cipher_bit.schema.json")),
];

const BASE_URI: &str = "https://schemas.qfhe.invalid/";

pub fn validator(schema: (&str, &str)) -> jsonschema::Validator {
    let parse = |text: &str| -> Value { serde_json::from_str(text).expect("shipped schema is JSON") };
    let registry = SHARED
        .iter()
        .try_fold(jsonschema::Registry::new(), |r, (name, text)| {
            r.add(format!("{BASE_URI}{name}.schema.json"), parse(text))
        })
        .and_then(|r| r.prepare())
        .expect("shared schemas register");
    jsonschema::options()
        .with_registry(&registry)
        .build(&parse(schema.1))
        .expect("shipped schema compiles")
}

fn check(v: &jsonschema::Validator, name: &str, value: &Value) -> Result<(), Failure> {
    let errors: Vec<String> = v
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "output violates {name} schema: {}",
            errors.join("; ")
        )))
    }
}

fn create_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Domain(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T, schema: (&str, &str)) -> Result<String, Failure> {
    let v = serde_json::to_value(value).map_err(|e| Failure::Domain(e.to_string()))?;
    check(&validator(schema), schema.0, &v)?;
    Ok(serde_json::to_string_pretty(&v).expect("value serializes") + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, schema: (&str, &str)) -> Result<(), Failure> {
    let text = to_json(value, schema)?;
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

/// Writes `rows` as CSV after checking each row, as a JSON object, against
/// `schema`.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], schema: (&str, &str)) -> Result<(), Failure> {
    let v = validator(schema);
    for row in rows {
        let value = serde_json::to_value(row).map_err(|e| Failure::Domain(e.to_string()))?;
        check(&v, schema.0, &value)?;
    }
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| Failure::Domain(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Domain(e.to_string()))
}
