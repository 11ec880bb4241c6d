//! Report envelope and the canonical JSON writer: UTF-8, keys sorted at
//! every level, shortest round-trip floats, `+∞` penalties as `"inf"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::IoError;

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 over the config and data bytes.
    pub input_digest: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub result: Value,
}

/// Render any serializable value as canonical JSON.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, &mut out);
    Ok(out)
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(v, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(v, out);
            }
            out.push(']');
        }
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

/// Write the document, newline-terminated, to `path`.
pub fn emit_report(doc: &ReportDocument, path: &Path) -> Result<(), IoError> {
    let mut text = canonical_json(doc).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
