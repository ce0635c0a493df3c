//! Deterministic JSON and CSV artifacts, written atomically.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

/// Wrap a payload with the schema version and command name.
pub fn document<T: Serialize>(command: &str, payload: &T) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(payload).map_err(|e| CliError::Config(format!("serialization: {e}")))?;
    let header = [("schemaVersion".to_string(), Value::from(SCHEMA_VERSION)), ("command".to_string(), Value::from(command))];
    match &mut v {
        Value::Object(map) => {
            for (k, x) in header {
                map.insert(k, x);
            }
        }
        other => {
            let mut map = serde_json::Map::new();
            for (k, x) in header {
                map.insert(k, x);
            }
            map.insert("result".into(), other.take());
            v = Value::Object(map);
        }
    }
    Ok(v)
}

/// Floats with 17 significant digits; integers unchanged.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with every float at 17 significant digits. Keys are sorted,
/// so identical values give identical bytes.
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize, out: &mut String| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => out.push_str(&u.to_string()),
            (_, Some(i), _) if !n.is_f64() => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&Value::from(k.as_str()).to_string());
                out.push_str(": ");
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push('}');
        }
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, v: &Value) -> Result<(), CliError> {
    write_atomic(dir, name, to_json(v).as_bytes())
}

pub fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(dir, name, &bytes)
}
