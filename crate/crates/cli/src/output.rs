//! Deterministic JSON and CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::CliError;

/// Rounds `x` to nine significant digits.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round9(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with every float rounded to nine significant digits.
/// Non-finite values become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(format!("serializing summary: {e}")))?;
    serde_json::to_string_pretty(&round_value(v)).map_err(|e| CliError::Io(format!("serializing summary: {e}")))
}

/// Summary object: `config` first, then the command's fields.
pub fn summary<T: Serialize, C: Serialize>(config: &C, body: &T) -> Result<Value, CliError> {
    let mut map = Map::new();
    map.insert(
        "config".into(),
        serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
    );
    match serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    Ok(Value::Object(map))
}

/// Prints the summary and writes it to `path` when given.
pub fn emit_summary(value: &Value, path: Option<&Path>) -> Result<(), CliError> {
    let text = to_json(value)?;
    if let Some(p) = path {
        std::fs::write(p, format!("{text}\n")).map_err(|e| CliError::Io(format!("writing {}: {e}", p.display())))?;
    }
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("writing stdout: {e}"))),
        _ => Ok(()),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))
}

/// Writes rows of already formatted cells under `header`.
pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `x` in exponent notation with nine significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}
