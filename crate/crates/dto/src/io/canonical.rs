//! Canonical JSON writer: sorted keys, shortest-round-trip float
//! formatting, trailing newline. Identical values always serialize to
//! identical bytes, which keeps golden-file tests stable.

use serde::Serialize;

use super::IoError;

/// Serialize through `serde_json::Value` so object keys come out sorted
/// (the default `Map` is a BTreeMap) regardless of struct field order.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    let v = serde_json::to_value(value).map_err(|e| IoError::Validation {
        what: format!("serialize: {e}"),
    })?;
    reject_nulls_from_nonfinite(&v)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| IoError::Validation {
        what: format!("serialize: {e}"),
    })?;
    s.push('\n');
    Ok(s)
}

/// serde_json silently maps non-finite floats to null; a null anywhere in
/// our schemas means an upstream validation hole, so refuse to write it.
fn reject_nulls_from_nonfinite(v: &serde_json::Value) -> Result<(), IoError> {
    match v {
        serde_json::Value::Null => Err(IoError::Validation {
            what: "refusing to write null (non-finite float?)".to_string(),
        }),
        serde_json::Value::Array(items) => items.iter().try_for_each(reject_nulls_from_nonfinite),
        serde_json::Value::Object(map) => map.values().try_for_each(reject_nulls_from_nonfinite),
        _ => Ok(()),
    }
}

pub fn write_canonical_json<T: Serialize>(
    path: &std::path::Path,
    value: &T,
) -> Result<(), IoError> {
    let s = to_canonical_json(value)?;
    std::fs::write(path, s).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
