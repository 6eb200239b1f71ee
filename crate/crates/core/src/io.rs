//! JSON file helpers shared by every file format in the crate.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parse JSON text, naming the offending field path on schema errors.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> std::result::Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.into_inner();
        if at == "." || at.is_empty() {
            inner.to_string()
        } else {
            format!("at `{at}`: {inner}")
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    from_json_str(&text).map_err(|msg| Error::Input {
        path: path.to_path_buf(),
        msg,
    })
}

/// Pretty JSON with a trailing newline. Output is a pure function of the
/// value, so rewriting unchanged data is byte-identical.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}
