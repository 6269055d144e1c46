//! Output files with the provenance header.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub hybridjump: &'static str,
    pub config_sha256: String,
}

impl Header {
    pub fn new(hash: String) -> Self {
        Self { hybridjump: VERSION, config_sha256: hash }
    }

    pub fn comment(&self) -> String {
        format!("# hybridjump {} config-sha256={}", self.hybridjump, self.config_sha256)
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// CSV body produced by `body`, preceded by the header comment row.
pub fn csv<F>(dir: &Path, name: &str, header: &Header, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    writeln!(buf, "{}", header.comment())?;
    body(&mut buf)?;
    write_file(dir, name, &buf)
}

/// JSONL whose first line is `{"header": {...}}`.
pub fn jsonl<F>(dir: &Path, name: &str, header: &Header, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &serde_json::json!({ "header": header })).map_err(std::io::Error::from)?;
    buf.push(b'\n');
    body(&mut buf)?;
    write_file(dir, name, &buf)
}

/// Pretty JSON object `{"header": {...}, ...payload}`.
pub fn json<T: Serialize>(dir: &Path, name: &str, header: &Header, payload: &T) -> Result<(), CliError> {
    let mut v = serde_json::to_value(payload).map_err(std::io::Error::from)?;
    let mut obj = serde_json::Map::new();
    obj.insert("header".into(), serde_json::to_value(header).map_err(std::io::Error::from)?);
    if let serde_json::Value::Object(m) = v.take() {
        obj.extend(m);
    } else {
        obj.insert("value".into(), v);
    }
    let mut buf = serde_json::to_vec_pretty(&serde_json::Value::Object(obj)).map_err(std::io::Error::from)?;
    buf.push(b'\n');
    write_file(dir, name, &buf)
}
