//! CSV datasets with a `#`-prefixed provenance header.
//!
//! ```text
//! # schema: fig4/1
//! # version: 0.1.0
//! # config_sha256: 9f2c…
//! # created: 2026-01-01T00:00:00Z
//! N,z,g_Hz,...
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SdsError};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema: String,
    pub version: String,
    pub config_sha256: String,
    pub created: String,
}

impl Provenance {
    /// Stamps `config` with its hash and the current time, or `SOURCE_DATE_EPOCH` when set.
    pub fn new(schema: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            schema: schema.to_string(),
            version: CODE_VERSION.to_string(),
            config_sha256: config_hash(config)?,
            created: timestamp(),
        })
    }

    fn fields(&self) -> [(&'static str, &str); 4] {
        [
            ("schema", &self.schema),
            ("version", &self.version),
            ("config_sha256", &self.config_sha256),
            ("created", &self.created),
        ]
    }

    fn header(&self) -> String {
        self.fields().iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn parse(lines: &[&str]) -> Result<Self> {
        let get = |key: &str| -> Result<String> {
            lines
                .iter()
                .find_map(|l| {
                    l.strip_prefix("# ")?
                        .strip_prefix(key)?
                        .strip_prefix(": ")
                        .map(str::to_string)
                })
                .ok_or_else(|| SdsError::Format(format!("missing header field {key:?}")))
        };
        Ok(Self {
            schema: get("schema")?,
            version: get("version")?,
            config_sha256: get("config_sha256")?,
            created: get("created")?,
        })
    }

    pub fn require_schema(&self, schema: &str) -> Result<()> {
        if self.schema == schema {
            Ok(())
        } else {
            Err(SdsError::Format(format!(
                "expected schema {schema:?}, found {:?}",
                self.schema
            )))
        }
    }
}

/// SHA-256 of the config's JSON serialization, hex encoded.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| SdsError::Format(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn split_header(text: &str) -> (Vec<&str>, &str) {
    let mut header = Vec::new();
    let mut rest = text;
    while rest.starts_with('#') {
        let end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        header.push(rest[..end].trim_end_matches(['\n', '\r']));
        rest = &rest[end..];
    }
    (header, rest)
}

fn csv_err(e: impl std::fmt::Display) -> SdsError {
    SdsError::Format(e.to_string())
}

/// Untyped view of a dataset; re-emitting a parsed dataset reproduces it byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Dataset {
    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = split_header(text);
        let provenance = Provenance::parse(&header)?;
        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let records = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(csv_err))
            .collect::<Result<_>>()?;
        Ok(Self {
            provenance,
            columns,
            records,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.records {
            writer.write_record(r).map_err(csv_err)?;
        }
        finish(&self.provenance, writer)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SdsError::Format(format!("missing column {name:?}")))
    }
}

fn finish(provenance: &Provenance, writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let body = writer.into_inner().map_err(csv_err)?;
    let body = String::from_utf8(body).map_err(csv_err)?;
    Ok(provenance.header() + &body)
}

/// Row type of a dataset; `COLUMNS` lists the serialized field names in order.
pub trait Record: Serialize {
    const COLUMNS: &'static [&'static str];
}

/// Renders typed rows under their column header, which is written even for no rows.
pub fn render_rows<T: Record>(provenance: &Provenance, rows: &[T]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(T::COLUMNS).map_err(csv_err)?;
    for r in rows {
        writer.serialize(r).map_err(csv_err)?;
    }
    finish(provenance, writer)
}

pub fn parse_rows<T: Record + DeserializeOwned>(text: &str) -> Result<(Provenance, Vec<T>)> {
    let (header, body) = split_header(text);
    let provenance = Provenance::parse(&header)?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let columns = reader.headers().map_err(csv_err)?;
    if !columns.iter().eq(T::COLUMNS.iter().copied()) {
        return Err(SdsError::Format(format!(
            "expected columns {:?}, found {columns:?}",
            T::COLUMNS
        )));
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err)?;
    Ok((provenance, rows))
}

pub fn write_rows<T: Record>(path: impl AsRef<Path>, provenance: &Provenance, rows: &[T]) -> Result<()> {
    std::fs::write(path, render_rows(provenance, rows)?)?;
    Ok(())
}

pub fn read_rows<T: Record + DeserializeOwned>(path: impl AsRef<Path>) -> Result<(Provenance, Vec<T>)> {
    parse_rows(&std::fs::read_to_string(path)?)
}

/// JSON document wrapping a payload with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub payload: T,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| SdsError::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| SdsError::Format(e.to_string()))
}
