//! Self-describing result envelopes and the fixed CSV number format.
//!
//! Every command writes one envelope: a JSON document carrying the toolkit
//! version, a hash and inline copy of the effective configuration, and the
//! payload itself (a CSV body or a JSON value). Payloads are byte-stable
//! across reruns of the same configuration; the timestamp lives outside the
//! payload.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{PayloadFormat, RunConfig};
use crate::error::Result;

/// Formats a float with 17 significant digits, `.` separator, exponent
/// notation; locale-independent and round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Builds a CSV body with a header row, comma delimiters, and `\n` line
/// endings.
#[derive(Debug, Clone)]
pub struct CsvBuilder {
    lines: Vec<String>,
}

impl CsvBuilder {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            lines: vec![columns.join(",")],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn finish(self) -> String {
        let mut body = self.lines.join("\n");
        body.push('\n');
        body
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// One command's complete output.
#[derive(Debug, Clone, Serialize)]
pub struct ResultEnvelope {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    /// Wall-clock seconds since the Unix epoch; informational only, never
    /// part of the payload.
    pub generated_unix_s: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub payload_format: PayloadFormat,
    /// CSV body as a JSON string, or a structured JSON value.
    pub payload: serde_json::Value,
}

impl ResultEnvelope {
    pub fn new(
        command: &str,
        config: &RunConfig,
        payload_format: PayloadFormat,
        payload: serde_json::Value,
    ) -> Result<Self> {
        let config_value = serde_json::to_value(config)?;
        let canonical = serde_json::to_string(&config_value)?;
        let generated_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            toolkit: "spinprobe".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            generated_unix_s,
            config_sha256: sha256_hex(canonical.as_bytes()),
            config: config_value,
            payload_format,
            payload,
        })
    }

    /// The payload's exact bytes, the unit of reproducibility.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        Ok(match &self.payload {
            serde_json::Value::String(s) => s.clone().into_bytes(),
            other => serde_json::to_vec(other)?,
        })
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes the envelope to `out`, or to stdout when absent.
    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        let text = self.to_json_pretty()?;
        match out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}
