//! Versioned prompt templates, persisted as `prompts.ndjson`.
//!
//! Templates are identified within a name by the SHA-256 of their UTF-8
//! bytes; re-registering an identical template returns the existing
//! version. Versions per name run 1..k without gaps.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_error, StoreError};
use crate::model::canonical_serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub name: String,
    pub version: u32,
    pub template: String,
    /// Lowercase hex SHA-256 of the template.
    pub content_hash: String,
    pub created_time_unix_ns: u64,
}

pub fn content_hash(template: &str) -> String {
    Sha256::digest(template.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub(super) struct PromptRegistry {
    path: PathBuf,
    records: Vec<PromptRecord>,
}

impl PromptRegistry {
    pub(super) fn open(path: PathBuf) -> Result<Self, StoreError> {
        let mut records = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_error)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_error)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: PromptRecord =
                    serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                        path: path.clone(),
                        line: i + 1,
                        reason: e.to_string(),
                    })?;
                records.push(record);
            }
        }
        Ok(Self { path, records })
    }

    pub(super) fn register(
        &mut self,
        name: &str,
        template: &str,
        now_unix_ns: u64,
    ) -> Result<PromptRecord, StoreError> {
        if name.trim().is_empty() {
            return Err(StoreError::EmptyName);
        }
        let hash = content_hash(template);
        if let Some(existing) = self
            .records
            .iter()
            .find(|r| r.name == name && r.content_hash == hash)
        {
            return Ok(existing.clone());
        }
        let version = self
            .records
            .iter()
            .filter(|r| r.name == name)
            .map(|r| r.version)
            .max()
            .unwrap_or(0)
            + 1;
        let record = PromptRecord {
            name: name.to_string(),
            version,
            template: template.to_string(),
            content_hash: hash,
            created_time_unix_ns: now_unix_ns,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_error)?;
        writeln!(file, "{}", canonical_serialize(&record)).map_err(io_error)?;
        file.flush().map_err(io_error)?;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Records ordered by name then version.
    pub(super) fn list(&self, name: Option<&str>) -> Vec<PromptRecord> {
        let mut out: Vec<PromptRecord> = self
            .records
            .iter()
            .filter(|r| name.is_none_or(|n| r.name == n))
            .cloned()
            .collect();
        out.sort_by(|a, b| (&a.name, a.version).cmp(&(&b.name, b.version)));
        out
    }
}
