//! File formats and persistence.
//!
//! Human-facing tables are CSV (UTF-8, LF, `.` decimals, empty fields for
//! missing values). Output tables start with a `#` comment line carrying the
//! config hash and a digest of the inputs. Draw archives are JSON lines with a
//! header and a trailer. Every container carries a `format_version`.

mod agent_archive;
mod config;
mod draws;
mod period;
mod series;
mod tables;

pub use agent_archive::{read_agent_archive, write_agent_archive, ArchiveManifest, ManifestEntry, PROB_SUM_TOL};
pub use config::{parse_toml, DataPaths, EvaluationConfig, ExperimentConfig, SynthesisConfig, WindowMode};
pub use draws::{merge_draw_archives, read_draw_archive, spec_hash, write_draw_archive, DrawArchiveHeader};
pub use period::{detect_frequency, format_period, parse_period};
pub use series::{read_indicators, read_series, write_indicators, write_series};
pub use tables::{read_table, write_panel, write_table, OutputStamp, Table};

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of a file, or of a directory's files in name order (names included).
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        let mut h = Sha256::new();
        for p in names {
            if p.is_file() {
                h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
                h.update([0]);
                h.update(std::fs::read(&p)?);
            }
        }
        Ok(hex::encode(h.finalize()))
    } else {
        Ok(digest_bytes(&std::fs::read(path)?))
    }
}

/// Digest of the compact JSON serialization.
pub fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(digest_bytes(&serde_json::to_vec(value)?))
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}
