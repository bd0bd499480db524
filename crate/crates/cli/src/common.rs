//! Helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use bpsrt_core::io::{digest_bytes, digest_path, parse_toml, read_agent_archive, read_indicators, read_series, ArchiveManifest};
use bpsrt_core::{AgentForecastArchive, BpsError, Result, TimeSeriesF};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Digest over the digests of several input files or directories, in order.
pub fn input_digest(paths: &[&Path]) -> Result<String> {
    let mut joined = String::new();
    for p in paths {
        joined.push_str(&digest_path(p)?);
        joined.push('\n');
    }
    Ok(digest_bytes(joined.as_bytes()))
}

pub fn read_manifest(dir: &Path) -> Result<ArchiveManifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Archive, its manifest and the realized target series.
pub struct Inputs {
    pub archive: AgentForecastArchive,
    pub manifest: ArchiveManifest,
    pub realized: TimeSeriesF,
    pub exogenous: Vec<(String, TimeSeriesF)>,
}

impl Inputs {
    pub fn load(agents: &Path, realized: &Path, exogenous: Option<&Path>) -> Result<Self> {
        Ok(Self {
            archive: read_agent_archive(agents)?,
            manifest: read_manifest(agents)?,
            realized: read_series(realized)?,
            exogenous: match exogenous {
                Some(p) => read_indicators(p)?,
                None => vec![],
            },
        })
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a TOML file of overrides; unknown keys are config errors.
pub fn load_overrides<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_toml(&text)
}

/// A worker pool of `workers` threads, or one per core when absent.
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    if workers == Some(0) {
        return Err(BpsError::config("workers", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| BpsError::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// `NAME=DIR` pairs on the command line.
pub fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=DIR, got {s:?}")),
    }
}

/// Target periods of files named `target_<label>.<ext>` in `dir`, sorted.
pub fn target_files(dir: &Path, ext: &str, frequency: Option<&str>) -> Result<Vec<(i64, PathBuf)>> {
    let mut out = vec![];
    if !dir.is_dir() {
        return Ok(out);
    }
    for e in std::fs::read_dir(dir)? {
        let path = e?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(label) = name.strip_prefix("target_").and_then(|n| n.strip_suffix(ext)) else {
            continue;
        };
        let freq = frequency.unwrap_or_else(|| bpsrt_core::io::detect_frequency(label));
        out.push((bpsrt_core::io::parse_period(label, freq)?, path));
    }
    out.sort();
    Ok(out)
}
