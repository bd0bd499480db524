//! Draw archives as JSON lines.
//!
//! ```text
//! {"header":{"format_version":1,"spec_hash":"…","spec":{…},"seed":7,…}}
//! {"draw":{"chain":0,"iteration":501,"gamma":[…],…}}
//! …
//! {"trailer":{"n_draws":1500,"digest":"…"}}
//! ```
//!
//! The spec hash covers the synthesis spec and the estimation data; the
//! trailer digest covers the bytes of all draw lines. A missing trailer or a
//! short count is reported as truncation.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{hash_json, FORMAT_VERSION};
use crate::error::{BpsError, Result};
use crate::synthesis::{DrawArchive, SynthesisDraw, SynthesisSpec};
use crate::tree::TreeEnsemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawArchiveHeader {
    pub format_version: u32,
    pub spec_hash: String,
    pub spec: SynthesisSpec,
    pub seed: u64,
    pub targets: Vec<i64>,
    pub y: Vec<f64>,
    pub n_agents: usize,
    pub next_target: Option<i64>,
    pub acceptance: Vec<Option<f64>>,
    pub final_trees_gamma: Option<TreeEnsemble>,
    pub final_trees_beta: Option<TreeEnsemble>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Trailer {
    n_draws: usize,
    digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Record {
    Header(Box<DrawArchiveHeader>),
    Draw(Box<SynthesisDraw>),
    Trailer(Trailer),
}

/// Identity of an archive for merging and for checking a reader's expectations.
pub fn spec_hash(spec: &SynthesisSpec, targets: &[i64], y: &[f64], n_agents: usize) -> Result<String> {
    hash_json(&(spec, targets, y, n_agents))
}

pub fn write_draw_archive(archive: &DrawArchive, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let header = DrawArchiveHeader {
        format_version: FORMAT_VERSION,
        spec_hash: spec_hash(&archive.spec, &archive.targets, &archive.y, archive.n_agents)?,
        spec: archive.spec.clone(),
        seed: archive.seed,
        targets: archive.targets.clone(),
        y: archive.y.clone(),
        n_agents: archive.n_agents,
        next_target: archive.next_target,
        acceptance: archive.acceptance.clone(),
        final_trees_gamma: archive.final_trees_gamma.clone(),
        final_trees_beta: archive.final_trees_beta.clone(),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &Record::Header(Box::new(header)))?;
    w.write_all(b"\n")?;
    let mut digest = Sha256::new();
    for d in &archive.draws {
        let mut line = serde_json::to_vec(&Record::Draw(Box::new(d.clone())))?;
        line.push(b'\n');
        digest.update(&line);
        w.write_all(&line)?;
    }
    let trailer = Trailer {
        n_draws: archive.draws.len(),
        digest: hex::encode(digest.finalize()),
    };
    serde_json::to_writer(&mut w, &Record::Trailer(trailer))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads an archive; with `expected_hash`, refuses archives of another spec.
pub fn read_draw_archive(path: &Path, expected_hash: Option<&str>) -> Result<DrawArchive> {
    let p = path.display().to_string();
    let truncated = |message: String| BpsError::Truncated {
        path: p.clone(),
        message,
    };
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line = Vec::new();
    let mut header: Option<DrawArchiveHeader> = None;
    let mut draws = Vec::new();
    let mut digest = Sha256::new();
    let mut trailer = None;
    let mut row = 0usize;
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        row += 1;
        if line.last() != Some(&b'\n') {
            return Err(truncated(format!("incomplete final line {row}")));
        }
        if trailer.is_some() {
            return Err(BpsError::Parse {
                path: p.clone(),
                row,
                message: "content after the trailer".into(),
            });
        }
        let rec: Record = serde_json::from_slice(&line).map_err(|e| BpsError::Parse {
            path: p.clone(),
            row,
            message: e.to_string(),
        })?;
        match (rec, &header) {
            (Record::Header(h), None) => header = Some(*h),
            (Record::Draw(d), Some(_)) => {
                digest.update(&line);
                draws.push(*d);
            }
            (Record::Trailer(t), Some(_)) => trailer = Some(t),
            _ => {
                return Err(BpsError::Parse {
                    path: p.clone(),
                    row,
                    message: "records out of order (header, draws, trailer)".into(),
                })
            }
        }
    }
    let header = header.ok_or_else(|| truncated("no header".into()))?;
    let trailer = trailer.ok_or_else(|| truncated(format!("no trailer after {} draws", draws.len())))?;
    if header.format_version != FORMAT_VERSION {
        return Err(BpsError::Incompatible(format!(
            "draw archive format_version {} (supported: {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if trailer.n_draws != draws.len() {
        return Err(truncated(format!("trailer announces {} draws, found {}", trailer.n_draws, draws.len())));
    }
    if trailer.digest != hex::encode(digest.finalize()) {
        return Err(BpsError::Incompatible(format!("{p}: draw digest does not match the trailer")));
    }
    let recomputed = spec_hash(&header.spec, &header.targets, &header.y, header.n_agents)?;
    if recomputed != header.spec_hash {
        return Err(BpsError::Incompatible(format!("{p}: header spec hash does not match its contents")));
    }
    if let Some(want) = expected_hash {
        if want != header.spec_hash {
            return Err(BpsError::Incompatible(format!(
                "{p}: spec hash {} differs from expected {want}",
                header.spec_hash
            )));
        }
    }
    Ok(DrawArchive {
        spec: header.spec,
        seed: header.seed,
        targets: header.targets,
        y: header.y,
        n_agents: header.n_agents,
        next_target: header.next_target,
        draws,
        acceptance: header.acceptance,
        final_trees_gamma: header.final_trees_gamma,
        final_trees_beta: header.final_trees_beta,
    })
}

/// Appends the chains of `b` to `a`, renumbering them after `a`'s. Only
/// archives of the same spec and data merge.
pub fn merge_draw_archives(mut a: DrawArchive, b: DrawArchive) -> Result<DrawArchive> {
    let ha = spec_hash(&a.spec, &a.targets, &a.y, a.n_agents)?;
    let hb = spec_hash(&b.spec, &b.targets, &b.y, b.n_agents)?;
    if ha != hb || a.next_target != b.next_target {
        return Err(BpsError::Incompatible(format!("cannot merge archives {ha} and {hb}")));
    }
    let offset = a.n_chains() as u32;
    a.draws.extend(b.draws.into_iter().map(|mut d| {
        d.chain += offset;
        d
    }));
    a.acceptance.extend(b.acceptance);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{run_chain, SynthesisData, SynthesisKind};
    use crate::types::{AgentForecast, DrawMatrix, McmcConfig};

    fn small_archive(kind: SynthesisKind, seed: u64) -> DrawArchive {
        let t_len = 12;
        let y: Vec<f64> = (0..t_len).map(|t| (t as f64 * 0.7).sin()).collect();
        let forecasts = (0..t_len)
            .map(|t| {
                (0..2)
                    .map(|j| {
                        AgentForecast::Draws(DrawMatrix {
                            draws: (0..20).map(|i| y[t] * 0.5 + j as f64 * 0.1 + i as f64 * 0.01).collect(),
                            analytic: None,
                        })
                    })
                    .collect()
            })
            .collect();
        let data = SynthesisData::new((1..=t_len as i64).collect(), y, forecasts).unwrap();
        let mut spec = crate::synthesis::SynthesisSpec::new(kind);
        spec.mcmc = McmcConfig {
            n_total: 30,
            n_burn: 10,
            thin: 2,
            n_chains: 1,
        };
        run_chain(&spec, &data, seed, None).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let a = small_archive(SynthesisKind::Rw, 3);
        write_draw_archive(&a, &p).unwrap();
        let b = read_draw_archive(&p, None).unwrap();
        assert_eq!(a, b);
        let bits = |x: &DrawArchive| -> Vec<u64> { x.draws.iter().flat_map(|d| d.beta.iter().map(|v| v.to_bits())).collect() };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn truncation_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        write_draw_archive(&small_archive(SynthesisKind::Const, 1), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        // cut in the middle of a draw line
        std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(read_draw_archive(&p, None), Err(BpsError::Truncated { .. })));
        // cut at a line boundary, losing the trailer
        let text = String::from_utf8(bytes).unwrap();
        let keep: Vec<&str> = text.lines().collect();
        std::fs::write(&p, keep[..keep.len() - 2].join("\n") + "\n").unwrap();
        assert!(matches!(read_draw_archive(&p, None), Err(BpsError::Truncated { .. })));
    }

    #[test]
    fn hash_gate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let a = small_archive(SynthesisKind::Const, 1);
        write_draw_archive(&a, &p).unwrap();
        assert!(matches!(read_draw_archive(&p, Some("0000")), Err(BpsError::Incompatible(_))));
        let rw = small_archive(SynthesisKind::Rw, 1);
        assert!(matches!(merge_draw_archives(a.clone(), rw), Err(BpsError::Incompatible(_))));
        let other_seed = small_archive(SynthesisKind::Const, 2);
        let m = merge_draw_archives(a.clone(), other_seed).unwrap();
        assert_eq!(m.n_chains(), 2);
        assert_eq!(m.draws.len(), 2 * a.draws.len());
    }
}
