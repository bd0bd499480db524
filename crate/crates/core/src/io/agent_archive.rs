//! Agent forecast archives as a directory of CSV files, one per forecast
//! origin, indexed by `manifest.json`.
//!
//! Draw files have columns `agent,draw_index,value[,analytic_mean,analytic_sd]`;
//! histogram files `agent,bin_left,bin_right,prob`. An empty or infinite outer
//! edge marks an open bin, closed at two unconditional standard deviations
//! beyond the last finite edge.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::period::{format_period, parse_period};
use super::tables::OutputStamp;
use super::{fmt_f64, FORMAT_VERSION};
use crate::error::{shape, BpsError, Result};
use crate::types::{
    AgentForecast, AgentForecastArchive, ArchiveRow, DrawMatrix, GaussianSummary, HistogramForecast, HISTOGRAM_SUM_TOL,
};

/// Largest accepted deviation of histogram probabilities from one; smaller
/// deviations are renormalized away.
pub const PROB_SUM_TOL: f64 = 1e-6;

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub horizon: u32,
    pub agents: Vec<String>,
    /// `Q`, `M`, or empty for plain integer periods.
    #[serde(default)]
    pub frequency: String,
    /// Per-agent unconditional sd closing open histogram bins.
    #[serde(default)]
    pub unconditional_sd: BTreeMap<String, f64>,
    pub origins: Vec<ManifestEntry>,
    /// Config hash and input digest of the run that wrote the archive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<OutputStamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Target period label; the origin is `horizon` periods earlier.
    pub target: String,
    pub file: String,
}

pub fn write_agent_archive(
    archive: &AgentForecastArchive,
    dir: &Path,
    frequency: &str,
    unconditional_sd: &BTreeMap<String, f64>,
    stamp: Option<&OutputStamp>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let labels = archive.agent_labels();
    let mut origins = Vec::with_capacity(archive.rows().len());
    for row in archive.rows() {
        let target = format_period(row.target_period, frequency);
        let file = format!("target_{target}.csv");
        write_row(&dir.join(&file), labels, row, stamp)?;
        origins.push(ManifestEntry { target, file });
    }
    let manifest = ArchiveManifest {
        format_version: FORMAT_VERSION,
        horizon: archive.horizon(),
        agents: labels.to_vec(),
        frequency: frequency.to_string(),
        unconditional_sd: unconditional_sd.clone(),
        origins,
        provenance: stamp.cloned(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

fn write_row(path: &Path, labels: &[String], row: &ArchiveRow, stamp: Option<&OutputStamp>) -> Result<()> {
    let histograms = row.forecasts.iter().all(|f| matches!(f, AgentForecast::Histogram(_)));
    let draws = row.forecasts.iter().all(|f| matches!(f, AgentForecast::Draws(_)));
    if !histograms && !draws {
        return Err(shape(format!(
            "target {} mixes draws and histograms; one file holds one kind",
            row.target_period
        )));
    }
    let mut file = std::fs::File::create(path)?;
    if let Some(s) = stamp {
        std::io::Write::write_all(&mut file, s.line().as_bytes())?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    if histograms {
        w.write_record(["agent", "bin_left", "bin_right", "prob"])?;
    } else {
        w.write_record(["agent", "draw_index", "value", "analytic_mean", "analytic_sd"])?;
    }
    for (label, f) in labels.iter().zip(&row.forecasts) {
        match f {
            AgentForecast::Histogram(h) => {
                let e = h.bin_edges();
                for (k, p) in h.probabilities().iter().enumerate() {
                    w.write_record([label.as_str(), &fmt_f64(e[k]), &fmt_f64(e[k + 1]), &fmt_f64(*p)])?;
                }
            }
            AgentForecast::Draws(d) => {
                let (m, s) = match d.analytic {
                    Some(g) => (fmt_f64(g.mean), fmt_f64(g.sd)),
                    None => (String::new(), String::new()),
                };
                for (i, v) in d.draws.iter().enumerate() {
                    w.write_record([label.as_str(), &i.to_string(), &fmt_f64(*v), &m, &s])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_agent_archive(dir: &Path) -> Result<AgentForecastArchive> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: ArchiveManifest = serde_json::from_slice(&std::fs::read(&manifest_path)?).map_err(|e| BpsError::Parse {
        path: manifest_path.display().to_string(),
        row: e.line(),
        message: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(BpsError::Incompatible(format!(
            "agent archive format_version {} (supported: {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let mut rows = Vec::with_capacity(manifest.origins.len());
    for entry in &manifest.origins {
        let target = parse_period(&entry.target, &manifest.frequency)?;
        let forecasts = read_row(&dir.join(&entry.file), &manifest)?;
        rows.push(ArchiveRow {
            target_period: target,
            forecasts,
        });
    }
    AgentForecastArchive::new(manifest.horizon, manifest.agents.clone(), rows)
}

struct CsvSource<'a> {
    path: &'a Path,
}

impl CsvSource<'_> {
    fn err(&self, row: u64, message: impl Into<String>) -> BpsError {
        BpsError::Parse {
            path: self.path.display().to_string(),
            row: row as usize,
            message: message.into(),
        }
    }

    fn num(&self, row: u64, field: &str, name: &str) -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| self.err(row, format!("{name}: cannot parse {field:?} as a number")))
    }
}

/// Open edges are empty fields or infinities of the expected sign.
fn parse_edge(src: &CsvSource, row: u64, field: &str, name: &str, open: f64) -> Result<f64> {
    if field.trim().is_empty() {
        return Ok(open);
    }
    let v = src.num(row, field, name)?;
    if v.is_infinite() && v != open {
        return Err(src.err(row, format!("{name}: {field:?} points the wrong way")));
    }
    Ok(v)
}

fn read_row(path: &Path, manifest: &ArchiveManifest) -> Result<Vec<AgentForecast>> {
    let src = CsvSource { path };
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let index_of: BTreeMap<&str, usize> = manifest.agents.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let agent_col = col("agent").ok_or_else(|| src.err(1, "missing column `agent`"))?;

    if let (Some(lc), Some(rc), Some(pc)) = (col("bin_left"), col("bin_right"), col("prob")) {
        let mut bins: Vec<Vec<(f64, f64, f64, u64)>> = vec![vec![]; manifest.agents.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let agent = &rec[agent_col];
            let a = *index_of
                .get(agent)
                .ok_or_else(|| src.err(line, format!("unknown agent {agent:?}")))?;
            let left = parse_edge(&src, line, &rec[lc], "bin_left", f64::NEG_INFINITY)?;
            let right = parse_edge(&src, line, &rec[rc], "bin_right", f64::INFINITY)?;
            let p = src.num(line, &rec[pc], "prob")?;
            bins[a].push((left, right, p, line));
        }
        bins.into_iter()
            .enumerate()
            .map(|(a, b)| histogram_of(&src, &manifest.agents[a], b, manifest.unconditional_sd.get(&manifest.agents[a])))
            .collect()
    } else if let (Some(ic), Some(vc)) = (col("draw_index"), col("value")) {
        let mc = col("analytic_mean");
        let sc = col("analytic_sd");
        let mut draws: Vec<Vec<(usize, f64)>> = vec![vec![]; manifest.agents.len()];
        let mut analytic: Vec<Option<GaussianSummary>> = vec![None; manifest.agents.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let agent = &rec[agent_col];
            let a = *index_of
                .get(agent)
                .ok_or_else(|| src.err(line, format!("unknown agent {agent:?}")))?;
            let i: usize = rec[ic]
                .trim()
                .parse()
                .map_err(|_| src.err(line, format!("draw_index: cannot parse {:?}", &rec[ic])))?;
            let v = src.num(line, &rec[vc], "value")?;
            if !v.is_finite() {
                return Err(src.err(line, "value must be finite"));
            }
            draws[a].push((i, v));
            if let (Some(mc), Some(sc)) = (mc, sc) {
                let (m, s) = (rec[mc].trim(), rec[sc].trim());
                if !m.is_empty() || !s.is_empty() {
                    let g = GaussianSummary {
                        mean: src.num(line, m, "analytic_mean")?,
                        sd: src.num(line, s, "analytic_sd")?,
                    };
                    if !(g.sd > 0.0 && g.mean.is_finite() && g.sd.is_finite()) {
                        return Err(src.err(line, "analytic summary needs a finite mean and positive sd"));
                    }
                    if analytic[a].is_some_and(|prev| prev != g) {
                        return Err(src.err(line, format!("agent {agent:?} has conflicting analytic summaries")));
                    }
                    analytic[a] = Some(g);
                }
            }
        }
        draws
            .into_iter()
            .zip(analytic)
            .enumerate()
            .map(|(a, (mut d, g))| {
                if d.is_empty() {
                    return Err(src.err(0, format!("no draws for agent {:?}", manifest.agents[a])));
                }
                d.sort_by_key(|(i, _)| *i);
                if d.iter().enumerate().any(|(k, (i, _))| k != *i) {
                    return Err(src.err(
                        0,
                        format!("draw indices of agent {:?} are not 0..{}", manifest.agents[a], d.len()),
                    ));
                }
                Ok(AgentForecast::Draws(DrawMatrix {
                    draws: d.into_iter().map(|(_, v)| v).collect(),
                    analytic: g,
                }))
            })
            .collect()
    } else {
        Err(src.err(
            1,
            "expected columns (agent, draw_index, value) or (agent, bin_left, bin_right, prob)",
        ))
    }
}

fn histogram_of(
    src: &CsvSource,
    agent: &str,
    bins: Vec<(f64, f64, f64, u64)>,
    sd: Option<&f64>,
) -> Result<AgentForecast> {
    let (first, last) = match (bins.first(), bins.last()) {
        (Some(f), Some(l)) => (f.3, l.3),
        _ => return Err(src.err(0, format!("no bins for agent {agent:?}"))),
    };
    let mut edges = Vec::with_capacity(bins.len() + 1);
    edges.push(bins[0].0);
    for (k, b) in bins.iter().enumerate() {
        if k > 0 && b.0 != edges[k] {
            return Err(src.err(b.3, format!("bins of agent {agent:?} are not contiguous")));
        }
        if (k > 0 && b.0.is_infinite()) || (k + 1 < bins.len() && b.1.is_infinite()) {
            return Err(src.err(b.3, "only the outer bins may be open"));
        }
        edges.push(b.1);
    }
    let n = edges.len();
    if edges[0].is_infinite() || edges[n - 1].is_infinite() {
        let sd = *sd.ok_or_else(|| {
            src.err(first, format!("agent {agent:?} has an open bin but no unconditional sd"))
        })?;
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(src.err(first, format!("unconditional sd of {agent:?} must be positive")));
        }
        if n == 2 {
            return Err(src.err(first, "a single bin cannot be open"));
        }
        if edges[0].is_infinite() {
            edges[0] = edges[1] - 2.0 * sd;
        }
        if edges[n - 1].is_infinite() {
            edges[n - 1] = edges[n - 2] + 2.0 * sd;
        }
    }
    let mut probs: Vec<f64> = bins.iter().map(|b| b.2).collect();
    if let Some(b) = bins.iter().find(|b| !(b.2 >= 0.0 && b.2.is_finite())) {
        return Err(src.err(b.3, "prob must be a nonnegative number"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(BpsError::Validation(format!(
            "{}: probabilities of agent {agent:?} sum to {total} (rows {first}..{last})",
            src.path.display()
        )));
    }
    if (total - 1.0).abs() > HISTOGRAM_SUM_TOL {
        for p in &mut probs {
            *p /= total;
        }
    }
    HistogramForecast::new(edges, probs)
        .map(AgentForecast::Histogram)
        .map_err(|e| src.err(first, format!("agent {agent:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_for(dir: &Path, body: &str, sd: Option<f64>) {
        let mut m = ArchiveManifest {
            format_version: FORMAT_VERSION,
            horizon: 1,
            agents: vec!["a".into()],
            frequency: "Q".into(),
            unconditional_sd: BTreeMap::new(),
            origins: vec![ManifestEntry {
                target: "2005Q2".into(),
                file: "f.csv".into(),
            }],
            provenance: None,
        };
        if let Some(s) = sd {
            m.unconditional_sd.insert("a".into(), s);
        }
        std::fs::write(dir.join(MANIFEST), serde_json::to_string(&m).unwrap()).unwrap();
        std::fs::write(dir.join("f.csv"), body).unwrap();
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ArchiveRow {
                target_period: 8021,
                forecasts: vec![
                    AgentForecast::Draws(DrawMatrix {
                        draws: vec![0.1, 1.0 / 3.0, -2.5e-17],
                        analytic: Some(GaussianSummary { mean: 0.1, sd: 0.7 }),
                    }),
                    AgentForecast::Draws(DrawMatrix {
                        draws: vec![5.0, std::f64::consts::PI, 1e300],
                        analytic: None,
                    }),
                ],
            },
            ArchiveRow {
                target_period: 8022,
                forecasts: vec![
                    AgentForecast::Histogram(HistogramForecast::new(vec![-1.0, 0.1, 2.0], vec![0.3, 0.7]).unwrap()),
                    AgentForecast::Histogram(HistogramForecast::new(vec![0.0, 1.0], vec![1.0]).unwrap()),
                ],
            },
        ];
        let a = AgentForecastArchive::new(1, vec!["x".into(), "y, z".into()], rows).unwrap();
        let stamp = OutputStamp {
            config_hash: "c".into(),
            input_digest: "d".into(),
        };
        write_agent_archive(&a, dir.path(), "Q", &BTreeMap::new(), Some(&stamp)).unwrap();
        let b = read_agent_archive(dir.path()).unwrap();
        assert_eq!(a, b);
        assert!(dir.path().join("target_2005Q2.csv").exists());
    }

    #[test]
    fn probabilities_off_by_more_than_tolerance_rejected() {
        let dir = tempfile::tempdir().unwrap();
        manifest_for(dir.path(), "agent,bin_left,bin_right,prob\na,0,1,0.5\na,1,2,0.5001\n", None);
        assert!(matches!(read_agent_archive(dir.path()), Err(BpsError::Validation(_))));
    }

    #[test]
    fn small_deviation_is_renormalized() {
        let dir = tempfile::tempdir().unwrap();
        manifest_for(dir.path(), "agent,bin_left,bin_right,prob\na,0,1,0.5\na,1,2,0.5000004\n", None);
        let a = read_agent_archive(dir.path()).unwrap();
        let AgentForecast::Histogram(h) = &a.rows()[0].forecasts[0] else { panic!() };
        assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_top_bin_closed_at_two_sd() {
        let dir = tempfile::tempdir().unwrap();
        manifest_for(dir.path(), "agent,bin_left,bin_right,prob\na,,0,0.2\na,0,1,0.5\na,1,inf,0.3\n", Some(2.0));
        let a = read_agent_archive(dir.path()).unwrap();
        let AgentForecast::Histogram(h) = &a.rows()[0].forecasts[0] else { panic!() };
        assert_eq!(h.bin_edges(), &[-4.0, 0.0, 1.0, 5.0]);
        assert_eq!(a.rows()[0].target_period, 2005 * 4 + 1);
    }

    #[test]
    fn open_bin_without_sd_rejected() {
        let dir = tempfile::tempdir().unwrap();
        manifest_for(dir.path(), "agent,bin_left,bin_right,prob\na,0,1,0.5\na,1,,0.5\n", None);
        assert!(matches!(read_agent_archive(dir.path()), Err(BpsError::Parse { .. })));
    }

    #[test]
    fn parse_error_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        manifest_for(dir.path(), "agent,draw_index,value\na,0,1.5\na,1,abc\n", None);
        match read_agent_archive(dir.path()) {
            Err(BpsError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }
}
