//! Stamped CSV tables and modifier panel output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::period::format_period;
use super::{fmt_f64, FORMAT_VERSION};
use crate::error::{shape, BpsError, Result};
use crate::modifiers::{ColumnInfo, ModifierPanel};

/// Provenance line written at the top of every output table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputStamp {
    pub config_hash: String,
    /// Digest of the inputs the table was computed from.
    pub input_digest: String,
}

impl OutputStamp {
    pub(crate) fn line(&self) -> String {
        format!(
            "# format_version={FORMAT_VERSION} config_hash={} input_digest={}\n",
            self.config_hash, self.input_digest
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let mut config_hash = None;
        let mut input_digest = None;
        for kv in line.trim_start_matches('#').split_whitespace() {
            match kv.split_once('=') {
                Some(("config_hash", v)) => config_hash = Some(v.to_string()),
                Some(("input_digest", v)) => input_digest = Some(v.to_string()),
                _ => {}
            }
        }
        Some(Self {
            config_hash: config_hash?,
            input_digest: input_digest?,
        })
    }
}

/// A table of text cells; numbers are formatted by the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Appends a row of a label followed by numbers; `None` leaves the cell empty.
    pub fn push_numbers(&mut self, label: impl Into<String>, values: impl IntoIterator<Item = Option<f64>>) {
        let mut row = vec![label.into()];
        row.extend(values.into_iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let c = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r.get(c).map_or("", String::as_str)).collect())
    }
}

pub fn write_table(path: &Path, stamp: Option<&OutputStamp>, table: &Table) -> Result<()> {
    if let Some(r) = table.rows.iter().find(|r| r.len() != table.headers.len()) {
        return Err(shape(format!(
            "row has {} cells for {} columns in {}",
            r.len(),
            table.headers.len(),
            path.display()
        )));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = Vec::new();
    if let Some(s) = stamp {
        out.extend_from_slice(s.line().as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(&table.headers)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Option<OutputStamp>, Table)> {
    let text = std::fs::read_to_string(path)?;
    let stamp = text.lines().next().filter(|l| l.starts_with('#')).and_then(OutputStamp::parse);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((stamp, Table { headers, rows }))
}

#[derive(Serialize)]
struct PanelColumns<'a> {
    format_version: u32,
    gamma: &'a [ColumnInfo],
    beta: &'a [ColumnInfo],
}

/// Writes `z_beta.csv` (`target,agent,<beta columns>`), `z_gamma.csv`
/// (`agent,<gamma columns>`) and `columns.json` with provenance tags and
/// standardization constants.
pub fn write_panel(dir: &Path, panel: &ModifierPanel, agents: &[String], frequency: &str, stamp: Option<&OutputStamp>) -> Result<()> {
    if agents.len() != panel.n_agents {
        return Err(shape(format!("{} agent labels for a panel of {}", agents.len(), panel.n_agents)));
    }
    let mut beta = Table {
        headers: ["target", "agent"].iter().map(|s| s.to_string()).collect(),
        rows: vec![],
    };
    beta.headers.extend(panel.beta_columns.iter().map(|c| c.label.clone()));
    for (ti, t) in panel.targets.iter().enumerate() {
        for (j, a) in agents.iter().enumerate() {
            let mut row = vec![format_period(*t, frequency), a.clone()];
            row.extend(panel.z_beta.row(ti * panel.n_agents + j).iter().map(|v| fmt_f64(*v)));
            beta.push(row);
        }
    }
    let mut gamma = Table {
        headers: vec!["agent".to_string()],
        rows: vec![],
    };
    gamma.headers.extend(panel.gamma_columns.iter().map(|c| c.label.clone()));
    for (j, a) in agents.iter().enumerate() {
        let row = if panel.z_gamma.rows() == panel.n_agents {
            panel.z_gamma.row(j).iter().map(|v| Some(*v)).collect()
        } else {
            vec![]
        };
        gamma.push_numbers(a.clone(), row);
    }
    write_table(&dir.join("z_beta.csv"), stamp, &beta)?;
    write_table(&dir.join("z_gamma.csv"), stamp, &gamma)?;
    let cols = PanelColumns {
        format_version: FORMAT_VERSION,
        gamma: &panel.gamma_columns,
        beta: &panel.beta_columns,
    };
    let mut text = serde_json::to_string_pretty(&cols).map_err(BpsError::from)?;
    text.push('\n');
    std::fs::write(dir.join("columns.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamped_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(&["origin", "crps"]);
        t.push_numbers("2001Q1", [Some(0.25)]);
        t.push_numbers("2001Q2", [None]);
        let s = OutputStamp {
            config_hash: "abc".into(),
            input_digest: "def".into(),
        };
        write_table(&p, Some(&s), &t).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "# format_version=1 config_hash=abc input_digest=def\norigin,crps\n2001Q1,0.25\n2001Q2,\n"
        );
        let (s2, t2) = read_table(&p).unwrap();
        assert_eq!(s2, Some(s));
        assert_eq!(t2, t);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into()]);
        assert!(write_table(&dir.path().join("x.csv"), None, &t).is_err());
    }
}
