//! `render-tree`: static SVG of one tree of a draw archive's final ensemble.

use std::fmt::Write as _;
use std::path::PathBuf;

use bpsrt_core::io::read_draw_archive;
use bpsrt_core::modifiers::ColumnInfo;
use bpsrt_core::tree::TreeNode;
use bpsrt_core::{BpsError, Result};
use serde::Deserialize;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Block {
    Beta,
    Gamma,
}

#[derive(clap::Args)]
pub struct Args {
    /// Draw archive (`.jsonl`) written by `run`.
    #[arg(long)]
    pub draws: PathBuf,
    /// Output SVG file.
    #[arg(long)]
    pub out: PathBuf,
    /// Which weight block's ensemble to draw.
    #[arg(long, value_enum, default_value_t = Block::Beta)]
    pub block: Block,
    /// Index of the tree within the ensemble.
    #[arg(long, default_value_t = 0)]
    pub tree: usize,
    /// `columns.json` of the run, for modifier names and raw-scale thresholds.
    #[arg(long)]
    pub modifiers: Option<PathBuf>,
}

#[derive(Deserialize)]
struct Columns {
    gamma: Vec<ColumnInfo>,
    beta: Vec<ColumnInfo>,
}

const DX: f64 = 170.0;
const DY: f64 = 90.0;
const BOX_W: f64 = 150.0;
const BOX_H: f64 = 40.0;
const MARGIN: f64 = 20.0;

/// Nodes with their layout position: leaves left to right in order,
/// internal nodes centred over their children.
struct Placed<'a> {
    node: &'a TreeNode,
    x: f64,
    y: f64,
    children: Vec<usize>,
}

fn place<'a>(node: &'a TreeNode, depth: usize, next_leaf: &mut usize, out: &mut Vec<Placed<'a>>) -> usize {
    let idx = out.len();
    out.push(Placed {
        node,
        x: 0.0,
        y: depth as f64 * DY,
        children: vec![],
    });
    match node {
        TreeNode::Terminal { .. } => {
            out[idx].x = *next_leaf as f64 * DX;
            *next_leaf += 1;
        }
        TreeNode::Internal { left, right, .. } => {
            let l = place(left, depth + 1, next_leaf, out);
            let r = place(right, depth + 1, next_leaf, out);
            out[idx].x = 0.5 * (out[l].x + out[r].x);
            out[idx].children = vec![l, r];
        }
    }
    idx
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG text of `tree`; `columns` names the modifiers and maps thresholds
/// back to the raw scale when the panel was standardized.
pub fn render(tree: &TreeNode, columns: Option<&[ColumnInfo]>) -> String {
    let mut nodes = vec![];
    let mut leaves = 0;
    place(tree, 0, &mut leaves, &mut nodes);
    let depth = nodes.iter().map(|n| n.y).fold(0.0, f64::max);
    let width = (leaves.max(1) as f64 - 1.0) * DX + BOX_W + 2.0 * MARGIN;
    let height = depth + BOX_H + 2.0 * MARGIN;
    let cx = |x: f64| x + MARGIN + BOX_W / 2.0;
    let cy = |y: f64| y + MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    for n in &nodes {
        for (k, c) in n.children.iter().enumerate() {
            let ch = &nodes[*c];
            let (x1, y1, x2, y2) = (cx(n.x), cy(n.y) + BOX_H, cx(ch.x), cy(ch.y));
            let _ = writeln!(s, r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="black"/>"#);
            let tag = if k == 0 { "yes" } else { "no" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="gray">{tag}</text>"#,
                0.5 * (x1 + x2),
                0.5 * (y1 + y2)
            );
        }
    }
    for n in &nodes {
        let (x, y) = (n.x + MARGIN, cy(n.y));
        let (text, fill) = match n.node {
            TreeNode::Internal { rule, .. } => {
                let info = columns.and_then(|c| c.get(rule.modifier));
                let name = info.map_or_else(|| format!("z{}", rule.modifier + 1), |c| c.label.clone());
                let threshold = match info.and_then(|c| c.standardization) {
                    Some((centre, scale)) => rule.threshold * scale + centre,
                    None => rule.threshold,
                };
                (format!("{name} ≤ {threshold:.3}"), "#dde8f4")
            }
            TreeNode::Terminal { phi } => (format!("φ = {phi:.3}"), "#f4eadd"),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{BOX_W}" height="{BOX_H}" rx="6" fill="{fill}" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x + BOX_W / 2.0,
            y + BOX_H / 2.0 + 4.0,
            escape(&text)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn run(args: Args) -> Result<()> {
    let archive = read_draw_archive(&args.draws, None)?;
    let ensemble = match args.block {
        Block::Beta => archive.final_trees_beta.as_ref(),
        Block::Gamma => archive.final_trees_gamma.as_ref(),
    }
    .ok_or_else(|| BpsError::DataShape("draw archive holds no trees for this block".into()))?;
    let tree = ensemble.trees.get(args.tree).ok_or_else(|| {
        BpsError::InvalidArgument(format!("tree {} requested from an ensemble of {}", args.tree, ensemble.trees.len()))
    })?;
    let columns: Option<Vec<ColumnInfo>> = match &args.modifiers {
        Some(p) => {
            let c: Columns = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            Some(match args.block {
                Block::Beta => c.beta,
                Block::Gamma => c.gamma,
            })
        }
        None => None,
    };
    if let Some(dir) = args.out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, render(tree, columns.as_deref()))?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_box_per_node_and_raw_thresholds() {
        let t = TreeNode::split(1, 0.5, TreeNode::leaf(0.9), TreeNode::leaf(0.01));
        let cols = vec![
            ColumnInfo {
                label: "trend".into(),
                tag: bpsrt_core::modifiers::Provenance::Trend,
                standardization: None,
            },
            ColumnInfo {
                label: "sfe<lag1>".into(),
                tag: bpsrt_core::modifiers::Provenance::Score,
                standardization: Some((2.0, 4.0)),
            },
        ];
        let svg = render(&t, Some(&cols));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("<line").count(), 2);
        assert!(svg.contains("sfe&lt;lag1&gt; ≤ 4.000"), "{svg}");
        assert!(svg.contains("φ = 0.900"));
    }
}
