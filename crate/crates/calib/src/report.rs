//! Reliability diagrams as standalone SVG and markdown comparison tables.
//!
//! Both renderers are pure functions of their inputs: coordinates are written
//! with six fixed decimals and nothing depends on time or locale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use calib_core::{ece, ClassificationReport, ReliabilityTable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::io::{save_predictions, write_predictions};

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramStyle {
    pub width: u32,
    pub height: u32,
    pub confidence_color: String,
    pub accuracy_color: String,
    pub diagonal_color: String,
    pub curve_color: String,
    pub bar_opacity: f64,
    pub title: Option<String>,
    /// Print the table's ECE in the plot corner.
    pub show_ece: bool,
}

impl Default for DiagramStyle {
    fn default() -> Self {
        DiagramStyle {
            width: 480,
            height: 480,
            confidence_color: "#f4a6c6".into(),
            accuracy_color: "#7b4fa0".into(),
            diagonal_color: "#000000".into(),
            curve_color: "#d62728".into(),
            bar_opacity: 0.6,
            title: None,
            show_ece: true,
        }
    }
}

impl DiagramStyle {
    pub fn validate(&self) -> Result<()> {
        let min_w = (MARGIN_LEFT + MARGIN_RIGHT) as u32;
        let min_h = (MARGIN_TOP + MARGIN_BOTTOM) as u32;
        if self.width <= min_w || self.height <= min_h {
            return Err(calib_core::Error::InvalidConfig(format!(
                "diagram must be larger than {min_w}x{min_h} pixels, got {}x{}",
                self.width, self.height
            ))
            .into());
        }
        if !(0.0..=1.0).contains(&self.bar_opacity) {
            return Err(calib_core::Error::InvalidConfig(format!(
                "bar opacity must lie in [0, 1], got {}",
                self.bar_opacity
            ))
            .into());
        }
        Ok(())
    }

    fn plot_size(&self) -> (f64, f64) {
        (
            self.width as f64 - MARGIN_LEFT - MARGIN_RIGHT,
            self.height as f64 - MARGIN_TOP - MARGIN_BOTTOM,
        )
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders `table` as an SVG document.
///
/// Bars and the curve are drawn inside a group whose transform maps the unit
/// square onto the plot area with y pointing up, so a bar's `height`
/// attribute is the bin's accuracy or confidence itself. Empty bins draw no
/// bars and are skipped by the curve.
pub fn reliability_svg(table: &ReliabilityTable, style: &DiagramStyle) -> Result<String> {
    style.validate()?;
    let (pw, ph) = style.plot_size();
    let (w, h) = (style.width, style.height);
    let bins = table.num_bins();
    let mut s = String::new();

    // Writing into a String cannot fail.
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    );
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    if let Some(title) = &style.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.6}" y="{:.6}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            MARGIN_TOP / 2.0 + 5.0,
            escape(title)
        );
    }

    // Axes, ticks and labels in pixel space.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + ph;
    let _ = writeln!(
        s,
        r##"<g id="axes" stroke="#000000" stroke-width="1" fill="none"><rect x="{x0:.6}" y="{MARGIN_TOP:.6}" width="{pw:.6}" height="{ph:.6}"/></g>"##
    );
    let _ = writeln!(
        s,
        r#"<g id="ticks" font-family="sans-serif" font-size="11">"#
    );
    for t in 0..=TICKS {
        let v = t as f64 / TICKS as f64;
        let px = x0 + v * pw;
        let py = y0 - v * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{px:.6}" y1="{y0:.6}" x2="{px:.6}" y2="{:.6}" stroke="#000000"/><text x="{px:.6}" y="{:.6}" text-anchor="middle">{v:.1}</text>"##,
            y0 + 4.0,
            y0 + 17.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.6}" y1="{py:.6}" x2="{x0:.6}" y2="{py:.6}" stroke="#000000"/><text x="{:.6}" y="{:.6}" text-anchor="end">{v:.1}</text>"##,
            x0 - 4.0,
            x0 - 7.0,
            py + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text id="x-label" x="{:.6}" y="{:.6}" font-family="sans-serif" font-size="13" text-anchor="middle">Confidence (M = {bins} bins)</text>"#,
        x0 + pw / 2.0,
        y0 + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text id="y-label" x="{:.6}" y="{:.6}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 {:.6} {:.6})">Accuracy</text>"#,
        x0 - 42.0,
        MARGIN_TOP + ph / 2.0,
        x0 - 42.0,
        MARGIN_TOP + ph / 2.0
    );

    // Plot-unit group: (0,0) is the bottom-left corner, (1,1) the top-right.
    let _ = writeln!(
        s,
        r#"<g id="plot" transform="translate({x0:.6} {y0:.6}) scale({pw:.6} {:.6})">"#,
        -ph
    );
    let width = 1.0 / bins as f64;
    for (m, bin) in table.bins().iter().enumerate() {
        if bin.count == 0 {
            continue;
        }
        let (lo, _) = table.edges(m);
        let _ = writeln!(
            s,
            r#"<rect class="conf-bar" data-bin="{m}" x="{lo:.6}" y="0.000000" width="{width:.6}" height="{:.6}" fill="{}" fill-opacity="{:.6}"/>"#,
            bin.conf,
            escape(&style.confidence_color),
            style.bar_opacity
        );
        let _ = writeln!(
            s,
            r#"<rect class="acc-bar" data-bin="{m}" x="{lo:.6}" y="0.000000" width="{width:.6}" height="{:.6}" fill="{}" fill-opacity="{:.6}"/>"#,
            bin.acc,
            escape(&style.accuracy_color),
            style.bar_opacity
        );
    }
    let _ = writeln!(
        s,
        r#"<line class="diagonal" x1="0.000000" y1="0.000000" x2="1.000000" y2="1.000000" stroke="{}" stroke-width="1.5" stroke-dasharray="6 4" vector-effect="non-scaling-stroke"/>"#,
        escape(&style.diagonal_color)
    );
    let points: Vec<String> = table
        .bins()
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| format!("{:.6},{:.6}", b.conf, b.acc))
        .collect();
    if !points.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{}" stroke-width="2" vector-effect="non-scaling-stroke"/>"#,
            points.join(" "),
            escape(&style.curve_color)
        );
    }
    let _ = writeln!(s, "</g>");

    if style.show_ece {
        let _ = writeln!(
            s,
            r#"<text id="ece" x="{:.6}" y="{:.6}" font-family="sans-serif" font-size="13">ECE = {:.5}</text>"#,
            x0 + 8.0,
            MARGIN_TOP + 18.0,
            ece(table)?
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

/// Writes [`reliability_svg`] output to `out_path`.
pub fn render_reliability_svg(
    table: &ReliabilityTable,
    style: &DiagramStyle,
    out_path: impl AsRef<Path>,
) -> Result<()> {
    let path = out_path.as_ref();
    let svg = reliability_svg(table, style)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub name: String,
    pub report: ClassificationReport,
    pub ece: f64,
}

impl ComparisonEntry {
    pub fn new(name: impl Into<String>, report: ClassificationReport, ece: f64) -> Self {
        ComparisonEntry {
            name: name.into(),
            report,
            ece,
        }
    }
}

pub const COMPARISON_HEADER: [&str; 6] = ["Model", "P(%)", "R(%)", "F1(%)", "ACC(%)", "ECE"];

/// Markdown table with macro precision, recall, F1 and accuracy as
/// percentages to two decimals and ECE to five. The best value in each
/// numeric column (highest, or lowest for ECE) is bolded, compared after
/// rounding so that every displayed tie is bolded.
pub fn comparison_table(entries: &[ComparisonEntry]) -> Result<String> {
    if entries.is_empty() {
        return Err(Error::Empty("compare: no entries"));
    }
    let cells: Vec<[String; 5]> = entries
        .iter()
        .map(|e| {
            let r = &e.report;
            [
                format!("{:.2}", 100.0 * r.macro_precision),
                format!("{:.2}", 100.0 * r.macro_recall),
                format!("{:.2}", 100.0 * r.macro_f1),
                format!("{:.2}", 100.0 * r.accuracy),
                format!("{:.5}", e.ece),
            ]
        })
        .collect();

    let mut best = [0.0f64; 5];
    for (col, slot) in best.iter_mut().enumerate() {
        let values = cells
            .iter()
            .map(|row| row[col].parse::<f64>().unwrap_or(f64::NAN));
        *slot = if col == 4 {
            values.fold(f64::INFINITY, f64::min)
        } else {
            values.fold(f64::NEG_INFINITY, f64::max)
        };
    }

    let mut out = String::new();
    let _ = writeln!(out, "| {} |", COMPARISON_HEADER.join(" | "));
    let _ = writeln!(out, "|:---|{}", "---:|".repeat(5));
    for (entry, row) in entries.iter().zip(&cells) {
        let rendered: Vec<String> = row
            .iter()
            .zip(best)
            .map(|(cell, b)| {
                if cell.parse::<f64>().ok() == Some(b) {
                    format!("**{cell}**")
                } else {
                    cell.clone()
                }
            })
            .collect();
        let name = entry.name.replace('|', "\\|");
        let _ = writeln!(out, "| {name} | {} |", rendered.join(" | "));
    }
    Ok(out)
}
