//! CSV and SVG renderings. Output bytes depend only on the input values.

use std::fmt::Write;

use super::{format2, CurvePoint, EvalMatrix, IntervalGrid, Metric};
use crate::audit::SizeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

#[derive(Clone, Copy, Debug)]
pub enum ReportItem<'a> {
    Matrix(&'a EvalMatrix),
    Grid(&'a IntervalGrid),
    Curve(&'a [CurvePoint]),
    Counts(&'a SizeGrid),
}

pub fn emit_report(item: ReportItem<'_>, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => csv(item),
        ReportFormat::Svg => heatmap(item).svg(),
    }
    .into_bytes()
}

fn cell(v: Option<f64>) -> String {
    v.map(format2).unwrap_or_default()
}

fn csv(item: ReportItem<'_>) -> String {
    let mut out = String::new();
    match item {
        ReportItem::Matrix(m) => {
            out.push_str("train\\eval");
            for c in &m.col_names {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
            for (name, row) in m.row_names.iter().zip(&m.values) {
                out.push_str(name);
                for v in row {
                    let _ = write!(out, ",{}", cell(*v));
                }
                out.push('\n');
            }
        }
        ReportItem::Grid(g) => {
            let n = g.values.len();
            out.push_str("width\\height");
            for j in 0..n {
                let _ = write!(out, ",{}", g.label(j));
            }
            out.push('\n');
            for (i, row) in g.values.iter().enumerate() {
                out.push_str(&g.label(i));
                for (j, v) in row.iter().enumerate() {
                    let mut text = v.map_or_else(|| "NO_DATA".to_string(), format2);
                    if g.marker == Some((i, j)) {
                        text.push_str("|MARKER");
                    }
                    let _ = write!(out, ",{text}");
                }
                out.push('\n');
            }
        }
        ReportItem::Curve(points) => {
            out.push_str("condition,value\n");
            for p in points {
                let _ = writeln!(out, "{},{}", p.condition, format2(p.value));
            }
        }
        ReportItem::Counts(g) => out = g.to_csv(),
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Scale {
    /// 0 maps to white, `max` to full colour.
    Sequential { max: f64 },
    /// Symmetric around zero.
    Diverging { limit: f64 },
}

struct Heatmap {
    title: String,
    axis: String,
    rows: Vec<String>,
    cols: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
    /// Missing cells get the no-data cross instead of an "n/a" label.
    cross_missing: bool,
    marker: Option<(usize, usize)>,
    scale: Scale,
    integer_text: bool,
}

fn heatmap(item: ReportItem<'_>) -> Heatmap {
    match item {
        ReportItem::Matrix(m) => Heatmap {
            title: format!("{} ({})", m.metric.name().to_uppercase(), m.condition),
            axis: "train \\ eval".into(),
            rows: m.row_names.clone(),
            cols: m.col_names.clone(),
            cells: m.values.clone(),
            cross_missing: false,
            marker: None,
            scale: if m.metric == Metric::Diff {
                Scale::Diverging { limit: 100.0 }
            } else {
                Scale::Sequential { max: 100.0 }
            },
            integer_text: false,
        },
        ReportItem::Grid(g) => {
            let labels: Vec<String> = (0..g.values.len()).map(|k| g.label(k)).collect();
            Heatmap {
                title: "accuracy on natural images by size".into(),
                axis: "width \\ height".into(),
                rows: labels.clone(),
                cols: labels,
                cells: g.values.clone(),
                cross_missing: true,
                marker: g.marker,
                scale: Scale::Sequential { max: 100.0 },
                integer_text: false,
            }
        }
        ReportItem::Curve(points) => Heatmap {
            title: "robustness".into(),
            axis: String::new(),
            rows: vec!["average".into()],
            cols: points.iter().map(|p| p.condition.clone()).collect(),
            cells: vec![points.iter().map(|p| Some(p.value)).collect()],
            cross_missing: false,
            marker: None,
            scale: Scale::Sequential { max: 100.0 },
            integer_text: false,
        },
        ReportItem::Counts(g) => {
            let labels: Vec<String> = (0..g.counts.len()).map(|k| g.bin_label(k)).collect();
            let max = g.counts.iter().flatten().copied().max().unwrap_or(0).max(1);
            Heatmap {
                title: format!("image count by size (n={})", g.total),
                axis: "width \\ height".into(),
                rows: labels.clone(),
                cols: labels,
                cells: g
                    .counts
                    .iter()
                    .map(|r| r.iter().map(|&c| Some(c as f64)).collect())
                    .collect(),
                cross_missing: false,
                marker: None,
                scale: Scale::Sequential { max: max as f64 },
                integer_text: true,
            }
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn mix(from: (u8, u8, u8), to: (u8, u8, u8), t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(from.0, to.0), c(from.1, to.1), c(from.2, to.2))
}

const WHITE: (u8, u8, u8) = (255, 255, 255);
const BLUE: (u8, u8, u8) = (33, 102, 172);
const RED: (u8, u8, u8) = (178, 24, 43);

impl Scale {
    fn fill(self, v: f64) -> String {
        match self {
            Scale::Sequential { max } => mix(WHITE, BLUE, v / max),
            Scale::Diverging { limit } if v < 0.0 => mix(WHITE, RED, -v / limit),
            Scale::Diverging { limit } => mix(WHITE, BLUE, v / limit),
        }
    }

    fn dark(self, v: f64) -> bool {
        match self {
            Scale::Sequential { max } => v / max > 0.6,
            Scale::Diverging { limit } => v.abs() / limit > 0.6,
        }
    }
}

const CELL_W: usize = 64;
const CELL_H: usize = 28;
const LEFT: usize = 110;
const TOP: usize = 96;

impl Heatmap {
    fn svg(&self) -> String {
        let width = LEFT + CELL_W * self.cols.len() + 16;
        let height = TOP + CELL_H * self.rows.len() + 16;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
        );
        let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="8" y="18" font-size="13">{}</text>"#,
            escape(&self.title)
        );
        if !self.axis.is_empty() {
            let _ = writeln!(s, r#"<text x="8" y="{}">{}</text>"#, TOP - 6, escape(&self.axis));
        }
        for (j, c) in self.cols.iter().enumerate() {
            let x = LEFT + j * CELL_W + CELL_W / 2;
            let y = TOP - 6;
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" transform="rotate(-40 {x} {y})">{}</text>"#,
                escape(c)
            );
        }
        for (i, r) in self.rows.iter().enumerate() {
            let y = TOP + i * CELL_H + CELL_H / 2 + 4;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
                LEFT - 6,
                escape(r)
            );
        }
        for (i, row) in self.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let (x, y) = (LEFT + j * CELL_W, TOP + i * CELL_H);
                let (cx, cy) = (x + CELL_W / 2, y + CELL_H / 2 + 4);
                match v {
                    Some(v) => {
                        let text = if self.integer_text {
                            format!("{}", v.round() as i64)
                        } else {
                            format2(*v)
                        };
                        let ink = if self.scale.dark(*v) { "#ffffff" } else { "#000000" };
                        let _ = writeln!(
                            s,
                            r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="#cccccc"/>"##,
                            self.scale.fill(*v)
                        );
                        let _ = writeln!(
                            s,
                            r#"<text x="{cx}" y="{cy}" text-anchor="middle" fill="{ink}">{text}</text>"#
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#ffffff" stroke="#cccccc"/>"##
                        );
                        if self.cross_missing {
                            s.push_str(&cross(x, y, "no-data", "#000000"));
                        } else {
                            let _ = writeln!(
                                s,
                                r##"<text x="{cx}" y="{cy}" text-anchor="middle" fill="#888888">n/a</text>"##
                            );
                        }
                    }
                }
                if self.marker == Some((i, j)) {
                    s.push_str(&cross(x, y, "marker", "#d62728"));
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn cross(x: usize, y: usize, class: &str, colour: &str) -> String {
    let (x0, y0, x1, y1) = (x + 6, y + 4, x + CELL_W - 6, y + CELL_H - 4);
    format!(
        r#"<path class="{class}" d="M{x0} {y0}L{x1} {y1}M{x0} {y1}L{x1} {y0}" stroke="{colour}" stroke-width="2"/>"#
    ) + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_by_one() -> EvalMatrix {
        EvalMatrix {
            metric: Metric::Acc,
            condition: "raw".into(),
            row_names: vec!["adm".into()],
            col_names: vec!["adm".into()],
            values: vec![vec![Some(100.0)]],
        }
    }

    #[test]
    fn matrix_csv() {
        let text = String::from_utf8(emit_report(ReportItem::Matrix(&one_by_one()), ReportFormat::Csv)).unwrap();
        assert_eq!(text, "train\\eval,adm\nadm,100.00\n");
    }

    #[test]
    fn svg_is_deterministic() {
        let m = one_by_one();
        let a = emit_report(ReportItem::Matrix(&m), ReportFormat::Svg);
        assert_eq!(a, emit_report(ReportItem::Matrix(&m), ReportFormat::Svg));
        assert!(String::from_utf8(a).unwrap().contains(">100.00</text>"));
    }

    #[test]
    fn one_no_data_cross() {
        let g = IntervalGrid {
            bin_width: 50,
            max_edge: 100,
            values: vec![
                vec![Some(90.0), Some(100.0), Some(50.0)],
                vec![Some(10.0), None, Some(0.0)],
                vec![Some(1.0), Some(2.0), Some(3.0)],
            ],
            counts: vec![vec![1; 3]; 3],
            marker: Some((2, 2)),
        };
        let svg = String::from_utf8(emit_report(ReportItem::Grid(&g), ReportFormat::Svg)).unwrap();
        assert_eq!(svg.matches(r#"class="no-data""#).count(), 1);
        assert_eq!(svg.matches(r#"class="marker""#).count(), 1);
        let csv = String::from_utf8(emit_report(ReportItem::Grid(&g), ReportFormat::Csv)).unwrap();
        assert!(csv.contains(",NO_DATA,"));
        assert!(csv.ends_with(",3.00|MARKER\n"));
    }

    #[test]
    fn labels_are_escaped() {
        let mut m = one_by_one();
        m.row_names = vec!["a<b&c".into()];
        let svg = String::from_utf8(emit_report(ReportItem::Matrix(&m), ReportFormat::Svg)).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
    }
}
