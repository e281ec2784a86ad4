//! Experiment reports and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{write_file, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BoundKind {
    Upper,
    Oracle,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Upper => "UPPER",
            BoundKind::Oracle => "ORACLE",
        }
    }
}

/// One measured value. `param` is the x coordinate in charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub metric: String,
    pub param: f64,
    pub value: f64,
    pub kind: BoundKind,
    pub err: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub title: String,
    pub notes: Vec<String>,
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: [&str; 7] = ["instance", "metric", "param", "value", "kind", "err", "seed"];

impl ExperimentReport {
    pub fn new(title: impl Into<String>) -> Self {
        ExperimentReport { title: title.into(), ..Self::default() }
    }

    pub fn push(&mut self, instance: &str, metric: &str, param: f64, value: f64, kind: BoundKind, err: f64, seed: u64) {
        self.rows.push(ReportRow {
            instance: instance.to_string(),
            metric: metric.to_string(),
            param,
            value,
            kind,
            err,
            seed,
        });
    }

    /// Rows with the given metric, in report order.
    pub fn metric(&self, metric: &str) -> impl Iterator<Item = &ReportRow> + '_ {
        let metric = metric.to_string();
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.instance.clone(),
                r.metric.clone(),
                r.param.to_string(),
                r.value.to_string(),
                r.kind.as_str().to_string(),
                r.err.to_string(),
                r.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// Line chart with one polyline per metric, `param` on the x axis.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 48.0;
        const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
        let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.rows {
            series.entry(&r.metric).or_default().push((r.param, r.value));
        }
        let finite = self.rows.iter().filter(|r| r.param.is_finite() && r.value.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
        for r in finite {
            x0 = x0.min(r.param);
            x1 = x1.max(r.param);
            y0 = y0.min(r.value);
            y1 = y1.max(r.value);
        }
        if !x0.is_finite() {
            (x0, x1, y1) = (0.0, 1.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
            H - PAD,
            W - PAD
        );
        let _ = writeln!(out, r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">{x0}</text>"#, H - PAD + 16.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{x1}</text>"#, W - PAD, H - PAD + 16.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{y0}</text>"#, PAD - 4.0, H - PAD);
        let _ = writeln!(out, r#"<text x="{}" y="{PAD}" font-family="sans-serif" font-size="11" text-anchor="end">{y1}</text>"#, PAD - 4.0);
        for (k, (name, pts)) in series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let coords: Vec<String> = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline data-metric="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                escape(name),
                coords.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                W - PAD + 4.0 - 120.0,
                PAD + 14.0 * k as f64,
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Writes `<stem>.csv|json|svg` into `dir` and returns the paths written.
pub fn emit_report(report: &ExperimentReport, formats: &[Format], dir: &Path, stem: &str) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Write { path: dir.into(), source })?;
    let mut written = Vec::new();
    for f in formats {
        let (ext, body) = match f {
            Format::Csv => ("csv", report.to_csv()),
            Format::Json => ("json", report.to_json()),
            Format::Svg => ("svg", report.to_svg()),
        };
        let path = dir.join(format!("{stem}.{ext}"));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(ExperimentReport::new("t").to_csv(), "instance,metric,param,value,kind,err,seed\n");
    }

    #[test]
    fn one_row_in_declared_order() {
        let mut r = ExperimentReport::new("t");
        r.push("c4", "box_eq", 2.0, 0.25, BoundKind::Upper, 0.0, 7);
        let csv = r.to_csv();
        assert_eq!(csv.lines().nth(1), Some("c4,box_eq,2,0.25,UPPER,0,7"));
        assert_eq!(csv.lines().count(), 2);
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn svg_has_one_polyline_per_metric() {
        let mut r = ExperimentReport::new("t");
        for k in 0..3 {
            r.push("a", "box_eq", k as f64, 0.1, BoundKind::Upper, 0.0, 0);
            r.push("a", "box_quot", k as f64, 0.05, BoundKind::Upper, 0.0, 0);
        }
        assert_eq!(r.to_svg().matches("<polyline").count(), 2);
        assert_eq!(r.to_svg(), r.to_svg());
    }

    #[test]
    fn emit_writes_every_format() {
        let dir = tempfile::tempdir().unwrap();
        let r = ExperimentReport::new("t");
        let paths = emit_report(&r, &[Format::Csv, Format::Json, Format::Svg], dir.path(), "x").unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|p| p.exists()));
    }
}
