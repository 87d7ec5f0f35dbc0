//! `results.csv`, `aggregate.csv` and per-dataset SVG line charts.
//!
//! One chart is written per (dataset, width): an absolute-metric panel and a
//! relative-improvement panel, x on a log2 axis whose ticks are the sizes
//! present in the results, one line per family with a ±1 std band.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{aggregate, write_aggregate_csv, write_results_csv, AggregateRow, ExperimentResult};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub family: String,
    pub absolute: Vec<Point>,
    pub relative: Vec<Point>,
}

/// Chart content before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub dataset: String,
    pub hidden_dim: usize,
    pub metric_name: String,
    pub x_ticks: Vec<usize>,
    pub series: Vec<Series>,
}

impl Chart {
    pub fn file_name(&self) -> String {
        let safe: String = self
            .dataset
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        format!("{safe}_h{}.svg", self.hidden_dim)
    }
}

/// Group aggregate rows into charts. Single-network rows (size 1) are
/// baselines, not plotted points.
pub fn build_charts(rows: &[AggregateRow]) -> Vec<Chart> {
    let mut charts: Vec<Chart> = Vec::new();
    for r in rows.iter().filter(|r| r.size > 1) {
        let idx = match charts
            .iter()
            .position(|c| c.dataset == r.dataset && c.hidden_dim == r.hidden_dim)
        {
            Some(i) => i,
            None => {
                charts.push(Chart {
                    dataset: r.dataset.clone(),
                    hidden_dim: r.hidden_dim,
                    metric_name: r.metric_name.clone(),
                    x_ticks: Vec::new(),
                    series: Vec::new(),
                });
                charts.len() - 1
            }
        };
        let chart = &mut charts[idx];
        if !chart.x_ticks.contains(&r.size) {
            chart.x_ticks.push(r.size);
        }
        let s = match chart.series.iter().position(|s| s.family == r.family) {
            Some(i) => &mut chart.series[i],
            None => {
                chart.series.push(Series {
                    family: r.family.clone(),
                    absolute: Vec::new(),
                    relative: Vec::new(),
                });
                chart.series.last_mut().expect("just pushed")
            }
        };
        s.absolute.push(Point {
            x: r.size,
            mean: r.metric_mean,
            std: r.metric_std,
        });
        s.relative.push(Point {
            x: r.size,
            mean: r.relative_mean,
            std: r.relative_std,
        });
    }
    for c in &mut charts {
        c.x_ticks.sort_unstable();
        for s in &mut c.series {
            s.absolute.sort_by_key(|p| p.x);
            s.relative.sort_by_key(|p| p.x);
        }
    }
    charts
}

struct Axes {
    left: f64,
    top: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Axes {
    fn new(left: f64, top: f64, ticks: &[usize], points: &[&[Point]]) -> Self {
        let lx: Vec<f64> = ticks.iter().map(|&t| (t as f64).log2()).collect();
        let (mut x_lo, mut x_hi) = (lx[0], lx[lx.len() - 1]);
        if x_hi - x_lo < 1e-9 {
            x_lo -= 1.0;
            x_hi += 1.0;
        }
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for p in points.iter().flat_map(|s| s.iter()) {
            y_lo = y_lo.min(p.mean - p.std);
            y_hi = y_hi.max(p.mean + p.std);
        }
        let pad = ((y_hi - y_lo) * 0.08).max(1e-6 * y_hi.abs().max(1.0));
        Axes {
            left,
            top,
            x_lo,
            x_hi,
            y_lo: y_lo - pad,
            y_hi: y_hi + pad,
        }
    }

    fn px(&self, x: usize) -> f64 {
        let t = ((x as f64).log2() - self.x_lo) / (self.x_hi - self.x_lo);
        self.left + MARGIN + t * (PANEL_W - 1.5 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let t = (y - self.y_lo) / (self.y_hi - self.y_lo);
        self.top + PANEL_H - MARGIN - t * (PANEL_H - 1.5 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn panel(out: &mut String, chart: &Chart, left: f64, title: &str, pick: fn(&Series) -> &[Point]) {
    let pts: Vec<&[Point]> = chart.series.iter().map(pick).collect();
    let ax = Axes::new(left, 30.0, &chart.x_ticks, &pts);
    let (x0, x1) = (left + MARGIN, left + PANEL_W - MARGIN / 2.0);
    let (y0, y1) = (ax.py(ax.y_lo), ax.py(ax.y_hi));
    let _ = writeln!(out, r#"<g class="panel" data-panel="{}">"#, escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(title)
    );
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#);
    for &t in &chart.x_ticks {
        let x = ax.px(t);
        let _ = writeln!(
            out,
            r#"<g class="xtick"><line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{t}</text></g>"#,
            y0 + 4.0,
            y0 + 17.0
        );
    }
    for i in 0..=4 {
        let v = ax.y_lo + (ax.y_hi - ax.y_lo) * i as f64 / 4.0;
        let y = ax.py(v);
        let _ = writeln!(
            out,
            r#"<g class="ytick"><line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text></g>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let p = pick(s);
        let mut band = String::new();
        for q in p {
            let _ = write!(band, "{:.2},{:.2} ", ax.px(q.x), ax.py(q.mean + q.std));
        }
        for q in p.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", ax.px(q.x), ax.py(q.mean - q.std));
        }
        let line: String = p
            .iter()
            .map(|q| format!("{:.2},{:.2}", ax.px(q.x), ax.py(q.mean)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            r#"<g class="series" data-family="{}"><polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/><polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/></g>"#,
            escape(&s.family),
            band.trim_end()
        );
    }
    for (k, s) in chart.series.iter().enumerate() {
        let y = 30.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-size="11" fill="{}">{}</text>"#,
            x1 - 90.0,
            PALETTE[k % PALETTE.len()],
            escape(&s.family)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

pub fn render_svg(chart: &Chart) -> String {
    let mut out = String::new();
    let width = 2.0 * PANEL_W + 20.0;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif">"#,
        PANEL_H + 20.0
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let x_label = format!("{} (hidden {}), size", chart.dataset, chart.hidden_dim);
    panel(&mut out, chart, 0.0, &format!("{}: {}", x_label, chart.metric_name), |s| &s.absolute);
    panel(&mut out, chart, PANEL_W + 20.0, &format!("{x_label}: relative improvement (%)"), |s| {
        &s.relative
    });
    out.push_str("</svg>\n");
    out
}

/// Write `results.csv`, `aggregate.csv` and the charts into `out_dir`.
/// Returns the written paths.
pub fn emit_reports(results: &[ExperimentResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let path = out_dir.join("results.csv");
    write_results_csv(results, &path)?;
    written.push(path);
    let rows = aggregate(results)?;
    let path = out_dir.join("aggregate.csv");
    write_aggregate_csv(&rows, &path)?;
    written.push(path);
    for chart in build_charts(&rows) {
        let path = out_dir.join(chart.file_name());
        fs::write(&path, render_svg(&chart))?;
        written.push(path);
    }
    Ok(written)
}

/// Re-aggregate an existing `results.csv` and rewrite the derived files.
pub fn report_from_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let results = crate::experiment::read_results_csv(&dir.join("results.csv"))?;
    emit_reports(&results, dir)
}
