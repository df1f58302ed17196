//! CSV tables and log-log SVG charts of study records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use super::RunRecord;
use crate::coefficients::Wavenumber;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to write")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `10` for real k, `5+2i` / `5-2i` otherwise.
pub fn format_k(k: Wavenumber) -> String {
    let v = k.value();
    if v.im == 0.0 {
        format!("{}", v.re)
    } else if v.im > 0.0 {
        format!("{}+{}i", v.re, v.im)
    } else {
        format!("{}-{}i", v.re, -v.im)
    }
}

pub fn csv_file_name(p: usize, k: Wavenumber) -> String {
    format!("data_p{p}_k{}.csv", format_k(k))
}

pub fn plot_file_name(p: usize) -> String {
    format!("plot_p{p}.svg")
}

pub const CSV_HEADER: &str = "# dofs,N_k,rel_error,h,quasiopt,delta_k,assemble_s,solve_s";

fn group(records: &[RunRecord]) -> Vec<((usize, Wavenumber), Vec<&RunRecord>)> {
    let mut out: Vec<((usize, Wavenumber), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(key, _)| key.0 == r.p && key.1 == r.k) {
            Some((_, v)) => v.push(r),
            None => out.push(((r.p, r.k), vec![r])),
        }
    }
    for (_, v) in &mut out {
        v.sort_by_key(|r| r.level);
    }
    out
}

/// CSV body for one (p, k) series, rows in level order.
pub fn csv_text(series: &[&RunRecord]) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in series {
        let q = r
            .quasiopt
            .map_or_else(|| "nan".to_string(), |q| format!("{q:.10e}"));
        let _ = writeln!(
            s,
            "{},{:.10e},{:.10e},{:.10e},{},{:.10e},{:.6e},{:.6e}",
            r.dofs, r.n_k, r.rel_error, r.h, q, r.delta_k, r.assemble_seconds, r.solve_seconds
        );
    }
    s
}

/// Writes one `data_p{p}_k{k}.csv` per (p, k) pair into `dir` and returns the paths.
pub fn emit_csv(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut paths = Vec::new();
    for ((p, k), series) in group(records) {
        let path = dir.join(csv_file_name(p, k));
        std::fs::write(&path, csv_text(&series)).map_err(io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct LogAxis {
    lo: f64,
    hi: f64,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v.log10() - self.lo) / (self.hi - self.lo)
    }

    /// Powers of ten inside the range, or the range ends when there are none.
    fn ticks(&self) -> Vec<f64> {
        let t: Vec<f64> = (self.lo.ceil() as i32..=self.hi.floor() as i32)
            .map(|e| 10f64.powi(e))
            .collect();
        if t.is_empty() {
            vec![10f64.powf(self.lo), 10f64.powf(self.hi)]
        } else {
            t
        }
    }
}

fn tick_label(v: f64) -> String {
    let e = v.log10();
    if (e - e.round()).abs() < 1e-9 {
        format!("1e{}", e.round() as i32)
    } else {
        format!("{v:.3}")
    }
}

/// Log-log chart of relative error against `N_k`, one polyline per k, with a
/// dashed slope `−p` guide through the last point of the first drawn series.
pub fn plot_svg(records: &[RunRecord]) -> String {
    let groups = group(records);
    let mut drawn: Vec<(Wavenumber, Vec<&RunRecord>)> = Vec::new();
    for ((p, k), series) in groups {
        if series.len() < 2 {
            warn!(
                "p={p} k={}: fewer than two points, series skipped",
                format_k(k)
            );
            continue;
        }
        drawn.push((k, series));
    }
    drawn.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).expect("finite"));
    let p = records.first().map_or(1, |r| r.p);
    let guide = drawn.first().map(|(_, s)| {
        let first = s.first().expect("nonempty");
        let last = s.last().expect("nonempty");
        let c = last.rel_error * last.n_k.powi(p as i32);
        let x0 = first.n_k;
        ((x0, c / x0.powi(p as i32)), (last.n_k, last.rel_error))
    });

    let xs = drawn.iter().flat_map(|(_, s)| s.iter().map(|r| r.n_k));
    let ys = drawn
        .iter()
        .flat_map(|(_, s)| s.iter().map(|r| r.rel_error))
        .chain(guide.iter().flat_map(|(a, b)| [a.1, b.1]));
    let (xa, ya) = (LogAxis::new(xs), LogAxis::new(ys));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + xa.frac(v) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(t)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">DOFs per wavelength</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">rel. error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut legend_y = TOP + 10.0;
    let legend_x = LEFT + pw + 15.0;
    for (i, (k, series)) in drawn.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.n_k), py(r.rel_error)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for r in series {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(r.n_k),
                py(r.rel_error)
            );
        }
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">k = {}</text>"#,
            legend_x + 20.0,
            legend_x + 26.0,
            legend_y + 4.0,
            format_k(*k)
        );
        legend_y += 18.0;
    }
    if let Some((a, b)) = guide {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6,4"/>"#,
            px(a.0),
            py(a.1),
            px(b.0),
            py(b.1)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="black" stroke-dasharray="6,4"/><text x="{:.2}" y="{:.2}">O(h^{p})</text>"#,
            legend_x + 20.0,
            legend_x + 26.0,
            legend_y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes [`plot_svg`] to `path`; records should share one `p`.
pub fn emit_plot(records: &[RunRecord], path: &Path) -> Result<(), ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    std::fs::write(path, plot_svg(records)).map_err(io(path))
}

/// One plot per `p` in `records`, named [`plot_file_name`], inside `dir`.
pub fn emit_plots(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut by_p: BTreeMap<usize, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        by_p.entry(r.p).or_default().push(r.clone());
    }
    let mut paths = Vec::new();
    for (p, recs) in by_p {
        let path = dir.join(plot_file_name(p));
        emit_plot(&recs, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
