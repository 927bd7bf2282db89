//! Artifact writers: CSV tables, JSON reports and small SVG line plots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use bess_core::data::Window;
use bess_core::dispatch::DispatchSolution;
use bess_core::lifetime::WindowRecord;
use serde::Serialize;

use crate::CliError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub const DISPATCH_HEADER: &str =
    "step,pv_dc_kw,load_ac_kw,price_eur_kwh,p_fp,p_tp,p_fpac,p_tpac,p_fg,p_tg,p_fs,p_ts,soc_kwh";

pub fn dispatch_csv(window: &Window, solution: &DispatchSolution) -> String {
    let mut out = String::from(DISPATCH_HEADER);
    out.push('\n');
    for (k, s) in solution.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{},{},{},{},{},{},{}",
            window.pv_dc[k],
            window.load_ac[k],
            window.price[k],
            s.p_fp,
            s.p_tp,
            s.p_fpac,
            s.p_tpac,
            s.p_fg,
            s.p_tg,
            s.p_fs,
            s.p_ts,
            s.soc
        );
    }
    out
}

pub const WINDOW_LOG_HEADER: &str = "window,data_offset,start_years,soc_start_kwh,e_b_start_kwh,c_bd_start,objective_eur,optimal,imported_kwh,exported_kwh,discharged_kwh,charged_kwh,baseline_import_kwh,savings_eur,cycles,cycle_degradation,calendar_degradation,f_b,loss,e_b_kwh,c_bd,soc_end_kwh";

pub fn window_log_row(w: &WindowRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        w.window,
        w.data_offset,
        w.start_years,
        w.soc_start,
        w.e_b_start,
        w.c_bd_start,
        w.objective,
        w.optimal,
        w.imported_kwh,
        w.exported_kwh,
        w.discharged_kwh,
        w.charged_kwh,
        w.baseline_import_kwh,
        w.savings_eur,
        w.cycle_count,
        w.cycle_degradation,
        w.calendar_degradation,
        w.f_b,
        w.loss,
        w.e_b,
        w.c_bd,
        w.soc_end
    )
}

/// Streams the window log as the simulation runs.
pub struct WindowLog {
    out: std::io::BufWriter<std::fs::File>,
}

impl WindowLog {
    pub fn create(path: &Path, existing: &[WindowRecord]) -> Result<Self, CliError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut log = Self {
            out: std::io::BufWriter::new(file),
        };
        log.line(WINDOW_LOG_HEADER)?;
        for w in existing {
            log.push(w)?;
        }
        Ok(log)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}").map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn push(&mut self, w: &WindowRecord) -> Result<(), CliError> {
        self.line(&window_log_row(w))
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// One named series for [`line_plot`].
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// A plain SVG line chart with axis ranges fitted to the data.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{M} {} L{} {} M{M} {} L{M} {M}" stroke="black" fill="none"/>"#,
        H - M,
        W - M,
        H - M,
        H - M
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{}</text>"#, px(v), H - M + 16.0, fmt_tick(v));
    }
    for v in [y0, y1] {
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, M - 6.0, py(v) + 4.0, fmt_tick(v));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(svg, r##"<path d="M{M} {z:.1} L{} {z:.1}" stroke="#999" stroke-dasharray="4 3"/>"##, W - M, z = py(0.0));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(j, &(x, y))| format!("{}{:.1} {:.1}", if j == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        let _ = writeln!(svg, r#"<path d="{}" stroke="{colour}" stroke-width="2" fill="none"/>"#, d.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - M - 120.0,
            M + 16.0 * i as f64,
            escape(s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of weighted cycle counts per depth-of-discharge decile.
pub fn dod_histogram(title: &str, counts: &[f64]) -> String {
    let points = counts.iter().enumerate().map(|(i, &c)| (10.0 * i as f64 + 5.0, c)).collect();
    line_plot(title, "depth of discharge, %", "weighted cycles", &[Series { name: "cycles", points }])
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
