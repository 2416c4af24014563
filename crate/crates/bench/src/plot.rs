//! Regret curves as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dynabo_core::{Error, Result};

use crate::stats::{mean, stderr};

/// Mean regret per iteration with a ± stderr band.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    /// `(iteration, mean, stderr)`.
    pub points: Vec<(f64, f64, f64)>,
}

fn bad(msg: String) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

/// Reads curves from any of the three result tables: a single run
/// (`iteration,incumbent_loss,regret`), an experiment's long table (grouped
/// by `method`, averaged over seeds), or an experiment summary
/// (`method,iteration,mean_regret,stderr_regret,runs`).
pub fn read_curves(csv_text: &str) -> Result<Vec<Curve>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let iteration = col("iteration").ok_or_else(|| bad("missing `iteration` column".into()))?;
    let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec.get(i)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| bad(format!("bad number in row {:?}", rec.position().map(|p| p.line()))))
    };

    let mut grouped: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut direct: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let summary = col("mean_regret").zip(col("stderr_regret"));
    let method = col("method");
    let regret = col("regret");
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let label = method.and_then(|m| rec.get(m)).unwrap_or("run").to_string();
        let t = num(&rec, iteration)?;
        if let Some((m, s)) = summary {
            direct.entry(label).or_default().push((t, num(&rec, m)?, num(&rec, s)?));
        } else {
            let r = regret.ok_or_else(|| bad("missing `regret` column".into()))?;
            grouped.entry(label).or_default().entry(t as u64).or_default().push(num(&rec, r)?);
        }
    }
    let mut curves: Vec<Curve> = direct
        .into_iter()
        .map(|(label, points)| Curve { label, points })
        .collect();
    curves.extend(grouped.into_iter().map(|(label, by_t)| Curve {
        label,
        points: by_t
            .into_iter()
            .map(|(t, v)| (t as f64, mean(&v), stderr(&v)))
            .collect(),
    }));
    if curves.is_empty() {
        return Err(bad("no rows to plot".into()));
    }
    Ok(curves)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Renders curves on a log-scaled regret axis.
pub fn render_svg(curves: &[Curve], title: &str) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let floor = 1e-6;
    let lg = |v: f64| v.max(floor).log10();

    let all = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, m, s) in all {
        x0 = x0.min(t);
        x1 = x1.max(t);
        y0 = y0.min(lg(m - s).min(lg(m)));
        y1 = y1.max(lg(m + s));
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let px = |t: f64| left + (t - x0) / (x1 - x0) * (w - left - right);
    let py = |v: f64| top + (y1 - lg(v)) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="15">{}</text>"#, left, escape(title));
    for k in (y0 as i32)..=(y1 as i32) {
        let y = py(10f64.powi(k));
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" x2=\"{}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{k}</text>",
            w - right,
            left - 6.0,
            y + 4.0
        );
    }
    let ticks = 5;
    for i in 0..=ticks {
        let t = x0 + (x1 - x0) * i as f64 / ticks as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            px(t),
            h - bottom + 18.0,
            t
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#,
        (left + w - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">regret</text>"#,
        (top + h - bottom) / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for &(t, m, e) in &c.points {
            let _ = write!(band, "{:.1},{:.1} ", px(t), py(m + e));
        }
        for &(t, m, e) in c.points.iter().rev() {
            let _ = write!(band, "{:.1},{:.1} ", px(t), py(m - e));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = c.points.iter().map(|&(t, m, _)| format!("{:.1},{:.1}", px(t), py(m))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            line.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
