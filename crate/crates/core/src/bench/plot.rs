//! SVG scatter of a two-objective front.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

/// Reads the objective columns of an APF CSV (every column except
/// `lambda_star`).
pub fn read_front(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = (0..headers.len()).filter(|&i| &headers[i] != "lambda_star").collect();
    let names = cols.iter().map(|&i| headers[i].to_string()).collect();
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let p = cols
            .iter()
            .map(|&i| {
                rec[i].trim().parse::<f64>().map_err(|e| Error::Parse {
                    context: "front CSV".into(),
                    message: format!("row {}, column `{}`: {e}", line + 1, &headers[i]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(p);
    }
    Ok((names, points))
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else if lo != 0.0 { 0.1 * lo.abs() } else { 1.0 };
    (lo - pad, hi + pad)
}

/// Deterministic 800×600 scatter. Points are drawn in order of increasing
/// first objective.
pub fn render_svg(names: [&str; 2], points: &[(f64, f64)]) -> Result<String> {
    if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::domain(format!("cannot plot non-finite point {p:?}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (x0, x1) = range(pts.iter().map(|p| p.0));
    let (y0, y1) = range(pts.iter().map(|p| p.1));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for k in 0..=TICKS {
        let t = k as f64 / TICKS as f64;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (xp, yp) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{xp:.2}" y1="{:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{xp:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{xv:.4}</text>"#,
            TOP + ph + 20.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{yp:.2}" x2="{LEFT:.2}" y2="{yp:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{yv:.4}</text>"#,
            LEFT - 8.0,
            yp + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 20.0,
        escape(names[0])
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(names[1])
    );
    if pts.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="16" text-anchor="middle">no feasible points</text>"#,
            LEFT + pw / 2.0,
            TOP + ph / 2.0
        );
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the front stored in `apf_csv` to `out_svg`.
pub fn emit_plot(apf_csv: impl AsRef<Path>, out_svg: impl AsRef<Path>) -> Result<()> {
    let (names, points) = read_front(&fs::read_to_string(apf_csv)?)?;
    if names.len() != 2 {
        return Err(Error::domain(format!(
            "the front has {} objective columns; only 2 can be plotted, read the CSV directly instead",
            names.len()
        )));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    fs::write(out_svg, render_svg([&names[0], &names[1]], &pts)?)?;
    Ok(())
}
