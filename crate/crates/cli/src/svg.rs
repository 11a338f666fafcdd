// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Static line plots drawn from the same rows as the CSV.

use std::fmt::Write;

use crate::table::Table;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG document for `table.plot`, or `None` when the table has no plot or
/// no finite points.
pub fn render(table: &Table) -> Option<String> {
    let plot = table.plot.as_ref()?;
    let xs = table.values(&plot.x);
    let tf = |v: f64| if plot.log_y { v.log10() } else { v };
    let groups: Vec<(String, Vec<bool>)> = match &plot.group {
        None => vec![(String::new(), vec![true; xs.len()])],
        Some(g) => {
            let keys = table.texts(g);
            let mut seen: Vec<String> = Vec::new();
            for k in &keys {
                if !seen.contains(k) {
                    seen.push(k.clone());
                }
            }
            seen.into_iter()
                .map(|k| {
                    let mask = keys.iter().map(|x| *x == k).collect();
                    (format!(" {g}={k}"), mask)
                })
                .collect()
        }
    };
    let mut series: Vec<(String, Vec<Option<(f64, f64)>>)> = Vec::new();
    for name in &plot.ys {
        let ys = table.values(name);
        for (suffix, mask) in &groups {
            let pts = xs
                .iter()
                .zip(&ys)
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|((x, y), _)| match (x, y) {
                    (Some(x), Some(y)) if y.is_finite() && (!plot.log_y || *y > 0.0) => Some((*x, tf(*y))),
                    _ => None,
                })
                .collect();
            series.push((format!("{name}{suffix}"), pts));
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().flatten().copied()).collect();
    if all.is_empty() {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            label(t)
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = py(t);
        let text = if plot.log_y { format!("1e{}", label(t)) } else { label(t) };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        esc(&plot.x)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        esc(&plot.y_label)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        // gaps (empty cells) split the curve
        for run in pts.split(|p| p.is_none()) {
            if run.is_empty() {
                continue;
            }
            let coords: Vec<String> = run
                .iter()
                .flatten()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if coords.len() == 1 {
                let _ = writeln!(s, r#"<circle cx="{}" r="2" fill="{color}"/>"#, coords[0].replacen(',', "\" cy=\"", 1));
            } else {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    coords.join(" ")
                );
            }
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = LEFT + pw + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            name = esc(name)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{col, Cell, Plot};

    #[test]
    fn gaps_split_polylines() {
        let mut t = Table::new("t", vec![col("x", "", ""), col("y", "", "")]);
        for (x, y) in [(0.0, Some(1.0)), (1.0, Some(2.0)), (2.0, None), (3.0, Some(1.0)), (4.0, Some(0.5))] {
            t.push(vec![Cell::Num(x), Cell::opt(y)]);
        }
        t.plot = Some(Plot {
            x: "x".into(),
            ys: vec!["y".into()],
            y_label: "y".into(),
            log_y: false,
            group: None,
        });
        let doc = render(&t).unwrap();
        assert_eq!(doc.matches("<polyline").count(), 2);
        assert!(doc.starts_with("<svg"));
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(-1.5, 2.0);
        assert!(t.contains(&0.0));
        assert!(t.iter().all(|v| (-1.5..=2.0).contains(v)));
    }
}
