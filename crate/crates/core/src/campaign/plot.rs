//! Minimal SVG plots of campaign CSV columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::ls_slope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// Median of `y` per `x`, joined by a polyline.
    #[default]
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub group_by: Option<String>,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub kind: PlotKind,
    /// Annotate each series with `tau = -slope` of a least-squares fit,
    /// taken in natural-log units on log axes.
    #[serde(default)]
    pub fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesInfo {
    pub label: String,
    pub points: usize,
    pub tau: Option<f64>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Read `csv`, draw `spec`, and write the SVG to `out`. Nothing is written
/// when a column is missing or any series ends up empty.
pub fn emit_plot(csv: &Path, spec: &PlotSpec, out: &Path) -> Result<Vec<SeriesInfo>> {
    let mut rdr = csv::Reader::from_path(csv)?;
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::invalid(format!("column {name:?} not in {}", csv.display())))
    };
    let (xi, yi) = (find(&spec.x)?, find(&spec.y)?);
    let gi = spec.group_by.as_deref().map(find).transpose()?;

    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    // Group label -> every row seen (kept so empty groups are detected).
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let label = gi.map(|g| row[g].to_string()).unwrap_or_default();
        let entry = groups.entry(label).or_default();
        let (Ok(x), Ok(y)) = (row[xi].parse::<f64>(), row[yi].parse::<f64>()) else { continue };
        let (x, y) = (tx(x), ty(y));
        if x.is_finite() && y.is_finite() {
            entry.push((x, y));
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid("no rows to plot"));
    }
    if let Some((label, _)) = groups.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::invalid(format!("series {label:?} has no plottable points")));
    }

    let mut series = Vec::new();
    for (label, pts) in groups {
        let pts = match spec.kind {
            PlotKind::Scatter => pts,
            PlotKind::Line => {
                let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
                for (x, y) in pts {
                    // Order-preserving key for finite floats.
                    let key = if x >= 0.0 { x.to_bits() ^ (1 << 63) } else { !x.to_bits() };
                    by_x.entry(key).or_insert((x, Vec::new())).1.push(y);
                }
                by_x.into_values().map(|(x, mut ys)| (x, median(&mut ys))).collect()
            }
        };
        series.push((label, pts));
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, xml_escape(&spec.title));
    let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let lx = if spec.log_x { format!("1e{xv:.2}") } else { format!("{xv:.4}") };
        let ly = if spec.log_y { format!("1e{yv:.2}") } else { format!("{yv:.4}") };
        let _ = writeln!(svg, r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 4.0);
        let _ = writeln!(svg, r#"<text x="{px}" y="{}" text-anchor="middle">{lx}</text>"#, TOP + ph + 16.0);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{py}" x2="{LEFT}" y2="{py}" stroke="black"/>"#, LEFT - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{ly}</text>"#, LEFT - 6.0, py + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, xml_escape(&spec.x));
    let _ = writeln!(svg, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, TOP + ph / 2.0, TOP + ph / 2.0, xml_escape(&spec.y));

    let mut info = Vec::new();
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match spec.kind {
            PlotKind::Line => {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            }
            PlotKind::Scatter => {
                for &(x, y) in pts {
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#, sx(x), sy(y));
                }
            }
        }
        let tau = (spec.fit && pts.len() >= 2).then(|| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            let unit = |log: bool| if log { std::f64::consts::LN_10 } else { 1.0 };
            -ls_slope(&xs, &ys) * unit(spec.log_y) / unit(spec.log_x)
        });
        let mut legend = if label.is_empty() { spec.y.clone() } else { label.clone() };
        if let Some(t) = tau {
            legend.push_str(&format!("  τ = {t:.9}"));
        }
        let ly = TOP + 14.0 * i as f64 + 10.0;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="3" fill="{color}"/>"#, W - RIGHT + 8.0, ly - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{}</text>"#, W - RIGHT + 22.0, xml_escape(&legend));
        info.push(SeriesInfo { label: label.clone(), points: pts.len(), tau });
    }
    svg.push_str("</svg>\n");
    fs::write(out, svg).map_err(|e| Error::io(out, e))?;
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(fit: bool) -> PlotSpec {
        PlotSpec {
            x: "k".into(),
            y: "g".into(),
            group_by: Some("s".into()),
            log_x: false,
            log_y: true,
            title: "decay".into(),
            kind: PlotKind::Line,
            fit,
        }
    }

    #[test]
    fn one_polyline_per_series_with_fit() {
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("a.csv");
        let mut text = String::from("s,k,g\n");
        for k in 0..6 {
            text += &format!("a,{k},{}\nb,{k},{}\n", 10f64.powf(-0.5 * k as f64), 10f64.powf(-0.25 * k as f64));
        }
        fs::write(&csv, text).unwrap();
        let out = tmp.path().join("a.svg");
        let info = emit_plot(&csv, &spec(true), &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let ln10 = std::f64::consts::LN_10;
        assert!((info[0].tau.unwrap() - 0.5 * ln10).abs() < 1e-12);
        assert!((info[1].tau.unwrap() - 0.25 * ln10).abs() < 1e-12);
        assert!(svg.contains(&format!("τ = {:.9}", 0.5 * ln10)));
    }

    #[test]
    fn annotation_matches_decay_fit() {
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("p.csv");
        let g: Vec<f64> = (0..9).map(|k| 0.7 * 0.3f64.powi(k)).collect();
        let mut text = String::from("k,g\n");
        for (k, v) in g.iter().enumerate() {
            text += &format!("{k},{}\n", super::super::fmt_real(*v));
        }
        fs::write(&csv, text).unwrap();
        let s = PlotSpec { group_by: None, log_y: true, fit: true, ..spec(true) };
        let info = emit_plot(&csv, &s, &tmp.path().join("p.svg")).unwrap();
        let fit = crate::correlations::correlation_length_fit(&g, (0, 8)).unwrap();
        assert!((info[0].tau.unwrap() - fit.rate).abs() < 1e-6);
        assert!((fit.rate + 0.3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn empty_series_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("a.csv");
        fs::write(&csv, "s,k,g\na,1,0.5\nb,1,\n").unwrap();
        let out = tmp.path().join("a.svg");
        assert_eq!(emit_plot(&csv, &spec(false), &out).unwrap_err().exit_code(), 2);
        assert!(!out.exists());
        let mut s = spec(false);
        s.y = "missing".into();
        assert!(emit_plot(&csv, &s, &out).is_err());
    }
}
