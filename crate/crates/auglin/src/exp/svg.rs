//! Standalone SVG line plots: per-group trial medians with shaded
//! inter-quartile bands, a legend, axis ticks, and optional log axes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::table::{median, quartiles, ResultsTable, TableError};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("nothing to plot: {0}")]
    Empty(String),
}

/// What to draw from a results table.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: String,
    pub ys: Vec<String>,
    pub group_by: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: String,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

struct Series {
    label: String,
    /// (x, q1, median, q3) sorted by x.
    points: Vec<(f64, f64, f64, f64)>,
}

fn collect_series(table: &ResultsTable, spec: &PlotSpec) -> Result<Vec<Series>, PlotError> {
    let xi = table.column_index(&spec.x)?;
    let gi = spec.group_by.as_deref().map(|g| table.column_index(g)).transpose()?;
    let mut series = Vec::new();
    for y in &spec.ys {
        let yi = table.column_index(y)?;
        // group label -> x -> trial values
        let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
        for row in &table.rows {
            let (Some(xv), Some(yv)) = (row[xi].as_f64(), row[yi].as_f64()) else { continue };
            if !xv.is_finite() || !yv.is_finite() {
                continue;
            }
            let group = match gi {
                Some(g) => row[g].to_string(),
                None => String::new(),
            };
            groups
                .entry(group)
                .or_default()
                .entry(xv.to_bits())
                .or_insert_with(|| (xv, Vec::new()))
                .1
                .push(yv);
        }
        for (group, by_x) in groups {
            let label = if group.is_empty() {
                y.clone()
            } else if spec.ys.len() == 1 {
                group
            } else {
                format!("{y} [{group}]")
            };
            let mut points: Vec<(f64, f64, f64, f64)> = by_x
                .values()
                .map(|(xv, vals)| {
                    let (q1, q3) = quartiles(vals);
                    (*xv, q1, median(vals), q3)
                })
                .collect();
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            series.push(Series { label, points });
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty("no finite data points in the selected columns".into()));
    }
    Ok(series)
}

fn axis_ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let lo_e = lo.floor() as i64;
        let hi_e = hi.ceil() as i64;
        return (lo_e..=hi_e).map(|e| e as f64).collect();
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64, log: bool) -> String {
    let shown = if log { 10f64.powf(v) } else { v };
    if shown != 0.0 && (shown.abs() >= 1e4 || shown.abs() < 1e-3) {
        format!("{shown:.1e}")
    } else {
        let s = format!("{shown:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render the plot to an SVG string.
pub fn render_svg(table: &ResultsTable, spec: &PlotSpec) -> Result<String, PlotError> {
    let series = collect_series(table, spec)?;
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in &series {
        for &(x, q1, m, q3) in &s.points {
            let xv = tx(x);
            if !xv.is_finite() {
                continue;
            }
            x_lo = x_lo.min(xv);
            x_hi = x_hi.max(xv);
            for v in [q1, m, q3] {
                let yv = ty(v);
                if yv.is_finite() {
                    y_lo = y_lo.min(yv);
                    y_hi = y_hi.max(yv);
                }
            }
        }
    }
    if !x_lo.is_finite() || !y_lo.is_finite() {
        return Err(PlotError::Empty("no representable points under the chosen axis scales".into()));
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        y_hi = y_lo + 1.0;
    }
    let pad_y = 0.05 * (y_hi - y_lo);
    y_lo -= pad_y;
    y_hi += pad_y;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |v: f64| MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |v: f64| MARGIN_T + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        xml_escape(&spec.title)
    )
    .unwrap();

    // Axes and ticks.
    writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for t in axis_ticks(x_lo, x_hi, spec.log_x) {
        if t < x_lo - 1e-9 || t > x_hi + 1e-9 {
            continue;
        }
        let x = sx(t);
        writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#cccccc"/>"##,
            MARGIN_T,
            MARGIN_T + plot_h
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h + 18.0,
            fmt_tick(t, spec.log_x)
        )
        .unwrap();
    }
    for t in axis_ticks(y_lo, y_hi, spec.log_y) {
        if t < y_lo - 1e-9 || t > y_hi + 1e-9 {
            continue;
        }
        let y = sy(t);
        writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#cccccc"/>"##,
            MARGIN_L + plot_w
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(t, spec.log_y)
        )
        .unwrap();
    }
    // Axis labels.
    let x_label = if spec.log_x { format!("{} (log)", spec.x) } else { spec.x.clone() };
    let y_label_text = spec.ys.join(", ");
    let y_label = if spec.log_y { format!("{y_label_text} (log)") } else { y_label_text };
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        xml_escape(&x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        xml_escape(&y_label)
    )
    .unwrap();

    // Series: IQR band then median polyline.
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<(f64, f64, f64, f64)> = s
            .points
            .iter()
            .filter(|(x, q1, m, q3)| {
                tx(*x).is_finite() && ty(*q1).is_finite() && ty(*m).is_finite() && ty(*q3).is_finite()
            })
            .cloned()
            .collect();
        if pts.is_empty() {
            continue;
        }
        if pts.len() > 1 {
            let mut band = String::new();
            for &(x, _, _, q3) in &pts {
                write!(band, "{:.2},{:.2} ", sx(tx(x)), sy(ty(q3))).unwrap();
            }
            for &(x, q1, _, _) in pts.iter().rev() {
                write!(band, "{:.2},{:.2} ", sx(tx(x)), sy(ty(q1))).unwrap();
            }
            writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                band.trim_end()
            )
            .unwrap();
        }
        let poly: Vec<String> =
            pts.iter().map(|&(x, _, m, _)| format!("{:.2},{:.2}", sx(tx(x)), sy(ty(m)))).collect();
        if poly.len() == 1 {
            let (x, _, m, _) = pts[0];
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(tx(x)),
                sy(ty(m))
            )
            .unwrap();
        } else {
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                poly.join(" ")
            )
            .unwrap();
        }
    }

    // Legend.
    let legend_x = MARGIN_L + plot_w + 12.0;
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let y = MARGIN_T + 14.0 + 20.0 * idx as f64;
        writeln!(
            svg,
            r#"<rect x="{legend_x:.1}" y="{:.1}" width="14" height="4" fill="{color}" class="legend"/>"#,
            y - 4.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            legend_x + 20.0,
            xml_escape(&s.label)
        )
        .unwrap();
    }

    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

/// Render and write the plot to `path`.
pub fn emit_plot(table: &ResultsTable, spec: &PlotSpec, path: &Path) -> Result<(), PlotError> {
    let svg = render_svg(table, spec)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::table::Cell;

    fn small_table() -> ResultsTable {
        let mut t = ResultsTable::new(vec!["x".into(), "y".into(), "g".into()]);
        for (x, y, g) in [
            (1.0, 2.0, "a"),
            (2.0, 3.0, "a"),
            (1.0, 1.0, "b"),
            (2.0, 0.5, "b"),
            (1.0, 4.0, "c"),
            (2.0, 5.0, "c"),
        ] {
            t.push_row(vec![x.into(), y.into(), Cell::text(g)]).unwrap();
        }
        t
    }

    #[test]
    fn single_series_two_points_one_polyline() {
        let mut t = ResultsTable::new(vec!["x".into(), "y".into()]);
        t.push_row(vec![1.0.into(), 2.0.into()]).unwrap();
        t.push_row(vec![3.0.into(), 4.0.into()]).unwrap();
        let spec = PlotSpec {
            x: "x".into(),
            ys: vec!["y".into()],
            group_by: None,
            log_x: false,
            log_y: false,
            title: "t".into(),
        };
        let svg = render_svg(&t, &spec).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let poly_line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        let vertices = poly_line.split_whitespace().filter(|s| s.contains(',')).count();
        assert_eq!(vertices, 2);
    }

    #[test]
    fn three_groups_three_legend_entries() {
        let spec = PlotSpec {
            x: "x".into(),
            ys: vec!["y".into()],
            group_by: Some("g".into()),
            log_x: false,
            log_y: false,
            title: "t".into(),
        };
        let svg = render_svg(&small_table(), &spec).unwrap();
        assert_eq!(svg.matches("class=\"legend\"").count(), 3);
    }

    #[test]
    fn log_x_only_affects_x_label() {
        let spec = PlotSpec {
            x: "x".into(),
            ys: vec!["y".into()],
            group_by: None,
            log_x: true,
            log_y: false,
            title: "t".into(),
        };
        let svg = render_svg(&small_table(), &spec).unwrap();
        assert!(svg.contains("x (log)"));
        assert!(!svg.contains("y (log)"));
    }

    #[test]
    fn log_axis_skips_nonpositive_values() {
        let mut t = ResultsTable::new(vec!["x".into(), "y".into()]);
        t.push_row(vec![1.0.into(), 0.0.into()]).unwrap();
        t.push_row(vec![2.0.into(), 4.0.into()]).unwrap();
        t.push_row(vec![3.0.into(), 8.0.into()]).unwrap();
        let spec = PlotSpec {
            x: "x".into(),
            ys: vec!["y".into()],
            group_by: None,
            log_x: false,
            log_y: true,
            title: "t".into(),
        };
        let svg = render_svg(&t, &spec).unwrap();
        // The zero point is dropped; the remaining two still form a polyline.
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn unknown_column_is_an_error() {
        let spec = PlotSpec {
            x: "nope".into(),
            ys: vec!["y".into()],
            group_by: None,
            log_x: false,
            log_y: false,
            title: "t".into(),
        };
        assert!(matches!(render_svg(&small_table(), &spec), Err(PlotError::Table(_))));
    }
}
