//! Deterministic CSV and SVG emitters for wafer maps.
//!
//! Everything here is pure string construction: fixed element ordering,
//! fixed number formatting, no timestamps, so identical inputs produce
//! byte-identical documents.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::WaferField;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("heatmap needs at least one cell")]
    EmptyHeatmap,
    #[error("non-finite cell value at ({x_mm}, {y_mm}): {value}")]
    NonFiniteCell { x_mm: f64, y_mm: f64, value: f64 },
}

/// One die-sized patch of a wafer map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub x_mm: f64,
    pub y_mm: f64,
    pub value: f64,
}

/// Wafer field as heatmap cells, in the field's own (y-major) order.
pub fn field_cells(field: &WaferField) -> Vec<HeatmapCell> {
    field
        .iter()
        .map(|(x_mm, y_mm, value)| HeatmapCell { x_mm, y_mm, value })
        .collect()
}

/// Wafer field as CSV with an `x_mm,y_mm,value` header. Floats use the
/// shortest representation that round-trips, so re-parsing is exact.
pub fn field_csv(field: &WaferField) -> String {
    let mut out = String::from("x_mm,y_mm,value\n");
    for (x, y, v) in field.iter() {
        writeln!(out, "{x},{y},{v}").expect("string write");
    }
    out
}

const CELL_PX: f64 = 12.0;
const MARGIN_PX: f64 = 10.0;
const LEGEND_PX: f64 = 46.0;
const COLOR_LOW: [u8; 3] = [33, 102, 172];
const COLOR_HIGH: [u8; 3] = [178, 24, 43];

fn lerp_color(t: f64) -> String {
    let c: Vec<u8> = COLOR_LOW
        .iter()
        .zip(COLOR_HIGH)
        .map(|(&lo, hi)| (lo as f64 + (hi as f64 - lo as f64) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Smallest gap between distinct coordinates; the cell pitch of the map.
/// Falls back to 1 mm for a single row or column.
fn pitch(mut coords: Vec<f64>) -> f64 {
    coords.sort_by(f64::total_cmp);
    coords.dedup();
    let min_gap = coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() {
        min_gap
    } else {
        1.0
    }
}

/// Render positioned values as an SVG heatmap: one rect per cell, a
/// linear color scale with min/max legend, stable element order. When
/// all values coincide the scale is degenerate; cells take the low color
/// and the legend is replaced by a note.
pub fn render_heatmap(cells: &[HeatmapCell], value_label: &str) -> Result<String, ReportError> {
    if cells.is_empty() {
        return Err(ReportError::EmptyHeatmap);
    }
    for c in cells {
        if !(c.x_mm.is_finite() && c.y_mm.is_finite() && c.value.is_finite()) {
            return Err(ReportError::NonFiniteCell {
                x_mm: c.x_mm,
                y_mm: c.y_mm,
                value: c.value,
            });
        }
    }
    let mut sorted: Vec<HeatmapCell> = cells.to_vec();
    sorted.sort_by(|a, b| {
        b.y_mm
            .total_cmp(&a.y_mm)
            .then(a.x_mm.total_cmp(&b.x_mm))
    });
    let min = sorted.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let max = sorted.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let px = pitch(sorted.iter().map(|c| c.x_mm).collect());
    let py = pitch(sorted.iter().map(|c| c.y_mm).collect());
    let min_x = sorted.iter().map(|c| c.x_mm).fold(f64::INFINITY, f64::min);
    let max_x = sorted.iter().map(|c| c.x_mm).fold(f64::NEG_INFINITY, f64::max);
    let min_y = sorted.iter().map(|c| c.y_mm).fold(f64::INFINITY, f64::min);
    let max_y = sorted.iter().map(|c| c.y_mm).fold(f64::NEG_INFINITY, f64::max);
    let cols = ((max_x - min_x) / px).round() as u64 + 1;
    let rows = ((max_y - min_y) / py).round() as u64 + 1;
    let width = MARGIN_PX * 2.0 + cols as f64 * CELL_PX;
    let height = MARGIN_PX * 2.0 + rows as f64 * CELL_PX + LEGEND_PX;
    let degenerate = max == min;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">"
    )
    .expect("string write");
    writeln!(svg, "  <title>{}</title>", xml_escape(value_label)).expect("string write");
    writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>"
    )
    .expect("string write");
    for c in &sorted {
        let gx = MARGIN_PX + ((c.x_mm - min_x) / px).round() * CELL_PX;
        let gy = MARGIN_PX + ((max_y - c.y_mm) / py).round() * CELL_PX;
        let fill = if degenerate {
            lerp_color(0.0)
        } else {
            lerp_color((c.value - min) / (max - min))
        };
        writeln!(
            svg,
            "  <rect class=\"cell\" x=\"{gx:.1}\" y=\"{gy:.1}\" width=\"{CELL_PX:.1}\" \
             height=\"{CELL_PX:.1}\" fill=\"{fill}\"><title>({}, {}) {}</title></rect>",
            c.x_mm, c.y_mm, c.value
        )
        .expect("string write");
    }
    let legend_y = MARGIN_PX + rows as f64 * CELL_PX + 14.0;
    if degenerate {
        writeln!(
            svg,
            "  <text x=\"{MARGIN_PX:.1}\" y=\"{:.1}\" font-family=\"monospace\" \
             font-size=\"11\">uniform value {} ({}): degenerate color scale</text>",
            legend_y + 11.0,
            min,
            xml_escape(value_label)
        )
        .expect("string write");
    } else {
        let swatches = 10;
        for i in 0..swatches {
            let t = i as f64 / (swatches - 1) as f64;
            writeln!(
                svg,
                "  <rect class=\"legend\" x=\"{:.1}\" y=\"{legend_y:.1}\" width=\"14.0\" \
                 height=\"10.0\" fill=\"{}\"/>",
                MARGIN_PX + i as f64 * 14.0,
                lerp_color(t)
            )
            .expect("string write");
        }
        writeln!(
            svg,
            "  <text x=\"{MARGIN_PX:.1}\" y=\"{:.1}\" font-family=\"monospace\" \
             font-size=\"11\">{} min {} max {}</text>",
            legend_y + 24.0,
            xml_escape(value_label),
            min,
            max
        )
        .expect("string write");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
