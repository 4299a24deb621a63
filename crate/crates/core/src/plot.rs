//! SVG pictures of a two-dimensional latent grid colored by cell class.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::CubicalGrid;
use crate::morse::CellClass;

pub fn fill_color(class: CellClass) -> &'static str {
    match class {
        CellClass::G => "#1b7837",
        CellClass::RoaG => "#a6dba0",
        CellClass::U => "#542788",
        CellClass::RoaU => "#c2a5cf",
        CellClass::Undecided => "#fee08b",
        CellClass::Invalid => "#ffffff",
    }
}

/// One `<rect>` per cell in the unit square (second axis pointing up) plus
/// an optional polyline per overlay, given in grid coordinates.
pub fn render_roa(
    grid: &CubicalGrid,
    labels: &[CellClass],
    overlays: &[Vec<[f64; 2]>],
) -> Result<String> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "plotting needs a 2-dimensional grid, got {}",
            grid.dim()
        )));
    }
    if labels.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.num_cells(),
            found: labels.len(),
        });
    }
    let (lo, hi) = (grid.lower(), grid.upper());
    let sx = |x: f64| (x - lo[0]) / (hi[0] - lo[0]);
    let sy = |y: f64| (hi[1] - y) / (hi[1] - lo[1]);
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\" width=\"512\" height=\"512\" shape-rendering=\"crispEdges\">\n",
    );
    for (cell, &label) in labels.iter().enumerate() {
        let (a, b) = grid.cell_bounds(cell);
        let (x0, x1) = (sx(a[0]), sx(b[0]));
        let (y0, y1) = (sy(b[1]), sy(a[1]));
        writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            x1 - x0,
            y1 - y0,
            fill_color(label)
        )
        .unwrap();
    }
    for line in overlays {
        let pts: Vec<String> = line
            .iter()
            .map(|p| format!("{},{}", sx(p[0]), sy(p[1])))
            .collect();
        writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.003\"/>",
            pts.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}
