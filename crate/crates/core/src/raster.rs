//! Pixel-coverage rasterization of thick line segments.
//!
//! Raster coordinates put the origin at the top-left corner with rows growing
//! downward; pixel `(col, row)` covers `[col, col+1) × [row, row+1)`. A math
//! point `(x, y)` in an image of height `H` sits at raster `(x, H - y)`.

use crate::graph::Point;

/// Samples per pixel axis used to estimate coverage.
pub const SUPERSAMPLE: usize = 4;

pub fn to_raster(p: Point, height: f64) -> (f64, f64) {
    (p.x, height - p.y)
}

/// Raster pixel containing math point `p`.
pub fn pixel_of(p: Point, height: f64) -> (i64, i64) {
    let (rx, ry) = to_raster(p, height);
    (rx.floor() as i64, ry.floor() as i64)
}

fn dist_sq_to_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (px - cx) * (px - cx) + (py - cy) * (py - cy)
}

/// Visits every pixel of a `cols × rows` grid touched by the stroke of the
/// given `width` around segment `a`–`b` (raster coordinates), passing the
/// covered fraction of the pixel in `(0, 1]`.
pub fn stroke_segment(
    a: (f64, f64),
    b: (f64, f64),
    width: f64,
    cols: usize,
    rows: usize,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let half = width / 2.0;
    let half2 = half * half;
    let c0 = (a.0.min(b.0) - half).floor().max(0.0);
    let c1 = (a.0.max(b.0) + half).ceil().min(cols as f64);
    let r0 = (a.1.min(b.1) - half).floor().max(0.0);
    let r1 = (a.1.max(b.1) + half).ceil().min(rows as f64);
    if c0 >= c1 || r0 >= r1 {
        return;
    }
    let step = 1.0 / SUPERSAMPLE as f64;
    let total = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for row in r0 as usize..r1 as usize {
        for col in c0 as usize..c1 as usize {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                let py = row as f64 + (sy as f64 + 0.5) * step;
                for sx in 0..SUPERSAMPLE {
                    let px = col as f64 + (sx as f64 + 0.5) * step;
                    if dist_sq_to_segment(px, py, a, b) <= half2 {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                visit(col, row, hits as f64 / total);
            }
        }
    }
}

/// Filled disc, same conventions as [`stroke_segment`].
pub fn fill_disc(
    center: (f64, f64),
    radius: f64,
    cols: usize,
    rows: usize,
    visit: impl FnMut(usize, usize, f64),
) {
    stroke_segment(center, center, 2.0 * radius, cols, rows, visit);
}
