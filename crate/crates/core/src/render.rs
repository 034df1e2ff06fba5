//! Graph overlays drawn on top of a map raster.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RoadGraph;
use crate::raster::{stroke_segment, to_raster};

pub const YELLOW: [u8; 3] = [255, 255, 0];
pub const GREEN: [u8; 3] = [0, 200, 0];
pub const RED: [u8; 3] = [230, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub color: [u8; 3],
    pub width: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            color: YELLOW,
            width: 2.0,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::config("stroke width must be > 0"));
        }
        Ok(())
    }
}

/// Strokes every edge of `graph` onto `image`, blending by pixel coverage.
pub fn draw_graph(image: &mut RgbImage, graph: &RoadGraph, style: &RenderStyle) -> Result<()> {
    style.validate()?;
    let (cols, rows) = (image.width() as usize, image.height() as usize);
    let h = rows as f64;
    let mut coverage = vec![0.0f64; cols * rows];
    for &(a, b) in graph.edges() {
        let pa = to_raster(graph.vertex(a), h);
        let pb = to_raster(graph.vertex(b), h);
        stroke_segment(pa, pb, style.width, cols, rows, |c, r, cov| {
            let slot = &mut coverage[r * cols + c];
            *slot = slot.max(cov);
        });
    }
    for (i, &cov) in coverage.iter().enumerate() {
        if cov == 0.0 {
            continue;
        }
        let px = image.get_pixel_mut((i % cols) as u32, (i / cols) as u32);
        let mut out = [0u8; 3];
        for k in 0..3 {
            let v = px.0[k] as f64 * (1.0 - cov) + style.color[k] as f64 * cov;
            out[k] = v.round().clamp(0.0, 255.0) as u8;
        }
        *px = Rgb(out);
    }
    Ok(())
}

/// Copy of `image` with `graph` drawn on it.
pub fn render_overlay(image: &RgbImage, graph: &RoadGraph, style: &RenderStyle) -> Result<RgbImage> {
    let mut out = image.clone();
    draw_graph(&mut out, graph, style)?;
    Ok(out)
}

/// Ground truth in green and the prediction in red, on one copy of `image`.
pub fn render_comparison(image: &RgbImage, truth: &RoadGraph, predicted: &RoadGraph, width: f64) -> Result<RgbImage> {
    let mut out = image.clone();
    draw_graph(&mut out, truth, &RenderStyle { color: GREEN, width })?;
    draw_graph(&mut out, predicted, &RenderStyle { color: RED, width })?;
    Ok(out)
}
