//! Iterative graph construction: starting from `v0`, repeatedly ask a
//! decision function whether to walk a fixed distance `D` from the top of a
//! vertex stack or to pop it, until the stack is empty.
//!
//! Two additions to the bare loop keep it finite. A proposed vertex within
//! the snap radius of an existing vertex is merged into it: the edge is added
//! but nothing is pushed, and if the edge already exists (or would be a
//! self-loop) the step counts as a stop. The loop also halts when the step
//! budget runs out.

use std::fmt::Write as _;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::decision::{select_action, Action, DecisionOutput};
use crate::error::{Error, Result};
use crate::graph::{BBox, Point, RoadGraph};

/// Anything that can pick the next move. The image is the full raster; the
/// implementation crops whatever window it needs around `position`.
pub trait DecisionFn {
    fn decide(&mut self, graph: &RoadGraph, position: Point, image: &RgbImage) -> Result<DecisionOutput>;
}

impl<F> DecisionFn for F
where
    F: FnMut(&RoadGraph, Point, &RgbImage) -> DecisionOutput,
{
    fn decide(&mut self, graph: &RoadGraph, position: Point, image: &RgbImage) -> Result<DecisionOutput> {
        Ok(self(graph, position, image))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Step distance `D` in pixels.
    pub step_distance: f64,
    /// Walk threshold `T`.
    pub threshold: f64,
    /// Snap radius; `None` means `D / 2`.
    pub snap_radius: Option<f64>,
    pub step_budget: usize,
    /// Bounding box `B`; `None` means the image bounds.
    #[serde(skip)]
    pub bbox: Option<BBox>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            step_distance: 12.0,
            threshold: 0.3,
            snap_radius: None,
            step_budget: 100_000,
            bbox: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_distance > 0.0 && self.step_distance.is_finite()) {
            return Err(Error::config("step distance must be > 0"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("walk threshold must be in (0,1)"));
        }
        if let Some(r) = self.snap_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config("snap radius must be >= 0"));
            }
        }
        if self.step_budget == 0 {
            return Err(Error::config("step budget must be >= 1"));
        }
        Ok(())
    }

    pub fn snap_radius(&self) -> f64 {
        self.snap_radius.unwrap_or(self.step_distance / 2.0)
    }

    fn bbox_for(&self, image: &RgbImage) -> BBox {
        self.bbox
            .unwrap_or_else(|| BBox::from_size(image.width() as f64, image.height() as f64))
    }
}

/// `p + (D cos α, D sin α)`.
pub fn step_position(p: Point, distance: f64, angle: f64) -> Point {
    Point::new(p.x + distance * angle.cos(), p.y + distance * angle.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snap {
    Existing(usize),
    Fresh(Point),
}

pub fn snap(graph: &RoadGraph, u: Point, radius: f64) -> Snap {
    match graph.nearest_within(u, radius) {
        Some(i) => Snap::Existing(i),
        None => Snap::Fresh(u),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// A new vertex was added and pushed.
    Pushed(usize),
    /// An edge to an existing vertex was added; the stack is unchanged.
    Linked(usize),
    /// The stack top was popped.
    Popped,
}

/// One loop iteration: where the stack top was, what was decided, and what
/// happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub position: Point,
    pub action: Action,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub graph: RoadGraph,
    pub trace: Vec<TraceStep>,
    /// True if the loop stopped because the step budget ran out.
    pub budget_exhausted: bool,
}

/// One line per step: `<x> <y> <walk|stop> <alpha|->`.
pub fn trace_to_text(trace: &[TraceStep]) -> String {
    let mut s = String::new();
    for step in trace {
        let p = step.position;
        match step.action {
            Action::Walk { angle } => writeln!(s, "{} {} walk {}", p.x, p.y, angle),
            Action::Stop => writeln!(s, "{} {} stop -", p.x, p.y),
        }
        .expect("write to string");
    }
    s
}

pub fn search(
    image: &RgbImage,
    v0: Point,
    cfg: &SearchConfig,
    decide: &mut dyn DecisionFn,
) -> Result<SearchResult> {
    search_multi(image, &[v0], cfg, decide)
}

/// Runs the search from each seed in turn on one shared graph. A seed within
/// the snap radius of an existing vertex starts from that vertex.
pub fn search_multi(
    image: &RgbImage,
    seeds: &[Point],
    cfg: &SearchConfig,
    decide: &mut dyn DecisionFn,
) -> Result<SearchResult> {
    cfg.validate()?;
    let bbox = cfg.bbox_for(image);
    if let Some(p) = seeds.iter().find(|p| !bbox.contains(**p)) {
        return Err(Error::argument(format!(
            "start location ({}, {}) is outside the bounding box",
            p.x, p.y
        )));
    }
    let mut result = SearchResult {
        graph: RoadGraph::new(),
        trace: Vec::new(),
        budget_exhausted: false,
    };
    let mut budget = cfg.step_budget;
    for &seed in seeds {
        let start = match snap(&result.graph, seed, cfg.snap_radius()) {
            Snap::Existing(i) => i,
            Snap::Fresh(p) => result.graph.add_vertex(p),
        };
        if !run_from(image, start, cfg, &bbox, decide, &mut result, &mut budget)? {
            result.budget_exhausted = true;
            break;
        }
    }
    Ok(result)
}

/// Returns `false` if the budget ran out before the stack drained.
fn run_from(
    image: &RgbImage,
    start: usize,
    cfg: &SearchConfig,
    bbox: &BBox,
    decide: &mut dyn DecisionFn,
    result: &mut SearchResult,
    budget: &mut usize,
) -> Result<bool> {
    let graph = &mut result.graph;
    let mut stack = vec![start];
    let radius = cfg.snap_radius();
    while let Some(&top) = stack.last() {
        if *budget == 0 {
            return Ok(false);
        }
        *budget -= 1;
        let position = graph.vertex(top);
        let out = decide.decide(graph, position, image)?;
        let action = select_action(&out, cfg.threshold);
        let outcome = match action {
            Action::Stop => None,
            Action::Walk { angle } => {
                let u = step_position(position, cfg.step_distance, angle);
                if !bbox.contains(u) {
                    None
                } else {
                    match snap(graph, u, radius) {
                        Snap::Fresh(p) => {
                            let v = graph.add_vertex(p);
                            graph.add_edge(top, v)?;
                            stack.push(v);
                            Some(StepOutcome::Pushed(v))
                        }
                        Snap::Existing(k) if k != top && graph.add_edge(top, k)? => {
                            Some(StepOutcome::Linked(k))
                        }
                        Snap::Existing(_) => None,
                    }
                }
            }
        };
        let outcome = outcome.unwrap_or_else(|| {
            stack.pop();
            StepOutcome::Popped
        });
        result.trace.push(TraceStep {
            position,
            action,
            outcome,
        });
    }
    Ok(true)
}
