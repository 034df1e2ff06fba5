//! Undirected road graphs in pixel coordinates and the `ROADGRAPH` text format.
//!
//! Coordinates use mathematical axes: `x` to the right, `y` up, angles
//! counterclockwise from `+x`. The flip to raster rows happens only when
//! touching pixels.
//!
//! File format:
//!
//! ```text
//! ROADGRAPH 1
//! V 0 10 20
//! V 1 22 20
//! E 0 1
//! ```
//!
//! Vertex ids are dense from 0 and listed in order; all `V` lines precede the
//! `E` lines. Coordinates are written in shortest round-trip form, so a
//! save/load cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    /// Direction of `other` seen from `self`, in `[0, 2π)`.
    pub fn angle_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).rem_euclid(std::f64::consts::TAU)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y) {
            return Err(Error::argument("bounding box min must not exceed max"));
        }
        Ok(Self { min, max })
    }

    /// The box `[0, width] × [0, height]`.
    pub fn from_size(width: f64, height: f64) -> Self {
        Self {
            min: Point::new(0.0, 0.0),
            max: Point::new(width, height),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadGraph {
    vertices: Vec<Point>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, p: Point) -> usize {
        self.vertices.push(p);
        self.adjacency.push(Vec::new());
        self.vertices.len() - 1
    }

    /// Adds the undirected edge `{a, b}`. Returns `false` if it already exists.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        let n = self.vertices.len();
        if a >= n || b >= n {
            return Err(Error::argument(format!("edge ({a},{b}) references missing vertex")));
        }
        if a == b {
            return Err(Error::argument(format!("self-loop at vertex {a}")));
        }
        if self.has_edge(a, b) {
            return Ok(false);
        }
        self.edges.push((a.min(b), a.max(b)));
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        Ok(true)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|adj| adj.contains(&b))
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    /// Edges as `(low, high)` index pairs in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Nearest vertex within `radius` (inclusive); ties go to the lowest index.
    pub fn nearest_within(&self, p: Point, radius: f64) -> Option<usize> {
        let r2 = radius * radius;
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d2 = v.distance_sq(p);
            if d2 <= r2 && best.is_none_or(|(_, b)| d2 < b) {
                best = Some((i, d2));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Connected components as sorted vertex lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for start in 0..self.vertices.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < comp.len() {
                for &nb in &self.adjacency[comp[k]] {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
                k += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn edge_length(&self, e: (usize, usize)) -> f64 {
        self.vertices[e.0].distance(self.vertices[e.1])
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut g = self.clone();
        for v in &mut g.vertices {
            v.x += dx;
            v.y += dy;
        }
        g
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("ROADGRAPH 1\n");
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(s, "V {i} {} {}", v.x, v.y).expect("write to string");
        }
        for (a, b) in &self.edges {
            writeln!(s, "E {a} {b}").expect("write to string");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
        match lines.next() {
            Some((_, "ROADGRAPH 1")) => {}
            Some((n, other)) => {
                return Err(Error::parse(n, format!("expected `ROADGRAPH 1`, found `{other}`")))
            }
            None => return Err(Error::parse(1, "empty graph file")),
        }
        let mut g = RoadGraph::new();
        let mut seen_edge = false;
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["V", id, x, y] => {
                    if seen_edge {
                        return Err(Error::parse(n, "vertex after edges"));
                    }
                    let id: usize = id.parse().map_err(|e| Error::parse(n, format!("id: {e}")))?;
                    if id != g.n_vertices() {
                        return Err(Error::parse(
                            n,
                            format!("vertex id {id} out of order (expected {})", g.n_vertices()),
                        ));
                    }
                    let x: f64 = x.parse().map_err(|e| Error::parse(n, format!("x: {e}")))?;
                    let y: f64 = y.parse().map_err(|e| Error::parse(n, format!("y: {e}")))?;
                    if !x.is_finite() || !y.is_finite() {
                        return Err(Error::parse(n, "non-finite coordinate"));
                    }
                    g.add_vertex(Point::new(x, y));
                }
                ["E", a, b] => {
                    seen_edge = true;
                    let a: usize = a.parse().map_err(|e| Error::parse(n, format!("id: {e}")))?;
                    let b: usize = b.parse().map_err(|e| Error::parse(n, format!("id: {e}")))?;
                    match g.add_edge(a, b) {
                        Ok(true) => {}
                        Ok(false) => return Err(Error::parse(n, "duplicate edge")),
                        Err(e) => return Err(Error::parse(n, e.to_string())),
                    }
                }
                _ => return Err(Error::parse(n, format!("unrecognized line `{line}`"))),
            }
        }
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edges_reject_loops_and_duplicates() {
        let mut g = RoadGraph::new();
        let a = g.add_vertex(Point::new(0.0, 0.0));
        let b = g.add_vertex(Point::new(1.0, 0.0));
        assert!(g.add_edge(a, b).unwrap());
        assert!(!g.add_edge(b, a).unwrap());
        assert!(g.add_edge(a, a).is_err());
        assert!(g.add_edge(a, 7).is_err());
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let mut g = RoadGraph::new();
        g.add_vertex(Point::new(-1.0, 0.0));
        g.add_vertex(Point::new(1.0, 0.0));
        assert_eq!(g.nearest_within(Point::new(0.0, 0.0), 1.0), Some(0));
        assert_eq!(g.nearest_within(Point::new(0.0, 0.0), 0.99), None);
        assert_eq!(g.nearest_within(Point::new(0.5, 0.0), 1.0), Some(1));
    }

    #[test]
    fn angle_convention() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(o.angle_to(Point::new(1.0, 0.0)), 0.0);
        let north = o.angle_to(Point::new(0.0, 1.0));
        assert!((north - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let south = o.angle_to(Point::new(0.0, -1.0));
        assert!((south - 1.5 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn text_format_is_exact() {
        let mut g = RoadGraph::new();
        g.add_vertex(Point::new(10.0, 20.0));
        g.add_vertex(Point::new(22.5, 20.0));
        g.add_edge(1, 0).unwrap();
        assert_eq!(g.to_text(), "ROADGRAPH 1\nV 0 10 20\nV 1 22.5 20\nE 0 1\n");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("GRAPH\n", 1),
            ("ROADGRAPH 1\nV 0 1 2\nV 2 1 2\n", 3),
            ("ROADGRAPH 1\nV 0 1 2\nE 0 0\n", 3),
            ("ROADGRAPH 1\nV 0 1 2\nV 1 3 4\nE 0 1\nE 1 0\n", 5),
            ("ROADGRAPH 1\nV 0 1 nope\n", 2),
            ("ROADGRAPH 1\nV 0 1 2\nE 0 1\n", 3),
            ("ROADGRAPH 1\nX\n", 2),
        ];
        for (text, line) in cases {
            match RoadGraph::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn components_split_disconnected_parts() {
        let mut g = RoadGraph::new();
        for i in 0..5 {
            g.add_vertex(Point::new(i as f64, 0.0));
        }
        g.add_edge(0, 2).unwrap();
        g.add_edge(3, 4).unwrap();
        assert_eq!(g.components(), vec![vec![0, 2], vec![1], vec![3, 4]]);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(
            pts in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..20),
            pairs in prop::collection::vec((0usize..20, 0usize..20), 0..30),
        ) {
            let mut g = RoadGraph::new();
            for (x, y) in &pts {
                g.add_vertex(Point::new(*x, *y));
            }
            for (a, b) in pairs {
                if a < pts.len() && b < pts.len() && a != b {
                    g.add_edge(a, b).unwrap();
                }
            }
            let back = RoadGraph::parse(&g.to_text()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
