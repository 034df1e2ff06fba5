//! Vertex precision and recall between a predicted and a ground-truth graph.
//!
//! Both graphs are first resampled so that no edge is longer than the
//! spacing, then vertices are matched greedily one-to-one by ascending
//! distance within the match radius.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Point, RoadGraph};

/// Relative slack so edges of exactly `spacing` are not split.
const SPACING_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(pred, truth)` indices into the resampled point sets.
    pub pairs: Vec<(usize, usize)>,
    pub r_match: f64,
}

impl MatchResult {
    /// Builds a result from raw counts, with no pair list.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        Self {
            tp,
            fp,
            fn_,
            pairs: Vec::new(),
            r_match: 0.0,
        }
    }
}

/// `TP / (TP + FP)`, or 1 with no predictions.
pub fn precision(m: &MatchResult) -> f64 {
    let d = m.tp + m.fp;
    if d == 0 {
        1.0
    } else {
        m.tp as f64 / d as f64
    }
}

/// `TP / (TP + FN)`, or 1 with no ground truth.
pub fn recall(m: &MatchResult) -> f64 {
    let d = m.tp + m.fn_;
    if d == 0 {
        1.0
    } else {
        m.tp as f64 / d as f64
    }
}

/// Original vertices plus evenly spaced interior points on every edge: an
/// edge of length `L` is cut into `ceil(L / spacing)` equal parts.
pub fn resample(graph: &RoadGraph, spacing: f64) -> Vec<Point> {
    let mut pts = graph.vertices().to_vec();
    for &(a, b) in graph.edges() {
        let (pa, pb) = (graph.vertex(a), graph.vertex(b));
        let parts = ((pa.distance(pb) / spacing) - SPACING_SLACK).ceil().max(1.0) as usize;
        for k in 1..parts {
            pts.push(pa.lerp(pb, k as f64 / parts as f64));
        }
    }
    pts
}

/// Greedy one-to-one matching of point sets: candidate pairs within
/// `r_match` are taken in order of distance, then predicted index, then
/// truth index.
pub fn match_points(pred: &[Point], truth: &[Point], r_match: f64) -> Result<MatchResult> {
    if !(r_match > 0.0 && r_match.is_finite()) {
        return Err(Error::config("match radius must be > 0"));
    }
    let cell = |p: Point| ((p.x / r_match).floor() as i64, (p.y / r_match).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (t, &p) in truth.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(t);
    }
    let r2 = r_match * r_match;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &p) in pred.iter().enumerate() {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &t in bucket {
                    let d2 = p.distance_sq(truth[t]);
                    if d2 <= r2 {
                        candidates.push((d2, i, t));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, i, t) in candidates {
        if !pred_used[i] && !truth_used[t] {
            pred_used[i] = true;
            truth_used[t] = true;
            pairs.push((i, t));
        }
    }
    let tp = pairs.len();
    Ok(MatchResult {
        tp,
        fp: pred.len() - tp,
        fn_: truth.len() - tp,
        pairs,
        r_match,
    })
}

/// Resamples both graphs at `spacing` and matches the points.
pub fn match_vertices(pred: &RoadGraph, truth: &RoadGraph, r_match: f64, spacing: f64) -> Result<MatchResult> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::config("resampling spacing must be > 0"));
    }
    match_points(&resample(pred, spacing), &resample(truth, spacing), r_match)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub result: MatchResult,
    /// Wall time of the search in seconds.
    pub seconds: f64,
}

fn row_cells(r: &ReportRow) -> [String; 4] {
    [
        r.model.clone(),
        format!("{:.1}", 100.0 * precision(&r.result)),
        format!("{:.1}", 100.0 * recall(&r.result)),
        format!("{:.1}", r.seconds / 60.0),
    ]
}

const HEADER: [&str; 4] = ["Model", "Precision", "Recall", "Time(minutes)"];

/// Tab-separated report: a header, then one row per run. Precision and
/// recall are percentages.
pub fn report_dsv(rows: &[ReportRow]) -> String {
    let mut s = HEADER.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&row_cells(r).join("\t"));
        s.push('\n');
    }
    s
}

/// The same report as an aligned text table.
pub fn report_table(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 4]> = rows.iter().map(row_cells).collect();
    let mut widths = HEADER.map(str::len);
    for c in &cells {
        for k in 0..4 {
            widths[k] = widths[k].max(c[k].len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, c: [&str; 4]| {
        writeln!(
            s,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            c[0],
            c[1],
            c[2],
            c[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )
        .expect("write to string");
    };
    line(&mut s, HEADER);
    let total: usize = widths.iter().sum::<usize>() + 6;
    s.push_str(&"-".repeat(total));
    s.push('\n');
    for c in &cells {
        line(&mut s, [&c[0], &c[1], &c[2], &c[3]]);
    }
    s
}
