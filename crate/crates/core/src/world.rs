//! Procedurally generated maps: a planar road graph grown by branching random
//! walks, painted over a noisy background with clutter (trees, water,
//! shadows), plus an oracle that labels tracing decisions from the ground
//! truth.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RecordMeta};
use crate::decision::{angle_bin, encode_input, DecisionConfig, DecisionLabel, DecisionOutput};
use crate::error::{Error, Result};
use crate::graph::{Point, RoadGraph};
use crate::raster::{fill_disc, stroke_segment, to_raster};
use crate::search::{search_multi, DecisionFn, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Palette {
    pub background: [u8; 3],
    pub field: [u8; 3],
    pub road: [u8; 3],
    pub tree: [u8; 3],
    pub water: [u8; 3],
    pub shadow: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [78, 112, 60],
            field: [128, 116, 76],
            road: [228, 226, 214],
            tree: [34, 72, 38],
            water: [56, 92, 150],
            shadow: [52, 54, 60],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    /// Side length in pixels.
    pub size: u32,
    pub seed: u64,
    /// Expected number of road trunks per 512×512 pixels.
    pub density: f64,
    /// Per-step probability of spawning a side road.
    pub branch_prob: f64,
    /// Largest heading change per step, radians.
    pub curvature: f64,
    pub road_width: f64,
    /// Clutter amount in `[0,1]`.
    pub noise: f64,
    /// Length of every generated road segment; also the tracing step `D`.
    pub segment: f64,
    pub palette: Palette,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            size: 512,
            seed: 0,
            density: 5.0,
            branch_prob: 0.08,
            curvature: 0.15,
            road_width: 5.0,
            noise: 0.5,
            segment: 12.0,
            palette: Palette::default(),
        }
    }
}

impl WorldSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.segment > 0.0 && self.segment.is_finite()) {
            return Err(Error::config("segment length must be > 0"));
        }
        if (self.size as f64) < 4.0 * self.segment {
            return Err(Error::config("world size must be at least 4 segment lengths"));
        }
        if !(self.road_width >= 1.0 && self.road_width.is_finite()) {
            return Err(Error::config("road width must be >= 1"));
        }
        for (name, p) in [("branch_prob", self.branch_prob), ("noise", self.noise)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must be in [0,1]")));
            }
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(Error::config("density must be >= 0"));
        }
        if !(self.curvature >= 0.0 && self.curvature <= FRAC_PI_2) {
            return Err(Error::config("curvature must be in [0, pi/2]"));
        }
        let p = &self.palette;
        if [p.background, p.field, p.tree, p.water, p.shadow].contains(&p.road) {
            return Err(Error::config("clutter colours must differ from the road colour"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub graph: RoadGraph,
    pub image: RgbImage,
}

const CLEARANCE: f64 = 1.2;
const MAX_JOIN: f64 = 1.4;
const MIN_ROAD_STEPS: usize = 2;

pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let graph = grow_roads(spec, &mut rng);
    let image = paint(spec, &graph, &mut rng);
    Ok(World { graph, image })
}

struct Walker {
    from: usize,
    heading: f64,
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn grow_roads(spec: &WorldSpec, rng: &mut ChaCha8Rng) -> RoadGraph {
    let size = spec.size as f64;
    let step = spec.segment;
    let margin = step;
    let inside = |p: Point| p.x >= margin && p.x <= size - margin && p.y >= margin && p.y <= size - margin;
    let mut g = RoadGraph::new();

    let expected = spec.density * (size / 512.0).powi(2);
    let mut trunks = expected.floor() as usize;
    if rng.random::<f64>() < expected.fract() {
        trunks += 1;
    }
    let max_steps = (2.0 * size / step) as usize;

    for _ in 0..trunks {
        let start = (0..30).find_map(|_| {
            let p = Point::new(
                rng.random_range(margin..=size - margin),
                rng.random_range(margin..=size - margin),
            );
            g.nearest_within(p, 2.0 * step).is_none().then_some(p)
        });
        let Some(start) = start else { continue };
        let heading = rng.random_range(0.0..TAU);
        // Grow both directions; the start vertex is only kept if a side survives.
        let s = g.add_vertex(start);
        let mut queue = vec![
            Walker { from: s, heading },
            Walker {
                from: s,
                heading: heading + PI,
            },
        ];
        while let Some(walker) = queue.pop() {
            let spawned = walk_road(&mut g, walker, spec, max_steps, &inside, rng);
            queue.extend(spawned);
        }
    }
    prune_isolated(&g)
}

/// Grows one road from `walker.from`. The road is committed only if it has at
/// least `MIN_ROAD_STEPS` segments or ends in a junction.
fn walk_road(
    g: &mut RoadGraph,
    walker: Walker,
    spec: &WorldSpec,
    max_steps: usize,
    inside: &dyn Fn(Point) -> bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Walker> {
    let step = spec.segment;
    let mut path: Vec<Point> = Vec::new();
    let mut headings: Vec<f64> = Vec::new();
    let mut join: Option<usize> = None;
    let mut heading = walker.heading;
    let mut current = g.vertex(walker.from);

    for _ in 0..max_steps {
        heading += rng.random_range(-spec.curvature..=spec.curvature);
        let u = Point::new(current.x + step * heading.cos(), current.y + step * heading.sin());
        if !inside(u) {
            break;
        }
        let current_id = if path.is_empty() { Some(walker.from) } else { None };
        // Nearest committed vertex too close to u (other than the current one).
        let clash = g
            .vertices()
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != current_id)
            .map(|(i, p)| (i, p.distance(u)))
            .filter(|(_, d)| *d < CLEARANCE * step)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let self_clash = path.len() >= 2
            && path[..path.len() - 1]
                .iter()
                .any(|p| p.distance(u) < CLEARANCE * step);
        if let Some((k, _)) = clash {
            let adjacent = current_id.is_some_and(|c| c == k || g.has_edge(c, k));
            let d = g.vertex(k).distance(current);
            if !adjacent && !self_clash && d <= MAX_JOIN * step && !crosses(g, current, g.vertex(k), current_id, Some(k)) {
                join = Some(k);
            }
            break;
        }
        if self_clash || crosses(g, current, u, current_id, None) {
            break;
        }
        path.push(u);
        headings.push(heading);
        current = u;
    }

    if path.len() < MIN_ROAD_STEPS && join.is_none() {
        return Vec::new();
    }
    let mut prev = walker.from;
    let mut spawned = Vec::new();
    for (p, h) in path.into_iter().zip(headings) {
        let v = g.add_vertex(p);
        g.add_edge(prev, v).expect("fresh vertex");
        prev = v;
        if rng.random::<f64>() < spec.branch_prob {
            let side = if rng.random::<bool>() { FRAC_PI_2 } else { -FRAC_PI_2 };
            spawned.push(Walker {
                from: v,
                heading: h + side,
            });
        }
    }
    if let Some(k) = join {
        if prev != k {
            let _ = g.add_edge(prev, k);
        }
    }
    spawned
}

fn crosses(g: &RoadGraph, a: Point, b: Point, a_id: Option<usize>, b_id: Option<usize>) -> bool {
    g.edges().iter().any(|&(p, q)| {
        let touches = |id: Option<usize>| id.is_some_and(|i| i == p || i == q);
        !touches(a_id) && !touches(b_id) && segments_cross(a, b, g.vertex(p), g.vertex(q))
    })
}

/// Drops vertices without edges, renumbering the rest in order.
fn prune_isolated(g: &RoadGraph) -> RoadGraph {
    let mut map = vec![usize::MAX; g.n_vertices()];
    let mut out = RoadGraph::new();
    for (i, p) in g.vertices().iter().enumerate() {
        if !g.neighbors(i).is_empty() {
            map[i] = out.add_vertex(*p);
        }
    }
    for &(a, b) in g.edges() {
        out.add_edge(map[a], map[b]).expect("valid edge");
    }
    out
}

fn paint(spec: &WorldSpec, graph: &RoadGraph, rng: &mut ChaCha8Rng) -> RgbImage {
    let n = spec.size as usize;
    let h = spec.size as f64;
    let pal = &spec.palette;
    let mut canvas: Vec<[f64; 3]> = vec![to_f(pal.background); n * n];

    let blend = |canvas: &mut Vec<[f64; 3]>, c: usize, r: usize, cov: f64, color: [f64; 3]| {
        let px = &mut canvas[r * n + c];
        for k in 0..3 {
            px[k] = px[k] * (1.0 - cov) + color[k] * cov;
        }
    };

    let area = (spec.size as f64 / 512.0).powi(2);
    let scale = |k: f64| (k * spec.noise * area).round() as usize;

    // fields
    for _ in 0..scale(10.0) {
        let c = (rng.random_range(0.0..h), rng.random_range(0.0..h));
        let r = rng.random_range(20.0..60.0);
        fill_disc(c, r, n, n, |x, y, cov| blend(&mut canvas, x, y, cov * 0.6, to_f(pal.field)));
    }
    // water: a few wide meandering strokes
    for _ in 0..scale(2.0) {
        let mut p = (rng.random_range(0.0..h), rng.random_range(0.0..h));
        let mut heading = rng.random_range(0.0..TAU);
        let width = rng.random_range(6.0..14.0);
        for _ in 0..40 {
            heading += rng.random_range(-0.3..0.3);
            let q = (p.0 + 15.0 * heading.cos(), p.1 + 15.0 * heading.sin());
            stroke_segment(p, q, width, n, n, |x, y, cov| blend(&mut canvas, x, y, cov, to_f(pal.water)));
            p = q;
        }
    }
    // tree clusters
    for _ in 0..scale(40.0) {
        let c = (rng.random_range(0.0..h), rng.random_range(0.0..h));
        for _ in 0..rng.random_range(3..12) {
            let o = (c.0 + rng.random_range(-12.0..12.0), c.1 + rng.random_range(-12.0..12.0));
            let r = rng.random_range(2.0..6.0);
            fill_disc(o, r, n, n, |x, y, cov| blend(&mut canvas, x, y, cov, to_f(pal.tree)));
        }
    }
    // building shadows
    for _ in 0..scale(20.0) {
        let a = (rng.random_range(0.0..h), rng.random_range(0.0..h));
        let b = (a.0 + rng.random_range(-10.0..10.0), a.1 + rng.random_range(-10.0..10.0));
        let w = rng.random_range(3.0..8.0);
        stroke_segment(a, b, w, n, n, |x, y, cov| blend(&mut canvas, x, y, cov * 0.8, to_f(pal.shadow)));
    }
    // per-pixel grain
    let amp = 6.0 + 18.0 * spec.noise;
    for px in canvas.iter_mut() {
        let d = rng.random_range(-amp..=amp);
        for v in px.iter_mut() {
            *v += d + rng.random_range(-3.0..=3.0);
        }
    }

    let mut coverage = vec![0.0f64; n * n];
    for &(a, b) in graph.edges() {
        let pa = to_raster(graph.vertex(a), h);
        let pb = to_raster(graph.vertex(b), h);
        stroke_segment(pa, pb, spec.road_width, n, n, |x, y, cov| {
            let slot = &mut coverage[y * n + x];
            *slot = slot.max(cov);
        });
    }

    let road = to_f(pal.road);
    let mut img = RgbImage::new(spec.size, spec.size);
    for (i, px) in canvas.iter().enumerate() {
        let cov = coverage[i];
        let mut rgb = [0u8; 3];
        for k in 0..3 {
            rgb[k] = (px[k] * (1.0 - cov) + road[k] * cov).round().clamp(0.0, 255.0) as u8;
        }
        if cov < 1.0 && rgb == pal.road {
            rgb[0] = rgb[0].wrapping_sub(1);
        }
        img.put_pixel((i % n) as u32, (i / n) as u32, Rgb(rgb));
    }
    img
}

fn to_f(c: [u8; 3]) -> [f64; 3] {
    [c[0] as f64, c[1] as f64, c[2] as f64]
}

/// Ground truth plus per-edge flags marking segments already traced.
#[derive(Debug, Clone)]
pub struct OracleContext {
    truth: RoadGraph,
    covered: Vec<bool>,
    /// Edge ids incident to each vertex.
    incident: Vec<Vec<usize>>,
    snap_radius: f64,
    angle_bins: usize,
}

impl OracleContext {
    pub fn new(truth: RoadGraph, snap_radius: f64, angle_bins: usize) -> Self {
        let mut incident = vec![Vec::new(); truth.n_vertices()];
        for (e, &(a, b)) in truth.edges().iter().enumerate() {
            incident[a].push(e);
            incident[b].push(e);
        }
        Self {
            covered: vec![false; truth.n_edges()],
            truth,
            incident,
            snap_radius,
            angle_bins,
        }
    }

    pub fn truth(&self) -> &RoadGraph {
        &self.truth
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    /// The uncovered edge to follow from `position`, with its angle bin.
    fn choose(&self, position: Point) -> Option<(usize, usize)> {
        let k = self.truth.nearest_within(position, self.snap_radius)?;
        self.incident[k]
            .iter()
            .filter(|&&e| !self.covered[e])
            .map(|&e| {
                let (a, b) = self.truth.edges()[e];
                let far = if a == k { b } else { a };
                (angle_bin(position.angle_to(self.truth.vertex(far)), self.angle_bins), e)
            })
            .min()
    }

    /// Label for `position` without changing coverage.
    pub fn peek(&self, position: Point) -> DecisionLabel {
        match self.choose(position) {
            Some((bin, _)) => DecisionLabel::Walk { bin },
            None => DecisionLabel::Stop,
        }
    }

    /// Label for `position`; a walk marks the chosen edge as covered.
    pub fn oracle_decision(&mut self, position: Point) -> DecisionLabel {
        match self.choose(position) {
            Some((bin, e)) => {
                self.covered[e] = true;
                DecisionLabel::Walk { bin }
            }
            None => DecisionLabel::Stop,
        }
    }
}

impl DecisionFn for OracleContext {
    fn decide(&mut self, _graph: &RoadGraph, position: Point, _image: &RgbImage) -> Result<DecisionOutput> {
        let bins = self.angle_bins;
        Ok(match self.oracle_decision(position) {
            DecisionLabel::Walk { bin } => DecisionOutput::certain(Some(bin), bins),
            DecisionLabel::Stop => DecisionOutput::certain(None, bins),
        })
    }
}

/// One start point per connected component: a dead end if it has one,
/// otherwise its lowest-numbered vertex.
pub fn component_seeds(graph: &RoadGraph) -> Vec<Point> {
    graph
        .components()
        .into_iter()
        .map(|comp| {
            let v = comp
                .iter()
                .copied()
                .find(|&v| graph.neighbors(v).len() == 1)
                .unwrap_or(comp[0]);
            graph.vertex(v)
        })
        .collect()
}

/// Search configuration matching a world: `D` equals the segment length.
pub fn oracle_search_config(spec: &WorldSpec) -> SearchConfig {
    SearchConfig {
        step_distance: spec.segment,
        ..SearchConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSetOptions {
    /// Kept samples per world after balancing; `None` keeps all.
    pub samples_per_world: Option<usize>,
    /// Extra samples per search step at positions jittered by up to
    /// `jitter_radius · D`, labelled without changing coverage.
    pub jitter_samples: usize,
    pub jitter_radius: f64,
    /// Samples at uniformly random positions per world.
    pub random_samples: usize,
    /// Largest walk:stop ratio kept.
    pub max_walk_ratio: f64,
    pub seed: u64,
}

impl Default for TrainingSetOptions {
    fn default() -> Self {
        Self {
            samples_per_world: None,
            jitter_samples: 3,
            jitter_radius: 0.35,
            random_samples: 100,
            max_walk_ratio: 3.0,
            seed: 0,
        }
    }
}

struct Recorder<'a> {
    oracle: OracleContext,
    cfg: &'a DecisionConfig,
    opts: &'a TrainingSetOptions,
    step: f64,
    world: usize,
    rng: ChaCha8Rng,
    out: Dataset,
    failure: Option<Error>,
}

impl Recorder<'_> {
    fn record(&mut self, graph: &RoadGraph, image: &RgbImage, p: Point, label: DecisionLabel) {
        if self.failure.is_some() {
            return;
        }
        let res = encode_input(image, graph, p, self.cfg).and_then(|input| {
            self.out.push(&input, label, RecordMeta { world: self.world, center: p })
        });
        if let Err(e) = res {
            self.failure = Some(e);
        }
    }
}

impl DecisionFn for Recorder<'_> {
    fn decide(&mut self, graph: &RoadGraph, position: Point, image: &RgbImage) -> Result<DecisionOutput> {
        let (w, h) = (image.width() as f64, image.height() as f64);
        for _ in 0..self.opts.jitter_samples {
            let r = self.opts.jitter_radius * self.step * self.rng.random::<f64>().sqrt();
            let a = self.rng.random_range(0.0..TAU);
            let p = Point::new(
                (position.x + r * a.cos()).clamp(0.0, w),
                (position.y + r * a.sin()).clamp(0.0, h),
            );
            let label = self.oracle.peek(p);
            self.record(graph, image, p, label);
        }
        let label = self.oracle.oracle_decision(position);
        self.record(graph, image, position, label);
        let bins = self.cfg.angle_bins;
        Ok(match label {
            DecisionLabel::Walk { bin } => DecisionOutput::certain(Some(bin), bins),
            DecisionLabel::Stop => DecisionOutput::certain(None, bins),
        })
    }
}

/// Runs the oracle-driven search on every world and records the encoded
/// input and label at each step.
pub fn make_training_set(
    specs: &[WorldSpec],
    cfg: &DecisionConfig,
    opts: &TrainingSetOptions,
) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::argument("no worlds to build a training set from"));
    }
    cfg.validate()?;
    if !(opts.max_walk_ratio > 0.0) {
        return Err(Error::config("max walk ratio must be > 0"));
    }
    let mut all = Dataset::new(cfg.window, cfg.angle_bins);
    for (w, spec) in specs.iter().enumerate() {
        let world = generate_world(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ spec.seed.rotate_left(17) ^ w as u64);
        let search_cfg = oracle_search_config(spec);
        let mut rec = Recorder {
            oracle: OracleContext::new(world.graph.clone(), search_cfg.snap_radius(), cfg.angle_bins),
            cfg,
            opts,
            step: spec.segment,
            world: w,
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            out: Dataset::new(cfg.window, cfg.angle_bins),
            failure: None,
        };
        let seeds = component_seeds(&world.graph);
        let traced = search_multi(&world.image, &seeds, &search_cfg, &mut rec)?;
        if let Some(e) = rec.failure.take() {
            return Err(e);
        }
        let size = spec.size as f64;
        for _ in 0..opts.random_samples {
            let p = Point::new(rng.random_range(0.0..size), rng.random_range(0.0..size));
            let label = rec.oracle.peek(p);
            rec.record(&traced.graph, &world.image, p, label);
        }
        if let Some(e) = rec.failure.take() {
            return Err(e);
        }
        let kept = balance(&rec.out, opts, &mut rng);
        all.extend(&kept)?;
    }
    Ok(all)
}

/// Downsamples walks to at most `max_walk_ratio` per stop, then draws the
/// per-world quota.
fn balance(ds: &Dataset, opts: &TrainingSetOptions, rng: &mut ChaCha8Rng) -> Dataset {
    let mut walks: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i].is_walk()).collect();
    let mut stops: Vec<usize> = (0..ds.len()).filter(|&i| !ds.labels()[i].is_walk()).collect();
    walks.shuffle(rng);
    stops.shuffle(rng);
    let cap = (opts.max_walk_ratio * stops.len() as f64).floor() as usize;
    walks.truncate(cap);
    if let Some(quota) = opts.samples_per_world {
        let total = walks.len() + stops.len();
        if total > quota {
            let keep_walks = (quota as f64 * walks.len() as f64 / total as f64).round() as usize;
            walks.truncate(keep_walks);
            stops.truncate(quota - keep_walks.min(quota));
        }
    }
    let mut idx: Vec<usize> = walks.into_iter().chain(stops).collect();
    idx.sort_unstable();
    ds.subset(&idx)
}

/// Writes `<stem>.png`, `<stem>.graph` and `<stem>.toml` (the spec) into `dir`.
pub fn save_world(dir: &Path, stem: &str, spec: &WorldSpec, world: &World) -> Result<[PathBuf; 3]> {
    let png = dir.join(format!("{stem}.png"));
    let graph = dir.join(format!("{stem}.graph"));
    let echo = dir.join(format!("{stem}.toml"));
    world.image.save(&png)?;
    world.graph.save(&graph)?;
    let text = toml::to_string(spec).map_err(|e| Error::config(e.to_string()))?;
    std::fs::write(&echo, text)?;
    Ok([png, graph, echo])
}

pub fn load_spec(path: &Path) -> Result<WorldSpec> {
    let spec: WorldSpec = toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}
