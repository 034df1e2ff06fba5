use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::Instant;

use roadtracer_core::checkpoint::{load_model, save_model};
use roadtracer_core::config::RunConfig;
use roadtracer_core::dataset::Dataset;
use roadtracer_core::dbn::format_layer_sizes;
use roadtracer_core::decision::{evaluate_accuracy, train_head_with, DecisionConfig};
use roadtracer_core::eval::{match_vertices, report_dsv, report_table, ReportRow};
use roadtracer_core::graph::{Point, RoadGraph};
use roadtracer_core::model::Model;
use roadtracer_core::pretrain::pretrain_adaptive_with;
use roadtracer_core::render::{render_comparison, render_overlay};
use roadtracer_core::search::{search_multi, trace_to_text};
use roadtracer_core::world::{component_seeds, generate_world, load_image, load_spec, make_training_set, save_world};

use crate::{Cli, Command, Overrides};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Failure while reading an input file, whatever its cause.
    Data(roadtracer_core::Error),
    Core(roadtracer_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) | CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<roadtracer_core::Error> for CliError {
    fn from(e: roadtracer_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn build_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            roadtracer_core::Error::Io(_) => CliError::Data(e),
            other => CliError::Core(other),
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = o.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if let Some(t) = o.threshold {
        cfg.search.threshold = t;
    }
    if let Some(d) = o.step_distance {
        cfg.search.step_distance = d;
        cfg.world.segment = d;
    }
    if let Some(r) = o.snap_radius {
        cfg.search.snap_radius = Some(r);
    }
    if let Some(r) = o.r_match {
        cfg.eval.r_match = Some(r);
    }
    if let Some(w) = o.window {
        cfg.decision.window = w;
    }
    if let Some(a) = o.angle_bins {
        cfg.decision.angle_bins = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn input<T>(path: &Path, r: roadtracer_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        roadtracer_core::Error::Io(io) => CliError::Data(roadtracer_core::Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        ))),
        other => CliError::Data(other),
    })
}

fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    bytes.hash(&mut h);
    h.finish()
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Generate { out, count } => generate(&cfg, &out, count.unwrap_or(cfg.generate.count)),
        Command::Dataset { worlds, out, records } => dataset(&cfg, &worlds, &out, records.as_deref()),
        Command::Pretrain { data, out, log } => pretrain(&cfg, &data, &out, log.as_deref()),
        Command::Train { data, init, out, log } => train(&cfg, &data, init.as_deref(), &out, log.as_deref()),
        Command::Infer {
            model,
            image,
            starts,
            starts_from,
            out,
            trace,
        } => infer(&cfg, &model, &image, &starts, starts_from.as_deref(), &out, trace.as_deref()),
        Command::Eval { truth, runs, out } => eval(&cfg, &truth, &runs, out.as_deref()),
        Command::Render {
            image,
            graph,
            truth,
            out,
            color,
            width,
        } => {
            let mut style = cfg.render;
            if let Some(c) = color {
                style.color = c;
            }
            if let Some(w) = width {
                style.width = w;
            }
            style.validate()?;
            let img = input(&image, load_image(&image))?;
            let g = input(&graph, RoadGraph::load(&graph))?;
            let rendered = match truth {
                Some(t) => render_comparison(&img, &input(&t, RoadGraph::load(&t))?, &g, style.width)?,
                None => render_overlay(&img, &g, &style)?,
            };
            rendered.save(&out).map_err(roadtracer_core::Error::from)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn generate(cfg: &RunConfig, out: &Path, count: usize) -> Result<()> {
    if count == 0 {
        return Err(usage("world count must be at least 1"));
    }
    let specs: Vec<_> = (0..count).map(|i| cfg.world_spec(i)).collect();
    for s in &specs {
        s.validate()?;
    }
    std::fs::create_dir_all(out)?;
    for (i, spec) in specs.iter().enumerate() {
        let world = generate_world(spec)?;
        let stem = format!("world_{i:03}");
        save_world(out, &stem, spec, &world)?;
        println!(
            "{stem} seed={} vertices={} edges={} image_hash={:016x} graph_hash={:016x}",
            spec.seed,
            world.graph.n_vertices(),
            world.graph.n_edges(),
            hash_bytes(world.image.as_raw()),
            hash_bytes(world.graph.to_text().as_bytes())
        );
    }
    Ok(())
}

fn dataset(cfg: &RunConfig, worlds: &[PathBuf], out: &Path, records: Option<&Path>) -> Result<()> {
    let specs = worlds.iter().map(|p| input(p, load_spec(p))).collect::<Result<Vec<_>>>()?;
    let ds = make_training_set(&specs, &cfg.decision, &cfg.training)?;
    ds.save(out)?;
    if let Some(r) = records {
        std::fs::write(r, ds.records_text())?;
    }
    let (walk, stop) = ds.label_counts();
    println!(
        "samples={} walk={walk} stop={stop} fingerprint={:016x}",
        ds.len(),
        ds.fingerprint()
    );
    Ok(())
}

fn decision_for(cfg: &RunConfig, ds: &Dataset) -> DecisionConfig {
    DecisionConfig {
        window: ds.window(),
        angle_bins: ds.angle_bins(),
        ..cfg.decision.clone()
    }
}

fn pretrained(cfg: &RunConfig, ds: &Dataset) -> Result<Model> {
    let stack = pretrain_adaptive_with(ds, &cfg.structure, &cfg.pretrain, |s| {
        println!(
            "pretrain layer={} epoch={} hidden={} recon={:.5} wd={:.4}",
            s.layer, s.epoch, s.hidden, s.reconstruction_error, s.total_wd
        );
    })?;
    Ok(Model::new(stack, decision_for(cfg, ds))?)
}

fn write_log(model: &Model, log: Option<&Path>) -> Result<()> {
    if let Some(p) = log {
        std::fs::write(p, model.stack.log().to_text())?;
    }
    println!("layers: {}", format_layer_sizes(&model.stack.layer_sizes()[1..]));
    Ok(())
}

fn pretrain(cfg: &RunConfig, data: &Path, out: &Path, log: Option<&Path>) -> Result<()> {
    let ds = input(data, Dataset::load(data))?;
    let model = pretrained(cfg, &ds)?;
    save_model(out, &model)?;
    write_log(&model, log)
}

fn train(cfg: &RunConfig, data: &Path, init: Option<&Path>, out: &Path, log: Option<&Path>) -> Result<()> {
    let ds = input(data, Dataset::load(data))?;
    let start = match init {
        Some(p) => input(p, load_model(p))?,
        None => pretrained(cfg, &ds)?,
    };
    if start.decision.window != ds.window() || start.decision.angle_bins != ds.angle_bins() {
        return Err(usage("model and dataset use different window or angle bins"));
    }
    let stack = train_head_with(&start.stack, &ds, &cfg.head, |s| {
        println!(
            "head epoch={} action_loss={:.5} angle_loss={:.5}",
            s.epoch, s.action_loss, s.angle_loss
        );
    })?;
    let (action, angle) = evaluate_accuracy(&stack, &ds, 1)?;
    println!("train accuracy: action={action:.4} angle={angle:.4}");
    let model = Model::new(stack, start.decision)?;
    save_model(out, &model)?;
    write_log(&model, log)
}

fn infer(
    cfg: &RunConfig,
    model: &Path,
    image: &Path,
    starts: &[(f64, f64)],
    starts_from: Option<&Path>,
    out: &Path,
    trace: Option<&Path>,
) -> Result<()> {
    let mut seeds: Vec<Point> = starts.iter().map(|&(x, y)| Point::new(x, y)).collect();
    if let Some(p) = starts_from {
        seeds.extend(component_seeds(&input(p, RoadGraph::load(p))?));
    }
    if seeds.is_empty() {
        return Err(usage("give at least one --start or --starts-from"));
    }
    let mut model = input(model, load_model(model))?;
    let img = input(image, load_image(image))?;
    let t = Instant::now();
    let result = search_multi(&img, &seeds, &cfg.search, &mut model)?;
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    result.graph.save(out)?;
    if let Some(p) = trace {
        std::fs::write(p, trace_to_text(&result.trace))?;
    }
    println!(
        "vertices={} edges={} steps={} budget_exhausted={} time_minutes={minutes:.1}",
        result.graph.n_vertices(),
        result.graph.n_edges(),
        result.trace.len(),
        result.budget_exhausted
    );
    Ok(())
}

fn parse_run(s: &str) -> Result<(String, PathBuf, f64)> {
    let (label, rest) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("run `{s}` must be LABEL=PATH[,MINUTES]")))?;
    let (path, minutes) = match rest.rsplit_once(',') {
        Some((p, m)) => (
            p,
            m.parse::<f64>()
                .map_err(|_| usage(format!("bad minutes in run `{s}`")))?,
        ),
        None => (rest, 0.0),
    };
    Ok((label.to_string(), PathBuf::from(path), minutes))
}

fn eval(cfg: &RunConfig, truth: &Path, runs: &[String], out: Option<&Path>) -> Result<()> {
    let parsed = runs.iter().map(|r| parse_run(r)).collect::<Result<Vec<_>>>()?;
    let truth = input(truth, RoadGraph::load(truth))?;
    let mut rows = Vec::new();
    for (model, path, minutes) in parsed {
        let pred = input(&path, RoadGraph::load(&path))?;
        rows.push(ReportRow {
            model,
            result: match_vertices(&pred, &truth, cfg.r_match(), cfg.spacing())?,
            seconds: minutes * 60.0,
        });
    }
    if let Some(p) = out {
        std::fs::write(p, report_dsv(&rows))?;
    }
    print!("{}", report_table(&rows));
    Ok(())
}
