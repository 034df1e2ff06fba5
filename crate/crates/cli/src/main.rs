mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Road-network extraction from raster maps by iterative graph search.
#[derive(Debug, Parser)]
#[command(name = "roadtracer", version)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Base seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Walk threshold T.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Step distance D in pixels.
    #[arg(long, global = true)]
    pub step_distance: Option<f64>,
    /// Snap radius in pixels (default D/2).
    #[arg(long, global = true)]
    pub snap_radius: Option<f64>,
    /// Match radius in pixels (default D/2).
    #[arg(long, global = true)]
    pub r_match: Option<f64>,
    /// Decision window d.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Number of angle bins a.
    #[arg(long, global = true)]
    pub angle_bins: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic worlds as PNG + ROADGRAPH + spec triples.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Number of worlds (overrides `generate.count`).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Build a labelled decision dataset by oracle-driven search.
    Dataset {
        /// World spec files written by `generate`.
        #[arg(long = "world", required = true)]
        worlds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional text listing of every record.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Adaptive layer-wise pretraining; writes a model without a head.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the structure log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Fine-tune the decision head (pretraining first unless `--init` is given).
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Start from this model instead of pretraining.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Trace a road graph on an image with a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Start locations as `x,y` (math axes, y up).
        #[arg(long = "start", value_parser = parse_point)]
        starts: Vec<(f64, f64)>,
        /// Use one start per component of this graph.
        #[arg(long)]
        starts_from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Precision/recall report of predicted graphs against ground truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        /// `LABEL=PATH` or `LABEL=PATH,MINUTES`.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// Write the tab-separated report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a graph over an image.
    Render {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Also draw this ground truth; truth is green and the graph red.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Stroke colour `r,g,b`.
        #[arg(long, value_parser = parse_color)]
        color: Option<[u8; 3]>,
        #[arg(long)]
        width: Option<f64>,
    },
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((x, y))
}

fn parse_color(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected r,g,b".into());
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{e}"))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
