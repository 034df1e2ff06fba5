//! The tracing decision function: encode a map window plus the current graph
//! as a `d × d × 4` input, run the DBN, and read off an action and an angle.

use std::f64::consts::TAU;

use image::RgbImage;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dbn::{DbnStack, OutputHead};
use crate::error::{check_dim, Error, Result};
use crate::graph::{Point, RoadGraph};
use crate::raster::{pixel_of, stroke_segment};
use crate::rbm::sigmoid;

/// Window sizes the encoder accepts.
pub const SUPPORTED_WINDOWS: [usize; 6] = [8, 16, 32, 64, 128, 256];

/// Channels per window pixel: red, green, blue, graph.
pub const CHANNELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionConfig {
    /// Window side `d` in pixels.
    pub window: usize,
    /// Number of angle neurons `a`.
    pub angle_bins: usize,
    /// Width of the strokes drawn into the graph channel.
    pub graph_stroke: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            window: 64,
            angle_bins: 64,
            graph_stroke: 4.0,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_WINDOWS.contains(&self.window) {
            return Err(Error::config(format!(
                "window size {} not in {SUPPORTED_WINDOWS:?}",
                self.window
            )));
        }
        if self.angle_bins < 4 {
            return Err(Error::config("at least 4 angle bins are required"));
        }
        if !(self.graph_stroke > 0.0 && self.graph_stroke.is_finite()) {
            return Err(Error::config("graph stroke width must be > 0"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.window * self.window * CHANNELS
    }
}

/// Encoded window, stored as 8-bit levels (value = level / 255) in
/// row-major `d × d × 4` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionInput {
    window: usize,
    levels: Vec<u8>,
}

impl DecisionInput {
    pub fn from_levels(window: usize, levels: Vec<u8>) -> Result<Self> {
        check_dim("decision input", window * window * CHANNELS, levels.len())?;
        Ok(Self { window, levels })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Value of channel `ch` at window pixel `(row, col)`.
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.levels[(row * self.window + col) * CHANNELS + ch] as f64 / 255.0
    }

    pub fn to_vector(&self) -> Array1<f64> {
        self.levels.iter().map(|&l| l as f64 / 255.0).collect()
    }

    pub fn graph_channel(&self) -> Vec<f64> {
        (0..self.window * self.window)
            .map(|p| self.levels[p * CHANNELS + 3] as f64 / 255.0)
            .collect()
    }
}

/// Crops the `d × d` window around `center` (zero outside the image) and
/// draws the graph's edges into the fourth channel.
pub fn encode_input(
    image: &RgbImage,
    graph: &RoadGraph,
    center: Point,
    cfg: &DecisionConfig,
) -> Result<DecisionInput> {
    cfg.validate()?;
    let (w, h) = (image.width() as f64, image.height() as f64);
    if !(center.x >= 0.0 && center.x <= w && center.y >= 0.0 && center.y <= h) {
        return Err(Error::argument(format!(
            "window center ({}, {}) outside the {w}x{h} image",
            center.x, center.y
        )));
    }
    let d = cfg.window;
    let (cx, cy) = pixel_of(center, h);
    let col0 = cx - (d / 2) as i64;
    let row0 = cy - (d / 2) as i64;
    let mut levels = vec![0u8; d * d * CHANNELS];

    for wr in 0..d {
        let r = row0 + wr as i64;
        if r < 0 || r >= image.height() as i64 {
            continue;
        }
        for wc in 0..d {
            let c = col0 + wc as i64;
            if c < 0 || c >= image.width() as i64 {
                continue;
            }
            let px = image.get_pixel(c as u32, r as u32);
            let at = (wr * d + wc) * CHANNELS;
            levels[at..at + 3].copy_from_slice(&px.0);
        }
    }

    let mut coverage = vec![0.0f64; d * d];
    let margin = cfg.graph_stroke;
    let (lo_x, hi_x) = (col0 as f64 - margin, (col0 + d as i64) as f64 + margin);
    let (lo_y, hi_y) = (row0 as f64 - margin, (row0 + d as i64) as f64 + margin);
    for &(a, b) in graph.edges() {
        let pa = graph.vertex(a);
        let pb = graph.vertex(b);
        let (ax, ay) = (pa.x, h - pa.y);
        let (bx, by) = (pb.x, h - pb.y);
        if ax.max(bx) < lo_x || ax.min(bx) > hi_x || ay.max(by) < lo_y || ay.min(by) > hi_y {
            continue;
        }
        let a_local = (ax - col0 as f64, ay - row0 as f64);
        let b_local = (bx - col0 as f64, by - row0 as f64);
        stroke_segment(a_local, b_local, cfg.graph_stroke, d, d, |c, r, v| {
            let slot = &mut coverage[r * d + c];
            *slot = slot.max(v);
        });
    }
    for (p, v) in coverage.into_iter().enumerate() {
        levels[p * CHANNELS + 3] = (v * 255.0).round() as u8;
    }
    Ok(DecisionInput { window: d, levels })
}

/// Softmax action pair and sigmoid angle activations.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutput {
    pub walk: f64,
    pub stop: f64,
    pub angles: Vec<f64>,
}

impl DecisionOutput {
    /// Output from raw head logits: `[walk, stop, angle_0, ..]`.
    pub fn from_logits(z: &[f64]) -> Self {
        let walk = sigmoid(z[0] - z[1]);
        Self {
            walk,
            stop: 1.0 - walk,
            angles: z[2..].iter().map(|&x| sigmoid(x)).collect(),
        }
    }

    /// A confident output pointing at `bin`, or a stop.
    pub fn certain(action: Option<usize>, bins: usize) -> Self {
        let mut angles = vec![0.01; bins];
        match action {
            Some(bin) => {
                angles[bin] = 0.99;
                Self {
                    walk: 1.0,
                    stop: 0.0,
                    angles,
                }
            }
            None => Self {
                walk: 0.0,
                stop: 1.0,
                angles,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Walk { angle: f64 },
    Stop,
}

impl Action {
    pub fn is_walk(&self) -> bool {
        matches!(self, Action::Walk { .. })
    }
}

/// Angle of the centre of `bin` out of `bins`.
pub fn bin_center(bin: usize, bins: usize) -> f64 {
    TAU * (bin as f64 + 0.5) / bins as f64
}

/// Bin containing `angle` (any real; wrapped into `[0, 2π)`).
pub fn angle_bin(angle: f64, bins: usize) -> usize {
    let a = angle.rem_euclid(TAU);
    ((a / TAU * bins as f64).floor() as usize).min(bins - 1)
}

/// Walk iff `O_walk > threshold`, toward the centre of the first maximal
/// angle bin.
pub fn select_action(out: &DecisionOutput, threshold: f64) -> Action {
    if out.walk > threshold && !out.angles.is_empty() {
        let mut best = 0;
        for (i, &o) in out.angles.iter().enumerate() {
            if o > out.angles[best] {
                best = i;
            }
        }
        Action::Walk {
            angle: bin_center(best, out.angles.len()),
        }
    } else {
        Action::Stop
    }
}

pub fn infer_decision(stack: &DbnStack, input: &DecisionInput) -> Result<DecisionOutput> {
    let head = stack
        .head()
        .ok_or_else(|| Error::Structure("stack has no output head".into()))?;
    let acts = stack.forward(input.to_vector().view())?;
    let z = head.logits(acts.last().expect("non-empty").view())?;
    Ok(DecisionOutput::from_logits(z.as_slice().expect("contiguous")))
}

/// Head logits for every row of `x`.
pub fn infer_logits_batch(stack: &DbnStack, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let head = stack
        .head()
        .ok_or_else(|| Error::Structure("stack has no output head".into()))?;
    head.logits_batch(stack.top_activations_batch(x)?.view())
}

/// Supervised target for one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionLabel {
    Walk { bin: usize },
    Stop,
}

impl DecisionLabel {
    pub fn is_walk(&self) -> bool {
        matches!(self, DecisionLabel::Walk { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight of the angle loss relative to the action loss.
    pub angle_weight: f64,
    /// Width in bins of a Gaussian bump used as the angle target; 0 gives a
    /// one-hot target.
    pub angle_smoothing: f64,
    /// Train the head only, leaving the pretrained RBM weights untouched.
    pub freeze_lower: bool,
    pub seed: u64,
}

impl Default for HeadSchedule {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            angle_weight: 1.0,
            angle_smoothing: 1.5,
            freeze_lower: false,
            seed: 0,
        }
    }
}

impl HeadSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0,1)"));
        }
        if !(self.angle_weight >= 0.0 && self.angle_weight.is_finite()) {
            return Err(Error::config("angle weight must be finite and >= 0"));
        }
        if !(self.angle_smoothing >= 0.0 && self.angle_smoothing.is_finite()) {
            return Err(Error::config("angle smoothing must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadEpochStats {
    pub epoch: usize,
    pub action_loss: f64,
    pub angle_loss: f64,
}

pub fn train_head(stack: &DbnStack, data: &Dataset, schedule: &HeadSchedule) -> Result<DbnStack> {
    train_head_with(stack, data, schedule, |_| {})
}

/// Fits the output head (and, unless frozen, every RBM layer) by minibatch
/// gradient descent on softmax cross-entropy over the action plus per-bin
/// binary cross-entropy over the angle, the latter masked for stop labels.
pub fn train_head_with(
    stack: &DbnStack,
    data: &Dataset,
    schedule: &HeadSchedule,
    mut observe: impl FnMut(&HeadEpochStats),
) -> Result<DbnStack> {
    schedule.validate()?;
    if data.is_empty() {
        return Err(Error::argument("empty training dataset"));
    }
    check_dim("dataset input", stack.n_inputs(), data.input_len())?;
    let bins = data.angle_bins();
    for (i, label) in data.labels().iter().enumerate() {
        if let DecisionLabel::Walk { bin } = label {
            if *bin >= bins {
                return Err(Error::argument(format!(
                    "label {i}: angle bin {bin} out of range (a={bins})"
                )));
            }
        }
    }

    let mut net = stack.clone();
    if net.head().is_none() {
        net.set_head(OutputHead::init(net.top().n_hidden(), bins, schedule.seed))?;
    }
    let head_bins = net.head().expect("attached").angle_bins();
    check_dim("head angle bins", head_bins, bins)?;

    let n_layers = net.n_layers();
    let mut vel_w: Vec<Array2<f64>> = net.rbms().iter().map(|r| Array2::zeros(r.weights.raw_dim())).collect();
    let mut vel_c: Vec<Array1<f64>> = net.rbms().iter().map(|r| Array1::zeros(r.n_hidden())).collect();
    let mut vel_hw = Array2::<f64>::zeros(net.head().expect("attached").weights.raw_dim());
    let mut vel_hb = Array1::<f64>::zeros(2 + bins);

    let targets = angle_targets(bins, schedule.angle_smoothing);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = schedule.learning_rate;
    let mu = schedule.momentum;

    for epoch in 0..schedule.epochs {
        order.shuffle(&mut rng);
        let mut action_loss = 0.0;
        let mut angle_loss = 0.0;
        for chunk in order.chunks(schedule.batch_size) {
            let x = data.batch(chunk);
            let acts = net.forward_batch(x.view())?;
            let top = &acts[n_layers];
            let head = net.head().expect("attached");
            let z = head.logits_batch(top.view())?;
            let m = chunk.len() as f64;

            let mut dz = Array2::<f64>::zeros(z.raw_dim());
            for (r, &idx) in chunk.iter().enumerate() {
                let label = data.labels()[idx];
                let p_walk = sigmoid(z[[r, 0]] - z[[r, 1]]);
                let walk_target = if label.is_walk() { 1.0 } else { 0.0 };
                dz[[r, 0]] = (p_walk - walk_target) / m;
                dz[[r, 1]] = -(p_walk - walk_target) / m;
                let p_true = if label.is_walk() { p_walk } else { 1.0 - p_walk };
                action_loss -= p_true.max(1e-12).ln();
                if let DecisionLabel::Walk { bin } = label {
                    for k in 0..bins {
                        let p = sigmoid(z[[r, 2 + k]]);
                        let t = targets[(k + bins - bin) % bins];
                        dz[[r, 2 + k]] = schedule.angle_weight * (p - t) / m;
                        angle_loss -= t * p.max(1e-12).ln() + (1.0 - t) * (1.0 - p).max(1e-12).ln();
                    }
                }
            }

            let grad_hw = top.t().dot(&dz);
            let grad_hb = dz.sum_axis(Axis(0));
            let mut delta = if schedule.freeze_lower {
                None
            } else {
                let back = dz.dot(&head.weights.t());
                Some(back * &top.mapv(|a| a * (1.0 - a)))
            };

            vel_hw = &vel_hw * mu - &(grad_hw * lr);
            vel_hb = &vel_hb * mu - &(grad_hb * lr);
            let head = net.head_mut().expect("attached");
            head.weights += &vel_hw;
            head.bias += &vel_hb;

            for l in (0..n_layers).rev() {
                let Some(d) = delta.take() else { break };
                let below = &acts[l];
                let grad_w = below.t().dot(&d);
                let grad_c = d.sum_axis(Axis(0));
                if l > 0 {
                    let back = d.dot(&net.rbms()[l].weights.t());
                    delta = Some(back * &below.mapv(|a| a * (1.0 - a)));
                }
                vel_w[l] *= mu;
                vel_w[l].scaled_add(-lr, &grad_w);
                vel_c[l] *= mu;
                vel_c[l].scaled_add(-lr, &grad_c);
                let rbm = &mut net.rbms_mut()[l];
                rbm.weights += &vel_w[l];
                rbm.hidden_bias += &vel_c[l];
            }
        }
        if !net.rbms().iter().all(|r| r.is_finite()) {
            return Err(Error::argument("training diverged (non-finite weights)"));
        }
        let n = data.len() as f64;
        let n_walk = data.labels().iter().filter(|l| l.is_walk()).count().max(1) as f64;
        observe(&HeadEpochStats {
            epoch,
            action_loss: action_loss / n,
            angle_loss: angle_loss / n_walk,
        });
    }
    Ok(net)
}

/// Target for a bin at circular offset `k` from the labelled bin.
fn angle_targets(bins: usize, width: f64) -> Vec<f64> {
    (0..bins)
        .map(|k| {
            let d = k.min(bins - k) as f64;
            if d == 0.0 {
                1.0
            } else if width == 0.0 {
                0.0
            } else {
                (-d * d / (2.0 * width * width)).exp()
            }
        })
        .collect()
}

/// Fraction of samples whose action is predicted correctly at `O_walk > 0.5`,
/// and fraction of walk samples whose argmax angle bin is within `tolerance`
/// bins (circularly) of the label.
pub fn evaluate_accuracy(stack: &DbnStack, data: &Dataset, tolerance: usize) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::argument("empty evaluation dataset"));
    }
    let bins = data.angle_bins();
    let mut correct = 0usize;
    let mut walks = 0usize;
    let mut angle_ok = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(256) {
        let z = infer_logits_batch(stack, data.batch(chunk).view())?;
        for (r, &i) in chunk.iter().enumerate() {
            let row = z.slice(s![r, ..]);
            let out = DecisionOutput::from_logits(row.as_slice().expect("contiguous"));
            let label = data.labels()[i];
            if (out.walk > 0.5) == label.is_walk() {
                correct += 1;
            }
            if let DecisionLabel::Walk { bin } = label {
                walks += 1;
                if let Action::Walk { angle } = select_action(&out, -1.0) {
                    let got = angle_bin(angle, bins);
                    let diff = got.abs_diff(bin);
                    if diff.min(bins - diff) <= tolerance {
                        angle_ok += 1;
                    }
                }
            }
        }
    }
    Ok((
        correct as f64 / data.len() as f64,
        if walks == 0 { 1.0 } else { angle_ok as f64 / walks as f64 },
    ))
}
