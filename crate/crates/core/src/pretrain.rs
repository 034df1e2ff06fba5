//! Greedy layer-wise pretraining with neuron generation/annihilation and
//! layer generation.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    annihilate_neuron, check_annihilation, check_generation, check_layer_generation,
    generate_neuron, StructureThresholds, WdTrace,
};
use crate::dbn::{DbnStack, StructureEvent, StructureEventKind};
use crate::error::{Error, Result};
use crate::rbm::{RbmParams, TrainBatch};

/// Random-access training samples with values in `[0,1]`.
pub trait SampleSource {
    fn n_samples(&self) -> usize;
    fn dim(&self) -> usize;
    /// Copies the rows `indices` into `out`, which is `indices.len() × dim`.
    fn gather(&self, indices: &[usize], out: &mut Array2<f64>);
}

impl SampleSource for Array2<f64> {
    fn n_samples(&self) -> usize {
        self.nrows()
    }

    fn dim(&self) -> usize {
        self.ncols()
    }

    fn gather(&self, indices: &[usize], out: &mut Array2<f64>) {
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&self.row(i));
        }
    }
}

impl SampleSource for TrainBatch {
    fn n_samples(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> usize {
        TrainBatch::dim(self)
    }

    fn gather(&self, indices: &[usize], out: &mut Array2<f64>) {
        let samples = self.samples();
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&samples.row(i));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainSchedule {
    pub initial_hidden: usize,
    /// Width of generated layers; `None` reuses the current top width.
    pub new_layer_hidden: Option<usize>,
    pub epochs_per_layer: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub cd_steps: usize,
    /// WD smoothing factor γ.
    pub gamma: f64,
    /// Samples used for the annihilation and layer-energy checks.
    pub probe_size: usize,
    /// Cap on samples per epoch; `None` uses every sample.
    pub samples_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for PretrainSchedule {
    fn default() -> Self {
        Self {
            initial_hidden: 32,
            new_layer_hidden: None,
            epochs_per_layer: 10,
            batch_size: 32,
            learning_rate: 0.05,
            cd_steps: 1,
            gamma: 0.9,
            probe_size: 256,
            samples_per_epoch: None,
            seed: 0,
        }
    }
}

impl PretrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.initial_hidden == 0 || self.new_layer_hidden == Some(0) {
            return Err(Error::config("hidden layer sizes must be >= 1"));
        }
        if self.batch_size == 0 || self.cd_steps == 0 || self.probe_size == 0 {
            return Err(Error::config("batch size, CD steps and probe size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma must be in [0,1)"));
        }
        Ok(())
    }
}

/// Per-epoch diagnostics reported to an observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub layer: usize,
    pub hidden: usize,
    pub reconstruction_error: f64,
    pub total_wd: f64,
}

/// Runs adaptive pretraining and returns the stack (no head attached).
pub fn pretrain_adaptive<S: SampleSource + ?Sized>(
    data: &S,
    th: &StructureThresholds,
    schedule: &PretrainSchedule,
) -> Result<DbnStack> {
    pretrain_adaptive_with(data, th, schedule, |_| {})
}

pub fn pretrain_adaptive_with<S, F>(
    data: &S,
    th: &StructureThresholds,
    schedule: &PretrainSchedule,
    mut observe: F,
) -> Result<DbnStack>
where
    S: SampleSource + ?Sized,
    F: FnMut(&EpochStats),
{
    th.validate()?;
    schedule.validate()?;
    let n = data.n_samples();
    if n == 0 || data.dim() == 0 {
        return Err(Error::argument("empty training data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let initial_hidden = schedule.initial_hidden.min(th.max_hidden);
    let mut stack = DbnStack::new(RbmParams::init(data.dim(), initial_hidden, rng.random()))?;

    // Evenly spaced probe rows, fixed for the whole run.
    let probe_rows: Vec<usize> = {
        let m = schedule.probe_size.min(n);
        (0..m).map(|i| i * n / m).collect()
    };
    let mut input_probe = Array2::zeros((probe_rows.len(), data.dim()));
    data.gather(&probe_rows, &mut input_probe);

    // Inputs of the current top layer above layer 0, materialized.
    let mut lifted: Option<Array2<f64>> = None;
    let mut global_epoch = 0;
    let mut order: Vec<usize> = (0..n).collect();

    loop {
        let layer = stack.n_layers();
        let probe = match &lifted {
            None => input_probe.clone(),
            Some(x) => x.select(ndarray::Axis(0), &probe_rows),
        };
        let mut trace = WdTrace::new(stack.top().n_hidden(), schedule.gamma)?;

        for _ in 0..schedule.epochs_per_layer {
            let prev = stack.top().clone();
            order.shuffle(&mut rng);
            let used = schedule.samples_per_epoch.unwrap_or(n).min(n);
            let mut top = stack.top().clone();
            for chunk in order[..used].chunks(schedule.batch_size) {
                let batch = gather_batch(data, lifted.as_ref(), chunk);
                top.cd_step(batch.view(), schedule.cd_steps, schedule.learning_rate, &mut rng)?;
            }
            trace.update(&prev, &top)?;

            for j in check_generation(&trace, th) {
                let (grown, grown_trace) =
                    generate_neuron(&top, &trace, j, rng.random(), th.max_hidden)?;
                top = grown;
                trace = grown_trace;
                stack.log_mut().push(StructureEvent {
                    epoch: global_epoch,
                    kind: StructureEventKind::Generation,
                    neuron: Some(j),
                    hidden: top.n_hidden(),
                    layers: layer,
                });
            }

            let mut doomed = check_annihilation(&top, probe.view(), th)?;
            doomed.sort_unstable_by(|a, b| b.cmp(a));
            for j in doomed {
                let (shrunk, shrunk_trace) = annihilate_neuron(&top, &trace, j)?;
                top = shrunk;
                trace = shrunk_trace;
                stack.log_mut().push(StructureEvent {
                    epoch: global_epoch,
                    kind: StructureEventKind::Annihilation,
                    neuron: Some(j),
                    hidden: top.n_hidden(),
                    layers: layer,
                });
            }

            let reconstruction_error = top.reconstruction_error_view(probe.view())?;
            stack.replace_top(top)?;
            stack.validate()?;
            observe(&EpochStats {
                epoch: global_epoch,
                layer,
                hidden: stack.top().n_hidden(),
                reconstruction_error,
                total_wd: trace.total(),
            });
            global_epoch += 1;
        }

        if !check_layer_generation(&stack, &trace, probe.view(), th)? {
            break;
        }
        let width = schedule
            .new_layer_hidden
            .unwrap_or_else(|| stack.top().n_hidden())
            .min(th.max_hidden);
        lifted = Some(lift(data, lifted.as_ref(), stack.top(), schedule.batch_size)?);
        stack.push_layer(width, rng.random())?;
        let hidden = stack.top().n_hidden();
        let layers = stack.n_layers();
        stack.log_mut().push(StructureEvent {
            epoch: global_epoch,
            kind: StructureEventKind::Layer,
            neuron: None,
            hidden,
            layers,
        });
    }
    Ok(stack)
}

fn gather_batch<S: SampleSource + ?Sized>(
    data: &S,
    lifted: Option<&Array2<f64>>,
    rows: &[usize],
) -> Array2<f64> {
    match lifted {
        Some(x) => x.select(ndarray::Axis(0), rows),
        None => {
            let mut out = Array2::zeros((rows.len(), data.dim()));
            data.gather(rows, &mut out);
            out
        }
    }
}

/// Hidden conditional means of `top` for every sample, i.e. the next layer's input.
fn lift<S: SampleSource + ?Sized>(
    data: &S,
    lifted: Option<&Array2<f64>>,
    top: &RbmParams,
    chunk: usize,
) -> Result<Array2<f64>> {
    let n = data.n_samples();
    let mut out = Array2::zeros((n, top.n_hidden()));
    let rows: Vec<usize> = (0..n).collect();
    for (c, part) in rows.chunks(chunk.max(256)).enumerate() {
        let x = gather_batch(data, lifted, part);
        let h = top.hidden_probs_batch(x.view())?;
        let start = c * chunk.max(256);
        out.slice_mut(s![start..start + part.len(), ..]).assign(&h);
    }
    Ok(out)
}
