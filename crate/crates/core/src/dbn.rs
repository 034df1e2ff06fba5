//! Stacked RBMs with an optional supervised output head.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::rbm::{RbmParams, INIT_WEIGHT_SCALE};

/// Linear output layer on top of the last RBM: two action logits followed by
/// `angle_bins` angle logits.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    /// `J_top × (2 + angle_bins)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl OutputHead {
    pub fn init(n_in: usize, angle_bins: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Array2::from_shape_simple_fn((n_in, 2 + angle_bins), || {
            rng.random_range(-INIT_WEIGHT_SCALE..=INIT_WEIGHT_SCALE)
        });
        Self {
            weights,
            bias: Array1::zeros(2 + angle_bins),
        }
    }

    pub fn zeros(n_in: usize, angle_bins: usize) -> Self {
        Self {
            weights: Array2::zeros((n_in, 2 + angle_bins)),
            bias: Array1::zeros(2 + angle_bins),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn angle_bins(&self) -> usize {
        self.bias.len() - 2
    }

    pub fn logits(&self, top: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("head input", self.n_inputs(), top.len())?;
        Ok(top.dot(&self.weights) + &self.bias)
    }

    pub fn logits_batch(&self, top: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("head input", self.n_inputs(), top.ncols())?;
        let mut z = top.dot(&self.weights);
        z += &self.bias;
        Ok(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureEventKind {
    Generation,
    Annihilation,
    Layer,
}

/// One structural change. `hidden` and `layers` describe the shape after the
/// event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureEvent {
    pub epoch: usize,
    pub kind: StructureEventKind,
    pub neuron: Option<usize>,
    pub hidden: usize,
    pub layers: usize,
}

impl fmt::Display for StructureEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            StructureEventKind::Generation => "gen",
            StructureEventKind::Annihilation => "ann",
            StructureEventKind::Layer => "layer",
        };
        let j = self
            .neuron
            .map(|j| j.to_string())
            .unwrap_or_else(|| "-".to_string());
        write!(
            f,
            "epoch={} event={} j={} J={} L={}",
            self.epoch, kind, j, self.hidden, self.layers
        )
    }
}

impl FromStr for StructureEvent {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, Self::Err> {
        let mut epoch = None;
        let mut kind = None;
        let mut neuron = None;
        let mut hidden = None;
        let mut layers = None;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| format!("malformed field `{field}`"))?;
            let num = || value.parse::<usize>().map_err(|e| format!("{key}: {e}"));
            match key {
                "epoch" => epoch = Some(num()?),
                "event" => {
                    kind = Some(match value {
                        "gen" => StructureEventKind::Generation,
                        "ann" => StructureEventKind::Annihilation,
                        "layer" => StructureEventKind::Layer,
                        other => return Err(format!("unknown event `{other}`")),
                    })
                }
                "j" => neuron = if value == "-" { None } else { Some(num()?) },
                "J" => hidden = Some(num()?),
                "L" => layers = Some(num()?),
                other => return Err(format!("unknown key `{other}`")),
            }
        }
        Ok(Self {
            epoch: epoch.ok_or("missing epoch")?,
            kind: kind.ok_or("missing event")?,
            neuron,
            hidden: hidden.ok_or("missing J")?,
            layers: layers.ok_or("missing L")?,
        })
    }
}

/// Append-only record of structural changes, one event per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureLog {
    events: Vec<StructureEvent>,
}

impl StructureLog {
    pub fn push(&mut self, event: StructureEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[StructureEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(line.parse().map_err(|e: String| Error::parse(n + 1, e))?);
        }
        Ok(Self { events })
    }

    /// Applies the events to `initial` (input size followed by hidden sizes)
    /// and returns the resulting layer-size list. Fails if an event's recorded
    /// shape disagrees with the replayed one.
    pub fn replay(&self, initial: &[usize]) -> Result<Vec<usize>> {
        if initial.len() < 2 {
            return Err(Error::argument("initial shape needs input and one hidden layer"));
        }
        let mut shape = initial.to_vec();
        for (n, e) in self.events.iter().enumerate() {
            let top = shape.len() - 1;
            match e.kind {
                StructureEventKind::Generation => shape[top] += 1,
                StructureEventKind::Annihilation => {
                    if shape[top] < 2 {
                        return Err(Error::parse(n + 1, "annihilation empties a layer"));
                    }
                    shape[top] -= 1
                }
                StructureEventKind::Layer => shape.push(e.hidden),
            }
            if shape[shape.len() - 1] != e.hidden || shape.len() - 1 != e.layers {
                return Err(Error::parse(n + 1, "event disagrees with replayed shape"));
            }
        }
        Ok(shape)
    }
}

/// Ordered RBMs where each layer's visible size equals the previous hidden size.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnStack {
    rbms: Vec<RbmParams>,
    head: Option<OutputHead>,
    log: StructureLog,
}

impl DbnStack {
    pub fn new(first: RbmParams) -> Result<Self> {
        Self::from_parts(vec![first], None, StructureLog::default())
    }

    pub fn from_parts(
        rbms: Vec<RbmParams>,
        head: Option<OutputHead>,
        log: StructureLog,
    ) -> Result<Self> {
        let stack = Self { rbms, head, log };
        stack.validate()?;
        Ok(stack)
    }

    /// Checks adjacent-layer chaining and head compatibility.
    pub fn validate(&self) -> Result<()> {
        if self.rbms.is_empty() {
            return Err(Error::Structure("a DBN needs at least one RBM".into()));
        }
        for pair in self.rbms.windows(2) {
            check_dim("layer chaining", pair[0].n_hidden(), pair[1].n_visible())?;
        }
        if let Some(head) = &self.head {
            check_dim("head input", self.top().n_hidden(), head.n_inputs())?;
        }
        Ok(())
    }

    pub fn rbms(&self) -> &[RbmParams] {
        &self.rbms
    }

    pub fn rbms_mut(&mut self) -> &mut [RbmParams] {
        &mut self.rbms
    }

    pub fn n_layers(&self) -> usize {
        self.rbms.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.rbms[0].n_visible()
    }

    pub fn top(&self) -> &RbmParams {
        self.rbms.last().expect("non-empty")
    }

    pub fn top_mut(&mut self) -> &mut RbmParams {
        self.rbms.last_mut().expect("non-empty")
    }

    /// Replaces the top RBM, e.g. after a neuron was generated or removed.
    /// Fails if a head is attached and the width no longer matches.
    pub fn replace_top(&mut self, rbm: RbmParams) -> Result<()> {
        let prev = std::mem::replace(self.top_mut(), rbm);
        if let Err(e) = self.validate() {
            *self.top_mut() = prev;
            return Err(e);
        }
        Ok(())
    }

    pub fn head(&self) -> Option<&OutputHead> {
        self.head.as_ref()
    }

    pub fn head_mut(&mut self) -> Option<&mut OutputHead> {
        self.head.as_mut()
    }

    pub fn set_head(&mut self, head: OutputHead) -> Result<()> {
        check_dim("head input", self.top().n_hidden(), head.n_inputs())?;
        self.head = Some(head);
        Ok(())
    }

    pub fn log(&self) -> &StructureLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut StructureLog {
        &mut self.log
    }

    /// Input size followed by every hidden layer size.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.n_inputs())
            .chain(self.rbms.iter().map(|r| r.n_hidden()))
            .collect()
    }

    /// Appends a freshly initialized RBM on top of the current one.
    pub fn push_layer(&mut self, n_hidden: usize, rng_seed: u64) -> Result<()> {
        if n_hidden == 0 {
            return Err(Error::argument("new layer needs at least one neuron"));
        }
        if self.head.is_some() {
            return Err(Error::Structure("cannot push a layer under an attached head".into()));
        }
        let n_visible = self.top().n_hidden();
        self.rbms.push(RbmParams::init(n_visible, n_hidden, rng_seed));
        Ok(())
    }

    /// Per-layer conditional means: element 0 is the input, element `l` is
    /// `sigmoid(c^l + W^lᵀ h^{l-1})`.
    pub fn forward(&self, v: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
        let mut out = Vec::with_capacity(self.rbms.len() + 1);
        out.push(v.to_owned());
        for rbm in &self.rbms {
            let next = rbm.hidden_probs(out.last().expect("non-empty").view())?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn forward_batch(&self, v: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut out = Vec::with_capacity(self.rbms.len() + 1);
        out.push(v.to_owned());
        for rbm in &self.rbms {
            let next = rbm.hidden_probs_batch(out.last().expect("non-empty").view())?;
            out.push(next);
        }
        Ok(out)
    }

    /// Top-layer activations only.
    pub fn top_activations_batch(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut h = self.rbms[0].hidden_probs_batch(v)?;
        for rbm in &self.rbms[1..] {
            h = rbm.hidden_probs_batch(h.view())?;
        }
        Ok(h)
    }
}

pub fn dbn_forward(stack: &DbnStack, v: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
    stack.forward(v)
}

/// Formats layer sizes as an English list: `542, 502, and 95 neurons`.
pub fn format_layer_sizes(sizes: &[usize]) -> String {
    let s: Vec<String> = sizes.iter().map(|n| n.to_string()).collect();
    let list = match s.len() {
        0 => return "no neurons".to_string(),
        1 => s[0].clone(),
        2 => format!("{} and {}", s[0], s[1]),
        n => format!("{}, and {}", s[..n - 1].join(", "), s[n - 1]),
    };
    format!("{list} neurons")
}
