//! Neuron generation and annihilation inside one RBM, driven by the Walking
//! Distance (WD) of each hidden neuron's parameters across epochs.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dbn::DbnStack;
use crate::error::{check_dim, Error, Result};
use crate::rbm::RbmParams;

/// Largest perturbation applied to a generated neuron's copied parameters.
pub const GENERATION_JITTER: f64 = 1e-3;

/// Per-neuron smoothed magnitudes of successive parameter changes.
#[derive(Debug, Clone, PartialEq)]
pub struct WdTrace {
    /// Smoothed `|Δc_j|`.
    pub bias_walk: Vec<f64>,
    /// Smoothed `‖ΔW_{·j}‖₂`.
    pub weight_walk: Vec<f64>,
    pub epoch: usize,
    pub gamma: f64,
}

impl WdTrace {
    pub fn new(n_hidden: usize, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("WD smoothing {gamma} must be in [0,1)")));
        }
        Ok(Self {
            bias_walk: vec![0.0; n_hidden],
            weight_walk: vec![0.0; n_hidden],
            epoch: 0,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.bias_walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias_walk.is_empty()
    }

    /// Fluctuation score `dc_j · dW_j` of one neuron.
    pub fn fluctuation(&self, j: usize) -> f64 {
        self.bias_walk[j] * self.weight_walk[j]
    }

    pub fn total(&self) -> f64 {
        (0..self.len()).map(|j| self.fluctuation(j)).sum()
    }

    /// Folds the change `prev → curr` into the accumulators.
    pub fn update(&mut self, prev: &RbmParams, curr: &RbmParams) -> Result<()> {
        check_dim("WD visible", prev.n_visible(), curr.n_visible())?;
        check_dim("WD hidden", prev.n_hidden(), curr.n_hidden())?;
        check_dim("WD trace", self.len(), curr.n_hidden())?;
        let g = self.gamma;
        let dw = &curr.weights - &prev.weights;
        for j in 0..self.len() {
            let dc = (curr.hidden_bias[j] - prev.hidden_bias[j]).abs();
            let norm = dw.column(j).dot(&dw.column(j)).sqrt();
            self.bias_walk[j] = g * self.bias_walk[j] + (1.0 - g) * dc;
            self.weight_walk[j] = g * self.weight_walk[j] + (1.0 - g) * norm;
        }
        self.epoch += 1;
        Ok(())
    }
}

pub fn update_wd(trace: &WdTrace, prev: &RbmParams, curr: &RbmParams) -> Result<WdTrace> {
    let mut next = trace.clone();
    next.update(prev, curr)?;
    Ok(next)
}

/// Thresholds steering structural change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureThresholds {
    /// θ_G: a neuron with `dc·dW` above this is split.
    pub generation: f64,
    /// θ_A: mean activation below θ_A or above `1 - θ_A` marks a neuron redundant.
    pub annihilation: f64,
    /// θ_L_wd per hidden neuron; the layer threshold is this times `J`.
    pub layer_wd_per_hidden: f64,
    /// θ_L_energy: mean top-RBM energy must exceed this to add a layer.
    pub layer_energy: f64,
    pub max_hidden: usize,
    pub max_layers: usize,
}

impl Default for StructureThresholds {
    fn default() -> Self {
        Self {
            generation: 0.05,
            annihilation: 0.05,
            layer_wd_per_hidden: 0.1,
            layer_energy: 0.0,
            max_hidden: 1024,
            max_layers: 8,
        }
    }
}

impl StructureThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.generation > 0.0) {
            return Err(Error::config("generation threshold must be > 0"));
        }
        if !(self.annihilation > 0.0 && self.annihilation < 0.5) {
            return Err(Error::config("annihilation threshold must be in (0, 0.5)"));
        }
        if !(self.layer_wd_per_hidden > 0.0) {
            return Err(Error::config("layer WD threshold must be > 0"));
        }
        if self.layer_energy.is_nan() {
            return Err(Error::config("layer energy threshold is NaN"));
        }
        if self.max_hidden < 1 || self.max_layers < 1 {
            return Err(Error::config("neuron and layer caps must be >= 1"));
        }
        Ok(())
    }

    /// Thresholds that never fire.
    pub fn frozen() -> Self {
        Self {
            generation: f64::INFINITY,
            layer_wd_per_hidden: f64::INFINITY,
            annihilation: 1e-300,
            ..Self::default()
        }
    }
}

/// Neurons whose fluctuation exceeds θ_G, in index order, truncated to the
/// remaining capacity below `max_hidden`.
pub fn check_generation(trace: &WdTrace, th: &StructureThresholds) -> Vec<usize> {
    let room = th.max_hidden.saturating_sub(trace.len());
    (0..trace.len())
        .filter(|&j| trace.fluctuation(j) > th.generation)
        .take(room)
        .collect()
}

/// Appends a perturbed copy of hidden neuron `j` as neuron `J`.
pub fn generate_neuron(
    params: &RbmParams,
    trace: &WdTrace,
    j: usize,
    rng_seed: u64,
    max_hidden: usize,
) -> Result<(RbmParams, WdTrace)> {
    let n_h = params.n_hidden();
    check_dim("WD trace", n_h, trace.len())?;
    if j >= n_h {
        return Err(Error::argument(format!("neuron {j} out of range (J={n_h})")));
    }
    if n_h >= max_hidden {
        return Err(Error::Structure(format!("neuron cap {max_hidden} reached")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut jitter = || rng.random_range(-GENERATION_JITTER..=GENERATION_JITTER);

    let mut hidden_bias = Array1::zeros(n_h + 1);
    hidden_bias.slice_mut(s![..n_h]).assign(&params.hidden_bias);
    hidden_bias[n_h] = params.hidden_bias[j] + jitter();

    let n_v = params.n_visible();
    let mut weights = Array2::zeros((n_v, n_h + 1));
    weights.slice_mut(s![.., ..n_h]).assign(&params.weights);
    for i in 0..n_v {
        weights[[i, n_h]] = params.weights[[i, j]] + jitter();
    }

    let mut next_trace = trace.clone();
    next_trace.bias_walk.push(0.0);
    next_trace.weight_walk.push(0.0);
    Ok((
        RbmParams {
            visible_bias: params.visible_bias.clone(),
            hidden_bias,
            weights,
        },
        next_trace,
    ))
}

/// Mean `p(h_j=1|v)` over the rows of `data`.
pub fn mean_activations(params: &RbmParams, data: ArrayView2<f64>) -> Result<Array1<f64>> {
    if data.nrows() == 0 {
        return Err(Error::argument("empty batch"));
    }
    let probs = params.hidden_probs_batch(data)?;
    Ok(probs.mean_axis(Axis(0)).expect("non-empty"))
}

/// Dead or saturated neurons. Never flags every neuron: if all are extreme,
/// the one closest to 0.5 is spared.
pub fn check_annihilation(
    params: &RbmParams,
    data: ArrayView2<f64>,
    th: &StructureThresholds,
) -> Result<Vec<usize>> {
    let means = mean_activations(params, data)?;
    let lo = th.annihilation;
    let hi = 1.0 - th.annihilation;
    let mut flagged: Vec<usize> = (0..means.len())
        .filter(|&j| means[j] < lo || means[j] > hi)
        .collect();
    if flagged.len() == means.len() {
        let keep = (0..means.len())
            .min_by(|&a, &b| {
                (means[a] - 0.5)
                    .abs()
                    .total_cmp(&(means[b] - 0.5).abs())
                    .then(a.cmp(&b))
            })
            .expect("non-empty");
        flagged.retain(|&j| j != keep);
    }
    Ok(flagged)
}

/// Removes hidden neuron `j`.
pub fn annihilate_neuron(
    params: &RbmParams,
    trace: &WdTrace,
    j: usize,
) -> Result<(RbmParams, WdTrace)> {
    let n_h = params.n_hidden();
    check_dim("WD trace", n_h, trace.len())?;
    if j >= n_h {
        return Err(Error::argument(format!("neuron {j} out of range (J={n_h})")));
    }
    if n_h < 2 {
        return Err(Error::Structure("cannot remove the last hidden neuron".into()));
    }
    let keep: Vec<usize> = (0..n_h).filter(|&x| x != j).collect();
    let mut next_trace = trace.clone();
    next_trace.bias_walk.remove(j);
    next_trace.weight_walk.remove(j);
    Ok((
        RbmParams {
            visible_bias: params.visible_bias.clone(),
            hidden_bias: params.hidden_bias.select(Axis(0), &keep),
            weights: params.weights.select(Axis(1), &keep),
        },
        next_trace,
    ))
}

/// Mean energy of `data` under the top RBM with `h` set to conditional means.
pub fn mean_top_energy(stack: &DbnStack, data: ArrayView2<f64>) -> Result<f64> {
    let top = stack.top();
    if data.nrows() == 0 {
        return Err(Error::argument("empty batch"));
    }
    let h = top.hidden_probs_batch(data)?;
    let mut total = 0.0;
    for (v, hr) in data.rows().into_iter().zip(h.rows()) {
        total += top.energy_real(v, hr)?;
    }
    Ok(total / data.nrows() as f64)
}

/// True when the total WD and the mean energy both exceed their thresholds
/// and another layer fits under the cap.
pub fn check_layer_generation(
    stack: &DbnStack,
    trace: &WdTrace,
    data: ArrayView2<f64>,
    th: &StructureThresholds,
) -> Result<bool> {
    if stack.n_layers() >= th.max_layers {
        return Ok(false);
    }
    let wd_threshold = th.layer_wd_per_hidden * stack.top().n_hidden() as f64;
    if !(trace.total() > wd_threshold) {
        return Ok(false);
    }
    Ok(mean_top_energy(stack, data)? > th.layer_energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::BinaryVector;
    use ndarray::array;

    fn trace_with(products: &[(f64, f64)]) -> WdTrace {
        WdTrace {
            bias_walk: products.iter().map(|p| p.0).collect(),
            weight_walk: products.iter().map(|p| p.1).collect(),
            epoch: 1,
            gamma: 0.9,
        }
    }

    #[test]
    fn unchanged_params_decay_accumulators() {
        let p = RbmParams::init(3, 2, 1);
        let mut t = trace_with(&[(0.5, 2.0), (1.0, 4.0)]);
        t.update(&p, &p).unwrap();
        assert!((t.bias_walk[0] - 0.45).abs() < 1e-15);
        assert!((t.weight_walk[1] - 3.6).abs() < 1e-15);
        assert_eq!(t.epoch, 2);
    }

    #[test]
    fn unsmoothed_update_takes_raw_deltas() {
        let prev = RbmParams::zeros(2, 1);
        let mut curr = prev.clone();
        curr.hidden_bias[0] = 0.2;
        curr.weights[[0, 0]] = 0.4;
        let t = update_wd(&WdTrace::new(1, 0.0).unwrap(), &prev, &curr).unwrap();
        assert!((t.bias_walk[0] - 0.2).abs() < 1e-15);
        assert!((t.weight_walk[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_delta_converges_to_fixed_point() {
        // a_{n+1} = γ a_n + (1-γ) d has fixed point d; after n steps the gap is γ^n d.
        let d = 0.3;
        let mut t = WdTrace::new(1, 0.5).unwrap();
        let mut prev = RbmParams::zeros(1, 1);
        for n in 1..=40 {
            let mut curr = prev.clone();
            curr.hidden_bias[0] += d;
            t.update(&prev, &curr).unwrap();
            let gap = d * 0.5f64.powi(n);
            assert!((t.bias_walk[0] - (d - gap)).abs() < 1e-12);
            prev = curr;
        }
        assert!((t.bias_walk[0] - d).abs() < 1e-9);
    }

    #[test]
    fn update_rejects_mismatched_dims() {
        let mut t = WdTrace::new(2, 0.5).unwrap();
        assert!(t.update(&RbmParams::zeros(2, 2), &RbmParams::zeros(2, 3)).is_err());
        assert!(WdTrace::new(2, 1.0).is_err());
    }

    #[test]
    fn generation_checks() {
        let th = StructureThresholds {
            generation: 0.1,
            max_hidden: 3,
            ..Default::default()
        };
        assert!(check_generation(&trace_with(&[(0.0, 0.0), (0.0, 0.0)]), &th).is_empty());
        assert_eq!(
            check_generation(&trace_with(&[(0.0, 0.0), (0.2, 1.0)]), &th),
            vec![1]
        );
        let full = trace_with(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        assert!(check_generation(&full, &th).is_empty());
        // Only one slot left below the cap.
        assert_eq!(
            check_generation(&trace_with(&[(1.0, 1.0), (1.0, 1.0)]), &th),
            vec![0]
        );
    }

    #[test]
    fn generated_neuron_copies_parent() {
        let p = RbmParams::init(5, 4, 3);
        let t = WdTrace::new(4, 0.9).unwrap();
        let (g, gt) = generate_neuron(&p, &t, 2, 11, 1024).unwrap();
        assert_eq!(g.n_hidden(), 5);
        assert_eq!(gt.len(), 5);
        assert_eq!(gt.bias_walk[4], 0.0);
        assert!((g.hidden_bias[4] - p.hidden_bias[2]).abs() <= GENERATION_JITTER);
        for i in 0..5 {
            assert!((g.weights[[i, 4]] - p.weights[[i, 2]]).abs() <= GENERATION_JITTER);
            for j in 0..4 {
                assert_eq!(g.weights[[i, j]], p.weights[[i, j]]);
            }
        }
        let (again, _) = generate_neuron(&p, &t, 2, 11, 1024).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn generated_neuron_off_preserves_energy() {
        let p = RbmParams::init(3, 2, 9);
        let t = WdTrace::new(2, 0.9).unwrap();
        let (g, _) = generate_neuron(&p, &t, 0, 5, 1024).unwrap();
        for vb in 0..8u64 {
            for hb in 0..4u64 {
                let v = BinaryVector::from_bits(vb, 3);
                let before = p.energy(&v, &BinaryVector::from_bits(hb, 2)).unwrap();
                let after = g.energy(&v, &BinaryVector::from_bits(hb, 3)).unwrap();
                assert!((before - after).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_errors() {
        let p = RbmParams::init(3, 2, 9);
        let t = WdTrace::new(2, 0.9).unwrap();
        assert!(generate_neuron(&p, &t, 2, 0, 10).is_err());
        assert!(generate_neuron(&p, &t, 0, 0, 2).is_err());
    }

    #[test]
    fn annihilation_flags_dead_neurons_only() {
        let th = StructureThresholds::default();
        let data = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let zero = RbmParams::zeros(2, 3);
        assert!(check_annihilation(&zero, data.view(), &th).unwrap().is_empty());

        let mut dead = RbmParams::zeros(2, 3);
        dead.hidden_bias[1] = -50.0;
        assert_eq!(check_annihilation(&dead, data.view(), &th).unwrap(), vec![1]);

        // An exact duplicate of an informative neuron is not extreme.
        let mut dup = RbmParams::zeros(2, 2);
        dup.weights = array![[1.0, 1.0], [-1.0, -1.0]];
        assert!(check_annihilation(&dup, data.view(), &th).unwrap().is_empty());
    }

    #[test]
    fn annihilation_never_flags_everything() {
        let mut p = RbmParams::zeros(2, 3);
        p.hidden_bias = array![-12.0, -8.0, 10.0];
        let data = array![[1.0, 0.0]];
        let flagged = check_annihilation(&p, data.view(), &StructureThresholds::default()).unwrap();
        assert_eq!(flagged, vec![0, 2]);
    }

    #[test]
    fn annihilate_removes_column() {
        let mut p = RbmParams::init(3, 5, 4);
        p.weights.column_mut(1).fill(0.0);
        p.hidden_bias[1] = 0.0;
        let t = WdTrace::new(5, 0.9).unwrap();
        let v = array![1.0, 0.0, 1.0];
        let before = p.hidden_probs(v.view()).unwrap();
        let (q, qt) = annihilate_neuron(&p, &t, 1).unwrap();
        assert_eq!(q.n_hidden(), 4);
        assert_eq!(qt.len(), 4);
        let after = q.hidden_probs(v.view()).unwrap();
        for (a, b) in [0usize, 2, 3, 4].iter().zip(after.iter()) {
            assert_eq!(before[*a], *b);
        }
        // Regrowing from a neighbour restores the shape.
        let (r, rt) = generate_neuron(&q, &qt, 0, 1, 1024).unwrap();
        assert_eq!((r.n_visible(), r.n_hidden(), rt.len()), (3, 5, 5));
    }

    #[test]
    fn last_neuron_is_protected() {
        let p = RbmParams::zeros(2, 1);
        let t = WdTrace::new(1, 0.9).unwrap();
        assert!(matches!(
            annihilate_neuron(&p, &t, 0).unwrap_err(),
            Error::Structure(_)
        ));
    }

    #[test]
    fn layer_generation_conjunction() {
        let mut stack = DbnStack::new(RbmParams::zeros(2, 2)).unwrap();
        stack.top_mut().visible_bias = array![-5.0, -5.0];
        let data = array![[1.0, 1.0]];
        let th = StructureThresholds {
            layer_wd_per_hidden: 0.1,
            layer_energy: 0.0,
            max_layers: 2,
            ..Default::default()
        };
        let calm = WdTrace::new(2, 0.9).unwrap();
        assert!(!check_layer_generation(&stack, &calm, data.view(), &th).unwrap());

        let busy = trace_with(&[(1.0, 1.0), (1.0, 1.0)]);
        // energy = 10 > 0 and total WD = 2 > 0.2
        assert!(check_layer_generation(&stack, &busy, data.view(), &th).unwrap());

        let low_energy = StructureThresholds {
            layer_energy: 20.0,
            ..th.clone()
        };
        assert!(!check_layer_generation(&stack, &busy, data.view(), &low_energy).unwrap());

        stack.push_layer(2, 0).unwrap();
        assert!(!check_layer_generation(&stack, &busy, data.view(), &th).unwrap());
    }
}
