//! Binary restricted Boltzmann machine.
//!
//! Energy `E(v,h) = -b·v - c·h - vᵀWh` over binary visible `v ∈ {0,1}^I` and
//! hidden `h ∈ {0,1}^J`. Exact probabilities are available for models small
//! enough to enumerate; training uses CD-k.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// Largest `I + J` accepted by the exact enumeration routines.
pub const ENUMERATION_LIMIT: usize = 22;

/// Logits are clamped to this magnitude before the sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

/// Half-width of the uniform weight initialization interval.
pub const INIT_WEIGHT_SCALE: f64 = 0.01;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// A vector of binary units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument("binary vector must be non-empty"));
        }
        if let Some(bad) = values.iter().find(|&&x| x > 1) {
            return Err(Error::argument(format!("binary unit has value {bad}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len.max(1)])
    }

    /// The `len` low bits of `bits`, least significant bit first.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        Self((0..len).map(|i| ((bits >> i) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn to_real(&self) -> Array1<f64> {
        self.0.iter().map(|&x| x as f64).collect()
    }
}

/// Samples for one training step. Rows are visible vectors; real entries in
/// `[0,1]` are treated as Bernoulli probabilities of the binary units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    samples: Array2<f64>,
}

impl TrainBatch {
    pub fn from_binary(samples: &[BinaryVector]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::argument("empty batch"))?;
        let dim = first.len();
        let mut out = Array2::zeros((samples.len(), dim));
        for (r, s) in samples.iter().enumerate() {
            check_dim("batch sample", dim, s.len())?;
            for (i, &x) in s.as_slice().iter().enumerate() {
                out[[r, i]] = x as f64;
            }
        }
        Ok(Self { samples: out })
    }

    pub fn from_probabilities(samples: Array2<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::argument("empty batch"));
        }
        if samples.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::argument("batch activations must lie in [0,1]"));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.samples
    }
}

/// Parameters `θ = {b, c, W}` of one RBM.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// Visible biases, length `I`.
    pub visible_bias: Array1<f64>,
    /// Hidden biases, length `J`.
    pub hidden_bias: Array1<f64>,
    /// Weights, `I × J`.
    pub weights: Array2<f64>,
}

impl RbmParams {
    pub fn new(
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        weights: Array2<f64>,
    ) -> Result<Self> {
        check_dim("visible bias", weights.nrows(), visible_bias.len())?;
        check_dim("hidden bias", weights.ncols(), hidden_bias.len())?;
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::Structure("RBM layers must be non-empty".into()));
        }
        let params = Self {
            visible_bias,
            hidden_bias,
            weights,
        };
        if !params.is_finite() {
            return Err(Error::argument("RBM parameters must be finite"));
        }
        Ok(params)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            weights: Array2::zeros((n_visible, n_hidden)),
        }
    }

    /// Zero biases and weights uniform in `[-0.01, 0.01]`.
    pub fn init(n_visible: usize, n_hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Array2::from_shape_simple_fn((n_visible, n_hidden), || {
            rng.random_range(-INIT_WEIGHT_SCALE..=INIT_WEIGHT_SCALE)
        });
        Self {
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            weights,
        }
    }

    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
            && self.weights.iter().all(|x| x.is_finite())
    }

    /// `E(v,h) = -Σ b_i v_i - Σ c_j h_j - Σ_ij v_i W_ij h_j`.
    pub fn energy(&self, v: &BinaryVector, h: &BinaryVector) -> Result<f64> {
        self.energy_real(v.to_real().view(), h.to_real().view())
    }

    /// Energy with real-valued unit states (used with conditional means).
    pub fn energy_real(&self, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64> {
        check_dim("energy visible", self.n_visible(), v.len())?;
        check_dim("energy hidden", self.n_hidden(), h.len())?;
        let interaction = v.dot(&self.weights.dot(&h));
        Ok(-self.visible_bias.dot(&v) - self.hidden_bias.dot(&h) - interaction)
    }

    /// `F(v) = -b·v - Σ_j log(1 + exp(c_j + vᵀW_j))`, so that `p(v) = exp(-F(v)) / Z`.
    pub fn free_energy(&self, v: &BinaryVector) -> Result<f64> {
        check_dim("free energy visible", self.n_visible(), v.len())?;
        let v = v.to_real();
        let act = v.dot(&self.weights) + &self.hidden_bias;
        let softplus: f64 = act.iter().map(|&a| softplus(a)).sum();
        Ok(-self.visible_bias.dot(&v) - softplus)
    }

    fn check_enumerable(&self) -> Result<()> {
        let units = self.n_visible() + self.n_hidden();
        if units > ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                units,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(())
    }

    /// `log Z` by summing `exp(-E)` over every `(v, h)` configuration.
    pub fn log_partition_exact(&self) -> Result<f64> {
        self.check_enumerable()?;
        let (n_v, n_h) = (self.n_visible(), self.n_hidden());
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        let mut act = vec![0.0; n_h];
        for vbits in 0u64..(1 << n_v) {
            let mut bias_term = 0.0;
            act.copy_from_slice(self.hidden_bias.as_slice().expect("contiguous"));
            for i in 0..n_v {
                if (vbits >> i) & 1 == 1 {
                    bias_term += self.visible_bias[i];
                    for (j, a) in act.iter_mut().enumerate() {
                        *a += self.weights[[i, j]];
                    }
                }
            }
            for hbits in 0u64..(1 << n_h) {
                let mut neg_e = bias_term;
                for (j, a) in act.iter().enumerate() {
                    if (hbits >> j) & 1 == 1 {
                        neg_e += a;
                    }
                }
                // streaming log-sum-exp
                if neg_e > max {
                    acc = acc * (max - neg_e).exp() + 1.0;
                    max = neg_e;
                } else {
                    acc += (neg_e - max).exp();
                }
            }
        }
        Ok(max + acc.ln())
    }

    /// `Z = Σ_v Σ_h exp(-E(v,h))`.
    pub fn partition_exact(&self) -> Result<f64> {
        Ok(self.log_partition_exact()?.exp())
    }

    /// `p(v,h) = exp(-E(v,h)) / Z`.
    pub fn joint_prob_exact(&self, v: &BinaryVector, h: &BinaryVector) -> Result<f64> {
        let log_z = self.log_partition_exact()?;
        Ok((-self.energy(v, h)? - log_z).exp())
    }

    /// `p(v,h)` for every configuration, indexed by `(v_bits << J) | h_bits`.
    pub fn joint_table_exact(&self) -> Result<Vec<f64>> {
        let log_z = self.log_partition_exact()?;
        let (n_v, n_h) = (self.n_visible(), self.n_hidden());
        let mut out = Vec::with_capacity(1 << (n_v + n_h));
        for vbits in 0u64..(1 << n_v) {
            let v = BinaryVector::from_bits(vbits, n_v);
            for hbits in 0u64..(1 << n_h) {
                let h = BinaryVector::from_bits(hbits, n_h);
                out.push((-self.energy(&v, &h)? - log_z).exp());
            }
        }
        Ok(out)
    }

    /// `KL(data ‖ model)` where the data distribution is the empirical
    /// distribution of `samples`.
    pub fn kl_from_data_exact(&self, samples: &[BinaryVector]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::argument("empty sample set"));
        }
        let n_v = self.n_visible();
        let mut counts = std::collections::BTreeMap::new();
        for v in samples {
            check_dim("KL sample", n_v, v.len())?;
            let bits = v
                .as_slice()
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
            *counts.entry(bits).or_insert(0usize) += 1;
        }
        let model = self.visible_marginals_exact()?;
        let n = samples.len() as f64;
        Ok(counts
            .into_iter()
            .map(|(bits, c)| {
                let p = c as f64 / n;
                p * (p / model[bits as usize]).ln()
            })
            .sum())
    }

    /// Marginal `p(v)` for every visible configuration, indexed by the bit
    /// pattern of `v` (unit `i` is bit `i`).
    pub fn visible_marginals_exact(&self) -> Result<Vec<f64>> {
        let log_z = self.log_partition_exact()?;
        (0u64..(1 << self.n_visible()))
            .map(|bits| {
                let v = BinaryVector::from_bits(bits, self.n_visible());
                Ok((-self.free_energy(&v)? - log_z).exp())
            })
            .collect()
    }

    /// `p(h_j = 1 | v) = sigmoid(c_j + Σ_i v_i W_ij)`.
    pub fn hidden_conditional(&self, v: &BinaryVector) -> Result<Array1<f64>> {
        self.hidden_probs(v.to_real().view())
    }

    /// `p(v_i = 1 | h) = sigmoid(b_i + Σ_j W_ij h_j)`.
    pub fn visible_conditional(&self, h: &BinaryVector) -> Result<Array1<f64>> {
        self.visible_probs(h.to_real().view())
    }

    pub fn hidden_probs(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("hidden conditional", self.n_visible(), v.len())?;
        Ok((v.dot(&self.weights) + &self.hidden_bias).mapv(sigmoid))
    }

    pub fn visible_probs(&self, h: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("visible conditional", self.n_hidden(), h.len())?;
        Ok((self.weights.dot(&h) + &self.visible_bias).mapv(sigmoid))
    }

    /// Row-wise hidden conditionals for an `N × I` batch.
    pub fn hidden_probs_batch(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("hidden conditional", self.n_visible(), v.ncols())?;
        let mut out = v.dot(&self.weights);
        out += &self.hidden_bias;
        out.mapv_inplace(sigmoid);
        Ok(out)
    }

    /// Row-wise visible conditionals for an `N × J` batch.
    pub fn visible_probs_batch(&self, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("visible conditional", self.n_hidden(), h.ncols())?;
        let mut out = h.dot(&self.weights.t());
        out += &self.visible_bias;
        out.mapv_inplace(sigmoid);
        Ok(out)
    }

    /// One CD-k update on `batch`, returning new parameters.
    pub fn cd_update(&self, batch: &TrainBatch, k: usize, lr: f64, rng_seed: u64) -> Result<Self> {
        let mut next = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        next.cd_step(batch.samples(), k, lr, &mut rng)?;
        Ok(next)
    }

    /// In-place CD-k step. Rows of `data` are Bernoulli probabilities of the
    /// visible units; the positive phase samples from them.
    pub fn cd_step<R: Rng>(
        &mut self,
        data: ArrayView2<f64>,
        k: usize,
        lr: f64,
        rng: &mut R,
    ) -> Result<()> {
        if data.nrows() == 0 {
            return Err(Error::argument("empty batch"));
        }
        if k == 0 {
            return Err(Error::argument("CD requires k >= 1"));
        }
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::argument(format!("learning rate {lr} must be >= 0")));
        }
        check_dim("cd batch", self.n_visible(), data.ncols())?;

        let n = data.nrows() as f64;
        let v0 = sample_bernoulli(data, rng);
        let ph0 = self.hidden_probs_batch(v0.view())?;
        let mut h = sample_bernoulli(ph0.view(), rng);
        let mut vk = v0.clone();
        let mut phk = ph0.clone();
        for step in 1..=k {
            let pv = self.visible_probs_batch(h.view())?;
            vk = sample_bernoulli(pv.view(), rng);
            phk = self.hidden_probs_batch(vk.view())?;
            if step < k {
                h = sample_bernoulli(phk.view(), rng);
            }
        }

        if lr == 0.0 {
            return Ok(());
        }
        let grad_w = (v0.t().dot(&ph0) - vk.t().dot(&phk)) / n;
        let grad_b = (v0.sum_axis(Axis(0)) - vk.sum_axis(Axis(0))) / n;
        let grad_c = (ph0.sum_axis(Axis(0)) - phk.sum_axis(Axis(0))) / n;
        self.weights.scaled_add(lr, &grad_w);
        self.visible_bias.scaled_add(lr, &grad_b);
        self.hidden_bias.scaled_add(lr, &grad_c);
        Ok(())
    }

    /// Mean squared difference between the batch and its one-step
    /// mean-field reconstruction.
    pub fn reconstruction_error(&self, batch: &TrainBatch) -> Result<f64> {
        self.reconstruction_error_view(batch.samples())
    }

    pub fn reconstruction_error_view(&self, data: ArrayView2<f64>) -> Result<f64> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::argument("empty batch"));
        }
        let ph = self.hidden_probs_batch(data)?;
        let pv = self.visible_probs_batch(ph.view())?;
        let diff = &pv - &data;
        Ok(diff.mapv(|x| x * x).mean().unwrap_or(0.0))
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sample_bernoulli<R: Rng>(probs: ArrayView2<f64>, rng: &mut R) -> Array2<f64> {
    probs.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bv(x: &[u8]) -> BinaryVector {
        BinaryVector::new(x.to_vec()).unwrap()
    }

    fn small() -> RbmParams {
        RbmParams::new(array![1.0, -1.0], array![0.5], array![[2.0], [-1.0]]).unwrap()
    }

    #[test]
    fn energy_of_zero_params_is_zero() {
        let p = RbmParams::zeros(3, 2);
        assert_eq!(p.energy(&bv(&[1, 0, 1]), &bv(&[1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn energy_hand_example() {
        // -(1*1 + -1*0) - 0.5*1 - (1*2*1) = -3.5
        let e = small().energy(&bv(&[1, 0]), &bv(&[1])).unwrap();
        assert!((e + 3.5).abs() < 1e-15);
    }

    #[test]
    fn energy_is_linear_in_params() {
        let p = small();
        let neg = RbmParams::new(
            -&p.visible_bias,
            -&p.hidden_bias,
            -&p.weights,
        )
        .unwrap();
        let (v, h) = (bv(&[1, 1]), bv(&[1]));
        assert_eq!(p.energy(&v, &h).unwrap(), -neg.energy(&v, &h).unwrap());
    }

    #[test]
    fn energy_rejects_bad_dims() {
        let err = small().energy(&bv(&[1]), &bv(&[1])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn binary_vector_rejects_non_binary() {
        assert!(BinaryVector::new(vec![0, 2]).is_err());
        assert!(BinaryVector::new(vec![]).is_err());
    }

    #[test]
    fn partition_of_zero_models() {
        assert!((RbmParams::zeros(1, 1).partition_exact().unwrap() - 4.0).abs() < 1e-12);
        assert!((RbmParams::zeros(2, 1).partition_exact().unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn partition_rejects_large_models() {
        let err = RbmParams::zeros(12, 11).partition_exact().unwrap_err();
        assert!(matches!(err, Error::Capacity { units: 23, .. }));
        assert!(RbmParams::zeros(11, 11).log_partition_exact().is_ok());
    }

    #[test]
    fn zero_model_joint_is_uniform() {
        let p = RbmParams::zeros(1, 1);
        for (v, h) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let prob = p.joint_prob_exact(&bv(&[v]), &bv(&[h])).unwrap();
            assert!((prob - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn marginals_from_free_energy_match_joint_sums() {
        let p = RbmParams::new(
            array![0.3, -0.7, 1.1],
            array![-0.2, 0.4],
            array![[0.5, -1.0], [0.25, 0.8], [-0.6, 0.1]],
        )
        .unwrap();
        let marginals = p.visible_marginals_exact().unwrap();
        for (bits, &m) in marginals.iter().enumerate() {
            let v = BinaryVector::from_bits(bits as u64, 3);
            let summed: f64 = (0..4)
                .map(|hb| p.joint_prob_exact(&v, &BinaryVector::from_bits(hb, 2)).unwrap())
                .sum();
            assert!((m - summed).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_visible_bias_raises_its_marginal() {
        let mut p = small();
        let marginal_on = |p: &RbmParams| -> f64 {
            p.visible_marginals_exact()
                .unwrap()
                .iter()
                .enumerate()
                .filter(|(bits, _)| bits & 1 == 1)
                .map(|(_, m)| m)
                .sum()
        };
        let before = marginal_on(&p);
        p.visible_bias[0] += 0.5;
        assert!(marginal_on(&p) > before);
    }

    #[test]
    fn conditionals() {
        let p = RbmParams::zeros(3, 2);
        assert!(p.hidden_conditional(&bv(&[1, 0, 1])).unwrap().iter().all(|&x| x == 0.5));
        assert!(p.visible_conditional(&bv(&[1, 1])).unwrap().iter().all(|&x| x == 0.5));

        let one = RbmParams::new(array![0.0], array![0.0], array![[2.0]]).unwrap();
        let h = one.hidden_conditional(&bv(&[1])).unwrap()[0];
        let v = one.visible_conditional(&bv(&[1])).unwrap()[0];
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((h - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert_eq!(h, expected);
        assert_eq!(v, expected);
    }

    #[test]
    fn sigmoid_limit_is_monotone_and_open() {
        let mut last = 0.0;
        for c in [0.0, 1.0, 5.0, 10.0, 20.0, 29.0, 100.0] {
            let p = RbmParams::new(array![0.0], array![c], array![[0.0]]).unwrap();
            let s = p.hidden_conditional(&bv(&[0])).unwrap()[0];
            assert!(s >= last && s < 1.0);
            last = s;
        }
        assert!(last > 1.0 - 1e-12);
    }

    #[test]
    fn cd_with_zero_lr_is_identity() {
        let p = RbmParams::init(4, 3, 7);
        let batch = TrainBatch::from_binary(&[bv(&[1, 0, 1, 0]), bv(&[0, 1, 0, 1])]).unwrap();
        assert_eq!(p.cd_update(&batch, 1, 0.0, 3).unwrap(), p);
    }

    #[test]
    fn cd_is_deterministic_per_seed() {
        let p = RbmParams::init(4, 3, 7);
        let batch = TrainBatch::from_binary(&[bv(&[1, 0, 1, 0]), bv(&[0, 1, 0, 1])]).unwrap();
        let a = p.cd_update(&batch, 2, 0.1, 42).unwrap();
        let b = p.cd_update(&batch, 2, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, p);
    }

    #[test]
    fn cd_argument_errors() {
        let mut p = RbmParams::init(2, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(p.cd_step(empty.view(), 1, 0.1, &mut rng).is_err());
        let one = Array2::<f64>::zeros((1, 2));
        assert!(p.cd_step(one.view(), 0, 0.1, &mut rng).is_err());
        assert!(p.cd_step(one.view(), 1, -1.0, &mut rng).is_err());
    }

    #[test]
    fn probability_batch_validation() {
        assert!(TrainBatch::from_probabilities(array![[0.2, 1.2]]).is_err());
        assert!(TrainBatch::from_probabilities(Array2::zeros((0, 3))).is_err());
        assert!(TrainBatch::from_probabilities(array![[0.2, 0.9]]).is_ok());
    }

    #[test]
    fn reconstruction_error_cases() {
        // Saturated weights memorize the pattern [1,1] / [0,0].
        let p = RbmParams::new(array![-10.0, -10.0], array![-15.0], array![[20.0], [20.0]])
            .unwrap();
        let batch = TrainBatch::from_binary(&[bv(&[1, 1]), bv(&[0, 0])]).unwrap();
        assert!(p.reconstruction_error(&batch).unwrap() < 0.01);

        // Zero model reconstructs 0.5 everywhere.
        let half = TrainBatch::from_probabilities(array![[0.5, 0.5]]).unwrap();
        assert_eq!(RbmParams::zeros(2, 3).reconstruction_error(&half).unwrap(), 0.0);

        let empty = Array2::<f64>::zeros((0, 2));
        assert!(p.reconstruction_error_view(empty.view()).is_err());
    }

    #[test]
    fn kl_against_uniform_model() {
        let p = RbmParams::zeros(2, 1);
        let one = [BinaryVector::from_bits(1, 2)];
        assert!((p.kl_from_data_exact(&one).unwrap() - 4f64.ln()).abs() < 1e-12);
        let all: Vec<_> = (0..4).map(|b| BinaryVector::from_bits(b, 2)).collect();
        assert!(p.kl_from_data_exact(&all).unwrap().abs() < 1e-12);
    }

    #[test]
    fn joint_table_sums_to_one() {
        let p = RbmParams::init(3, 2, 11);
        let t = p.joint_table_exact().unwrap();
        assert_eq!(t.len(), 32);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let v = BinaryVector::from_bits(5, 3);
        let h = BinaryVector::from_bits(2, 2);
        assert!((t[(5 << 2) | 2] - p.joint_prob_exact(&v, &h).unwrap()).abs() < 1e-15);
    }
}
