//! Small fully connected networks with hand-written reverse mode.
//!
//! A network is a stack of affine layers with ReLU between them. Each layer
//! may optionally be wrapped by a linear propagation operator `P` so that the
//! layer computes `P(in · W) + b`; with `P = Â` this is a GCN layer, with no
//! operator it is an ordinary MLP layer. Dropout is inverted dropout on the
//! input of every layer (features and hidden activations, never logits).

use rand::RngCore;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::tensor::{dropout_mask, DenseMatrix, Features};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot(dims: &[usize], rng: &mut dyn RngCore) -> Result<MlpParams> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                let values = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
                Layer {
                    weight: DenseMatrix::from_vec(fan_in, fan_out, values)
                        .expect("glorot sizes are consistent"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<MlpParams> {
        check_dims(dims)?;
        Ok(MlpParams {
            layers: dims
                .windows(2)
                .map(|w| Layer {
                    weight: DenseMatrix::zeros(w[0], w[1]),
                    bias: vec![0.0; w[1]],
                })
                .collect(),
        })
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams::zeros(&self.dims()).expect("existing params have valid dims")
    }

    /// `[input, hidden.., classes]`
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.rows()];
        dims.extend(self.layers.iter().map(|l| l.weight.cols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.values().len() + l.bias.len())
            .sum()
    }

    /// Checks that consecutive layers chain and biases match.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::input("network has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::input(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.weight.cols()
                )));
            }
            if i > 0 && self.layers[i - 1].weight.cols() != l.weight.rows() {
                return Err(Error::input(format!("layer {i}: dims do not chain")));
            }
        }
        Ok(())
    }

    /// Flat mutable views over all parameters, weights then bias per layer.
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.values_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.weight.values());
            out.push(l.bias.as_slice());
        }
        out
    }

    fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape() && a.bias.len() == b.bias.len())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::input("a network needs at least input and output dims"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::input(format!("zero-width layer in dims {dims:?}")));
    }
    Ok(())
}

/// A linear operator applied after each layer's matrix product.
pub trait Propagation {
    fn apply(&self, h: &DenseMatrix) -> Result<DenseMatrix>;
    fn apply_adjoint(&self, g: &DenseMatrix) -> Result<DenseMatrix>;
}

impl Propagation for NormalizedAdjacency {
    fn apply(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.spmm(h)
    }

    fn apply_adjoint(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        self.spmm_transpose(g)
    }
}

/// Dropout masks for one forward pass, one optional mask per layer input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    pub layer_inputs: Vec<Option<Vec<f64>>>,
}

pub enum Dropout<'a> {
    Off,
    Sample { rate: f64, rng: &'a mut dyn RngCore },
    Replay(&'a DropoutMasks),
}

impl Dropout<'_> {
    fn mask_for(&mut self, layer: usize, len: usize) -> Result<Option<Vec<f64>>> {
        match self {
            Dropout::Off => Ok(None),
            Dropout::Sample { rate, rng } => {
                if *rate <= 0.0 {
                    Ok(None)
                } else {
                    Ok(Some(dropout_mask(len, *rate, &mut **rng)))
                }
            }
            Dropout::Replay(masks) => match masks.layer_inputs.get(layer) {
                Some(Some(m)) if m.len() == len => Ok(Some(m.clone())),
                Some(Some(m)) => Err(Error::Internal(format!(
                    "replayed mask for layer {layer} has {} entries, expected {len}",
                    m.len()
                ))),
                _ => Ok(None),
            },
        }
    }
}

enum LayerInput {
    Features(Features),
    Dense(DenseMatrix),
}

impl LayerInput {
    fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(f) => f.matmul(w),
            LayerInput::Dense(d) => d.matmul(w),
        }
    }

    fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(f) => f.t_matmul(g),
            LayerInput::Dense(d) => d.t_matmul(g),
        }
    }
}

/// What backward needs from a forward pass.
pub struct ForwardCache {
    inputs: Vec<LayerInput>,
    pre_activations: Vec<DenseMatrix>,
    masks: DropoutMasks,
    dims: Vec<usize>,
    propagated: bool,
}

impl ForwardCache {
    pub fn masks(&self) -> &DropoutMasks {
        &self.masks
    }
}

/// Forward pass with optional per-layer propagation.
pub fn forward(
    params: &MlpParams,
    x: &Features,
    mut dropout: Dropout<'_>,
    prop: Option<&dyn Propagation>,
) -> Result<(DenseMatrix, ForwardCache)> {
    params.validate()?;
    if x.cols() != params.input_dim() {
        return Err(Error::input(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre_activations = Vec::with_capacity(n_layers);
    let mut masks = DropoutMasks::default();

    let first_mask = dropout.mask_for(0, x.stored_len())?;
    let first = match &first_mask {
        Some(m) => x.apply_mask(m)?,
        None => x.clone(),
    };
    masks.layer_inputs.push(first_mask);
    let mut input = LayerInput::Features(first);

    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = input.matmul(&layer.weight)?;
        if let Some(p) = prop {
            z = p.apply(&z)?;
        }
        z.add_row_vector(&layer.bias);
        inputs.push(input);
        if l + 1 == n_layers {
            pre_activations.push(z);
            break;
        }
        let mut h = z.clone();
        h.values_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        let mask = dropout.mask_for(l + 1, h.values().len())?;
        if let Some(m) = &mask {
            h.values_mut().iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        masks.layer_inputs.push(mask);
        pre_activations.push(z);
        input = LayerInput::Dense(h);
    }
    let logits = pre_activations.last().cloned().expect("at least one layer");
    Ok((
        logits,
        ForwardCache {
            inputs,
            pre_activations,
            masks,
            dims: params.dims(),
            propagated: prop.is_some(),
        },
    ))
}

/// Reverse pass; returns gradients shaped like `params`.
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    dlogits: &DenseMatrix,
    prop: Option<&dyn Propagation>,
) -> Result<MlpParams> {
    if cache.dims != params.dims() || cache.inputs.len() != params.layers.len() {
        return Err(Error::Internal(
            "forward cache was produced by a different network".into(),
        ));
    }
    if cache.propagated != prop.is_some() {
        return Err(Error::Internal(
            "backward propagation operator does not match the forward pass".into(),
        ));
    }
    let last = cache.pre_activations.last().expect("non-empty cache");
    if dlogits.shape() != last.shape() {
        return Err(Error::Internal(format!(
            "dlogits shape {:?} does not match logits {:?}",
            dlogits.shape(),
            last.shape()
        )));
    }
    let mut grads = params.zeros_like();
    let mut g = dlogits.clone();
    for l in (0..params.layers.len()).rev() {
        grads.layers[l].bias = g.column_sums();
        let gz = match prop {
            Some(p) => p.apply_adjoint(&g)?,
            None => g,
        };
        grads.layers[l].weight = cache.inputs[l].t_matmul(&gz)?;
        if l == 0 {
            break;
        }
        let mut dh = gz.matmul_t(&params.layers[l].weight)?;
        if let Some(m) = &cache.masks.layer_inputs[l] {
            dh.values_mut().iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let z_prev = &cache.pre_activations[l - 1];
        dh.values_mut()
            .iter_mut()
            .zip(z_prev.values())
            .for_each(|(v, &z)| {
                if z <= 0.0 {
                    *v = 0.0
                }
            });
        g = dh;
    }
    Ok(grads)
}

pub fn mlp_forward(
    params: &MlpParams,
    x: &Features,
    dropout: Dropout<'_>,
) -> Result<(DenseMatrix, ForwardCache)> {
    forward(params, x, dropout, None)
}

pub fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    dlogits: &DenseMatrix,
) -> Result<MlpParams> {
    backward(params, cache, dlogits, None)
}

/// Mean negative log-softmax over the rows where `mask` is set, and its
/// gradient (zero on unmasked rows).
pub fn softmax_cross_entropy(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    let (rows, classes) = logits.shape();
    if labels.len() != rows || mask.len() != rows {
        return Err(Error::input(format!(
            "{} labels / {} mask entries for {rows} logit rows",
            labels.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::input("loss mask selects no rows"));
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(rows, classes);
    for r in 0..rows {
        if !mask[r] {
            continue;
        }
        let y = labels[r];
        if y >= classes {
            return Err(Error::input(format!("label {y} out of range for {classes} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[y];
        let g = grad.row_mut(r);
        for (c, gv) in g.iter_mut().enumerate() {
            let p = (row[c] - log_z).exp();
            *gv = (p - if c == y { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss * inv, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> AdamState {
        AdamState {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. `weight_decay` is added to the gradient of
/// weight matrices as an L2 term (`g + wd·w`); biases are not decayed.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut AdamState,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<()> {
    if !params.same_shape(grads)
        || !params.same_shape(&state.first_moment)
        || !params.same_shape(&state.second_moment)
    {
        return Err(Error::Internal("adam: parameter/gradient shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let grad_slices = grads.slices();
    let m_slices = state.first_moment.slices_mut();
    let v_slices = state.second_moment.slices_mut();
    for (k, ((p, m), v)) in params
        .slices_mut()
        .into_iter()
        .zip(m_slices)
        .zip(v_slices)
        .enumerate()
    {
        let is_weight = k % 2 == 0;
        let g = grad_slices[k];
        for i in 0..p.len() {
            let mut gi = g[i];
            if is_weight && weight_decay != 0.0 {
                gi += weight_decay * p[i];
            }
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Hyper-parameters shared by all trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    /// Sampled (root, leaf) pairs per MCGL-UM step; unused by full-batch models.
    pub batch_size: usize,
    /// Sampling depth for MCGL-UM, propagation depth for GCN*.
    pub depth: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::input("hidden_units must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::input("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::input("max_epochs must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::input("patience must be positive"));
        }
        Ok(())
    }
}

/// Denominator floor for relative gradient errors; below it the comparison is
/// effectively absolute.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Worst relative error between backprop gradients and central differences
/// of the mean cross-entropy over all rows.
pub fn finite_diff_check(
    params: &MlpParams,
    x: &Features,
    labels: &[usize],
    eps: f64,
) -> Result<f64> {
    finite_diff_check_with(params, x, labels, eps, None, None)
}

/// As [`finite_diff_check`], optionally replaying fixed dropout masks and
/// wrapping each layer in a propagation operator.
pub fn finite_diff_check_with(
    params: &MlpParams,
    x: &Features,
    labels: &[usize],
    eps: f64,
    masks: Option<&DropoutMasks>,
    prop: Option<&dyn Propagation>,
) -> Result<f64> {
    let mask = vec![true; x.rows()];
    let dropout = || match masks {
        Some(m) => Dropout::Replay(m),
        None => Dropout::Off,
    };
    let loss_at = |p: &MlpParams| -> Result<f64> {
        let (logits, _) = forward(p, x, dropout(), prop)?;
        Ok(softmax_cross_entropy(&logits, labels, &mask)?.0)
    };
    let (logits, cache) = forward(params, x, dropout(), prop)?;
    let (_, dlogits) = softmax_cross_entropy(&logits, labels, &mask)?;
    let analytic = backward(params, &cache, &dlogits, prop)?;
    let analytic_flat: Vec<f64> = analytic.slices().concat();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut flat_index = 0;
    let n_slices = probe.slices().len();
    for s in 0..n_slices {
        let len = probe.slices()[s].len();
        for i in 0..len {
            let orig = probe.slices()[s][i];
            probe.slices_mut()[s][i] = orig + eps;
            let plus = loss_at(&probe)?;
            probe.slices_mut()[s][i] = orig - eps;
            let minus = loss_at(&probe)?;
            probe.slices_mut()[s][i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic_flat[flat_index];
            let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
            flat_index += 1;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_features(rows: usize, cols: usize, seed: u64) -> Features {
        let mut rng = seeded(seed);
        let v = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Features::Dense(DenseMatrix::from_vec(rows, cols, v).unwrap())
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let p = MlpParams::zeros(&[3, 4, 2]).unwrap();
        let x = random_features(5, 3, 1);
        let (logits, _) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        assert!(logits.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer() {
        let p = MlpParams {
            layers: vec![Layer {
                weight: DenseMatrix::identity(3),
                bias: vec![0.0; 3],
            }],
        };
        let x = random_features(4, 3, 2);
        let (logits, _) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        assert_eq!(logits, x.to_dense());
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let p = MlpParams::glorot(&[3, 8, 2], &mut seeded(3)).unwrap();
        let x = random_features(6, 3, 4);
        let (a, _) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        let (b, _) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = MlpParams::zeros(&[3, 2]).unwrap();
        assert!(mlp_forward(&p, &random_features(2, 4, 0), Dropout::Off).is_err());
    }

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        let logits = DenseMatrix::zeros(3, 5);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 4], &[true; 3]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_loss_decreases_to_zero() {
        let mut prev = f64::INFINITY;
        for mag in [1.0, 2.0, 5.0, 10.0, 40.0] {
            let logits = DenseMatrix::from_vec(1, 3, vec![mag, 0.0, 0.0]).unwrap();
            let (loss, _) = softmax_cross_entropy(&logits, &[0], &[true]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = seeded(9);
        let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let logits = DenseMatrix::from_vec(3, 4, v).unwrap();
        let labels = [2, 0, 3];
        let mask = [true, false, true];
        let (_, grad) = softmax_cross_entropy(&logits, &labels, &mask).unwrap();
        let eps = 1e-5;
        for i in 0..12 {
            let mut plus = logits.clone();
            plus.values_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.values_mut()[i] -= eps;
            let lp = softmax_cross_entropy(&plus, &labels, &mask).unwrap().0;
            let lm = softmax_cross_entropy(&minus, &labels, &mask).unwrap().0;
            let numeric = (lp - lm) / (2.0 * eps);
            let a = grad.values()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            assert!(rel <= 1e-6 || (a == 0.0 && numeric.abs() < 1e-12), "entry {i}: {a} vs {numeric}");
        }
        // unmasked row contributes nothing
        assert!(grad.row(1).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let logits = DenseMatrix::zeros(2, 2);
        assert!(softmax_cross_entropy(&logits, &[0, 1], &[false, false]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = MlpParams::glorot(&[3, 5, 2], &mut seeded(1)).unwrap();
        let x = random_features(4, 3, 1);
        let (logits, cache) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        let g = mlp_backward(&p, &cache, &DenseMatrix::zeros(logits.rows(), 2)).unwrap();
        assert_eq!(g, p.zeros_like());
    }

    #[test]
    fn backward_detects_foreign_cache() {
        let p = MlpParams::glorot(&[3, 5, 2], &mut seeded(1)).unwrap();
        let q = MlpParams::glorot(&[3, 4, 2], &mut seeded(1)).unwrap();
        let x = random_features(4, 3, 1);
        let (logits, cache) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        let dl = DenseMatrix::zeros(logits.rows(), 2);
        assert!(matches!(mlp_backward(&q, &cache, &dl), Err(Error::Internal(_))));
    }

    #[test]
    fn two_layer_gradients_match_finite_differences() {
        let p = MlpParams::glorot(&[4, 6, 3], &mut seeded(21)).unwrap();
        let x = random_features(5, 4, 22);
        let err = finite_diff_check(&p, &x, &[0, 1, 2, 1, 0], 1e-5).unwrap();
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn linear_model_gradients_are_exact() {
        let p = MlpParams::glorot(&[3, 2], &mut seeded(5)).unwrap();
        let x = random_features(4, 3, 6);
        let err = finite_diff_check(&p, &x, &[0, 1, 1, 0], 1e-5).unwrap();
        assert!(err <= 1e-8, "max relative error {err}");
    }

    #[test]
    fn replayed_dropout_masks_check_out() {
        let p = MlpParams::glorot(&[4, 6, 3], &mut seeded(31)).unwrap();
        let x = random_features(5, 4, 32);
        let mut rng = seeded(33);
        let (_, cache) = mlp_forward(&p, &x, Dropout::Sample { rate: 0.5, rng: &mut rng }).unwrap();
        let masks = cache.masks().clone();
        assert!(masks.layer_inputs.iter().all(Option::is_some));
        let err = finite_diff_check_with(&p, &x, &[0, 1, 2, 1, 0], 1e-5, Some(&masks), None).unwrap();
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_rate_dropout_matches_no_dropout() {
        let p = MlpParams::glorot(&[4, 6, 3], &mut seeded(41)).unwrap();
        let x = random_features(5, 4, 42);
        let mut rng = seeded(43);
        let (a, ca) = mlp_forward(&p, &x, Dropout::Sample { rate: 0.0, rng: &mut rng }).unwrap();
        let (b, cb) = mlp_forward(&p, &x, Dropout::Off).unwrap();
        assert_eq!(a, b);
        let (_, dl) = softmax_cross_entropy(&a, &[0, 1, 2, 0, 1], &[true; 5]).unwrap();
        assert_eq!(
            mlp_backward(&p, &ca, &dl).unwrap(),
            mlp_backward(&p, &cb, &dl).unwrap()
        );
    }

    #[test]
    fn adam_zero_grad_is_noop() {
        let mut p = MlpParams::glorot(&[2, 3], &mut seeded(1)).unwrap();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut s, 0.1, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    fn scalar(w: f64) -> MlpParams {
        MlpParams {
            layers: vec![Layer {
                weight: DenseMatrix::from_vec(1, 1, vec![w]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 0.5, -7.0] {
            let mut p = scalar(1.0);
            let mut grad = scalar(g);
            grad.layers[0].bias[0] = 0.0;
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &grad, &mut s, 0.01, 0.0).unwrap();
            let moved = 1.0 - p.layers[0].weight.get(0, 0);
            assert!((moved - 0.01 * g.signum()).abs() < 1e-6, "g={g} moved={moved}");
        }
    }

    #[test]
    fn adam_descends_quadratic_bowl() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p);
        for _ in 0..500 {
            let w = p.layers[0].weight.get(0, 0);
            let grad = scalar(2.0 * w);
            adam_step(&mut p, &grad, &mut s, 0.01, 0.0).unwrap();
        }
        assert!(p.layers[0].weight.get(0, 0).abs() < 0.01);
    }

    #[test]
    fn adam_weight_decay_skips_biases() {
        let mut p = scalar(1.0);
        p.layers[0].bias[0] = 1.0;
        let mut s = AdamState::new(&p);
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut s, 0.01, 0.5).unwrap();
        assert!(p.layers[0].weight.get(0, 0) < 1.0);
        assert_eq!(p.layers[0].bias[0], 1.0);
    }

    #[test]
    fn train_config_validation() {
        let ok = TrainConfig {
            hidden_units: 8,
            learning_rate: 0.01,
            weight_decay: 0.0,
            dropout: 0.5,
            batch_size: 10,
            depth: 2,
            max_epochs: 10,
            patience: 5,
            seed: 0,
        };
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { dropout: 1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { hidden_units: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..ok }.validate().is_err());
    }
}
