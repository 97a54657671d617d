use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::mc_sample_path;
use super::training::{accuracy_on, nll_of_probabilities, EarlyStopping, TrainReport};
use super::TrainingData;
use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizationMode, NormalizedAdjacency};
use crate::nn::{
    adam_step, backward, forward, softmax_cross_entropy, AdamState, Dropout, MlpParams,
    TrainConfig,
};
use crate::rng::seeded;
use crate::tensor::{DenseMatrix, Features};

/// What the inference recursion averages over neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `Y0 = softmax(f(X))`
    Probabilities,
    /// `Y0 = f(X)`
    Logits,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Aggregation> {
        match s.to_ascii_lowercase().as_str() {
            "probabilities" | "probs" | "softmax" => Ok(Aggregation::Probabilities),
            "logits" => Ok(Aggregation::Logits),
            _ => Err(Error::input(format!(
                "unknown aggregation '{s}' (expected probabilities or logits)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McglOptions {
    pub infer_depth: usize,
    /// Whether a node counts as its own neighbor when sampling.
    pub include_self: bool,
    pub inference_mode: NormalizationMode,
    pub aggregation: Aggregation,
    pub batches_per_epoch: usize,
}

impl Default for McglOptions {
    fn default() -> McglOptions {
        McglOptions {
            infer_depth: 2,
            include_self: true,
            inference_mode: NormalizationMode::RowStochastic,
            aggregation: Aggregation::Probabilities,
            batches_per_epoch: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McglModel {
    pub params: MlpParams,
    pub sample_depth: usize,
    pub infer_depth: usize,
    pub inference_mode: NormalizationMode,
    pub aggregation: Aggregation,
}

impl McglModel {
    pub fn scores(&self, graph: &Graph, features: &Features) -> Result<DenseMatrix> {
        let adj = NormalizedAdjacency::new(graph, self.inference_mode);
        mcgl_scores(&self.params, features, &adj, self.infer_depth, self.aggregation)
    }

    pub fn predict(&self, graph: &Graph, features: &Features) -> Result<Vec<usize>> {
        Ok(self.scores(graph, features)?.argmax_rows())
    }
}

/// `Y_depth` of the recursion `Y_{k+1} = adj · Y_k` started from the MLP output.
pub fn mcgl_scores(
    params: &MlpParams,
    x: &Features,
    adj: &NormalizedAdjacency,
    depth: usize,
    aggregation: Aggregation,
) -> Result<DenseMatrix> {
    if adj.num_nodes() != x.rows() {
        return Err(Error::input(format!(
            "adjacency covers {} nodes, features have {} rows",
            adj.num_nodes(),
            x.rows()
        )));
    }
    let (logits, _) = forward(params, x, Dropout::Off, None)?;
    let y0 = match aggregation {
        Aggregation::Probabilities => logits.softmax_rows(),
        Aggregation::Logits => logits,
    };
    adj.propagate(&y0, depth)
}

/// Class predictions from propagated MLP probabilities; ties go to the lowest
/// class index.
pub fn mcgl_infer(
    params: &MlpParams,
    x: &Features,
    adj: &NormalizedAdjacency,
    depth: usize,
) -> Result<Vec<usize>> {
    Ok(mcgl_scores(params, x, adj, depth, Aggregation::Probabilities)?.argmax_rows())
}

/// Trains the MLP on `(x_leaf, y_root)` pairs: each batch draws roots
/// uniformly from the training set and walks `cfg.depth` hops to a leaf.
/// Every `batches_per_epoch` steps the full inference pipeline is scored on
/// the validation set for early stopping.
pub fn train_mcgl_um(
    data: &TrainingData<'_>,
    cfg: &TrainConfig,
    opts: &McglOptions,
) -> Result<(McglModel, TrainReport)> {
    data.validate()?;
    cfg.validate()?;
    if opts.batches_per_epoch == 0 {
        return Err(Error::input("batches_per_epoch must be positive"));
    }
    let mut rng = seeded(cfg.seed);
    let dims = [data.features.cols(), cfg.hidden_units, data.num_classes];
    let mut params = MlpParams::glorot(&dims, &mut rng)?;
    let mut adam = AdamState::new(&params);
    let adj = NormalizedAdjacency::new(data.graph, opts.inference_mode);
    let train = &data.split.train;
    let val = &data.split.val;
    let batch_mask = vec![true; cfg.batch_size];
    let mut leaves = vec![0usize; cfg.batch_size];
    let mut targets = vec![0usize; cfg.batch_size];
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = 0;

    for _ in 0..cfg.max_epochs {
        epochs += 1;
        for _ in 0..opts.batches_per_epoch {
            for b in 0..cfg.batch_size {
                let root = train[rng.gen_range(0..train.len())];
                leaves[b] = mc_sample_path(data.graph, root, cfg.depth, opts.include_self, &mut rng);
                targets[b] = data.labels[root];
            }
            let xb = data.features.gather_rows(&leaves);
            let (logits, cache) = forward(
                &params,
                &xb,
                Dropout::Sample {
                    rate: cfg.dropout,
                    rng: &mut rng,
                },
                None,
            )?;
            let (_, dlogits) = softmax_cross_entropy(&logits, &targets, &batch_mask)?;
            let grads = backward(&params, &cache, &dlogits, None)?;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate, cfg.weight_decay)?;
        }
        if val.is_empty() {
            continue;
        }
        let scores = mcgl_scores(&params, data.features, &adj, opts.infer_depth, opts.aggregation)?;
        let preds = scores.argmax_rows();
        let acc = accuracy_on(&preds, data.labels, val)?;
        let loss = match opts.aggregation {
            Aggregation::Probabilities => nll_of_probabilities(&scores, data.labels, val),
            Aggregation::Logits => nll_of_probabilities(&scores.softmax_rows(), data.labels, val),
        };
        if !stopper.observe(acc, loss, &params) {
            break;
        }
    }
    let (params, report) = if val.is_empty() {
        EarlyStopping::unmonitored(epochs, params)
    } else {
        stopper.finish(params)
    };
    Ok((
        McglModel {
            params,
            sample_depth: cfg.depth,
            infer_depth: opts.infer_depth,
            inference_mode: opts.inference_mode,
            aggregation: opts.aggregation,
        },
        report,
    ))
}
