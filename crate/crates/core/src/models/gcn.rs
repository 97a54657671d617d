use serde::{Deserialize, Serialize};

use super::training::{accuracy_on, mask_from_ids, EarlyStopping, TrainReport};
use super::TrainingData;
use crate::error::Result;
use crate::graph::{Graph, NormalizationMode, NormalizedAdjacency};
use crate::nn::{
    adam_step, backward, forward, softmax_cross_entropy, AdamState, Dropout, MlpParams,
    Propagation, TrainConfig,
};
use crate::rng::seeded;
use crate::tensor::{DenseMatrix, Features};

/// Two-layer GCN: `Â · relu(Â · X · W0 + b0) · W1 + b1` with symmetric `Â`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub params: MlpParams,
    pub mode: NormalizationMode,
}

impl GcnModel {
    pub fn logits(&self, graph: &Graph, features: &Features) -> Result<DenseMatrix> {
        let adj = NormalizedAdjacency::new(graph, self.mode);
        Ok(forward(&self.params, features, Dropout::Off, Some(&adj))?.0)
    }

    pub fn predict(&self, graph: &Graph, features: &Features) -> Result<Vec<usize>> {
        Ok(self.logits(graph, features)?.argmax_rows())
    }
}

/// A two-layer MLP followed by `depth` applications of symmetric `Â`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnStarModel {
    pub params: MlpParams,
    pub depth: usize,
    pub mode: NormalizationMode,
}

impl GcnStarModel {
    pub fn logits(&self, graph: &Graph, features: &Features) -> Result<DenseMatrix> {
        let adj = NormalizedAdjacency::new(graph, self.mode);
        let (z, _) = forward(&self.params, features, Dropout::Off, None)?;
        adj.propagate(&z, self.depth)
    }

    pub fn predict(&self, graph: &Graph, features: &Features) -> Result<Vec<usize>> {
        Ok(self.logits(graph, features)?.argmax_rows())
    }
}

/// Full-batch training loop shared by GCN and GCN*. `step` returns the
/// training gradients; `eval` returns dropout-free logits for all nodes.
fn fit<S, E>(
    data: &TrainingData<'_>,
    cfg: &TrainConfig,
    mut params: MlpParams,
    mut step: S,
    eval: E,
) -> Result<(MlpParams, TrainReport)>
where
    S: FnMut(&MlpParams, &[bool]) -> Result<MlpParams>,
    E: Fn(&MlpParams) -> Result<DenseMatrix>,
{
    let n = data.graph.num_nodes();
    let train_mask = mask_from_ids(n, &data.split.train);
    let val = &data.split.val;
    let val_mask = mask_from_ids(n, val);
    let mut adam = AdamState::new(&params);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = 0;
    for _ in 0..cfg.max_epochs {
        epochs += 1;
        let grads = step(&params, &train_mask)?;
        adam_step(&mut params, &grads, &mut adam, cfg.learning_rate, cfg.weight_decay)?;
        if val.is_empty() {
            continue;
        }
        let logits = eval(&params)?;
        let (loss, _) = softmax_cross_entropy(&logits, data.labels, &val_mask)?;
        let acc = accuracy_on(&logits.argmax_rows(), data.labels, val)?;
        if !stopper.observe(acc, loss, &params) {
            break;
        }
    }
    Ok(if val.is_empty() {
        EarlyStopping::unmonitored(epochs, params)
    } else {
        stopper.finish(params)
    })
}

pub fn train_gcn(data: &TrainingData<'_>, cfg: &TrainConfig) -> Result<(GcnModel, TrainReport)> {
    data.validate()?;
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let dims = [data.features.cols(), cfg.hidden_units, data.num_classes];
    let params = MlpParams::glorot(&dims, &mut rng)?;
    let mode = NormalizationMode::Symmetric;
    let adj = NormalizedAdjacency::new(data.graph, mode);
    let prop: &dyn Propagation = &adj;
    let (params, report) = fit(
        data,
        cfg,
        params,
        |p, mask| {
            let dropout = Dropout::Sample {
                rate: cfg.dropout,
                rng: &mut rng,
            };
            let (logits, cache) = forward(p, data.features, dropout, Some(prop))?;
            let (_, dlogits) = softmax_cross_entropy(&logits, data.labels, mask)?;
            backward(p, &cache, &dlogits, Some(prop))
        },
        |p| Ok(forward(p, data.features, Dropout::Off, Some(prop))?.0),
    )?;
    Ok((GcnModel { params, mode }, report))
}

/// GCN*: the MLP transforms features, then `Â` is applied `depth` times.
/// The gradient flows back through the same `depth` applications of `Âᵀ`.
pub fn train_gcnstar(
    data: &TrainingData<'_>,
    cfg: &TrainConfig,
    depth: usize,
) -> Result<(GcnStarModel, TrainReport)> {
    data.validate()?;
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let dims = [data.features.cols(), cfg.hidden_units, data.num_classes];
    let params = MlpParams::glorot(&dims, &mut rng)?;
    let mode = NormalizationMode::Symmetric;
    let adj = NormalizedAdjacency::new(data.graph, mode);
    let (params, report) = fit(
        data,
        cfg,
        params,
        |p, mask| {
            let dropout = Dropout::Sample {
                rate: cfg.dropout,
                rng: &mut rng,
            };
            let (z, cache) = forward(p, data.features, dropout, None)?;
            let logits = adj.propagate(&z, depth)?;
            let (_, mut g) = softmax_cross_entropy(&logits, data.labels, mask)?;
            for _ in 0..depth {
                g = adj.spmm_transpose(&g)?;
            }
            backward(p, &cache, &g, None)
        },
        |p| {
            let (z, _) = forward(p, data.features, Dropout::Off, None)?;
            adj.propagate(&z, depth)
        },
    )?;
    Ok((GcnStarModel { params, depth, mode }, report))
}
