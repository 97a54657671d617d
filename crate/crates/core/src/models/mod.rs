//! Trainable node classifiers: GCN, GCN* (transform, then propagate K times)
//! and MCGL-UM (an MLP trained on Monte Carlo pseudo-labels).

mod gcn;
mod mcgl;
mod sampling;
mod training;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{MlpParams, TrainConfig};
use crate::tensor::Features;

pub use gcn::{train_gcn, train_gcnstar, GcnModel, GcnStarModel};
pub use mcgl::{mcgl_infer, mcgl_scores, train_mcgl_um, Aggregation, McglModel, McglOptions};
pub use sampling::mc_sample_path;
pub use training::{accuracy, accuracy_on, TrainReport};

/// Borrowed view of everything a trainer reads. Swapping `graph` lets noise
/// sweeps reuse one feature matrix across many edited graphs.
#[derive(Clone, Copy)]
pub struct TrainingData<'a> {
    pub graph: &'a Graph,
    pub features: &'a Features,
    pub labels: &'a [usize],
    pub num_classes: usize,
    pub split: &'a Split,
}

impl TrainingData<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n || self.labels.len() != n {
            return Err(Error::input(format!(
                "graph has {n} nodes but features have {} rows and labels {} entries",
                self.features.rows(),
                self.labels.len()
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::input("dataset has no classes"));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::input(format!(
                "label {bad} out of range for {} classes",
                self.num_classes
            )));
        }
        self.split.validate(n)?;
        if self.split.train.is_empty() {
            return Err(Error::input("training set is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    GcnStar,
    McglUm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gcn, ModelKind::GcnStar, ModelKind::McglUm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::GcnStar => "gcn_star",
            ModelKind::McglUm => "mcgl_um",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "gcn_star" | "gcnstar" | "gcn*" => Ok(ModelKind::GcnStar),
            "mcgl_um" | "mcgl" | "mcglum" => Ok(ModelKind::McglUm),
            _ => Err(Error::input(format!(
                "unknown model '{s}' (expected gcn, gcn-star or mcgl-um)"
            ))),
        }
    }
}

/// A trained model of any kind, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Gcn(GcnModel),
    GcnStar(GcnStarModel),
    McglUm(McglModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Gcn(_) => ModelKind::Gcn,
            TrainedModel::GcnStar(_) => ModelKind::GcnStar,
            TrainedModel::McglUm(_) => ModelKind::McglUm,
        }
    }

    pub fn params(&self) -> &MlpParams {
        match self {
            TrainedModel::Gcn(m) => &m.params,
            TrainedModel::GcnStar(m) => &m.params,
            TrainedModel::McglUm(m) => &m.params,
        }
    }

    pub fn predict(&self, graph: &Graph, features: &Features) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Gcn(m) => m.predict(graph, features),
            TrainedModel::GcnStar(m) => m.predict(graph, features),
            TrainedModel::McglUm(m) => m.predict(graph, features),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Internal(format!("checkpoint encode: {e}")))
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| Error::input(format!("bad checkpoint: {e}")))?;
        model.params().validate()?;
        Ok(model)
    }
}

/// Trains `kind` with `cfg`; `cfg.depth` is the sampling depth for MCGL-UM and
/// the propagation depth for GCN* (plain GCN is always two layers).
pub fn train_model(
    kind: ModelKind,
    data: &TrainingData<'_>,
    cfg: &TrainConfig,
    mcgl: &McglOptions,
) -> Result<(TrainedModel, TrainReport)> {
    Ok(match kind {
        ModelKind::Gcn => {
            let (m, r) = train_gcn(data, cfg)?;
            (TrainedModel::Gcn(m), r)
        }
        ModelKind::GcnStar => {
            let (m, r) = train_gcnstar(data, cfg, cfg.depth)?;
            (TrainedModel::GcnStar(m), r)
        }
        ModelKind::McglUm => {
            let (m, r) = train_mcgl_um(data, cfg, mcgl)?;
            (TrainedModel::McglUm(m), r)
        }
    })
}
