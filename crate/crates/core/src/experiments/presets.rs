//! Per-dataset hyper-parameters (hidden units / weight decay / learning rate /
//! dropout, plus the MCGL-UM batch size).

use crate::datasets::RealDataset;
use crate::models::ModelKind;
use crate::nn::TrainConfig;

/// Epoch budget and patience for full-batch models.
pub const FULL_BATCH_MAX_EPOCHS: usize = 1000;
pub const FULL_BATCH_PATIENCE: usize = 100;
/// Epoch budget and patience for MCGL-UM (an epoch is 100 batches).
pub const MCGL_MAX_EPOCHS: usize = 300;
pub const MCGL_PATIENCE: usize = 30;
/// GCO / sampling depth used outside depth sweeps.
pub const DEFAULT_DEPTH: usize = 2;

fn cfg(hidden: usize, wd: f64, lr: f64, dropout: f64, batch: usize, kind: ModelKind) -> TrainConfig {
    let (max_epochs, patience) = match kind {
        ModelKind::McglUm => (MCGL_MAX_EPOCHS, MCGL_PATIENCE),
        _ => (FULL_BATCH_MAX_EPOCHS, FULL_BATCH_PATIENCE),
    };
    TrainConfig {
        hidden_units: hidden,
        learning_rate: lr,
        weight_decay: wd,
        dropout,
        batch_size: batch,
        depth: DEFAULT_DEPTH,
        max_epochs,
        patience,
        seed: 0,
    }
}

pub fn preset(dataset: RealDataset, kind: ModelKind) -> TrainConfig {
    use ModelKind::*;
    use RealDataset::*;
    match (dataset, kind) {
        (Cora, Gcn) => cfg(32, 5e-4, 0.005, 0.7, 1, kind),
        (Cora, GcnStar) => cfg(32, 5e-4, 0.01, 0.7, 1, kind),
        (Cora, McglUm) => cfg(32, 1e-3, 0.005, 0.5, 50, kind),
        (CiteSeer, Gcn) => cfg(64, 1e-3, 0.05, 0.6, 1, kind),
        (CiteSeer, GcnStar) => cfg(64, 1e-3, 0.05, 0.4, 1, kind),
        (CiteSeer, McglUm) => cfg(64, 1e-3, 0.005, 0.3, 200, kind),
        (PubMed, Gcn) => cfg(32, 5e-4, 0.05, 0.3, 1, kind),
        (PubMed, GcnStar) => cfg(32, 5e-4, 0.005, 0.5, 1, kind),
        (PubMed, McglUm) => cfg(32, 1e-3, 0.005, 0.5, 50, kind),
        (MsAcademic, Gcn) => cfg(128, 5e-4, 0.01, 0.6, 1, kind),
        (MsAcademic, GcnStar) => cfg(128, 5e-4, 0.005, 0.7, 1, kind),
        (MsAcademic, McglUm) => cfg(128, 1e-4, 0.005, 0.5, 200, kind),
    }
}

/// Defaults for the small synthetic datasets and anything unnamed.
pub fn generic_preset(kind: ModelKind) -> TrainConfig {
    let mut c = cfg(16, 5e-4, 0.01, 0.0, 32, kind);
    if kind == ModelKind::McglUm {
        c.max_epochs = 200;
    } else {
        c.max_epochs = 500;
    }
    c
}

/// Preset for a dataset name, falling back to [`generic_preset`].
pub fn preset_for(dataset: &str, kind: ModelKind) -> TrainConfig {
    match RealDataset::parse(dataset) {
        Some(d) => preset(d, kind),
        None => generic_preset(kind),
    }
}
