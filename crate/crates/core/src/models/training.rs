use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::MlpParams;

/// Fraction of `mask`ed nodes whose prediction equals the label.
pub fn accuracy(preds: &[usize], labels: &[usize], mask: &[bool]) -> Result<f64> {
    if preds.len() != labels.len() || mask.len() != labels.len() {
        return Err(Error::input(format!(
            "{} predictions, {} labels, {} mask entries",
            preds.len(),
            labels.len(),
            mask.len()
        )));
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in 0..labels.len() {
        if mask[i] {
            total += 1;
            hits += usize::from(preds[i] == labels[i]);
        }
    }
    if total == 0 {
        return Err(Error::input("accuracy mask selects no nodes"));
    }
    Ok(hits as f64 / total as f64)
}

/// Accuracy over an id list instead of a mask.
pub fn accuracy_on(preds: &[usize], labels: &[usize], ids: &[usize]) -> Result<f64> {
    if ids.is_empty() {
        return Err(Error::input("accuracy id set is empty"));
    }
    if preds.len() != labels.len() {
        return Err(Error::input(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut hits = 0usize;
    for &i in ids {
        if i >= labels.len() {
            return Err(Error::input(format!("node id {i} out of range")));
        }
        hits += usize::from(preds[i] == labels[i]);
    }
    Ok(hits as f64 / ids.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub best_val_loss: Option<f64>,
}

/// Keeps the parameters of the best validation epoch. An epoch is better if
/// its accuracy is higher, or equal with a lower loss.
pub(crate) struct EarlyStopping {
    patience: usize,
    best: Option<(f64, f64)>,
    best_params: Option<MlpParams>,
    best_epoch: usize,
    since_best: usize,
    epochs: usize,
}

impl EarlyStopping {
    pub(crate) fn new(patience: usize) -> EarlyStopping {
        EarlyStopping {
            patience,
            best: None,
            best_params: None,
            best_epoch: 0,
            since_best: 0,
            epochs: 0,
        }
    }

    /// Records one epoch; returns false once patience is exhausted.
    pub(crate) fn observe(&mut self, val_acc: f64, val_loss: f64, params: &MlpParams) -> bool {
        self.epochs += 1;
        let improved = match self.best {
            None => true,
            Some((acc, loss)) => val_acc > acc || (val_acc == acc && val_loss < loss),
        };
        if improved {
            self.best = Some((val_acc, val_loss));
            self.best_params = Some(params.clone());
            self.best_epoch = self.epochs;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best < self.patience
    }

    pub(crate) fn finish(self, last: MlpParams) -> (MlpParams, TrainReport) {
        let report = TrainReport {
            epochs_run: self.epochs,
            best_epoch: if self.best.is_some() { self.best_epoch } else { self.epochs },
            best_val_accuracy: self.best.map(|b| b.0),
            best_val_loss: self.best.map(|b| b.1),
        };
        (self.best_params.unwrap_or(last), report)
    }

    pub(crate) fn unmonitored(epochs: usize, last: MlpParams) -> (MlpParams, TrainReport) {
        let report = TrainReport {
            epochs_run: epochs,
            best_epoch: epochs,
            best_val_accuracy: None,
            best_val_loss: None,
        };
        (last, report)
    }
}

/// Mean `-ln p[label]` over `ids`, for rows that already hold scores in
/// probability space. Probabilities are floored to keep the loss finite.
pub(crate) fn nll_of_probabilities(
    probs: &crate::tensor::DenseMatrix,
    labels: &[usize],
    ids: &[usize],
) -> f64 {
    let sum: f64 = ids
        .iter()
        .map(|&i| -probs.get(i, labels[i]).max(1e-12).ln())
        .sum();
    sum / ids.len() as f64
}

pub(crate) fn mask_from_ids(n: usize, ids: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &i in ids {
        mask[i] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let y = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        assert_eq!(accuracy(&y, &y, &[true; 10]).unwrap(), 1.0);
        let wrong: Vec<usize> = y.iter().map(|v| (v + 1) % 3).collect();
        assert_eq!(accuracy(&wrong, &y, &[true; 10]).unwrap(), 0.0);
        let mut seven = y.to_vec();
        for v in seven.iter_mut().take(3) {
            *v = (*v + 1) % 3;
        }
        assert!((accuracy(&seven, &y, &[true; 10]).unwrap() - 0.7).abs() < 1e-15);
        assert!(accuracy(&y, &y, &[false; 10]).is_err());
        assert!(accuracy_on(&y, &y, &[]).is_err());
        assert_eq!(accuracy_on(&seven, &y, &[3, 4, 5, 6]).unwrap(), 1.0);
    }

    #[test]
    fn early_stopping_prefers_lower_loss_on_ties() {
        let p0 = MlpParams::zeros(&[1, 1]).unwrap();
        let mut p1 = p0.clone();
        p1.layers[0].bias[0] = 1.0;
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(0.5, 1.0, &p0));
        assert!(es.observe(0.5, 0.9, &p1));
        assert!(es.observe(0.5, 0.95, &p0));
        assert!(!es.observe(0.4, 0.1, &p0));
        let (kept, report) = es.finish(p0);
        assert_eq!(kept, p1);
        assert_eq!(report.best_epoch, 2);
        assert_eq!(report.epochs_run, 4);
    }
}
