use std::io::Write;

use super::PipelineError;
use crate::model::EpochMetrics;

/// Mean absolute error between matched prediction/target lists.
pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64, PipelineError> {
    if preds.len() != targets.len() {
        return Err(PipelineError::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / preds.len() as f64)
}

/// One line per epoch: `epoch<TAB>train_mae<TAB>val_mae`, full precision,
/// with `-` standing in when there was no validation set.
pub fn write_metrics<W: Write>(mut w: W, metrics: &[EpochMetrics]) -> std::io::Result<()> {
    for m in metrics {
        match m.val_mae {
            Some(v) => writeln!(w, "{}\t{}\t{}", m.epoch, m.train_mae, v)?,
            None => writeln!(w, "{}\t{}\t-", m.epoch, m.train_mae)?,
        }
    }
    Ok(())
}
