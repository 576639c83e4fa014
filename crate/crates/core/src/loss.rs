//! Summed logistic cross-entropy over a batch of per-layer activations.

use crate::error::{Error, Result};
use crate::math::{bce_term, Vector};

/// Raw (unnormalized) loss: sum over samples, layers and labels.
///
/// `activations[i][l]` and `targets[i][l]` are the logits and 0/1 targets of
/// layer `l` for sample `i`.
pub fn bce_loss(activations: &[Vec<Vector>], targets: &[Vec<Vector>]) -> Result<f64> {
    if activations.len() != targets.len() {
        return Err(Error::shape(format!(
            "bce_loss: {} activation samples vs {} target samples",
            activations.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (i, (acts, tgts)) in activations.iter().zip(targets).enumerate() {
        if acts.len() != tgts.len() {
            return Err(Error::shape(format!("bce_loss: sample {i} has {} layers vs {} targets", acts.len(), tgts.len())));
        }
        for (l, (a, t)) in acts.iter().zip(tgts).enumerate() {
            if a.len() != t.len() {
                return Err(Error::shape(format!(
                    "bce_loss: sample {i} layer {l}: {} activations vs {} targets",
                    a.len(),
                    t.len()
                )));
            }
            for (k, (&z, &y)) in a.data.iter().zip(&t.data).enumerate() {
                if y != 0.0 && y != 1.0 {
                    return Err(Error::validation(format!("target [{i}][{l}][{k}] = {y} is not binary")));
                }
                total += bce_term(z, y);
            }
        }
    }
    Ok(total)
}
