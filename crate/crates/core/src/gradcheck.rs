//! Central-difference verification of tape gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Grads, ParamSet};
use crate::tape::{NodeId, Tape};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Test hook: perturbs the reverse-mode gradient before comparison.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, tolerance: 1e-5, corrupt: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCheck {
    pub block: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// for every unmasked parameter entry.
pub fn grad_check<F>(params: &ParamSet, loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet, &mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(params, &mut tape)?;
    let mut analytic: Grads = tape.backward(loss, params)?;
    analytic.check_finite(params)?;
    if opts.corrupt {
        if let Some(g) = analytic.blocks.iter_mut().flatten().next() {
            *g += 1.0 + g.abs();
        }
    }

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut t = Tape::new();
        let l = loss_fn(p, &mut t)?;
        Ok(t.scalar(l))
    };

    let mut work = params.clone();
    let mut blocks = Vec::with_capacity(params.len());
    let mut worst = 0.0f64;
    for (bi, block) in params.blocks().iter().enumerate() {
        let mut max_err = 0.0f64;
        let mut entries = 0;
        for k in 0..block.len() {
            if block.mask.as_ref().is_some_and(|m| m[k] == 0.0) {
                continue;
            }
            let orig = block.data[k];
            work.blocks_mut()[bi].data[k] = orig + opts.step;
            let up = eval(&work)?;
            work.blocks_mut()[bi].data[k] = orig - opts.step;
            let down = eval(&work)?;
            work.blocks_mut()[bi].data[k] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            if !numeric.is_finite() {
                return Err(Error::NonFinite { block: block.name.clone() });
            }
            max_err = max_err.max(relative_error(analytic.blocks[bi][k], numeric));
            entries += 1;
        }
        worst = worst.max(max_err);
        blocks.push(BlockCheck { block: block.name.clone(), entries, max_rel_error: max_err });
    }
    Ok(GradCheckReport { blocks, max_rel_error: worst, tolerance: opts.tolerance, passed: worst < opts.tolerance })
}
