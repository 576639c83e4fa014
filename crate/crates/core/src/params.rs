//! Named parameter blocks with optional structural masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// One learnable tensor. Vectors are stored as `n x 1`.
///
/// When `mask` is present, every entry whose mask is 0 must stay exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub mask: Option<Vec<f64>>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            for (d, m) in self.data.iter_mut().zip(mask) {
                if *m == 0.0 {
                    *d = 0.0;
                }
            }
        }
    }

    /// Count of entries that violate the mask.
    pub fn mask_violations(&self) -> usize {
        match &self.mask {
            None => 0,
            Some(mask) => self.data.iter().zip(mask).filter(|(d, m)| **m == 0.0 && **d != 0.0).count(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    blocks: Vec<ParamBlock>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, mask: Option<Vec<f64>>) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate block {name}");
        if let Some(m) = &mask {
            assert_eq!(m.len(), rows * cols, "mask shape for {name}");
        }
        self.blocks.push(ParamBlock { name, rows, cols, data: vec![0.0; rows * cols], mask });
        ParamId(self.blocks.len() - 1)
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn block_mut(&mut self, id: ParamId) -> &mut ParamBlock {
        &mut self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&ParamBlock> {
        self.find(name).map(|id| self.block(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut ParamBlock> {
        self.find(name).map(|id| &mut self.blocks[id.0])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(ParamBlock::len).sum()
    }

    pub fn apply_masks(&mut self) {
        self.blocks.iter_mut().for_each(ParamBlock::apply_mask);
    }

    pub fn check_masks(&self) -> Result<()> {
        for b in &self.blocks {
            let n = b.mask_violations();
            if n > 0 {
                return Err(Error::contract(format!("{n} masked entries of `{}` are nonzero", b.name)));
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.blocks.iter().find(|b| b.data.iter().any(|v| !v.is_finite())) {
            Some(b) => Err(Error::NonFinite { block: b.name.clone() }),
            None => Ok(()),
        }
    }

    /// Sets every entry of every block to `value`, then re-applies masks.
    pub fn fill(&mut self, value: f64) {
        for b in &mut self.blocks {
            b.data.iter_mut().for_each(|d| *d = value);
        }
        self.apply_masks();
    }
}

/// Gradient buffers aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub blocks: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Grads { blocks: params.blocks().iter().map(|b| vec![0.0; b.len()]).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.blocks.iter_mut().flatten().for_each(|g| *g *= s);
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Fails on the first block holding a NaN or infinity.
    pub fn check_finite(&self, params: &ParamSet) -> Result<()> {
        for (g, b) in self.blocks.iter().zip(params.blocks()) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { block: b.name.clone() });
            }
        }
        Ok(())
    }
}

/// Serialized form of one block inside a checkpoint document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&ParamBlock> for BlockRecord {
    fn from(b: &ParamBlock) -> Self {
        BlockRecord { name: b.name.clone(), rows: b.rows, cols: b.cols, data: b.data.clone() }
    }
}
