use serde::{Deserialize, Serialize};

use super::TemplateGeometry;
use crate::aog::{AndKind, Aog, NodeId, NodeKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Row-major `h x w x channels` template of a terminal.
    Appearance { w: usize, h: usize },
    /// `[dx^2, dx, dy^2, dy]` weights of a Deformation And-node.
    Deformation,
    /// Bias of a child And-node of the root.
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub offset: usize,
    pub len: usize,
    pub kind: BlockKind,
}

/// Where each node's parameters live in the flat parameter vector. A node
/// owns at most one block: terminals an appearance template, Deformation
/// And-nodes a deformation vector, root children a bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub channels: usize,
    pub blocks: Vec<Option<Block>>,
    pub dim: usize,
}

impl ParamLayout {
    pub fn new(aog: &Aog, template: &TemplateGeometry, channels: usize) -> ParamLayout {
        let root_children = aog.root_children();
        let mut dim = 0;
        let mut blocks = Vec::with_capacity(aog.len());
        for node in aog.nodes() {
            let kind = match node.kind {
                NodeKind::Terminal => {
                    let (w, h) = template.extent(aog, node.id);
                    Some(BlockKind::Appearance { w, h })
                }
                NodeKind::And(AndKind::Deformation) => Some(BlockKind::Deformation),
                NodeKind::And(_) if root_children.contains(&node.id) => Some(BlockKind::Bias),
                _ => None,
            };
            blocks.push(kind.map(|kind| {
                let len = match kind {
                    BlockKind::Appearance { w, h } => w * h * channels,
                    BlockKind::Deformation => 4,
                    BlockKind::Bias => 1,
                };
                let b = Block { offset: dim, len, kind };
                dim += len;
                b
            }));
        }
        ParamLayout { channels, blocks, dim }
    }

    pub fn block(&self, id: NodeId) -> Option<&Block> {
        self.blocks.get(id.index()).and_then(Option::as_ref)
    }

    /// Indices of the quadratic deformation coefficients.
    pub fn quadratic_indices(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flatten()
            .filter(|b| b.kind == BlockKind::Deformation)
            .flat_map(|b| [b.offset, b.offset + 2])
            .collect()
    }
}

/// Flat parameter vector `(appearance, deformation, bias)` with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ModelParams {
    /// Zero templates and biases; deformation set to `[floor, 0, floor, 0]`.
    pub fn new(layout: ParamLayout, def_floor: f64) -> ModelParams {
        let mut values = vec![0.0; layout.dim];
        for i in layout.quadratic_indices() {
            values[i] = def_floor;
        }
        ModelParams { layout, values }
    }

    fn slice(&self, id: NodeId, want: fn(&BlockKind) -> bool) -> &[f64] {
        match self.layout.block(id) {
            Some(b) if want(&b.kind) => &self.values[b.offset..b.offset + b.len],
            _ => panic!("node {id} has no such parameter block"),
        }
    }

    pub fn appearance(&self, id: NodeId) -> &[f64] {
        self.slice(id, |k| matches!(k, BlockKind::Appearance { .. }))
    }

    pub fn appearance_mut(&mut self, id: NodeId) -> &mut [f64] {
        let b = *self.layout.block(id).expect("terminal block");
        &mut self.values[b.offset..b.offset + b.len]
    }

    pub fn deformation(&self, id: NodeId) -> [f64; 4] {
        let s = self.slice(id, |k| *k == BlockKind::Deformation);
        [s[0], s[1], s[2], s[3]]
    }

    /// Bias of a root child, zero for any other node.
    pub fn bias(&self, id: NodeId) -> f64 {
        match self.layout.block(id) {
            Some(b) if b.kind == BlockKind::Bias => self.values[b.offset],
            _ => 0.0,
        }
    }

    pub fn set_bias(&mut self, id: NodeId, v: f64) {
        let b = *self.layout.block(id).expect("bias block");
        self.values[b.offset] = v;
    }

    /// Raises quadratic deformation weights to at least `floor`.
    pub fn project(&mut self, floor: f64) {
        for i in self.layout.quadratic_indices() {
            if self.values[i] < floor {
                self.values[i] = floor;
            }
        }
    }

    /// Checks that the parameters belong to `aog` under `template`.
    pub fn verify(&self, aog: &Aog, template: &TemplateGeometry) -> Result<()> {
        let expected = ParamLayout::new(aog, template, self.layout.channels);
        if expected != self.layout {
            return Err(Error::Invariant("parameter layout does not match the AOG".into()));
        }
        if self.values.len() != self.layout.dim {
            return Err(Error::Invariant(format!(
                "{} parameters for a layout of {}",
                self.values.len(),
                self.layout.dim
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Sparse feature vector over a [`ParamLayout`]; blocks may repeat and add.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseFeatures {
    pub blocks: Vec<(usize, Vec<f32>)>,
}

impl SparseFeatures {
    pub fn push(&mut self, offset: usize, values: Vec<f32>) {
        self.blocks.push((offset, values));
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.blocks.iter().map(|(o, v)| dot_f32(v, &w[*o..*o + v.len()])).sum()
    }

    /// `g += a * self`
    pub fn axpy(&self, a: f64, g: &mut [f64]) {
        for (o, v) in &self.blocks {
            for (gi, &vi) in g[*o..*o + v.len()].iter_mut().zip(v) {
                *gi += a * vi as f64;
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        self.axpy(1.0, &mut d);
        d
    }
}

/// `<a, b>` with four independent accumulators.
pub fn dot_f32(a: &[f32], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] as f64 * b[k];
        acc[1] += a[k + 1] as f64 * b[k + 1];
        acc[2] += a[k + 2] as f64 * b[k + 2];
        acc[3] += a[k + 3] as f64 * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] as f64 * b[k];
    }
    s
}
