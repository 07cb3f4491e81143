use serde::{Deserialize, Serialize};

use super::{Aog, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::features::PyramidGeometry;
use crate::geometry::BBox;
use crate::parser::TemplateGeometry;

/// Position `(level, x, y)` of a node's top-left cell in a feature pyramid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub level: usize,
    pub x: i32,
    pub y: i32,
}

impl Placement {
    pub const fn new(level: usize, x: i32, y: i32) -> Self {
        Placement { level, x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseNode {
    pub node: NodeId,
    pub placement: Placement,
    /// Score of the node at its placement.
    pub score: f64,
    /// Displacement from the anchor, nonzero only below a Deformation And.
    pub displacement: (i32, i32),
}

/// One instantiation of an AOG: every And keeps all children, every Or
/// exactly one. Nodes are stored in BFS retrieval order, root first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseTree {
    pub nodes: Vec<ParseNode>,
    pub score: f64,
}

/// Part layout of a parse tree in image space; the object box comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub boxes: Vec<BBox>,
}

impl ParseTree {
    pub fn root(&self) -> &ParseNode {
        &self.nodes[0]
    }

    pub fn terminals<'a>(&'a self, aog: &'a Aog) -> impl Iterator<Item = &'a ParseNode> + 'a {
        self.nodes
            .iter()
            .filter(move |n| matches!(aog.node(n.node).kind, NodeKind::Terminal))
    }

    /// The child picked by the root Or-node.
    pub fn root_choice(&self) -> Option<NodeId> {
        self.nodes.get(1).map(|n| n.node)
    }

    /// Collapses the parse tree onto the image: the object window followed by
    /// one box per part terminal.
    pub fn collapse(&self, aog: &Aog, template: &TemplateGeometry, pyramid: &PyramidGeometry) -> Result<Configuration> {
        let root = self.root().placement;
        let window = template.window_box(pyramid, root)?;
        let mut boxes = vec![window];
        for t in self.terminals(aog) {
            if aog.is_object_terminal(t.node) {
                continue;
            }
            let (w, h) = template.extent(aog, t.node);
            let p = t.placement;
            let dims = pyramid
                .level_dims
                .get(p.level)
                .copied()
                .ok_or_else(|| Error::Invariant(format!("placement level {} outside pyramid", p.level)))?;
            if p.x < 0 || p.y < 0 || p.x as usize + w > dims.0 || p.y as usize + h > dims.1 {
                return Err(Error::Invariant(format!(
                    "terminal {} placed at ({}, {}) outside level {}",
                    t.node, p.x, p.y, p.level
                )));
            }
            boxes.push(pyramid.cells_to_image(p.level, p.x as f64, p.y as f64, w as f64, h as f64));
        }
        Ok(Configuration { boxes })
    }
}
