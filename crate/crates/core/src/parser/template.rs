use serde::{Deserialize, Serialize};

use crate::aog::{AndKind, Aog, NodeId, NodeKind, Placement};
use crate::error::{Error, Result};
use crate::features::PyramidGeometry;
use crate::geometry::BBox;

/// How AOG grid units map onto feature cells.
///
/// One grid unit covers `unit` cells at the object level. Nodes strictly
/// below the root (parts and their compositions) may instead live
/// `part_level_offset` pyramid levels finer, where the same region spans
/// twice as many cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateGeometry {
    pub grid: (u32, u32),
    pub unit: (usize, usize),
    /// Either 0 or the pyramid interval.
    pub part_level_offset: usize,
}

impl TemplateGeometry {
    pub fn new(grid: (u32, u32), unit: (usize, usize), part_level_offset: usize) -> Self {
        TemplateGeometry {
            grid,
            unit,
            part_level_offset,
        }
    }

    /// Grid cells stretched to the box aspect: the longer side gets
    /// `unit_cells` cells per unit, the shorter side proportionally fewer.
    pub fn for_box(width: f64, height: f64, grid_side: u32, unit_cells: usize) -> Self {
        let long = width.max(height).max(1.0);
        let short_units = |side: f64| ((unit_cells as f64 * side / long).round() as usize).clamp(1, unit_cells);
        TemplateGeometry::new((grid_side, grid_side), (short_units(width), short_units(height)), 0)
    }

    pub fn with_part_offset(self, offset: usize) -> Self {
        TemplateGeometry {
            part_level_offset: offset,
            ..self
        }
    }

    /// Cell multiplier for nodes living on the part level.
    pub fn part_factor(&self) -> usize {
        if self.part_level_offset > 0 {
            2
        } else {
            1
        }
    }

    /// Object window extent in cells at the object level.
    pub fn object_cells(&self) -> (usize, usize) {
        (self.grid.0 as usize * self.unit.0, self.grid.1 as usize * self.unit.1)
    }

    /// True for the root Or-node, Termination And-nodes and the object
    /// terminal, which are always scored at the object level.
    pub fn on_object_level(&self, aog: &Aog, id: NodeId) -> bool {
        let node = aog.node(id);
        id == aog.root() || aog.is_object_terminal(id) || matches!(node.kind, NodeKind::And(AndKind::Termination))
    }

    fn factor_of(&self, aog: &Aog, id: NodeId) -> usize {
        if self.on_object_level(aog, id) {
            1
        } else {
            self.part_factor()
        }
    }

    /// Extent of a node in cells at the level where it is scored.
    pub fn extent(&self, aog: &Aog, id: NodeId) -> (usize, usize) {
        let r = aog.node(id).region;
        let f = self.factor_of(aog, id);
        (r.w as usize * self.unit.0 * f, r.h as usize * self.unit.1 * f)
    }

    /// Offset of a child's top-left cell from its parent's, both on the
    /// child's level.
    pub fn child_offset(&self, aog: &Aog, parent: NodeId, child: NodeId) -> (usize, usize) {
        let p = aog.node(parent).region;
        let c = aog.node(child).region;
        let f = self.factor_of(aog, child);
        (
            (c.x - p.x) as usize * self.unit.0 * f,
            (c.y - p.y) as usize * self.unit.1 * f,
        )
    }

    /// Placement of a child reached from `parent` at `at`, before any
    /// deformation.
    pub fn child_placement(&self, aog: &Aog, parent: NodeId, child: NodeId, at: Placement) -> Placement {
        let (ox, oy) = self.child_offset(aog, parent, child);
        let descend = self.on_object_level(aog, parent) && !self.on_object_level(aog, child);
        if descend && self.part_level_offset > 0 {
            Placement::new(
                at.level - self.part_level_offset,
                2 * at.x + ox as i32,
                2 * at.y + oy as i32,
            )
        } else {
            Placement::new(at.level, at.x + ox as i32, at.y + oy as i32)
        }
    }

    /// Image box of the object window for a root placement.
    pub fn window_box(&self, pyramid: &PyramidGeometry, root: Placement) -> Result<BBox> {
        if root.level >= pyramid.level_dims.len() {
            return Err(Error::Invariant(format!("root level {} outside pyramid", root.level)));
        }
        let (w, h) = self.object_cells();
        Ok(pyramid.cells_to_image(root.level, root.x as f64, root.y as f64, w as f64, h as f64))
    }

    /// Image box of any node placed at `p`.
    pub fn node_box(&self, aog: &Aog, id: NodeId, pyramid: &PyramidGeometry, p: Placement) -> Result<BBox> {
        if p.level >= pyramid.level_dims.len() {
            return Err(Error::Invariant(format!("level {} outside pyramid", p.level)));
        }
        let (w, h) = self.extent(aog, id);
        Ok(pyramid.cells_to_image(p.level, p.x as f64, p.y as f64, w as f64, h as f64))
    }

    /// Per-axis resampling factor that maps `bbox` exactly onto the object
    /// window at pyramid level `object_level`.
    pub fn prescale_for(&self, bbox: &BBox, cell_size: usize, interval: usize, object_level: usize) -> (f64, f64) {
        let (w, h) = self.object_cells();
        let s = cell_size as f64 * 2f64.powf(object_level as f64 / interval as f64);
        (w as f64 * s / bbox.w, h as f64 * s / bbox.h)
    }
}
