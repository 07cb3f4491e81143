use std::collections::{HashMap, VecDeque};

use super::{AndKind, Aog, AogNode, Axis, EdgeKind, GridRegion, NodeId, NodeKind};
use crate::error::{Error, Result};

/// Child regions of a binary cut. The first child spans `position + overlap`
/// cells along the cut axis, the second starts at `position`.
pub(crate) fn split(region: GridRegion, axis: Axis, position: u32, overlap: u32) -> (GridRegion, GridRegion) {
    match axis {
        Axis::Vertical => (
            GridRegion::new(region.x, region.y, position + overlap, region.h),
            GridRegion::new(region.x + position, region.y, region.w - position, region.h),
        ),
        Axis::Horizontal => (
            GridRegion::new(region.x, region.y, region.w, position + overlap),
            GridRegion::new(region.x, region.y + position, region.w, region.h - position),
        ),
    }
}

/// All valid `(axis, position, overlap)` cuts of a region: both children
/// are strictly smaller than the parent and no smaller than the minimal part.
fn valid_cuts(region: GridRegion, min_part: (u32, u32), overlap_ratio: f64) -> Vec<(Axis, u32, u32)> {
    let mut cuts = Vec::new();
    for axis in [Axis::Vertical, Axis::Horizontal] {
        let (side, min) = match axis {
            Axis::Vertical => (region.w, min_part.0),
            Axis::Horizontal => (region.h, min_part.1),
        };
        let max_overlap = (overlap_ratio * side as f64).floor() as u32;
        for position in 1..side {
            for overlap in 0..=max_overlap {
                let first = position + overlap;
                let second = side - position;
                if first < side && first >= min && second >= min {
                    cuts.push((axis, position, overlap));
                }
            }
        }
    }
    cuts
}

impl Aog {
    /// Builds the full structure AOG of a `grid` of cells by BFS from the
    /// root Or-node.
    pub fn build_full(grid: (u32, u32), min_part: (u32, u32), overlap_ratio: f64) -> Result<Aog> {
        let (w, h) = grid;
        let (w0, h0) = min_part;
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(format!("grid {w}x{h} is empty")));
        }
        if w0 == 0 || h0 == 0 || w0 > w || h0 > h {
            return Err(Error::InvalidInput(format!(
                "minimal part {w0}x{h0} does not fit grid {w}x{h}"
            )));
        }
        if !(0.0..1.0).contains(&overlap_ratio) {
            return Err(Error::InvalidInput(format!(
                "overlap ratio {overlap_ratio} outside [0, 1)"
            )));
        }

        let whole = GridRegion::new(0, 0, w, h);
        let mut nodes: Vec<AogNode> = Vec::new();
        let mut or_of_region: HashMap<GridRegion, NodeId> = HashMap::new();
        let mut queue = VecDeque::new();

        let new_node = |nodes: &mut Vec<AogNode>, kind, region| {
            let id = NodeId(nodes.len() as u32);
            nodes.push(AogNode {
                id,
                kind,
                region,
                children: Vec::new(),
            });
            id
        };

        let root = new_node(&mut nodes, NodeKind::Or, whole);
        or_of_region.insert(whole, root);
        queue.push_back(root);

        while let Some(v) = queue.pop_front() {
            let region = nodes[v.index()].region;
            match nodes[v.index()].kind {
                NodeKind::Or => {
                    let wrapper = if region == whole {
                        AndKind::Termination
                    } else {
                        AndKind::Deformation
                    };
                    let and = new_node(&mut nodes, NodeKind::And(wrapper), region);
                    nodes[v.index()].children.push((and, EdgeKind::Switch));
                    queue.push_back(and);

                    // Each Or-node owns its decompositions, so they are unique
                    // per (region, axis, position, overlap) by construction.
                    for (axis, position, overlap) in valid_cuts(region, min_part, overlap_ratio) {
                        let kind = NodeKind::And(AndKind::Decomposition {
                            axis,
                            position,
                            overlap,
                        });
                        let and = new_node(&mut nodes, kind, region);
                        nodes[v.index()].children.push((and, EdgeKind::Switch));
                        queue.push_back(and);
                    }
                }
                NodeKind::And(AndKind::Decomposition {
                    axis,
                    position,
                    overlap,
                }) => {
                    let (a, b) = split(region, axis, position, overlap);
                    for sub in [a, b] {
                        let or = match or_of_region.get(&sub) {
                            Some(&id) => id,
                            None => {
                                let id = new_node(&mut nodes, NodeKind::Or, sub);
                                or_of_region.insert(sub, id);
                                queue.push_back(id);
                                id
                            }
                        };
                        nodes[v.index()].children.push((or, EdgeKind::Decomposition));
                    }
                }
                NodeKind::And(kind) => {
                    let edge = if kind == AndKind::Termination {
                        EdgeKind::Termination
                    } else {
                        EdgeKind::Deformation
                    };
                    let term = new_node(&mut nodes, NodeKind::Terminal, region);
                    nodes[v.index()].children.push((term, edge));
                }
                NodeKind::Terminal => unreachable!("terminals are never queued"),
            }
        }

        let aog = Aog {
            grid,
            min_part,
            overlap_ratio,
            nodes,
            root,
        };
        debug_assert!(aog.validate().is_ok());
        Ok(aog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_grid_has_no_cuts() {
        let aog = Aog::build_full((1, 1), (1, 1), 0.0).unwrap();
        assert_eq!(aog.len(), 3);
        assert_eq!(aog.decomposition_count(), 0);
        assert_eq!(aog.part_terminal_count(), 0);
        assert_eq!(aog.node(aog.root()).children.len(), 1);
    }

    #[test]
    fn table_counts_for_square_grids() {
        let aog = Aog::build_full((3, 3), (1, 1), 0.0).unwrap();
        assert_eq!(aog.decomposition_count(), 48);
        assert_eq!(aog.part_terminal_count(), 35);
        let aog = Aog::build_full((5, 5), (1, 1), 0.0).unwrap();
        assert_eq!(aog.decomposition_count(), 600);
        assert_eq!(aog.part_terminal_count(), 224);
    }

    #[test]
    fn two_by_two_by_hand() {
        // 9 regions: whole, two rows, two columns, four singletons.
        // Cuts: 2 on the whole grid plus 1 on each row and column.
        let aog = Aog::build_full((2, 2), (1, 1), 0.0).unwrap();
        assert_eq!(aog.or_count(), 9);
        assert_eq!(aog.part_terminal_count(), 8);
        assert_eq!(aog.decomposition_count(), 6);
    }

    #[test]
    fn minimal_part_limits_cuts() {
        let aog = Aog::build_full((4, 4), (2, 2), 0.0).unwrap();
        // only the middle cut on each 4-side is valid
        assert_eq!(aog.node(aog.root()).children.len(), 3);
        assert!(aog.terminals().all(|t| t.region.w >= 2 && t.region.h >= 2));
    }

    #[test]
    fn overlap_adds_variants() {
        let plain = Aog::build_full((4, 1), (1, 1), 0.0).unwrap();
        let overlapped = Aog::build_full((4, 1), (1, 1), 0.5).unwrap();
        assert!(overlapped.decomposition_count() > plain.decomposition_count());
        overlapped.validate().unwrap();
        // root: positions 1..3 with overlaps 0..=2 where first child < 4
        let root_cuts = overlapped.node(overlapped.root()).children.len() - 1;
        assert_eq!(root_cuts, 3 + 2 + 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Aog::build_full((2, 2), (3, 1), 0.0).is_err());
        assert!(Aog::build_full((0, 2), (1, 1), 0.0).is_err());
        assert!(Aog::build_full((2, 2), (1, 1), 1.0).is_err());
    }

    #[test]
    fn deterministic() {
        let a = Aog::build_full((4, 3), (1, 1), 0.3).unwrap();
        let b = Aog::build_full((4, 3), (1, 1), 0.3).unwrap();
        assert_eq!(a, b);
    }
}
