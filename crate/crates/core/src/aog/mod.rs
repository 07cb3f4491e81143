//! Grid And-Or graphs over part configurations.
//!
//! The full structure AOG of a `W x H` cell grid has one Or-node per
//! sub-grid. Each Or-node either terminates into a part template (through a
//! wrapper And-node) or decomposes into two smaller sub-grids by a
//! horizontal or vertical binary cut. Any subgraph that keeps the root is an
//! object AOG; choosing one child per Or-node yields a parse tree.

mod build;
mod count;
mod io;
mod parse_tree;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use count::ConfigurationCount;
pub use parse_tree::{Configuration, ParseNode, ParseTree, Placement};

/// Sub-grid `(x, y, w, h)` in grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridRegion {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl GridRegion {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        GridRegion { x, y, w, h }
    }

    pub fn area(&self) -> u32 {
        self.w * self.h
    }

    pub fn contains(&self, other: &GridRegion) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

impl fmt::Display for GridRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Direction of a binary cut. A vertical cut splits the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AndKind {
    /// Wraps the object-level terminal; no displacement.
    Termination,
    /// Wraps a part terminal; local displacement with a quadratic penalty.
    Deformation,
    /// Binary split. `position` is the cut offset from the region origin and
    /// the first child extends `overlap` cells past the cut.
    Decomposition { axis: Axis, position: u32, overlap: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Or,
    And(AndKind),
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Switch,
    Decomposition,
    Deformation,
    Termination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AogNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub region: GridRegion,
    pub children: Vec<(NodeId, EdgeKind)>,
}

impl AogNode {
    pub fn is_or(&self) -> bool {
        matches!(self.kind, NodeKind::Or)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, NodeKind::Terminal)
    }

    pub fn and_kind(&self) -> Option<AndKind> {
        match self.kind {
            NodeKind::And(k) => Some(k),
            _ => None,
        }
    }

    pub fn child_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.iter().map(|&(c, _)| c)
    }
}

/// An And-Or graph over a cell grid. Node ids are dense and follow BFS
/// discovery order from the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aog {
    grid: (u32, u32),
    min_part: (u32, u32),
    overlap_ratio: f64,
    nodes: Vec<AogNode>,
    root: NodeId,
}

/// Children kept per Or-node when extracting a subgraph. Or-nodes without
/// an entry keep all of their children.
pub type KeptChildren = BTreeMap<NodeId, BTreeSet<NodeId>>;

impl Aog {
    pub fn grid(&self) -> (u32, u32) {
        self.grid
    }

    pub fn min_part(&self) -> (u32, u32) {
        self.min_part
    }

    pub fn overlap_ratio(&self) -> f64 {
        self.overlap_ratio
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[AogNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &AogNode {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn whole_region(&self) -> GridRegion {
        GridRegion::new(0, 0, self.grid.0, self.grid.1)
    }

    /// The terminal covering the whole grid, if the graph still has it.
    pub fn object_terminal(&self) -> Option<NodeId> {
        let whole = self.whole_region();
        self.nodes
            .iter()
            .find(|n| n.is_terminal() && n.region == whole)
            .map(|n| n.id)
    }

    pub fn is_object_terminal(&self, id: NodeId) -> bool {
        let n = self.node(id);
        n.is_terminal() && n.region == self.whole_region()
    }

    pub fn terminals(&self) -> impl Iterator<Item = &AogNode> {
        self.nodes.iter().filter(|n| n.is_terminal())
    }

    /// Terminal nodes excluding the object-level one.
    pub fn part_terminal_count(&self) -> usize {
        self.terminals().filter(|n| !self.is_object_terminal(n.id)).count()
    }

    pub fn decomposition_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::And(AndKind::Decomposition { .. })))
            .count()
    }

    pub fn or_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_or()).count()
    }

    /// Children of the root Or-node; these carry the bias terms.
    pub fn root_children(&self) -> Vec<NodeId> {
        self.node(self.root).child_ids().collect()
    }

    /// Nodes in depth-first post-order from the root: every node appears
    /// after all of its descendants.
    pub fn post_order(&self) -> Vec<NodeId> {
        let mut visited = vec![false; self.nodes.len()];
        let mut order = Vec::with_capacity(self.nodes.len());
        // (node, next child index)
        let mut stack = vec![(self.root, 0usize)];
        visited[self.root.index()] = true;
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let node = &self.nodes[id.index()];
            if *next < node.children.len() {
                let child = node.children[*next].0;
                *next += 1;
                if !visited[child.index()] {
                    visited[child.index()] = true;
                    stack.push((child, 0));
                }
            } else {
                order.push(id);
                stack.pop();
            }
        }
        order
    }

    /// Checks the structural invariants of the graph.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        if self.nodes.is_empty() {
            return bad("empty graph".into());
        }
        let whole = self.whole_region();
        if self.node(self.root).region != whole || !self.node(self.root).is_or() {
            return bad("root must be an Or-node over the whole grid".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.index() != i {
                return bad(format!("node {} stored at index {i}", n.id));
            }
            if n.region.x + n.region.w > self.grid.0 || n.region.y + n.region.h > self.grid.1 {
                return bad(format!("node {} region {} outside grid", n.id, n.region));
            }
            for &(c, _) in &n.children {
                if c.index() >= self.nodes.len() {
                    return bad(format!("node {} has dangling child {c}", n.id));
                }
            }
            match n.kind {
                NodeKind::Or => {
                    if n.children.is_empty() {
                        return bad(format!("Or-node {} has no children", n.id));
                    }
                    for &(c, e) in &n.children {
                        let child = self.node(c);
                        if e != EdgeKind::Switch || child.and_kind().is_none() {
                            return bad(format!("Or-node {} has non-And child {c}", n.id));
                        }
                        if child.region != n.region {
                            return bad(format!("Or-node {} child {c} has another region", n.id));
                        }
                    }
                }
                NodeKind::And(AndKind::Decomposition { .. }) => {
                    if n.children.len() != 2 {
                        return bad(format!("decomposition {} needs two children", n.id));
                    }
                    for &(c, e) in &n.children {
                        let child = self.node(c);
                        if e != EdgeKind::Decomposition
                            || !child.is_or()
                            || !n.region.contains(&child.region)
                            || child.region == n.region
                        {
                            return bad(format!("decomposition {} has bad child {c}", n.id));
                        }
                    }
                }
                NodeKind::And(kind) => {
                    let edge = if kind == AndKind::Termination {
                        EdgeKind::Termination
                    } else {
                        EdgeKind::Deformation
                    };
                    if n.children.len() != 1 || n.children[0].1 != edge || !self.node(n.children[0].0).is_terminal() {
                        return bad(format!("wrapper {} must have one terminal child", n.id));
                    }
                }
                NodeKind::Terminal => {
                    if !n.children.is_empty() {
                        return bad(format!("terminal {} has children", n.id));
                    }
                    if n.region != whole && (n.region.w < self.min_part.0 || n.region.h < self.min_part.1) {
                        return bad(format!("terminal {} below minimal part size", n.id));
                    }
                }
            }
        }
        let reachable = self.post_order().len();
        if reachable != self.nodes.len() {
            return bad(format!(
                "{} of {} nodes unreachable from root",
                self.nodes.len() - reachable,
                self.nodes.len()
            ));
        }
        Ok(())
    }

    /// Extracts the subgraph reachable from the root through the kept
    /// Or-children. Node ids are renumbered in BFS order; the returned map
    /// gives the original id of every new node.
    pub fn extract_subgraph(&self, kept: &KeptChildren) -> Result<(Aog, Vec<NodeId>)> {
        for (or, set) in kept {
            let node = self
                .nodes
                .get(or.index())
                .ok_or_else(|| Error::InvalidInput(format!("unknown node {or}")))?;
            if !node.is_or() {
                return Err(Error::InvalidInput(format!("node {or} is not an Or-node")));
            }
            for c in set {
                if !node.child_ids().any(|x| x == *c) {
                    return Err(Error::InvalidInput(format!("{c} is not a child of {or}")));
                }
            }
        }
        let mut new_of_old: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut old_of_new: Vec<NodeId> = Vec::new();
        let mut queue = VecDeque::new();
        let mut assign = |old: NodeId, new_of_old: &mut Vec<Option<NodeId>>, queue: &mut VecDeque<NodeId>| {
            if new_of_old[old.index()].is_none() {
                new_of_old[old.index()] = Some(NodeId(old_of_new.len() as u32));
                old_of_new.push(old);
                queue.push_back(old);
            }
        };
        assign(self.root, &mut new_of_old, &mut queue);
        let mut kept_children: BTreeMap<NodeId, Vec<(NodeId, EdgeKind)>> = BTreeMap::new();
        while let Some(old) = queue.pop_front() {
            let node = self.node(old);
            let children: Vec<(NodeId, EdgeKind)> = match (node.kind, kept.get(&old)) {
                (NodeKind::Or, Some(set)) => {
                    if set.is_empty() {
                        return Err(Error::InvalidInput(format!("Or-node {old} keeps no children")));
                    }
                    node.children.iter().copied().filter(|(c, _)| set.contains(c)).collect()
                }
                _ => node.children.clone(),
            };
            for &(c, _) in &children {
                assign(c, &mut new_of_old, &mut queue);
            }
            kept_children.insert(old, children);
        }
        let nodes = old_of_new
            .iter()
            .enumerate()
            .map(|(i, &old)| {
                let src = self.node(old);
                AogNode {
                    id: NodeId(i as u32),
                    kind: src.kind,
                    region: src.region,
                    children: kept_children[&old]
                        .iter()
                        .map(|&(c, e)| (new_of_old[c.index()].expect("assigned"), e))
                        .collect(),
                }
            })
            .collect();
        let aog = Aog {
            grid: self.grid,
            min_part: self.min_part,
            overlap_ratio: self.overlap_ratio,
            nodes,
            root: NodeId(0),
        };
        aog.validate()?;
        Ok((aog, old_of_new))
    }
}
