use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{Aog, GridRegion, NodeKind};
use crate::error::{Error, Result};

/// Distinct collapsed configurations of an AOG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigurationCount {
    /// Distinct terminal sets, including the whole-object template alone.
    pub total: u64,
    /// Distinct terminal sets with at least two parts.
    pub part_configurations: u64,
}

impl Aog {
    /// Number of parse trees: terminals count 1, And-nodes multiply, Or-nodes
    /// add.
    pub fn count_parse_trees(&self) -> BigUint {
        let mut counts: Vec<BigUint> = vec![BigUint::zero(); self.len()];
        for id in self.post_order() {
            let node = self.node(id);
            counts[id.index()] = match node.kind {
                NodeKind::Terminal => BigUint::one(),
                NodeKind::Or => node.child_ids().map(|c| counts[c.index()].clone()).sum(),
                NodeKind::And(_) => node.child_ids().fold(BigUint::one(), |acc, c| acc * &counts[c.index()]),
            };
        }
        counts[self.root.index()].clone()
    }

    /// Enumerates every parse tree, collapses it to its set of terminal
    /// regions and counts distinct sets. Refuses when the number of parse
    /// trees exceeds `budget`.
    pub fn count_configurations(&self, budget: u64) -> Result<ConfigurationCount> {
        let trees = self.count_parse_trees();
        if trees > BigUint::from(budget) {
            return Err(Error::BudgetExceeded {
                count: trees.to_string(),
                budget,
            });
        }
        // Sets of terminal regions per node. Deduplicating at every node gives
        // the same distinct unions at the root as deduplicating only there.
        let mut configs: Vec<BTreeSet<Vec<GridRegion>>> = vec![BTreeSet::new(); self.len()];
        for id in self.post_order() {
            let node = self.node(id);
            let set = match node.kind {
                NodeKind::Terminal => BTreeSet::from([vec![node.region]]),
                NodeKind::Or => node
                    .child_ids()
                    .flat_map(|c| configs[c.index()].iter().cloned())
                    .collect(),
                NodeKind::And(_) => {
                    let mut acc: BTreeSet<Vec<GridRegion>> = BTreeSet::from([Vec::new()]);
                    for c in node.child_ids() {
                        let mut next = BTreeSet::new();
                        for left in &acc {
                            for right in &configs[c.index()] {
                                let mut merged: Vec<GridRegion> = left.iter().chain(right.iter()).copied().collect();
                                merged.sort();
                                merged.dedup();
                                next.insert(merged);
                            }
                        }
                        acc = next;
                    }
                    acc
                }
            };
            configs[id.index()] = set;
        }
        let root = &configs[self.root.index()];
        let whole = self.whole_region();
        let total = root.len() as u64;
        let trivial = root.iter().filter(|c| c.as_slice() == [whole]).count() as u64;
        Ok(ConfigurationCount {
            total,
            part_configurations: total - trivial,
        })
    }

    /// Parse-tree count as `u64` when it fits.
    pub fn parse_tree_count_u64(&self) -> Option<u64> {
        self.count_parse_trees().to_u64()
    }
}
