//! Cluster membership, support, and the analysis/synthesis round trip.
//!
//! An element clusters under a chain of bonds when membership nests all the
//! way up: z sits in the boundary of the first bond, the first bond in the
//! boundary of the second, and so on. The support of a bond is everything
//! at level 0 it transitively rests on. Decomposition unfolds a bond into
//! the tree of its constituents down to the base; resynthesis rebuilds a
//! structure from such trees and recovers what was decomposed.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Error;
use crate::id::{ElementId, StateValue};
use crate::structure::Hyperstructure;
use crate::Result;

/// Bonds at levels 1..=m, each a member of the next one's boundary.
///
/// Construction checks only the level ladder; membership is checked against
/// a structure by [`in_cluster_chain`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterChain {
    bonds: Vec<ElementId>,
}

impl ClusterChain {
    pub fn new(bonds: Vec<ElementId>) -> Result<Self> {
        if bonds.is_empty() {
            return Err(Error::MalformedChain("a cluster chain needs at least one bond".into()));
        }
        for (i, bond) in bonds.iter().enumerate() {
            if bond.level() != i + 1 {
                return Err(Error::MalformedChain(format!(
                    "chain entry {} is `{}` at level {}, expected level {}",
                    i,
                    bond.label(),
                    bond.level(),
                    i + 1
                )));
            }
        }
        Ok(ClusterChain { bonds })
    }

    pub fn bonds(&self) -> &[ElementId] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }
}

/// What a bond binds, one level down.
pub fn members<'a>(h: &'a Hyperstructure, bond: &ElementId) -> Result<&'a BTreeSet<ElementId>> {
    h.boundary(bond)
}

/// Does `z` belong to the cluster the chain carves out?
///
/// The chain itself must hold together inside `h`: consecutive bonds that
/// are not nested make the chain malformed, which is an error and not a
/// `false` answer. `false` means the chain is fine and `z` sits outside it.
pub fn in_cluster_chain(h: &Hyperstructure, z: &ElementId, chain: &ClusterChain) -> Result<bool> {
    if z.level() != 0 {
        return Err(Error::LevelMismatch { expected: 0, found: z.clone() });
    }
    if !h.contains(z) {
        return Err(Error::UnknownElement(z.clone()));
    }
    for pair in chain.bonds().windows(2) {
        let upper = h.boundary(&pair[1])?;
        if !upper.contains(&pair[0]) {
            return Err(Error::MalformedChain(format!(
                "`{}` is not bound by `{}`",
                pair[0].label(),
                pair[1].label()
            )));
        }
    }
    Ok(h.boundary(&chain.bonds()[0])?.contains(z))
}

/// The level-0 elements a bond transitively rests on.
///
/// A level-0 element is its own support. Overlapping constituents are
/// counted once; the result is a plain set.
pub fn support(h: &Hyperstructure, id: &ElementId) -> Result<BTreeSet<ElementId>> {
    if !h.contains(id) {
        return Err(if id.level() == 0 {
            Error::UnknownElement(id.clone())
        } else {
            Error::UnknownBond(id.clone())
        });
    }
    let mut out = BTreeSet::new();
    let mut visited = BTreeSet::new();
    let mut stack = vec![id.clone()];
    while let Some(current) = stack.pop() {
        if !visited.insert(current.clone()) {
            continue;
        }
        if current.level() == 0 {
            out.insert(current);
            continue;
        }
        for member in h.boundary(&current)? {
            stack.push(member.clone());
        }
    }
    Ok(out)
}

/// A bond unfolded into its constituents, down to the base elements.
///
/// Shared constituents appear once per occurrence, so the result is a tree
/// even when the structure underneath is a dag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecompositionTree {
    Leaf {
        element: ElementId,
    },
    Node {
        bond: ElementId,
        state: Option<StateValue>,
        children: Vec<DecompositionTree>,
    },
}

impl DecompositionTree {
    /// The id at the root: the bond, or the element of a bare leaf.
    pub fn root_id(&self) -> &ElementId {
        match self {
            DecompositionTree::Leaf { element } => element,
            DecompositionTree::Node { bond, .. } => bond,
        }
    }

    /// Every leaf in traversal order, duplicates included.
    pub fn leaf_elements(&self) -> Vec<ElementId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<ElementId>) {
        match self {
            DecompositionTree::Leaf { element } => out.push(element.clone()),
            DecompositionTree::Node { children, .. } => {
                for child in children {
                    child.collect_leaves(out);
                }
            }
        }
    }
}

/// Unfold an element of `h` into its decomposition tree.
///
/// Children follow the sorted boundary order, so equal inputs give equal
/// trees. A level-0 element decomposes into a bare leaf.
pub fn decompose(h: &Hyperstructure, id: &ElementId) -> Result<DecompositionTree> {
    if !h.contains(id) {
        return Err(if id.level() == 0 {
            Error::UnknownElement(id.clone())
        } else {
            Error::UnknownBond(id.clone())
        });
    }
    if id.level() == 0 {
        return Ok(DecompositionTree::Leaf { element: id.clone() });
    }
    let bond = h.bond(id).ok_or_else(|| Error::UnknownBond(id.clone()))?;
    let mut children = Vec::with_capacity(bond.boundary().len());
    for member in bond.boundary() {
        if member.level() + 1 != id.level() {
            return Err(Error::LevelMismatch {
                expected: id.level() - 1,
                found: member.clone(),
            });
        }
        children.push(decompose(h, member)?);
    }
    Ok(DecompositionTree::Node {
        bond: id.clone(),
        state: bond.formation_state().cloned(),
        children,
    })
}

/// Rebuild a structure holding exactly the elements and bonds of a forest.
///
/// Leaves with equal labels are the same base element, and a bond id may
/// recur across trees as long as every occurrence agrees on boundary and
/// state; that is how overlapping decompositions merge back. The order of
/// the result is the highest root level in the forest.
pub fn resynthesize(forest: &[DecompositionTree]) -> Result<Hyperstructure> {
    let mut leaves: BTreeSet<String> = BTreeSet::new();
    let mut nodes: BTreeMap<ElementId, (BTreeSet<ElementId>, Option<StateValue>)> =
        BTreeMap::new();
    for tree in forest {
        collect(tree, &mut leaves, &mut nodes)?;
    }
    let order = forest.iter().map(|t| t.root_id().level()).max().unwrap_or(0);
    let mut h = Hyperstructure::new(order);
    for label in &leaves {
        h.add_base_element(label.clone())?;
    }
    for level in 1..=order {
        for (id, (boundary, state)) in nodes.iter().filter(|(id, _)| id.level() == level) {
            let binds: Vec<ElementId> = boundary.iter().cloned().collect();
            h.add_bond(level, &binds, state.clone(), id.label())?;
        }
    }
    Ok(h)
}

fn collect(
    tree: &DecompositionTree,
    leaves: &mut BTreeSet<String>,
    nodes: &mut BTreeMap<ElementId, (BTreeSet<ElementId>, Option<StateValue>)>,
) -> Result<()> {
    match tree {
        DecompositionTree::Leaf { element } => {
            if element.level() != 0 {
                return Err(Error::MalformedTree(format!(
                    "leaf `{}` sits at level {}, leaves must be level 0",
                    element.label(),
                    element.level()
                )));
            }
            leaves.insert(element.label().to_string());
        }
        DecompositionTree::Node { bond, state, children } => {
            if bond.level() == 0 {
                return Err(Error::MalformedTree(format!(
                    "`{}` is marked as a bond but sits at level 0",
                    bond.label()
                )));
            }
            if children.is_empty() {
                return Err(Error::MalformedTree(format!(
                    "bond `{}` has no children",
                    bond.label()
                )));
            }
            let mut boundary = BTreeSet::new();
            for child in children {
                let child_id = child.root_id();
                if child_id.level() + 1 != bond.level() {
                    return Err(Error::MalformedTree(format!(
                        "`{}` at level {} cannot be a direct constituent of `{}` at level {}",
                        child_id.label(),
                        child_id.level(),
                        bond.label(),
                        bond.level()
                    )));
                }
                boundary.insert(child_id.clone());
                collect(child, leaves, nodes)?;
            }
            let entry = (boundary, state.clone());
            match nodes.get(bond) {
                Some(existing) if *existing != entry => {
                    return Err(Error::MalformedTree(format!(
                        "bond `{}` occurs with conflicting boundaries or states",
                        bond.label()
                    )));
                }
                Some(_) => {}
                None => {
                    nodes.insert(bond.clone(), entry);
                }
            }
        }
    }
    Ok(())
}
