//! Towers whose every bond is all-or-nothing.
//!
//! `B(n1, ..., nk)` is the k-level tower where the single top bond binds n1
//! bonds below it, each of those binds n2, and so on down to level 0. Every
//! bond carries the formation state `"brunnian"`: it exists only as long as
//! its whole boundary does, so removing any single base element dissolves
//! the tower all the way up.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Error;
use crate::id::{ElementId, StateValue};
use crate::structure::Hyperstructure;
use crate::Result;

const BRUNNIAN: &str = "brunnian";

/// Branching factors `n1, ..., nk`, top down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrunnianSignature {
    branching: Vec<usize>,
}

impl BrunnianSignature {
    pub fn new(branching: Vec<usize>) -> Result<Self> {
        if branching.is_empty() {
            return Err(Error::BadSignature("no branching factors".into()));
        }
        if let Some(zero) = branching.iter().position(|&n| n == 0) {
            return Err(Error::BadSignature(format!(
                "factor {} is zero; every bond must bind something",
                zero + 1
            )));
        }
        Ok(BrunnianSignature { branching })
    }

    /// Comma-separated factors, e.g. `"3,3"`.
    pub fn parse(text: &str) -> Result<Self> {
        let factors = text
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::BadSignature(format!("`{part}` is not a count")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Self::new(factors)
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn depth(&self) -> usize {
        self.branching.len()
    }

    /// Element counts from level 0 up to the single top bond.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.depth() + 1);
        for cut in (0..=self.depth()).rev() {
            sizes.push(self.branching[..cut].iter().product());
        }
        sizes
    }
}

fn element_label(path: &[usize]) -> String {
    let parts: Vec<String> = path.iter().map(ToString::to_string).collect();
    format!("e_{}", parts.join("."))
}

fn bond_label(level: usize, ordinal: usize) -> String {
    format!("b_{level}_{ordinal}")
}

/// Build the tower `B(n1, ..., nk)`.
///
/// Base elements are `e_<p1>.<p2>...` with one path component per factor;
/// the bond at level j with flat ordinal i is `b_<j>_<i>` and binds the
/// elements sharing its path prefix. All bonds form in state `"brunnian"`.
pub fn generate_brunnian(sig: &BrunnianSignature) -> Hyperstructure {
    let k = sig.depth();
    let mut prefixes: Vec<Vec<Vec<usize>>> = vec![vec![vec![]]];
    for len in 1..=k {
        let mut next = Vec::new();
        for prefix in &prefixes[len - 1] {
            for x in 1..=sig.branching[len - 1] {
                let mut path = prefix.clone();
                path.push(x);
                next.push(path);
            }
        }
        prefixes.push(next);
    }

    let mut h = Hyperstructure::new(k);
    for path in &prefixes[k] {
        h.add_base_element(element_label(path)).expect("paths are distinct");
    }
    for level in 1..=k {
        let prefix_len = k - level;
        for (idx, _) in prefixes[prefix_len].iter().enumerate() {
            let fan = sig.branching[prefix_len];
            let children: Vec<ElementId> = (1..=fan)
                .map(|x| {
                    let child_ordinal = idx * fan + x;
                    let label = if level == 1 {
                        element_label(&prefixes[k][child_ordinal - 1])
                    } else {
                        bond_label(level - 1, child_ordinal)
                    };
                    ElementId::new(label, level - 1)
                })
                .collect();
            h.assign_state(level - 1, &children, StateValue::text(BRUNNIAN))
                .expect("children exist");
            h.add_bond(
                level,
                &children,
                Some(StateValue::text(BRUNNIAN)),
                bond_label(level, idx + 1),
            )
            .expect("tower bonds are fresh");
        }
    }
    h
}

/// Remove one element and let the consequences ripple upward.
///
/// A bond in state `"brunnian"` dissolves as soon as any of its boundary
/// goes; any other bond just shrinks, and dissolves only when nothing is
/// left. State table entries touching a removed element are dropped, and a
/// shrunk bond's formation state is re-admitted for its new boundary so the
/// result still validates. The order is kept even when the top level
/// empties out. On a strict structure two bonds can shrink into the same
/// shape, which is an error rather than a silent merge.
pub fn remove_element(h: &Hyperstructure, target: &ElementId) -> Result<Hyperstructure> {
    if !h.contains(target) {
        return Err(Error::UnknownElement(target.clone()));
    }
    let order = h.order();
    let mut removed: Vec<BTreeSet<String>> = vec![BTreeSet::new(); order + 1];
    removed[target.level()].insert(target.label().to_string());
    let mut shrunk: BTreeMap<ElementId, Vec<ElementId>> = BTreeMap::new();
    for level in target.level() + 1..=order {
        for bond in h.bonds_at(level)? {
            let rest: Vec<ElementId> = bond
                .boundary()
                .iter()
                .filter(|m| !removed[level - 1].contains(m.label()))
                .cloned()
                .collect();
            if rest.len() == bond.boundary().len() {
                continue;
            }
            let all_or_nothing =
                bond.formation_state() == Some(&StateValue::text(BRUNNIAN));
            if all_or_nothing || rest.is_empty() {
                removed[level].insert(bond.id().label().to_string());
            } else {
                shrunk.insert(bond.id().clone(), rest);
            }
        }
    }

    let mut out = Hyperstructure::new(order);
    out.set_strict(h.strict())?;
    for id in h.level_elements(0)? {
        if !removed[0].contains(id.label()) {
            out.add_base_element(id.label())?;
        }
    }
    for level in 0..=order {
        for (lvl, subset, values) in h.state_table().iter() {
            if lvl != level || subset.iter().any(|l| removed[level].contains(l)) {
                continue;
            }
            let ids: Vec<ElementId> =
                subset.iter().map(|l| ElementId::new(l.clone(), level)).collect();
            for value in values {
                out.assign_state(level, &ids, value.clone())?;
            }
        }
        for (id, rest) in &shrunk {
            if id.level() != level + 1 {
                continue;
            }
            let state = h.bond(id).and_then(|b| b.formation_state().cloned());
            if let Some(state) = state {
                let admitted = out
                    .states_for(level, rest)
                    .is_some_and(|values| values.contains(&state));
                if !admitted {
                    out.assign_state(level, rest, state)?;
                }
            }
        }
        if level + 1 > order {
            continue;
        }
        for bond in h.bonds_at(level + 1)? {
            if removed[level + 1].contains(bond.id().label()) {
                continue;
            }
            let binds: Vec<ElementId> = match shrunk.get(bond.id()) {
                Some(rest) => rest.clone(),
                None => bond.boundary().iter().cloned().collect(),
            };
            out.add_bond(
                level + 1,
                &binds,
                bond.formation_state().cloned(),
                bond.id().label(),
            )?;
        }
    }
    for (element, bond) in h.identity_sections() {
        if removed[element.level()].contains(element.label())
            || removed[bond.level()].contains(bond.label())
        {
            continue;
        }
        if let Some(rest) = shrunk.get(bond) {
            if rest.len() != 1 || rest[0] != *element {
                continue;
            }
        }
        out.set_identity_section(element, bond)?;
    }
    Ok(out)
}

/// Is this structure shaped like some `B(n1, ..., nk)`?
///
/// Every level must be a disjoint cover of the level below by bonds in
/// state `"brunnian"` with a uniform fan-out, narrowing to a single bond on
/// top. Labels play no part.
pub fn is_brunnian_pattern(h: &Hyperstructure) -> bool {
    if h.order() == 0 {
        return false;
    }
    for level in 1..=h.order() {
        let bonds = h.bonds_at(level).expect("level in range");
        if bonds.is_empty() {
            return false;
        }
        let fan = bonds[0].boundary().len();
        let mut covered: BTreeSet<&ElementId> = BTreeSet::new();
        for bond in &bonds {
            if bond.formation_state() != Some(&StateValue::text(BRUNNIAN)) {
                return false;
            }
            if bond.boundary().len() != fan {
                return false;
            }
            for member in bond.boundary() {
                if !covered.insert(member) {
                    return false;
                }
            }
        }
        if covered.len() != h.level_size(level - 1).expect("level in range") {
            return false;
        }
    }
    h.level_size(h.order()).expect("top level") == 1
}
