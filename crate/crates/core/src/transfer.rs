//! Carrying bond structure from one carrier set to another.
//!
//! A representation maps a fresh set injectively into the base level of an
//! existing structure. Pulling back along it keeps exactly the bonds whose
//! whole support lands in the image, level by level, relabelling the base
//! through the inverse map. The identity representation recovers the
//! structure itself.
//!
//! A composition chain is the other direction: a tower of spaces and maps
//! presents each fibre as a bond, so the chain itself becomes a structure
//! whose clusters are preimage chains.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Error;
use crate::id::ElementId;
use crate::structure::Hyperstructure;
use crate::Result;

/// An injective map from a carrier set into level 0 of some structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    map: BTreeMap<String, String>,
}

impl Representation {
    /// Keys are the carrier elements, values their images. Two elements may
    /// not share an image.
    pub fn new(map: BTreeMap<String, String>) -> Result<Self> {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (z, image) in &map {
            if let Some(prior) = seen.insert(image.as_str(), z.as_str()) {
                return Err(Error::RepresentationMismatch(format!(
                    "`{prior}` and `{z}` both map to `{image}`"
                )));
            }
        }
        Ok(Representation { map })
    }

    /// The representation of a structure's own base by itself.
    pub fn identity(h: &Hyperstructure) -> Self {
        let map = h
            .level_elements(0)
            .expect("level 0 always exists")
            .into_iter()
            .map(|id| (id.label().to_string(), id.label().to_string()))
            .collect();
        Representation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn image_of(&self, z: &str) -> Option<&str> {
        self.map.get(z).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(z, image)| (z.as_str(), image.as_str()))
    }
}

/// Pull the bonds of `h` back along a representation.
///
/// Level 0 of the result is the carrier set. A bond survives exactly when
/// everything it binds survives one level down, so inclusion is hereditary;
/// trailing levels left empty by that rule are trimmed from the order.
/// State table entries and identity sections over surviving elements are
/// carried along, with level 0 relabelled through the inverse map.
pub fn pullback(h: &Hyperstructure, rep: &Representation) -> Result<Hyperstructure> {
    let mut inverse: BTreeMap<&str, &str> = BTreeMap::new();
    for (z, image) in rep.iter() {
        if !h.contains(&ElementId::new(image, 0)) {
            return Err(Error::RepresentationMismatch(format!(
                "`{z}` maps to `{image}` which is not a level 0 element"
            )));
        }
        inverse.insert(image, z);
    }

    let mut surviving: Vec<BTreeSet<&str>> = vec![inverse.keys().copied().collect()];
    for level in 1..=h.order() {
        let mut kept = BTreeSet::new();
        for bond in h.bonds_at(level)? {
            let all_in = bond
                .boundary()
                .iter()
                .all(|m| surviving[level - 1].contains(m.label()));
            if all_in {
                kept.insert(bond.id().label());
            }
        }
        surviving.push(kept);
    }
    let new_order = (0..=h.order())
        .rev()
        .find(|&k| !surviving[k].is_empty())
        .unwrap_or(0);

    let relabel = |label: &str, level: usize| -> ElementId {
        if level == 0 {
            ElementId::new(*inverse.get(label).expect("surviving level 0 label"), 0)
        } else {
            ElementId::new(label, level)
        }
    };

    let mut out = Hyperstructure::new(new_order);
    out.set_strict(h.strict())?;
    for z in rep.domain() {
        out.add_base_element(z)?;
    }
    for level in 0..=new_order {
        for (lvl, subset, values) in h.state_table().iter() {
            if lvl != level || !subset.iter().all(|l| surviving[level].contains(l.as_str())) {
                continue;
            }
            let mapped: Vec<ElementId> =
                subset.iter().map(|l| relabel(l, level)).collect();
            for value in values {
                out.assign_state(level, &mapped, value.clone())?;
            }
        }
        if level + 1 > new_order {
            continue;
        }
        for bond in h.bonds_at(level + 1)? {
            if !surviving[level + 1].contains(bond.id().label()) {
                continue;
            }
            let binds: Vec<ElementId> = bond
                .boundary()
                .iter()
                .map(|m| relabel(m.label(), level))
                .collect();
            out.add_bond(
                level + 1,
                &binds,
                bond.formation_state().cloned(),
                bond.id().label(),
            )?;
        }
    }
    for (element, bond) in h.identity_sections() {
        let elem_alive = element.level() < surviving.len()
            && surviving[element.level()].contains(element.label());
        let bond_alive = bond.level() < surviving.len()
            && bond.level() <= new_order
            && surviving[bond.level()].contains(bond.label());
        if elem_alive && bond_alive {
            let mapped_elem = relabel(element.label(), element.level());
            let mapped_bond = ElementId::new(bond.label(), bond.level());
            out.set_identity_section(&mapped_elem, &mapped_bond)?;
        }
    }
    Ok(out)
}

/// A tower of spaces S1 <- S2 <- ... <- Sn presented by the maps between
/// them: `maps[i]` sends space i+1 into space i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionChain {
    spaces: Vec<Vec<String>>,
    maps: Vec<BTreeMap<String, String>>,
}

impl CompositionChain {
    pub fn new(spaces: Vec<Vec<String>>, maps: Vec<BTreeMap<String, String>>) -> Result<Self> {
        if spaces.is_empty() {
            return Err(Error::MalformedChain("a chain needs at least one space".into()));
        }
        for (i, space) in spaces.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for label in space {
                if !seen.insert(label.as_str()) {
                    return Err(Error::MalformedChain(format!(
                        "space {} repeats `{label}`",
                        i + 1
                    )));
                }
            }
        }
        if maps.len() + 1 != spaces.len() {
            return Err(Error::MalformedChain(format!(
                "{} spaces need {} maps, got {}",
                spaces.len(),
                spaces.len() - 1,
                maps.len()
            )));
        }
        for (i, map) in maps.iter().enumerate() {
            let domain: BTreeSet<&str> = spaces[i + 1].iter().map(String::as_str).collect();
            let codomain: BTreeSet<&str> = spaces[i].iter().map(String::as_str).collect();
            for source in &domain {
                match map.get(*source) {
                    None => {
                        return Err(Error::MalformedChain(format!(
                            "map {} is undefined on `{source}`",
                            i + 1
                        )))
                    }
                    Some(target) if !codomain.contains(target.as_str()) => {
                        return Err(Error::MalformedChain(format!(
                            "map {} sends `{source}` to `{target}` outside space {}",
                            i + 1,
                            i + 1
                        )))
                    }
                    Some(_) => {}
                }
            }
            for source in map.keys() {
                if !domain.contains(source.as_str()) {
                    return Err(Error::MalformedChain(format!(
                        "map {} is defined on `{source}` which is not in space {}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        Ok(CompositionChain { spaces, maps })
    }

    pub fn spaces(&self) -> &[Vec<String>] {
        &self.spaces
    }

    pub fn maps(&self) -> &[BTreeMap<String, String>] {
        &self.maps
    }
}

/// An element passed over because nothing underneath mapped onto it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedElement {
    /// Index into `spaces`.
    pub space: usize,
    pub label: String,
}

pub struct CompositionOutcome {
    pub structure: Hyperstructure,
    pub skipped: Vec<SkippedElement>,
}

/// Turn a composition chain into a structure.
///
/// The last space becomes level 0 and each earlier element becomes the bond
/// over its preimage, so the first space ends up on top. Elements with an
/// empty preimage, directly or because their whole preimage was skipped
/// below, produce no bond and are reported instead.
pub fn from_composition(c: &CompositionChain) -> Result<CompositionOutcome> {
    let n = c.spaces.len();
    let mut h = Hyperstructure::new(n - 1);
    for z in &c.spaces[n - 1] {
        h.add_base_element(z.clone())?;
    }
    let mut skipped = Vec::new();
    for level in 1..=n - 1 {
        let space_idx = n - 1 - level;
        let map = &c.maps[space_idx];
        for s in &c.spaces[space_idx] {
            let children: Vec<ElementId> = c.spaces[space_idx + 1]
                .iter()
                .filter(|t| map.get(*t).is_some_and(|target| target == s))
                .map(|t| ElementId::new(t.clone(), level - 1))
                .filter(|id| h.contains(id))
                .collect();
            if children.is_empty() {
                skipped.push(SkippedElement { space: space_idx, label: s.clone() });
            } else {
                h.add_bond(level, &children, None, s.clone())?;
            }
        }
    }
    Ok(CompositionOutcome { structure: h, skipped })
}

/// Does `z` land on the given targets under the successive maps?
///
/// Targets run upward from the space above the base: first the wanted image
/// of `z`, then the wanted image of that, and so on. This is preimage
/// membership; on the structure built by [`from_composition`] it answers
/// exactly like [`in_cluster_chain`] over the corresponding bond chain.
pub fn cluster_by_preimage(c: &CompositionChain, z: &str, targets: &[String]) -> Result<bool> {
    let n = c.spaces.len();
    if targets.is_empty() || targets.len() > n - 1 {
        return Err(Error::MalformedChain(format!(
            "expected between 1 and {} targets, got {}",
            n.saturating_sub(1),
            targets.len()
        )));
    }
    if !c.spaces[n - 1].contains(&z.to_string()) {
        return Err(Error::UnknownLabel { label: z.into(), space: format!("S{n}") });
    }
    for (j, target) in targets.iter().enumerate() {
        let space_idx = n - 2 - j;
        if !c.spaces[space_idx].contains(target) {
            return Err(Error::UnknownLabel {
                label: target.clone(),
                space: format!("S{}", space_idx + 1),
            });
        }
    }
    let mut current = z.to_string();
    for (j, target) in targets.iter().enumerate() {
        let map = &c.maps[n - 2 - j];
        current = map.get(&current).expect("maps are total").clone();
        if current != *target {
            return Ok(false);
        }
    }
    Ok(true)
}
