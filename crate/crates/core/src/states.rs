//! Bottom-up state propagation.
//!
//! Each level of a structure draws its states from a named space, and one
//! aggregator per level folds the states of a bond's boundary into the
//! state of the bond itself. Propagation seeds level 0 and folds upward;
//! the result satisfies the compatibility law at every bond: the bond's
//! state is its level's rule applied to the multiset of boundary states.
//!
//! `update` replays a small base change over a prior assignment, touching
//! only ancestors of what changed. A fingerprint carried in the assignment
//! catches priors computed against a different structure or wiring.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::Error;
use crate::id::{ElementId, StateValue};
use crate::structure::Hyperstructure;
use crate::validate::{ValidationReport, Violation};
use crate::Result;

/// Relative slack when comparing real-valued states.
pub const STATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum SpaceKind {
    Numeric,
    Enumerated(BTreeSet<String>),
}

/// A named space of admissible states: numeric, or a finite token set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSpace {
    name: String,
    kind: SpaceKind,
}

impl StateSpace {
    pub fn numeric(name: impl Into<String>) -> Self {
        StateSpace { name: name.into(), kind: SpaceKind::Numeric }
    }

    pub fn enumerated(
        name: impl Into<String>,
        tokens: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let name = name.into();
        let tokens: BTreeSet<String> = tokens.into_iter().collect();
        if tokens.is_empty() {
            return Err(Error::SpaceMismatch(format!("space `{name}` has no tokens")));
        }
        Ok(StateSpace { name, kind: SpaceKind::Enumerated(tokens) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, SpaceKind::Numeric)
    }

    /// Numeric spaces take finite numbers; enumerated spaces take their own
    /// tokens, bare or qualified by this space's name.
    pub fn admits(&self, value: &StateValue) -> bool {
        match (&self.kind, value) {
            (SpaceKind::Numeric, StateValue::Int(_)) => true,
            (SpaceKind::Numeric, StateValue::Real(x)) => x.is_finite(),
            (SpaceKind::Enumerated(tokens), StateValue::Text(t)) => tokens.contains(t),
            (SpaceKind::Enumerated(tokens), StateValue::Token { space, value }) => {
                *space == self.name && tokens.contains(value)
            }
            _ => false,
        }
    }

    fn tokens(&self) -> Option<&BTreeSet<String>> {
        match &self.kind {
            SpaceKind::Numeric => None,
            SpaceKind::Enumerated(tokens) => Some(tokens),
        }
    }
}

/// A finite rule mapping multisets of child tokens to a parent token.
/// Entry keys are sorted multisets; totality up to `max_arity` is enforced
/// when the rule is wired to its spaces, not here.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableRule {
    max_arity: usize,
    entries: BTreeMap<Vec<String>, String>,
}

impl TableRule {
    pub fn new(
        max_arity: usize,
        entries: impl IntoIterator<Item = (Vec<String>, String)>,
    ) -> Result<Self> {
        if max_arity == 0 {
            return Err(Error::SpaceMismatch("table arity must be at least 1".into()));
        }
        let mut normalized = BTreeMap::new();
        for (mut key, out) in entries {
            if key.is_empty() || key.len() > max_arity {
                return Err(Error::SpaceMismatch(format!(
                    "table entry {key:?} has arity {}, limit is {max_arity}",
                    key.len()
                )));
            }
            key.sort();
            if normalized.insert(key.clone(), out).is_some() {
                return Err(Error::SpaceMismatch(format!(
                    "two table entries for multiset {key:?}"
                )));
            }
        }
        Ok(TableRule { max_arity, entries: normalized })
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    fn lookup(&self, multiset: &[String]) -> Option<&str> {
        self.entries.get(multiset).map(String::as_str)
    }

    fn outputs(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(String::as_str)
    }
}

/// How one level folds boundary states into bond states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AggRule {
    Product,
    Sum,
    Min,
    Max,
    /// Render each child state, sort, join with `|`.
    ConcatSorted,
    Table(TableRule),
}

impl AggRule {
    fn is_numeric(&self) -> bool {
        matches!(self, AggRule::Product | AggRule::Sum | AggRule::Min | AggRule::Max)
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggRule::Product => "product",
            AggRule::Sum => "sum",
            AggRule::Min => "min",
            AggRule::Max => "max",
            AggRule::ConcatSorted => "concat-sorted",
            AggRule::Table(_) => "table",
        }
    }
}

/// The connector for one level: a rule plus the spaces it runs between.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Aggregator {
    pub level: usize,
    pub rule: AggRule,
    pub child_space: String,
    pub parent_space: String,
}

impl Aggregator {
    pub fn new(
        level: usize,
        rule: AggRule,
        child_space: impl Into<String>,
        parent_space: impl Into<String>,
    ) -> Self {
        Aggregator {
            level,
            rule,
            child_space: child_space.into(),
            parent_space: parent_space.into(),
        }
    }
}

/// A total assignment of states: one per level-0 element, one per bond.
#[derive(Debug, Clone, PartialEq)]
pub struct StateAssignmentMap {
    values: BTreeMap<ElementId, StateValue>,
    fingerprint: u64,
}

impl StateAssignmentMap {
    pub fn get(&self, id: &ElementId) -> Option<&StateValue> {
        self.values.get(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, &StateValue)> {
        self.values.iter()
    }

    /// Hash of the structure and wiring this assignment was computed from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

fn fingerprint(h: &Hyperstructure, spaces: &[StateSpace], aggs: &[Aggregator]) -> u64 {
    let mut s = DefaultHasher::new();
    h.order().hash(&mut s);
    h.strict().hash(&mut s);
    for level in 0..=h.order() {
        for id in h.level_elements(level).expect("level in range") {
            id.hash(&mut s);
        }
    }
    for level in 1..=h.order() {
        for bond in h.bonds_at(level).expect("level in range") {
            bond.id().hash(&mut s);
            for member in bond.boundary() {
                member.hash(&mut s);
            }
            bond.formation_state().hash(&mut s);
        }
    }
    for (level, subset, values) in h.state_table().iter() {
        level.hash(&mut s);
        subset.hash(&mut s);
        for value in values {
            value.hash(&mut s);
        }
    }
    for (element, bond) in h.identity_sections() {
        element.hash(&mut s);
        bond.hash(&mut s);
    }
    spaces.hash(&mut s);
    aggs.hash(&mut s);
    s.finish()
}

struct Wiring<'a> {
    spaces: BTreeMap<&'a str, &'a StateSpace>,
    by_level: BTreeMap<usize, &'a Aggregator>,
}

impl<'a> Wiring<'a> {
    fn space(&self, name: &str) -> &'a StateSpace {
        self.spaces.get(name).expect("wiring checked")
    }

    fn base_space(&self) -> Option<&'a StateSpace> {
        self.by_level.get(&1).map(|agg| self.space(&agg.child_space))
    }
}

fn multisets(tokens: &BTreeSet<String>, arity: usize) -> Vec<Vec<String>> {
    let pool: Vec<&String> = tokens.iter().collect();
    let mut out = Vec::new();
    let mut current: Vec<String> = Vec::new();
    fn walk(
        pool: &[&String],
        from: usize,
        left: usize,
        current: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        if left == 0 {
            out.push(current.clone());
            return;
        }
        for i in from..pool.len() {
            current.push(pool[i].clone());
            walk(pool, i, left - 1, current, out);
            current.pop();
        }
    }
    walk(&pool, 0, arity, &mut current, &mut out);
    out
}

fn check_wiring<'a>(
    h: &Hyperstructure,
    spaces: &'a [StateSpace],
    aggs: &'a [Aggregator],
) -> Result<Wiring<'a>> {
    let mut index: BTreeMap<&str, &StateSpace> = BTreeMap::new();
    for space in spaces {
        if index.insert(space.name(), space).is_some() {
            return Err(Error::SpaceMismatch(format!(
                "two spaces named `{}`",
                space.name()
            )));
        }
    }
    let mut by_level: BTreeMap<usize, &Aggregator> = BTreeMap::new();
    for agg in aggs {
        if agg.level == 0 || agg.level > h.order() {
            return Err(Error::BadLevel { level: agg.level, order: h.order() });
        }
        if by_level.insert(agg.level, agg).is_some() {
            return Err(Error::SpaceMismatch(format!(
                "level {} has two aggregators",
                agg.level
            )));
        }
        let child = *index.get(agg.child_space.as_str()).ok_or_else(|| {
            Error::SpaceMismatch(format!("no space named `{}`", agg.child_space))
        })?;
        let parent = *index.get(agg.parent_space.as_str()).ok_or_else(|| {
            Error::SpaceMismatch(format!("no space named `{}`", agg.parent_space))
        })?;
        if agg.rule.is_numeric() && !(child.is_numeric() && parent.is_numeric()) {
            return Err(Error::SpaceMismatch(format!(
                "rule {} at level {} needs numeric spaces",
                agg.rule.name(),
                agg.level
            )));
        }
        if let AggRule::Table(table) = &agg.rule {
            let child_tokens = child.tokens().ok_or_else(|| {
                Error::SpaceMismatch(format!(
                    "table at level {} needs an enumerated child space",
                    agg.level
                ))
            })?;
            let parent_tokens = parent.tokens().ok_or_else(|| {
                Error::SpaceMismatch(format!(
                    "table at level {} needs an enumerated parent space",
                    agg.level
                ))
            })?;
            for arity in 1..=table.max_arity() {
                for multiset in multisets(child_tokens, arity) {
                    if table.lookup(&multiset).is_none() {
                        return Err(Error::SpaceMismatch(format!(
                            "table at level {} has no entry for {multiset:?}",
                            agg.level
                        )));
                    }
                }
            }
            for out in table.outputs() {
                if !parent_tokens.contains(out) {
                    return Err(Error::SpaceMismatch(format!(
                        "table at level {} outputs `{out}` outside space `{}`",
                        agg.level, agg.parent_space
                    )));
                }
            }
        }
    }
    for level in 1..=h.order() {
        if !by_level.contains_key(&level) {
            return Err(Error::AggregatorGap(level));
        }
    }
    for level in 2..=h.order() {
        let below = by_level[&(level - 1)];
        let here = by_level[&level];
        if here.child_space != below.parent_space {
            return Err(Error::SpaceMismatch(format!(
                "level {} reads from `{}` but level {} writes to `{}`",
                level,
                here.child_space,
                level - 1,
                below.parent_space
            )));
        }
    }
    Ok(Wiring { spaces: index, by_level })
}

fn apply(rule: &AggRule, bond: &str, children: &[&StateValue]) -> Result<StateValue> {
    match rule {
        AggRule::Product | AggRule::Sum => {
            let all_int = children.iter().all(|v| matches!(v, StateValue::Int(_)));
            if all_int {
                let mut acc: i64 = if matches!(rule, AggRule::Product) { 1 } else { 0 };
                for v in children {
                    let StateValue::Int(n) = v else { unreachable!() };
                    acc = match rule {
                        AggRule::Product => acc.checked_mul(*n),
                        _ => acc.checked_add(*n),
                    }
                    .ok_or_else(|| {
                        Error::SpaceMismatch(format!(
                            "{} over `{bond}` overflows",
                            rule.name()
                        ))
                    })?;
                }
                Ok(StateValue::Int(acc))
            } else {
                let mut acc: f64 = if matches!(rule, AggRule::Product) { 1.0 } else { 0.0 };
                for v in children {
                    let x = numeric(v, rule, bond)?;
                    if matches!(rule, AggRule::Product) {
                        acc *= x;
                    } else {
                        acc += x;
                    }
                }
                Ok(StateValue::Real(acc))
            }
        }
        AggRule::Min | AggRule::Max => {
            let mut best: Option<(&StateValue, f64)> = None;
            for v in children {
                let x = numeric(v, rule, bond)?;
                let better = match best {
                    None => true,
                    Some((_, y)) => {
                        if matches!(rule, AggRule::Min) {
                            x < y
                        } else {
                            x > y
                        }
                    }
                };
                if better {
                    best = Some((*v, x));
                }
            }
            let (winner, _) = best.ok_or_else(|| {
                Error::SpaceMismatch(format!("{} over `{bond}` has no children", rule.name()))
            })?;
            Ok(winner.clone())
        }
        AggRule::ConcatSorted => {
            let mut parts: Vec<String> = children.iter().map(|v| v.to_string()).collect();
            parts.sort();
            Ok(StateValue::text(parts.join("|")))
        }
        AggRule::Table(table) => {
            let mut multiset = Vec::with_capacity(children.len());
            for v in children {
                let token = v.token().ok_or_else(|| {
                    Error::SpaceMismatch(format!(
                        "table over `{bond}` got non-token state {v}"
                    ))
                })?;
                multiset.push(token.to_string());
            }
            multiset.sort();
            if multiset.len() > table.max_arity() {
                return Err(Error::SpaceMismatch(format!(
                    "`{bond}` binds {} members, table covers up to {}",
                    multiset.len(),
                    table.max_arity()
                )));
            }
            let out = table.lookup(&multiset).ok_or_else(|| {
                Error::SpaceMismatch(format!(
                    "table over `{bond}` has no entry for {multiset:?}"
                ))
            })?;
            Ok(StateValue::text(out))
        }
    }
}

fn numeric(v: &StateValue, rule: &AggRule, bond: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| {
        Error::SpaceMismatch(format!(
            "{} over `{bond}` got non-numeric state {v}",
            rule.name()
        ))
    })
}

fn fold_bond(
    wiring: &Wiring,
    values: &BTreeMap<ElementId, StateValue>,
    level: usize,
    bond: &crate::structure::Bond,
) -> Result<StateValue> {
    let agg = wiring.by_level[&level];
    let mut children = Vec::with_capacity(bond.boundary().len());
    for member in bond.boundary() {
        children.push(
            values
                .get(member)
                .ok_or_else(|| Error::UnknownElement(member.clone()))?,
        );
    }
    let out = apply(&agg.rule, bond.id().label(), &children)?;
    let parent = wiring.space(&agg.parent_space);
    if !parent.admits(&out) {
        return Err(Error::SpaceMismatch(format!(
            "`{}` computed {out} outside space `{}`",
            bond.id(),
            agg.parent_space
        )));
    }
    Ok(out)
}

fn check_base_value(
    wiring: &Wiring,
    label: &str,
    value: &StateValue,
) -> Result<()> {
    if let Some(space) = wiring.base_space() {
        if !space.admits(value) {
            return Err(Error::SpaceMismatch(format!(
                "`{label}`: {value} is not in space `{}`",
                space.name()
            )));
        }
    }
    Ok(())
}

/// Seed level 0 from `base` and fold states upward, one aggregator per
/// level. The result is total and satisfies the compatibility law; it is a
/// pure function of its four arguments. `h` is expected to validate.
pub fn propagate(
    h: &Hyperstructure,
    spaces: &[StateSpace],
    aggs: &[Aggregator],
    base: &BTreeMap<String, StateValue>,
) -> Result<StateAssignmentMap> {
    let wiring = check_wiring(h, spaces, aggs)?;
    for label in base.keys() {
        if !h.contains(&ElementId::new(label.clone(), 0)) {
            return Err(Error::UnknownElement(ElementId::new(label.clone(), 0)));
        }
    }
    let mut values: BTreeMap<ElementId, StateValue> = BTreeMap::new();
    for id in h.level_elements(0)? {
        let value = base
            .get(id.label())
            .ok_or_else(|| Error::MissingBaseState(id.label().to_string()))?;
        check_base_value(&wiring, id.label(), value)?;
        values.insert(id, value.clone());
    }
    for level in 1..=h.order() {
        for bond in h.bonds_at(level)? {
            let out = fold_bond(&wiring, &values, level, bond)?;
            values.insert(bond.id().clone(), out);
        }
    }
    Ok(StateAssignmentMap { values, fingerprint: fingerprint(h, spaces, aggs) })
}

/// Replay base changes over a prior assignment.
///
/// Equal to a fresh `propagate` with the overridden base, but only bonds
/// above a changed element are recomputed; everything else is carried over
/// bit for bit. The prior must have been computed against the same
/// structure, spaces and aggregators, which its fingerprint attests.
pub fn update(
    h: &Hyperstructure,
    prior: &StateAssignmentMap,
    spaces: &[StateSpace],
    aggs: &[Aggregator],
    changes: &BTreeMap<String, StateValue>,
) -> Result<StateAssignmentMap> {
    let fp = fingerprint(h, spaces, aggs);
    if fp != prior.fingerprint {
        return Err(Error::StalePrior);
    }
    let wiring = check_wiring(h, spaces, aggs)?;
    for (label, value) in changes {
        if !h.contains(&ElementId::new(label.clone(), 0)) {
            return Err(Error::UnknownElement(ElementId::new(label.clone(), 0)));
        }
        check_base_value(&wiring, label, value)?;
    }
    let mut values = prior.values.clone();
    let mut dirty: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); h.order() + 1];
    for (label, value) in changes {
        values.insert(ElementId::new(label.clone(), 0), value.clone());
        dirty[0].insert(label.as_str());
    }
    for level in 1..=h.order() {
        for bond in h.bonds_at(level)? {
            let touched = bond
                .boundary()
                .iter()
                .any(|m| dirty[level - 1].contains(m.label()));
            if !touched {
                continue;
            }
            let out = fold_bond(&wiring, &values, level, bond)?;
            values.insert(bond.id().clone(), out);
            dirty[level].insert(bond.id().label());
        }
    }
    Ok(StateAssignmentMap { values, fingerprint: fp })
}

/// Do two states agree, up to [`STATE_TOLERANCE`] on reals?
pub fn states_agree(a: &StateValue, b: &StateValue) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => {
            if let (StateValue::Int(m), StateValue::Int(n)) = (a, b) {
                return m == n;
            }
            (x - y).abs() <= STATE_TOLERANCE * x.abs().max(y.abs()).max(1.0)
        }
        _ => match (a.token(), b.token()) {
            (Some(s), Some(t)) => s == t,
            _ => a == b,
        },
    }
}

/// Check the compatibility law at every bond: its state must equal its
/// level's rule applied to its boundary's states. Problems come back as a
/// report, never as an error; missing states and missing aggregators are
/// violations too.
pub fn check_compatibility(
    h: &Hyperstructure,
    assignment: &StateAssignmentMap,
    aggs: &[Aggregator],
) -> ValidationReport {
    let mut by_level: BTreeMap<usize, &Aggregator> = BTreeMap::new();
    for agg in aggs {
        by_level.entry(agg.level).or_insert(agg);
    }
    let mut out = Vec::new();
    let mut reported_missing: BTreeSet<ElementId> = BTreeSet::new();
    let require = |id: &ElementId,
                   out: &mut Vec<Violation>,
                   reported: &mut BTreeSet<ElementId>|
     -> bool {
        if assignment.get(id).is_some() {
            return true;
        }
        if reported.insert(id.clone()) {
            out.push(Violation::AssignmentMissing { id: id.clone() });
        }
        false
    };
    for id in h.level_elements(0).expect("level 0 exists") {
        require(&id, &mut out, &mut reported_missing);
    }
    for level in 1..=h.order() {
        for bond in h.bonds_at(level).expect("level in range") {
            let mut complete =
                require(bond.id(), &mut out, &mut reported_missing);
            for member in bond.boundary() {
                complete &= require(member, &mut out, &mut reported_missing);
            }
            if !complete {
                continue;
            }
            let Some(agg) = by_level.get(&level) else {
                out.push(Violation::CompatibilityBroken {
                    bond: bond.id().clone(),
                    detail: format!("no aggregator for level {level}"),
                });
                continue;
            };
            let children: Vec<&StateValue> = bond
                .boundary()
                .iter()
                .map(|m| assignment.get(m).expect("checked above"))
                .collect();
            match apply(&agg.rule, bond.id().label(), &children) {
                Err(e) => out.push(Violation::CompatibilityBroken {
                    bond: bond.id().clone(),
                    detail: e.to_string(),
                }),
                Ok(expected) => {
                    let actual = assignment.get(bond.id()).expect("checked above");
                    if !states_agree(&expected, actual) {
                        out.push(Violation::CompatibilityBroken {
                            bond: bond.id().clone(),
                            detail: format!("expected {expected}, found {actual}"),
                        });
                    }
                }
            }
        }
    }
    ValidationReport::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brunnian::{generate_brunnian, BrunnianSignature};
    use crate::validate::ViolationKind;

    fn numeric_setup(rule: AggRule, order: usize) -> (Vec<StateSpace>, Vec<Aggregator>) {
        let spaces = vec![StateSpace::numeric("n")];
        let aggs = (1..=order)
            .map(|level| Aggregator::new(level, rule.clone(), "n", "n"))
            .collect();
        (spaces, aggs)
    }

    fn int_base(h: &Hyperstructure, values: &[i64]) -> BTreeMap<String, StateValue> {
        h.level_elements(0)
            .unwrap()
            .into_iter()
            .zip(values)
            .map(|(id, v)| (id.label().to_string(), StateValue::Int(*v)))
            .collect()
    }

    #[test]
    fn unit_base_under_product_stays_at_one() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![3, 3]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Product, 2);
        let base = int_base(&h, &[1; 9]);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.len(), 13);
        for (_, value) in got.iter() {
            assert_eq!(value, &StateValue::Int(1));
        }
    }

    #[test]
    fn sum_tower_matches_hand_arithmetic() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![3, 3]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 2);
        let base = int_base(&h, &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Int(6)));
        assert_eq!(got.get(&ElementId::new("b_1_2", 1)), Some(&StateValue::Int(15)));
        assert_eq!(got.get(&ElementId::new("b_1_3", 1)), Some(&StateValue::Int(24)));
        assert_eq!(got.get(&ElementId::new("b_2_1", 2)), Some(&StateValue::Int(45)));
        assert!(check_compatibility(&h, &got, &aggs).is_empty());
    }

    #[test]
    fn update_touches_only_ancestors() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2, 2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 2);
        let base = int_base(&h, &[1, 2, 3, 4]);
        let prior = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(prior.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Int(3)));
        assert_eq!(prior.get(&ElementId::new("b_1_2", 1)), Some(&StateValue::Int(7)));
        assert_eq!(prior.get(&ElementId::new("b_2_1", 2)), Some(&StateValue::Int(10)));

        let changes = BTreeMap::from([("e_1.2".to_string(), StateValue::Int(5))]);
        let next = update(&h, &prior, &spaces, &aggs, &changes).unwrap();
        assert_eq!(next.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Int(6)));
        assert_eq!(next.get(&ElementId::new("b_2_1", 2)), Some(&StateValue::Int(13)));
        assert_eq!(next.get(&ElementId::new("b_1_2", 1)), Some(&StateValue::Int(7)));
        assert_eq!(
            next.get(&ElementId::new("e_2.1", 0)),
            prior.get(&ElementId::new("e_2.1", 0))
        );

        let mut override_base = base.clone();
        override_base.insert("e_1.2".to_string(), StateValue::Int(5));
        let fresh = propagate(&h, &spaces, &aggs, &override_base).unwrap();
        assert_eq!(next, fresh);
    }

    #[test]
    fn empty_change_set_is_identity() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 1);
        let prior = propagate(&h, &spaces, &aggs, &int_base(&h, &[1, 2])).unwrap();
        let next = update(&h, &prior, &spaces, &aggs, &BTreeMap::new()).unwrap();
        assert_eq!(next, prior);
    }

    #[test]
    fn changing_everything_equals_a_fresh_run() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2, 2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Product, 2);
        let prior = propagate(&h, &spaces, &aggs, &int_base(&h, &[1, 2, 3, 4])).unwrap();
        let changes: BTreeMap<String, StateValue> = int_base(&h, &[5, 6, 7, 8]);
        let next = update(&h, &prior, &spaces, &aggs, &changes).unwrap();
        let fresh = propagate(&h, &spaces, &aggs, &changes).unwrap();
        assert_eq!(next, fresh);
    }

    #[test]
    fn priors_from_elsewhere_are_stale() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 1);
        let prior = propagate(&h, &spaces, &aggs, &int_base(&h, &[1, 2])).unwrap();

        let mut grown = h.clone();
        grown.add_base_element("stray").unwrap();
        let err = update(&grown, &prior, &spaces, &aggs, &BTreeMap::new()).unwrap_err();
        assert_eq!(err.code(), "stale-prior");

        let reordered = vec![
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(1, AggRule::Sum, "n", "n"),
        ];
        let err = update(&h, &prior, &spaces, &reordered, &BTreeMap::new()).unwrap_err();
        assert_eq!(err.code(), "stale-prior");
    }

    #[test]
    fn base_must_be_total_and_on_known_elements() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 1);
        let mut base = int_base(&h, &[1, 2]);
        base.remove("e_2");
        assert_eq!(
            propagate(&h, &spaces, &aggs, &base).unwrap_err().code(),
            "missing-base-state"
        );
        base.insert("e_2".to_string(), StateValue::Int(2));
        base.insert("ghost".to_string(), StateValue::Int(0));
        assert_eq!(
            propagate(&h, &spaces, &aggs, &base).unwrap_err().code(),
            "unknown-element"
        );
    }

    #[test]
    fn wiring_is_checked_before_any_folding() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2, 2]).unwrap());
        let base = int_base(&h, &[1, 2, 3, 4]);
        let n = StateSpace::numeric("n");
        let tokens =
            StateSpace::enumerated("flags", ["up".to_string(), "down".to_string()]).unwrap();

        let gap = vec![Aggregator::new(1, AggRule::Sum, "n", "n")];
        assert_eq!(
            propagate(&h, std::slice::from_ref(&n), &gap, &base).unwrap_err().code(),
            "aggregator-gap"
        );

        let out_of_range = vec![
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(2, AggRule::Sum, "n", "n"),
            Aggregator::new(3, AggRule::Sum, "n", "n"),
        ];
        assert_eq!(
            propagate(&h, std::slice::from_ref(&n), &out_of_range, &base).unwrap_err().code(),
            "bad-level"
        );

        let unknown_space = vec![
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(2, AggRule::Sum, "n", "m"),
        ];
        assert_eq!(
            propagate(&h, std::slice::from_ref(&n), &unknown_space, &base).unwrap_err().code(),
            "space-mismatch"
        );

        let broken_chain = vec![
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(2, AggRule::ConcatSorted, "flags", "flags"),
        ];
        assert_eq!(
            propagate(&h, &[n.clone(), tokens.clone()], &broken_chain, &base)
                .unwrap_err()
                .code(),
            "space-mismatch"
        );

        let numeric_over_tokens = vec![
            Aggregator::new(1, AggRule::Sum, "flags", "flags"),
            Aggregator::new(2, AggRule::Sum, "flags", "flags"),
        ];
        assert_eq!(
            propagate(&h, &[n.clone(), tokens], &numeric_over_tokens, &base)
                .unwrap_err()
                .code(),
            "space-mismatch"
        );

        let twice = vec![
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(1, AggRule::Sum, "n", "n"),
            Aggregator::new(2, AggRule::Sum, "n", "n"),
        ];
        assert_eq!(
            propagate(&h, &[n], &twice, &base).unwrap_err().code(),
            "space-mismatch"
        );
    }

    #[test]
    fn mixed_numerics_promote_and_overflow_is_an_error() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 1);
        let base = BTreeMap::from([
            ("e_1".to_string(), StateValue::Int(1)),
            ("e_2".to_string(), StateValue::Real(0.5)),
        ]);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Real(1.5)));

        let (spaces, aggs) = numeric_setup(AggRule::Product, 1);
        let base = int_base(&h, &[i64::MAX, 2]);
        assert_eq!(
            propagate(&h, &spaces, &aggs, &base).unwrap_err().code(),
            "space-mismatch"
        );
    }

    #[test]
    fn min_and_max_keep_the_original_value() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let base = BTreeMap::from([
            ("e_1".to_string(), StateValue::Int(3)),
            ("e_2".to_string(), StateValue::Real(2.5)),
        ]);
        let (spaces, aggs) = numeric_setup(AggRule::Min, 1);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Real(2.5)));
        let (spaces, aggs) = numeric_setup(AggRule::Max, 1);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Int(3)));

        // Ties resolve to the first child in boundary order.
        let base = BTreeMap::from([
            ("e_1".to_string(), StateValue::Int(2)),
            ("e_2".to_string(), StateValue::Real(2.0)),
        ]);
        let (spaces, aggs) = numeric_setup(AggRule::Min, 1);
        let got = propagate(&h, &spaces, &aggs, &base).unwrap();
        assert_eq!(got.get(&ElementId::new("b_1_1", 1)), Some(&StateValue::Int(2)));
    }

    #[test]
    fn concat_sorted_outputs_must_be_admitted() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let letters =
            StateSpace::enumerated("letters", ["a".to_string(), "b".to_string()]).unwrap();
        let joined =
            StateSpace::enumerated("joined", ["a|b".to_string()]).unwrap();
        let base = BTreeMap::from([
            ("e_1".to_string(), StateValue::text("b")),
            ("e_2".to_string(), StateValue::text("a")),
        ]);
        let aggs = vec![Aggregator::new(1, AggRule::ConcatSorted, "letters", "joined")];
        let got =
            propagate(&h, &[letters.clone(), joined], &aggs, &base).unwrap();
        assert_eq!(
            got.get(&ElementId::new("b_1_1", 1)),
            Some(&StateValue::text("a|b"))
        );

        let narrow = StateSpace::enumerated("joined", ["b|b".to_string()]).unwrap();
        assert_eq!(
            propagate(&h, &[letters, narrow], &aggs, &base).unwrap_err().code(),
            "space-mismatch"
        );
    }

    #[test]
    fn table_rules_are_total_up_to_arity() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2]).unwrap());
        let flags =
            StateSpace::enumerated("flags", ["open".to_string(), "closed".to_string()])
                .unwrap();
        let full = TableRule::new(
            2,
            [
                (vec!["open".to_string()], "open".to_string()),
                (vec!["closed".to_string()], "closed".to_string()),
                (vec!["open".to_string(), "open".to_string()], "open".to_string()),
                (vec!["open".to_string(), "closed".to_string()], "open".to_string()),
                (vec!["closed".to_string(), "closed".to_string()], "closed".to_string()),
            ],
        )
        .unwrap();
        let aggs = vec![Aggregator::new(1, AggRule::Table(full), "flags", "flags")];
        let base = BTreeMap::from([
            ("e_1".to_string(), StateValue::text("closed")),
            ("e_2".to_string(), StateValue::text("open")),
        ]);
        let got = propagate(&h, std::slice::from_ref(&flags), &aggs, &base).unwrap();
        assert_eq!(
            got.get(&ElementId::new("b_1_1", 1)),
            Some(&StateValue::text("open"))
        );
        assert!(check_compatibility(&h, &got, &aggs).is_empty());

        let gappy = TableRule::new(
            2,
            [
                (vec!["open".to_string()], "open".to_string()),
                (vec!["closed".to_string()], "closed".to_string()),
                (vec!["open".to_string(), "open".to_string()], "open".to_string()),
                (vec!["closed".to_string(), "closed".to_string()], "closed".to_string()),
            ],
        )
        .unwrap();
        let aggs = vec![Aggregator::new(1, AggRule::Table(gappy), "flags", "flags")];
        assert_eq!(
            propagate(&h, std::slice::from_ref(&flags), &aggs, &base).unwrap_err().code(),
            "space-mismatch"
        );

        // Arity 1 cannot cover a two-member bond.
        let thin = TableRule::new(
            1,
            [
                (vec!["open".to_string()], "open".to_string()),
                (vec!["closed".to_string()], "closed".to_string()),
            ],
        )
        .unwrap();
        let aggs = vec![Aggregator::new(1, AggRule::Table(thin), "flags", "flags")];
        assert_eq!(
            propagate(&h, &[flags], &aggs, &base).unwrap_err().code(),
            "space-mismatch"
        );
    }

    #[test]
    fn compatibility_reports_name_the_guilty_bond() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2, 2]).unwrap());
        let (spaces, aggs) = numeric_setup(AggRule::Sum, 2);
        let good = propagate(&h, &spaces, &aggs, &int_base(&h, &[1, 2, 3, 4])).unwrap();
        assert!(check_compatibility(&h, &good, &aggs).is_empty());

        let mut corrupt = good.clone();
        corrupt
            .values
            .insert(ElementId::new("b_1_2", 1), StateValue::Int(99));
        // The corrupted bond disagrees with its own members, and its parent
        // disagrees with the fold over the corrupted value: two breaks.
        let report = check_compatibility(&h, &corrupt, &aggs);
        assert_eq!(report.len(), 2);
        assert_eq!(report.by_kind().get(&ViolationKind::Compatibility), Some(&2));
        let text = report.to_string();
        assert!(text.contains("b_1_2"), "{text}");
        assert!(text.contains("b_2_1"), "{text}");

        let mut partial = good.clone();
        partial.values.remove(&ElementId::new("b_1_1", 1));
        let report = check_compatibility(&h, &partial, &aggs);
        assert_eq!(report.by_kind().get(&ViolationKind::AssignmentMissing), Some(&1));

        let report = check_compatibility(&h, &good, &aggs[..1]);
        assert_eq!(report.by_kind().get(&ViolationKind::Compatibility), Some(&1));
    }

    #[test]
    fn real_comparisons_get_a_little_slack() {
        assert!(states_agree(
            &StateValue::Real(0.1 + 0.2),
            &StateValue::Real(0.3)
        ));
        assert!(states_agree(&StateValue::Int(7), &StateValue::Real(7.0)));
        assert!(!states_agree(&StateValue::Real(1.0), &StateValue::Real(1.1)));
        assert!(!states_agree(&StateValue::Int(7), &StateValue::Int(8)));
        assert!(states_agree(
            &StateValue::text("x"),
            &StateValue::Token { space: "s".into(), value: "x".into() }
        ));
    }

    #[test]
    fn folds_commute_over_a_tower() {
        let h = generate_brunnian(&BrunnianSignature::new(vec![2, 3]).unwrap());
        let values = [5, -2, 7, 3, 1, -4];
        for rule in [AggRule::Sum, AggRule::Product] {
            let (spaces, aggs) = numeric_setup(rule.clone(), 2);
            let got = propagate(&h, &spaces, &aggs, &int_base(&h, &values)).unwrap();
            let top = got.get(&ElementId::new("b_2_1", 2)).unwrap();
            let forward: i64 = match rule {
                AggRule::Sum => values.iter().sum(),
                _ => values.iter().product(),
            };
            let backward: i64 = match rule {
                AggRule::Sum => values.iter().rev().sum(),
                _ => values.iter().rev().product(),
            };
            assert_eq!(forward, backward);
            assert_eq!(top, &StateValue::Int(forward));
        }
    }

    #[test]
    fn order_zero_copies_the_base() {
        let mut h = Hyperstructure::new(0);
        h.add_base_element("only").unwrap();
        let base = BTreeMap::from([("only".to_string(), StateValue::text("free"))]);
        let got = propagate(&h, &[], &[], &base).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got.get(&ElementId::new("only", 0)), Some(&StateValue::text("free")));
    }

    #[test]
    fn nonsense_table_rules_are_rejected_at_construction() {
        assert!(TableRule::new(0, []).is_err());
        assert!(TableRule::new(
            1,
            [(vec!["a".to_string(), "b".to_string()], "a".to_string())]
        )
        .is_err());
        // Two spellings of one multiset.
        assert!(TableRule::new(
            2,
            [
                (vec!["a".to_string(), "b".to_string()], "a".to_string()),
                (vec!["b".to_string(), "a".to_string()], "b".to_string()),
            ]
        )
        .is_err());
        assert!(StateSpace::enumerated("empty", []).is_err());
    }
}
