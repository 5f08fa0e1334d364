use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::id::{ElementId, StateValue};
use crate::structure::Hyperstructure;

/// One law broken by a structure or by a state assignment over it.
///
/// Each variant names the offending ids so a report stands on its own. The
/// coarse class lives in [`ViolationKind`]; tests and tools match on that.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A boundary member that is not an element of the structure.
    DanglingBoundary { bond: ElementId, member: ElementId },
    /// A state table subset naming an element that does not exist.
    DanglingStateSubset { level: usize, label: String },
    /// A bond or boundary member sitting at a level it cannot occupy.
    LevelBreak { id: ElementId, detail: String },
    /// The same id admitted more than once.
    DuplicateId { id: ElementId },
    /// A bond that binds nothing.
    EmptyBoundary { bond: ElementId },
    /// A formation state missing from the state table entry for the boundary.
    FormationStateMissing { bond: ElementId, state: StateValue },
    /// An identity section that does not point at a bond binding exactly its element.
    IdentitySectionBroken { element: ElementId, detail: String },
    /// Two bonds sharing boundary and formation state in a strict structure.
    InjectivityBroken { first: ElementId, second: ElementId },
    /// A bond state that disagrees with the aggregation of its members' states.
    CompatibilityBroken { bond: ElementId, detail: String },
    /// An element with no value in a state assignment that should be total.
    AssignmentMissing { id: ElementId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Dangling,
    LevelBreak,
    DuplicateId,
    EmptyBoundary,
    FormationState,
    IdentitySection,
    Injectivity,
    Compatibility,
    AssignmentMissing,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Dangling => "dangling-reference",
            ViolationKind::LevelBreak => "level-break",
            ViolationKind::DuplicateId => "duplicate-id",
            ViolationKind::EmptyBoundary => "empty-boundary",
            ViolationKind::FormationState => "formation-state-missing",
            ViolationKind::IdentitySection => "identity-section",
            ViolationKind::Injectivity => "injectivity",
            ViolationKind::Compatibility => "compatibility",
            ViolationKind::AssignmentMissing => "assignment-missing",
        }
    }
}

impl Violation {
    pub fn kind(&self) -> ViolationKind {
        match self {
            Violation::DanglingBoundary { .. } | Violation::DanglingStateSubset { .. } => {
                ViolationKind::Dangling
            }
            Violation::LevelBreak { .. } => ViolationKind::LevelBreak,
            Violation::DuplicateId { .. } => ViolationKind::DuplicateId,
            Violation::EmptyBoundary { .. } => ViolationKind::EmptyBoundary,
            Violation::FormationStateMissing { .. } => ViolationKind::FormationState,
            Violation::IdentitySectionBroken { .. } => ViolationKind::IdentitySection,
            Violation::InjectivityBroken { .. } => ViolationKind::Injectivity,
            Violation::CompatibilityBroken { .. } => ViolationKind::Compatibility,
            Violation::AssignmentMissing { .. } => ViolationKind::AssignmentMissing,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.kind().as_str())?;
        match self {
            Violation::DanglingBoundary { bond, member } => write!(
                f,
                "bond `{}` at level {} binds `{}` which is not a level {} element",
                bond.label(),
                bond.level(),
                member.label(),
                member.level()
            ),
            Violation::DanglingStateSubset { level, label } => write!(
                f,
                "state table names `{label}` which is not a level {level} element"
            ),
            Violation::LevelBreak { id, detail } => {
                write!(f, "`{}` at level {}: {detail}", id.label(), id.level())
            }
            Violation::DuplicateId { id } => {
                write!(f, "id `{}` appears more than once at level {}", id.label(), id.level())
            }
            Violation::EmptyBoundary { bond } => {
                write!(f, "bond `{}` at level {} binds nothing", bond.label(), bond.level())
            }
            Violation::FormationStateMissing { bond, state } => write!(
                f,
                "bond `{}` carries state {state} but the table entry for its boundary lacks it",
                bond.label()
            ),
            Violation::IdentitySectionBroken { element, detail } => write!(
                f,
                "identity section for `{}` at level {}: {detail}",
                element.label(),
                element.level()
            ),
            Violation::InjectivityBroken { first, second } => write!(
                f,
                "bonds `{}` and `{}` at level {} share boundary and formation state",
                first.label(),
                second.label(),
                first.level()
            ),
            Violation::CompatibilityBroken { bond, detail } => {
                write!(f, "bond `{}` at level {}: {detail}", bond.label(), bond.level())
            }
            Violation::AssignmentMissing { id } => {
                write!(f, "no state assigned to `{}` at level {}", id.label(), id.level())
            }
        }
    }
}

/// The full list of violations found by a check, empty when all laws hold.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub(crate) fn new(violations: Vec<Violation>) -> Self {
        ValidationReport { violations }
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter()
    }

    /// How many violations fall into each class.
    pub fn by_kind(&self) -> BTreeMap<ViolationKind, usize> {
        let mut counts = BTreeMap::new();
        for v in &self.violations {
            *counts.entry(v.kind()).or_insert(0) += 1;
        }
        counts
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Hyperstructure {
    /// Check every structural law and report all breaks.
    ///
    /// A structure assembled purely through the builder methods always gets
    /// an empty report. Raw structures, typically deserialized or pieced
    /// together with [`Hyperstructure::from_parts`], can break any law:
    /// dangling boundary members, level breaks, duplicate ids, empty
    /// boundaries, formation states missing from their table entry, and
    /// broken identity sections. Strict structures are additionally checked
    /// for boundary/state injectivity per level.
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();

        for (level, labels) in self.raw_levels().iter().enumerate() {
            let mut seen = HashSet::new();
            for label in labels {
                if !seen.insert(label.as_str()) {
                    let id = ElementId::new(label.clone(), level);
                    let dup = Violation::DuplicateId { id };
                    if !out.contains(&dup) {
                        out.push(dup);
                    }
                }
            }
        }

        for bond in self.bonds() {
            let id = bond.id().clone();
            if id.level() == 0 || id.level() > self.order() {
                out.push(Violation::LevelBreak {
                    id: id.clone(),
                    detail: format!(
                        "bonds must sit at levels 1..={}, the order of the structure",
                        self.order()
                    ),
                });
            }
            if bond.boundary().is_empty() {
                out.push(Violation::EmptyBoundary { bond: id.clone() });
            }
            for member in bond.boundary() {
                if id.level() >= 1 && member.level() != id.level() - 1 {
                    out.push(Violation::LevelBreak {
                        id: id.clone(),
                        detail: format!(
                            "boundary member `{}` sits at level {}, expected level {}",
                            member.label(),
                            member.level(),
                            id.level() - 1
                        ),
                    });
                } else if !self.contains(member) {
                    out.push(Violation::DanglingBoundary {
                        bond: id.clone(),
                        member: member.clone(),
                    });
                }
            }
            if let (Some(state), true) = (bond.formation_state(), id.level() >= 1) {
                let labels: Vec<&str> =
                    bond.boundary().iter().map(|m| m.label()).collect();
                if let Some(entry) = self.state_table().values_for(id.level() - 1, &labels) {
                    if !entry.contains(state) {
                        out.push(Violation::FormationStateMissing {
                            bond: id.clone(),
                            state: state.clone(),
                        });
                    }
                }
            }
        }

        for (level, subset, _) in self.state_table().iter() {
            for label in subset {
                if !self.contains(&ElementId::new(label.clone(), level)) {
                    out.push(Violation::DanglingStateSubset { level, label: label.clone() });
                }
            }
        }

        for (element, bond_id) in self.identity_sections() {
            let broken = |detail: String| Violation::IdentitySectionBroken {
                element: element.clone(),
                detail,
            };
            if !self.contains(element) {
                out.push(broken("the element does not exist".into()));
                continue;
            }
            let Some(bond) = self.bond(bond_id) else {
                out.push(broken(format!(
                    "no bond `{}` at level {}",
                    bond_id.label(),
                    bond_id.level()
                )));
                continue;
            };
            if bond_id.level() != element.level() + 1 {
                out.push(broken(format!(
                    "bond `{}` sits at level {}, expected level {}",
                    bond_id.label(),
                    bond_id.level(),
                    element.level() + 1
                )));
            } else if bond.boundary().len() != 1 || !bond.boundary().contains(element) {
                out.push(broken(format!(
                    "bond `{}` does not bind exactly the element",
                    bond_id.label()
                )));
            }
        }

        if self.strict() {
            let mut by_shape: BTreeMap<(Vec<&ElementId>, Option<&StateValue>), &ElementId> =
                BTreeMap::new();
            for bond in self.bonds() {
                let shape: (Vec<&ElementId>, _) = (
                    bond.boundary().iter().collect(),
                    bond.formation_state(),
                );
                match by_shape.get(&shape) {
                    Some(first) if *first != bond.id() => {
                        out.push(Violation::InjectivityBroken {
                            first: (*first).clone(),
                            second: bond.id().clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        by_shape.insert(shape, bond.id());
                    }
                }
            }
        }

        ValidationReport::new(out)
    }
}

