use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Name of an element inside one structure.
///
/// Labels are only unique within their level, so the level is part of the
/// identity. Level 0 holds base elements; for every k >= 1 the level-k
/// elements are exactly the ids of the level-k bonds.
///
/// Ids order by level first, then label, which is the order every sorted
/// listing in this crate uses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId {
    level: usize,
    label: String,
}

impl ElementId {
    pub fn new(label: impl Into<String>, level: usize) -> Self {
        ElementId { level, label: label.into() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// A state attached to a subset of elements or carried by a bond.
///
/// Values are plain data with decidable equality. Numeric states come in an
/// integer and a real flavour so that integer arithmetic stays exact under
/// aggregation. `Token` qualifies a value with the state space it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateValue {
    Int(i64),
    Real(f64),
    Text(String),
    Token { space: String, value: String },
}

impl StateValue {
    pub fn text(s: impl Into<String>) -> Self {
        StateValue::Text(s.into())
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, StateValue::Int(_) | StateValue::Real(_))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            StateValue::Int(n) => Some(*n as f64),
            StateValue::Real(x) => Some(*x),
            _ => None,
        }
    }

    /// The enumerated token behind this value, if it is one.
    pub fn token(&self) -> Option<&str> {
        match self {
            StateValue::Text(s) => Some(s),
            StateValue::Token { value, .. } => Some(value),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            StateValue::Int(_) => 0,
            StateValue::Real(_) => 1,
            StateValue::Text(_) => 2,
            StateValue::Token { .. } => 3,
        }
    }
}

// Reals are compared by total order on bits, which makes equality decidable
// and lets state values act as map keys. NaN never enters through the public
// constructors or the file formats.
impl PartialEq for StateValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for StateValue {}

impl Ord for StateValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (StateValue::Int(a), StateValue::Int(b)) => a.cmp(b),
            (StateValue::Real(a), StateValue::Real(b)) => a.total_cmp(b),
            (StateValue::Text(a), StateValue::Text(b)) => a.cmp(b),
            (
                StateValue::Token { space: sa, value: va },
                StateValue::Token { space: sb, value: vb },
            ) => sa.cmp(sb).then_with(|| va.cmp(vb)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for StateValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for StateValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            StateValue::Int(n) => n.hash(state),
            StateValue::Real(x) => x.to_bits().hash(state),
            StateValue::Text(s) => s.hash(state),
            StateValue::Token { space, value } => {
                space.hash(state);
                value.hash(state);
            }
        }
    }
}

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateValue::Int(n) => write!(f, "{n}"),
            StateValue::Real(x) => write!(f, "{x}"),
            StateValue::Text(s) => f.write_str(s),
            StateValue::Token { space, value } => write!(f, "{space}:{value}"),
        }
    }
}
