//! Seeded random structures and violation injectors shared by the
//! acceptance suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hyperstruct::{ElementId, Hyperstructure, StateValue, ViolationKind};

/// A valid structure of order <= 4 with at most 50 elements, built through
/// the public builder so it validates by construction. No trailing empty
/// levels: the order runs however far the bonds actually reached.
pub fn random_structure(rng: &mut ChaCha8Rng) -> Hyperstructure {
    let base = rng.random_range(1..=8usize);
    let target_order = rng.random_range(0..=4usize);
    let mut remaining = 50 - base;

    // Plan the levels first so the realized order is known up front.
    let mut plan: Vec<Vec<(Vec<usize>, Option<i64>)>> = Vec::new();
    let mut previous = base;
    for _ in 0..target_order {
        let most = remaining.min(previous * 2).min(6);
        if most == 0 {
            break;
        }
        let count = rng.random_range(1..=most);
        let mut bonds = Vec::new();
        for _ in 0..count {
            let mut members: Vec<usize> =
                (0..previous).filter(|_| rng.random_bool(0.4)).collect();
            if members.is_empty() {
                members.push(rng.random_range(0..previous));
            }
            let state =
                if rng.random_bool(0.3) { Some(rng.random_range(0..3i64)) } else { None };
            bonds.push((members, state));
        }
        remaining -= bonds.len();
        previous = bonds.len();
        plan.push(bonds);
    }

    let mut h = Hyperstructure::new(plan.len());
    let mut below: Vec<ElementId> =
        (0..base).map(|i| h.add_base_element(format!("z{i}")).unwrap()).collect();
    for (index, bonds) in plan.iter().enumerate() {
        let level = index + 1;
        let mut current = Vec::new();
        for (ordinal, (members, state)) in bonds.iter().enumerate() {
            let binds: Vec<ElementId> = members.iter().map(|m| below[*m].clone()).collect();
            let id = h
                .add_bond(
                    level,
                    &binds,
                    state.map(StateValue::Int),
                    format!("b{level}_{ordinal}"),
                )
                .unwrap();
            current.push(id);
        }
        below = current;
    }
    h
}

/// The structural violation classes a file can carry.
pub const INJECTABLE: [ViolationKind; 6] = [
    ViolationKind::Dangling,
    ViolationKind::LevelBreak,
    ViolationKind::DuplicateId,
    ViolationKind::EmptyBoundary,
    ViolationKind::FormationState,
    ViolationKind::IdentitySection,
];

/// Break a canonical structure document so that validation reports the given
/// kind, and nothing but that kind. Documents without a bond get one first;
/// everything else in the file is left alone.
pub fn inject(doc: &mut Value, kind: ViolationKind, rng: &mut ChaCha8Rng) {
    ensure_bond(doc);
    let order = doc["order"].as_u64().unwrap();
    let bonds = doc["bonds"].as_array_mut().unwrap();
    let pick = rng.random_range(0..bonds.len());
    match kind {
        ViolationKind::Dangling => {
            bonds[pick]["binds"].as_array_mut().unwrap()[0] = json!("ghost_9q");
        }
        ViolationKind::LevelBreak => {
            // A fresh bond one past the top. Its members exist at the top
            // level, so the break is the only complaint.
            let top: Vec<Value> = bonds
                .iter()
                .filter(|b| b["level"].as_u64() == Some(order))
                .map(|b| b["id"].clone())
                .collect();
            bonds.push(json!({"id": "overshoot", "level": order + 1, "binds": top}));
        }
        ViolationKind::DuplicateId => {
            let base = doc["base"].as_array_mut().unwrap();
            let copy = base[rng.random_range(0..base.len())].clone();
            base.push(copy);
        }
        ViolationKind::EmptyBoundary => {
            bonds[pick]["binds"] = json!([]);
        }
        ViolationKind::FormationState => {
            // Give the boundary a table entry that does not admit the state
            // the bond claims.
            bonds[pick]["state"] = json!("misfit");
            let level = bonds[pick]["level"].as_u64().unwrap() - 1;
            let subset = bonds[pick]["binds"].clone();
            let root = doc.as_object_mut().unwrap();
            root.entry("states").or_insert(json!([]));
            root["states"].as_array_mut().unwrap().push(json!({
                "level": level,
                "subset": subset,
                "values": ["fits"],
            }));
        }
        ViolationKind::IdentitySection => {
            let binds = bonds[pick]["binds"].as_array().unwrap();
            let element = binds[0].clone();
            let level = bonds[pick]["level"].as_u64().unwrap() - 1;
            // A fat boundary, or a bond that is not there: broken either way.
            let bond = if binds.len() > 1 {
                bonds[pick]["id"].clone()
            } else {
                json!("no_such_bond")
            };
            let root = doc.as_object_mut().unwrap();
            root.entry("identity_sections").or_insert(json!([]));
            root["identity_sections"].as_array_mut().unwrap().push(json!({
                "level": level,
                "element": element,
                "bond": bond,
            }));
        }
        other => panic!("no injector for {other:?}"),
    }
}

/// Order-zero documents have no bond to break; give them a one-element bond
/// so every injector has a target.
fn ensure_bond(doc: &mut Value) {
    if !doc["bonds"].as_array().unwrap().is_empty() {
        return;
    }
    let first = doc["base"].as_array().unwrap()[0].clone();
    doc["order"] = json!(1);
    doc["bonds"].as_array_mut().unwrap().push(json!({
        "id": "seam",
        "level": 1,
        "binds": [first],
    }));
}
