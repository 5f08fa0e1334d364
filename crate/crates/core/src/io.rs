//! The canonical file formats.
//!
//! One JSON document type per thing: structures, decomposition trees (or
//! forests of them), representations, composition chains, and propagation
//! setups. Reads are tolerant of ordering; a structure read admits bonds
//! level by level and then validates, so a broken file surfaces as a
//! validation report, not a parse error. Writes are canonical: levels
//! ascending, entries sorted by id, so equal structures serialize to equal
//! bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::DecompositionTree;
use crate::error::Error;
use crate::id::{ElementId, StateValue};
use crate::states::{AggRule, Aggregator, StateSpace, TableRule};
use crate::structure::{Bond, Hyperstructure, StateTable};
use crate::transfer::{CompositionChain, Representation};
use crate::Result;

fn is_false(flag: &bool) -> bool {
    !*flag
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureDoc {
    order: usize,
    base: Vec<String>,
    #[serde(default)]
    bonds: Vec<BondDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    states: Vec<StateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    identity_sections: Vec<SectionDoc>,
    #[serde(default, skip_serializing_if = "is_false")]
    strict: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BondDoc {
    id: String,
    level: usize,
    binds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<StateValue>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    level: usize,
    subset: Vec<String>,
    values: Vec<StateValue>,
}

/// `level` is the element's level; the bond sits one above.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionDoc {
    level: usize,
    element: String,
    bond: String,
}

fn to_doc(h: &Hyperstructure) -> StructureDoc {
    let base = h
        .level_elements(0)
        .expect("level 0 exists")
        .into_iter()
        .map(|id| id.label().to_string())
        .collect();
    let mut bonds = Vec::new();
    for level in 1..=h.order() {
        for bond in h.bonds_at(level).expect("level in range") {
            bonds.push(BondDoc {
                id: bond.id().label().to_string(),
                level,
                binds: bond.boundary().iter().map(|m| m.label().to_string()).collect(),
                state: bond.formation_state().cloned(),
            });
        }
    }
    let states = h
        .state_table()
        .iter()
        .map(|(level, subset, values)| StateDoc {
            level,
            subset: subset.to_vec(),
            values: values.iter().cloned().collect(),
        })
        .collect();
    let identity_sections = h
        .identity_sections()
        .map(|(element, bond)| SectionDoc {
            level: element.level(),
            element: element.label().to_string(),
            bond: bond.label().to_string(),
        })
        .collect();
    StructureDoc {
        order: h.order(),
        base,
        bonds,
        states,
        identity_sections,
        strict: h.strict(),
    }
}

fn from_doc(doc: StructureDoc) -> Hyperstructure {
    let mut records = doc.bonds;
    records.sort_by(|a, b| (a.level, &a.id).cmp(&(b.level, &b.id)));
    let bonds = records
        .into_iter()
        .map(|b| {
            let member_level = b.level.saturating_sub(1);
            let boundary: BTreeSet<ElementId> = b
                .binds
                .into_iter()
                .map(|label| ElementId::new(label, member_level))
                .collect();
            Bond::new(ElementId::new(b.id, b.level), boundary, b.state)
        })
        .collect();
    let mut states = StateTable::new();
    for entry in doc.states {
        for value in entry.values {
            states.insert(entry.level, entry.subset.iter().cloned(), value);
        }
    }
    let sections = doc
        .identity_sections
        .into_iter()
        .map(|s| {
            (
                ElementId::new(s.element, s.level),
                ElementId::new(s.bond, s.level + 1),
            )
        })
        .collect();
    Hyperstructure::from_parts(doc.order, doc.base, bonds, states, sections, doc.strict)
}

/// Read a structure and insist it validates; a broken file comes back as
/// an `invalid-structure` error carrying the full report.
pub fn read_structure(reader: impl Read) -> Result<Hyperstructure> {
    let h = read_structure_unchecked(reader)?;
    let report = h.validate();
    if report.is_empty() {
        Ok(h)
    } else {
        Err(Error::Invalid(report))
    }
}

/// Read a structure without the validation gate. For tooling that wants to
/// inspect broken files; everything else should use [`read_structure`].
pub fn read_structure_unchecked(reader: impl Read) -> Result<Hyperstructure> {
    let doc: StructureDoc = serde_json::from_reader(reader)?;
    Ok(from_doc(doc))
}

/// Canonical write: levels ascending, ids sorted, trailing newline. Equal
/// structures produce equal bytes.
pub fn write_structure(mut writer: impl Write, h: &Hyperstructure) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, &to_doc(h))?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn structure_to_string(h: &Hyperstructure) -> String {
    let mut out = Vec::new();
    write_structure(&mut out, h).expect("writing to memory");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeDoc {
    Node {
        bond: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<StateValue>,
        children: Vec<TreeDoc>,
    },
    Leaf {
        element: String,
    },
}

fn tree_to_doc(tree: &DecompositionTree) -> TreeDoc {
    match tree {
        DecompositionTree::Leaf { element } => {
            TreeDoc::Leaf { element: element.label().to_string() }
        }
        DecompositionTree::Node { bond, state, children } => TreeDoc::Node {
            bond: bond.label().to_string(),
            state: state.clone(),
            children: children.iter().map(tree_to_doc).collect(),
        },
    }
}

/// Levels are implicit in the nesting: leaves sit at 0, a node one above
/// its children, who must agree on their level.
fn tree_from_doc(doc: &TreeDoc) -> Result<(DecompositionTree, usize)> {
    match doc {
        TreeDoc::Leaf { element } => Ok((
            DecompositionTree::Leaf { element: ElementId::new(element.clone(), 0) },
            0,
        )),
        TreeDoc::Node { bond, state, children } => {
            if children.is_empty() {
                return Err(Error::MalformedTree(format!("`{bond}` has no children")));
            }
            let mut built = Vec::with_capacity(children.len());
            let mut child_level = None;
            for child in children {
                let (tree, level) = tree_from_doc(child)?;
                match child_level {
                    None => child_level = Some(level),
                    Some(prev) if prev != level => {
                        return Err(Error::MalformedTree(format!(
                            "children of `{bond}` sit at levels {prev} and {level}"
                        )))
                    }
                    Some(_) => {}
                }
                built.push(tree);
            }
            let level = child_level.expect("children nonempty") + 1;
            Ok((
                DecompositionTree::Node {
                    bond: ElementId::new(bond.clone(), level),
                    state: state.clone(),
                    children: built,
                },
                level,
            ))
        }
    }
}

/// Read one tree, or a forest written as a JSON array.
pub fn read_trees(reader: impl Read) -> Result<Vec<DecompositionTree>> {
    let value: serde_json::Value = serde_json::from_reader(reader)?;
    let docs: Vec<TreeDoc> = if value.is_array() {
        serde_json::from_value(value).map_err(Error::Json)?
    } else {
        vec![serde_json::from_value(value).map_err(Error::Json)?]
    };
    docs.iter().map(|doc| tree_from_doc(doc).map(|(tree, _)| tree)).collect()
}

pub fn write_tree(mut writer: impl Write, tree: &DecompositionTree) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, &tree_to_doc(tree))?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn write_trees(mut writer: impl Write, trees: &[DecompositionTree]) -> Result<()> {
    let docs: Vec<TreeDoc> = trees.iter().map(tree_to_doc).collect();
    serde_json::to_writer_pretty(&mut writer, &docs)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn tree_to_string(tree: &DecompositionTree) -> String {
    let mut out = Vec::new();
    write_tree(&mut out, tree).expect("writing to memory");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepresentationDoc {
    target: String,
    map: BTreeMap<String, String>,
}

/// A representation file: the injective map plus the path of the structure
/// it maps into, as written in the file.
#[derive(Debug)]
pub struct RepresentationFile {
    pub target: String,
    pub representation: Representation,
}

pub fn read_representation(reader: impl Read) -> Result<RepresentationFile> {
    let doc: RepresentationDoc = serde_json::from_reader(reader)?;
    Ok(RepresentationFile {
        target: doc.target,
        representation: Representation::new(doc.map)?,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    spaces: Vec<Vec<String>>,
    maps: Vec<BTreeMap<String, String>>,
}

pub fn read_chain(reader: impl Read) -> Result<CompositionChain> {
    let doc: ChainDoc = serde_json::from_reader(reader)?;
    CompositionChain::new(doc.spaces, doc.maps)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatesDoc {
    #[serde(default)]
    spaces: Vec<SpaceDoc>,
    #[serde(default)]
    aggregators: Vec<AggregatorDoc>,
    #[serde(default)]
    base: BTreeMap<String, StateValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceDoc {
    name: String,
    values: SpaceValuesDoc,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceValuesDoc {
    Declaration(String),
    Tokens(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregatorDoc {
    level: usize,
    rule: String,
    #[serde(default)]
    child_space: Option<String>,
    #[serde(default)]
    parent_space: Option<String>,
    #[serde(default)]
    table: Option<BTreeMap<String, String>>,
    #[serde(default)]
    max_arity: Option<usize>,
}

/// Everything a propagation run needs, as read from a states file.
#[derive(Debug)]
pub struct StatesSetup {
    pub spaces: Vec<StateSpace>,
    pub aggregators: Vec<Aggregator>,
    pub base: BTreeMap<String, StateValue>,
}

/// Read a states file. With no `spaces` a single numeric space named
/// `numeric` is assumed; aggregators may omit their space names when only
/// one space is in play. Table rules spell multisets as comma-joined
/// tokens: `{"open,closed": "open"}`.
pub fn read_states_setup(reader: impl Read) -> Result<StatesSetup> {
    let doc: StatesDoc = serde_json::from_reader(reader)?;
    let spaces: Vec<StateSpace> = if doc.spaces.is_empty() {
        vec![StateSpace::numeric("numeric")]
    } else {
        doc.spaces
            .into_iter()
            .map(|s| match s.values {
                SpaceValuesDoc::Declaration(decl) if decl == "numeric" => {
                    Ok(StateSpace::numeric(s.name))
                }
                SpaceValuesDoc::Declaration(decl) => Err(Error::SpaceMismatch(format!(
                    "space `{}`: unknown declaration `{decl}`",
                    s.name
                ))),
                SpaceValuesDoc::Tokens(tokens) => StateSpace::enumerated(s.name, tokens),
            })
            .collect::<Result<_>>()?
    };
    let sole_space = if spaces.len() == 1 { Some(spaces[0].name().to_string()) } else { None };
    let mut aggregators = Vec::with_capacity(doc.aggregators.len());
    for agg in doc.aggregators {
        let rule = match agg.rule.as_str() {
            "product" => AggRule::Product,
            "sum" => AggRule::Sum,
            "min" => AggRule::Min,
            "max" => AggRule::Max,
            "concat-sorted" => AggRule::ConcatSorted,
            "table" => {
                let entries = agg.table.as_ref().ok_or_else(|| {
                    Error::SpaceMismatch(format!(
                        "table rule at level {} needs a `table` map",
                        agg.level
                    ))
                })?;
                let max_arity = agg.max_arity.ok_or_else(|| {
                    Error::SpaceMismatch(format!(
                        "table rule at level {} needs `max_arity`",
                        agg.level
                    ))
                })?;
                let parsed = entries.iter().map(|(key, out)| {
                    let multiset: Vec<String> =
                        key.split(',').map(|t| t.trim().to_string()).collect();
                    (multiset, out.clone())
                });
                AggRule::Table(TableRule::new(max_arity, parsed)?)
            }
            other => {
                return Err(Error::SpaceMismatch(format!(
                    "unknown rule `{other}` at level {}",
                    agg.level
                )))
            }
        };
        if !matches!(rule, AggRule::Table(_)) && (agg.table.is_some() || agg.max_arity.is_some())
        {
            return Err(Error::SpaceMismatch(format!(
                "rule `{}` at level {} does not take a table",
                agg.rule, agg.level
            )));
        }
        let pick = |explicit: Option<String>, role: &str| -> Result<String> {
            explicit.or_else(|| sole_space.clone()).ok_or_else(|| {
                Error::SpaceMismatch(format!(
                    "aggregator at level {} needs {role} with several spaces declared",
                    agg.level
                ))
            })
        };
        let child_space = pick(agg.child_space, "child_space")?;
        let parent_space = pick(agg.parent_space, "parent_space")?;
        aggregators.push(Aggregator::new(agg.level, rule, child_space, parent_space));
    }
    Ok(StatesSetup { spaces, aggregators, base: doc.base })
}
