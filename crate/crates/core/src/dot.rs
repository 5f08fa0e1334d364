//! Graphviz rendering of a structure.
//!
//! Every element at every level becomes one node, kept on its level's rank,
//! and every boundary membership becomes one edge from the bond down to the
//! member. Node ids are prefixed with their level because labels may recur
//! across levels. Output is deterministic: levels ascend, labels sort.

use std::fmt::Write;

use crate::structure::Hyperstructure;

pub fn export_dot(h: &Hyperstructure) -> String {
    let mut out = String::from("digraph hyperstructure {\n");
    let mut body = String::new();
    for level in 0..=h.order() {
        let elements = h.level_elements(level).expect("level within order");
        if elements.is_empty() {
            continue;
        }
        let _ = write!(body, "  {{ rank=same;");
        for id in &elements {
            let _ = write!(
                body,
                " \"{}:{}\" [label=\"{}\"];",
                level,
                escape(id.label()),
                escape(id.label())
            );
        }
        body.push_str(" }\n");
    }
    for level in 1..=h.order() {
        for bond in h.bonds_at(level).expect("level within order") {
            for member in bond.boundary() {
                let _ = writeln!(
                    body,
                    "  \"{}:{}\" -> \"{}:{}\";",
                    level,
                    escape(bond.id().label()),
                    member.level(),
                    escape(member.label())
                );
            }
        }
    }
    if !body.is_empty() {
        out.push_str("  rankdir=BT;\n");
        out.push_str(&body);
    }
    out.push_str("}\n");
    out
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_structure_gives_an_empty_body() {
        let h = Hyperstructure::new(0);
        assert_eq!(export_dot(&h), "digraph hyperstructure {\n}\n");
    }

    #[test]
    fn nodes_and_edges_count_and_repeat_deterministically() {
        let mut h = Hyperstructure::new(1);
        let a = h.add_base_element("a").unwrap();
        let b = h.add_base_element("b").unwrap();
        h.add_bond(1, &[a.clone(), b.clone()], None, "p").unwrap();
        let dot = export_dot(&h);
        assert_eq!(dot.matches("[label=").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert_eq!(dot, export_dot(&h));
    }

    #[test]
    fn labels_recurring_across_levels_stay_distinct_nodes() {
        let mut h = Hyperstructure::new(1);
        let x = h.add_base_element("x").unwrap();
        h.add_bond(1, &[x], None, "x").unwrap();
        let dot = export_dot(&h);
        assert!(dot.contains("\"0:x\""));
        assert!(dot.contains("\"1:x\" -> \"0:x\";"));
    }

    #[test]
    fn members_vanish_from_no_levels() {
        // Every element appears exactly once as a node even when bound twice.
        let mut h = Hyperstructure::new(1);
        let a = h.add_base_element("a").unwrap();
        h.add_bond(1, std::slice::from_ref(&a), None, "p").unwrap();
        h.add_bond(1, &[a], None, "q").unwrap();
        let dot = export_dot(&h);
        assert_eq!(dot.matches("\"0:a\" [label=").count(), 1);
        assert_eq!(dot.matches(" -> ").count(), 2);
    }
}
