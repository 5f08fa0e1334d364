//! Randomized invariants over whole structures.
//!
//! Each property pits a library operation against an oracle computed some
//! other way: naive reachability for support, suffix products for tower
//! sizes, textbook moment formulas for the statistics. Generators build
//! through the public builder only, so every generated structure is legal
//! by construction.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use hyperstruct::brunnian::{generate_brunnian, is_brunnian_pattern, remove_element, BrunnianSignature};
use hyperstruct::cluster::{decompose, resynthesize, support};
use hyperstruct::correlations::{pearson, triple_corr, Series};
use hyperstruct::io::{read_structure, structure_to_string};
use hyperstruct::states::{propagate, update, AggRule, Aggregator, StateSpace};
use hyperstruct::transfer::{cluster_by_preimage, from_composition, pullback, CompositionChain, Representation};
use hyperstruct::{ElementId, Hyperstructure, StateValue};

/// One bond recipe: a nonempty subset of the previous level as a bitmask,
/// plus an optional formation state drawn from a small pool.
#[derive(Debug, Clone)]
struct BondRecipe {
    mask: u32,
    state: Option<i64>,
}

#[derive(Debug, Clone)]
struct StructureRecipe {
    base: usize,
    levels: Vec<Vec<BondRecipe>>,
}

fn bond_recipe() -> impl Strategy<Value = BondRecipe> {
    (1u32..=255, proptest::option::of(0i64..3))
        .prop_map(|(mask, state)| BondRecipe { mask, state })
}

fn structure_recipe() -> impl Strategy<Value = StructureRecipe> {
    (1usize..=6, proptest::collection::vec(proptest::collection::vec(bond_recipe(), 1..=4), 0..=3))
        .prop_map(|(base, levels)| StructureRecipe { base, levels })
}

type BondSpec = (Vec<ElementId>, Option<StateValue>, String);

/// Realize a recipe through the builder. Bonds referencing nothing are
/// dropped and the order stops at the last level that got any, so the
/// result validates and carries no trailing empty levels.
fn build(recipe: &StructureRecipe) -> Hyperstructure {
    let mut previous: Vec<ElementId> =
        (0..recipe.base).map(|i| ElementId::new(format!("z{i}"), 0)).collect();
    let mut realized: Vec<Vec<BondSpec>> = Vec::new();
    for (index, bonds) in recipe.levels.iter().enumerate() {
        let level = index + 1;
        let mut current = Vec::new();
        let mut specs = Vec::new();
        for (ordinal, bond) in bonds.iter().enumerate() {
            let binds: Vec<ElementId> = previous
                .iter()
                .enumerate()
                .filter(|(i, _)| bond.mask >> i & 1 == 1)
                .map(|(_, id)| id.clone())
                .collect();
            if binds.is_empty() {
                continue;
            }
            let label = format!("b{level}_{ordinal}");
            current.push(ElementId::new(label.clone(), level));
            specs.push((binds, bond.state.map(StateValue::Int), label));
        }
        if current.is_empty() {
            break;
        }
        realized.push(specs);
        previous = current;
    }
    let mut h = Hyperstructure::new(realized.len());
    for i in 0..recipe.base {
        h.add_base_element(format!("z{i}")).unwrap();
    }
    for (index, specs) in realized.iter().enumerate() {
        for (binds, state, label) in specs {
            h.add_bond(index + 1, binds, state.clone(), label).unwrap();
        }
    }
    h
}

/// Support recomputed by expanding boundaries level by level instead of
/// walking a stack.
fn naive_support(h: &Hyperstructure, id: &ElementId) -> BTreeSet<ElementId> {
    let mut frontier = BTreeSet::from([id.clone()]);
    for _ in 0..id.level() {
        let mut next = BTreeSet::new();
        for member in &frontier {
            if member.level() == 0 {
                next.insert(member.clone());
            } else {
                next.extend(h.boundary(member).unwrap().iter().cloned());
            }
        }
        frontier = next;
    }
    frontier
}

proptest! {
    #[test]
    fn built_structures_always_validate(recipe in structure_recipe()) {
        let h = build(&recipe);
        prop_assert!(h.validate().is_empty(), "{}", h.validate());
    }

    #[test]
    fn support_matches_naive_reachability(recipe in structure_recipe()) {
        let h = build(&recipe);
        for level in 0..=h.order() {
            for id in h.level_elements(level).unwrap() {
                prop_assert_eq!(support(&h, &id).unwrap(), naive_support(&h, &id));
            }
        }
    }

    #[test]
    fn decompose_then_resynthesize_is_stable(recipe in structure_recipe()) {
        let h = build(&recipe);
        for level in 1..=h.order() {
            for bond in h.bonds_at(level).unwrap() {
                let tree = decompose(&h, bond.id()).unwrap();
                let rebuilt = resynthesize(std::slice::from_ref(&tree)).unwrap();
                prop_assert!(rebuilt.validate().is_empty());
                prop_assert_eq!(decompose(&rebuilt, bond.id()).unwrap(), tree);
            }
        }
    }

    #[test]
    fn serialization_round_trips_and_is_canonical(recipe in structure_recipe()) {
        let h = build(&recipe);
        let text = structure_to_string(&h);
        let back = read_structure(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(structure_to_string(&back), text);
    }

    #[test]
    fn identity_pullback_changes_nothing(recipe in structure_recipe()) {
        let h = build(&recipe);
        let back = pullback(&h, &Representation::identity(&h)).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn pullback_keeps_exactly_the_bonds_with_surviving_support(
        recipe in structure_recipe(),
        keep_mask in 1u32..=63,
    ) {
        let h = build(&recipe);
        let kept: BTreeSet<ElementId> = h
            .level_elements(0)
            .unwrap()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep_mask >> i & 1 == 1)
            .map(|(_, id)| id)
            .collect();
        prop_assume!(!kept.is_empty());
        let map: BTreeMap<String, String> = kept
            .iter()
            .map(|id| (format!("c_{}", id.label()), id.label().to_string()))
            .collect();
        let rep = Representation::new(map).unwrap();
        let pulled = pullback(&h, &rep).unwrap();
        prop_assert!(pulled.validate().is_empty());
        for level in 1..=h.order() {
            for bond in h.bonds_at(level).unwrap() {
                let expected = support(&h, bond.id()).unwrap().is_subset(&kept);
                let found = pulled.contains(bond.id());
                prop_assert_eq!(expected, found, "bond {:?}", bond.id());
            }
        }
    }

    #[test]
    fn tower_sizes_are_suffix_products(branching in proptest::collection::vec(1usize..=4, 1..=4)) {
        let sig = BrunnianSignature::new(branching.clone()).unwrap();
        let h = generate_brunnian(&sig);
        prop_assert!(h.validate().is_empty());
        prop_assert!(is_brunnian_pattern(&h));
        let sizes = h.level_sizes();
        prop_assert_eq!(&sizes, &sig.level_sizes());
        for cut in 0..branching.len() {
            let expected: usize = branching[..cut].iter().product();
            prop_assert_eq!(sizes[branching.len() - cut], expected);
        }
    }

    #[test]
    fn removing_one_ring_dissolves_exactly_the_ancestor_chain(
        branching in proptest::collection::vec(2usize..=3, 1..=3),
        pick in any::<proptest::sample::Index>(),
    ) {
        let sig = BrunnianSignature::new(branching.clone()).unwrap();
        let h = generate_brunnian(&sig);
        let base = h.level_elements(0).unwrap();
        let target = pick.get(&base);
        let out = remove_element(&h, target).unwrap();
        prop_assert!(out.validate().is_empty());
        prop_assert_eq!(out.order(), h.order());
        // One element per level goes: the ring and its chain of ancestors.
        let before = h.level_sizes();
        let after = out.level_sizes();
        for level in 0..=h.order() {
            prop_assert_eq!(after[level] + 1, before[level], "level {}", level);
        }
        prop_assert!(!is_brunnian_pattern(&out));
        // The survivors are untouched: same boundaries as before.
        for level in 1..=h.order() {
            for bond in out.bonds_at(level).unwrap() {
                prop_assert_eq!(out.boundary(bond.id()).unwrap(), h.boundary(bond.id()).unwrap());
            }
        }
    }

    #[test]
    fn tower_sum_propagation_totals_the_base(
        branching in proptest::collection::vec(1usize..=3, 1..=3),
        seed_values in proptest::collection::vec(-1000i64..1000, 27),
    ) {
        let sig = BrunnianSignature::new(branching).unwrap();
        let h = generate_brunnian(&sig);
        let spaces = vec![StateSpace::numeric("n")];
        let aggs: Vec<Aggregator> = (1..=h.order())
            .map(|level| Aggregator::new(level, AggRule::Sum, "n", "n"))
            .collect();
        let base_ids = h.level_elements(0).unwrap();
        let base: BTreeMap<String, StateValue> = base_ids
            .iter()
            .zip(&seed_values)
            .map(|(id, v)| (id.label().to_string(), StateValue::Int(*v)))
            .collect();
        let assignment = propagate(&h, &spaces, &aggs, &base).unwrap();
        let total: i64 = base_ids.iter().take(base.len()).zip(&seed_values).map(|(_, v)| *v).sum();
        let top = h.level_elements(h.order()).unwrap();
        prop_assert_eq!(top.len(), 1);
        prop_assert_eq!(assignment.get(&top[0]), Some(&StateValue::Int(total)));
    }

    #[test]
    fn incremental_update_equals_fresh_propagation(
        branching in proptest::collection::vec(2usize..=3, 1..=3),
        seed_values in proptest::collection::vec(-100i64..100, 27),
        change_mask in any::<u32>(),
    ) {
        let sig = BrunnianSignature::new(branching).unwrap();
        let h = generate_brunnian(&sig);
        let spaces = vec![StateSpace::numeric("n")];
        let aggs: Vec<Aggregator> = (1..=h.order())
            .map(|level| Aggregator::new(level, AggRule::Sum, "n", "n"))
            .collect();
        let base_ids = h.level_elements(0).unwrap();
        let base: BTreeMap<String, StateValue> = base_ids
            .iter()
            .zip(&seed_values)
            .map(|(id, v)| (id.label().to_string(), StateValue::Int(*v)))
            .collect();
        let prior = propagate(&h, &spaces, &aggs, &base).unwrap();

        let changes: BTreeMap<String, StateValue> = base_ids
            .iter()
            .enumerate()
            .filter(|(i, _)| change_mask >> (i % 32) & 1 == 1)
            .map(|(i, id)| {
                (id.label().to_string(), StateValue::Int(seed_values[i] + 1))
            })
            .collect();
        prop_assume!(!changes.is_empty());

        let updated = update(&h, &prior, &spaces, &aggs, &changes).unwrap();
        let mut fresh_base = base.clone();
        for (label, value) in &changes {
            fresh_base.insert(label.clone(), value.clone());
        }
        let fresh = propagate(&h, &spaces, &aggs, &fresh_base).unwrap();
        prop_assert_eq!(updated, fresh);
    }

    #[test]
    fn preimage_clustering_matches_the_built_structure(
        sizes in proptest::collection::vec(1usize..=4, 2..=4),
        assignments in proptest::collection::vec(0usize..4, 0..=64),
    ) {
        // Spaces s0 (top) .. s{n-1} (base); map i sends space i+1 onto
        // space i by the assignment stream, wrapped into range.
        let spaces: Vec<Vec<String>> = sizes
            .iter()
            .enumerate()
            .map(|(i, n)| (0..*n).map(|j| format!("s{i}_{j}")).collect())
            .collect();
        let mut cursor = assignments.iter().cycle();
        let maps: Vec<BTreeMap<String, String>> = (1..sizes.len())
            .map(|i| {
                spaces[i]
                    .iter()
                    .map(|label| {
                        let target = cursor.next().copied().unwrap_or(0) % sizes[i - 1];
                        (label.clone(), format!("s{}_{}", i - 1, target))
                    })
                    .collect()
            })
            .collect();
        let chain = CompositionChain::new(spaces.clone(), maps.clone()).unwrap();
        let outcome = from_composition(&chain).unwrap();
        let h = &outcome.structure;
        prop_assert!(h.validate().is_empty());
        prop_assert_eq!(h.order(), sizes.len() - 1);

        // Every base element against every full target chain that exists,
        // answered twice: once on the maps, once on the structure.
        let skipped: BTreeSet<&str> =
            outcome.skipped.iter().map(|s| s.label.as_str()).collect();
        for z in &spaces[sizes.len() - 1] {
            let mut targets = Vec::new();
            let mut current = z.clone();
            for i in (0..sizes.len() - 1).rev() {
                current = maps[i][&current].clone();
                targets.push(current.clone());
            }
            let by_maps = cluster_by_preimage(&chain, z, &targets).unwrap();
            prop_assert!(by_maps, "an element always lands on its own image chain");
            if targets.iter().any(|t| skipped.contains(t.as_str())) {
                continue;
            }
            let chain_ids: Vec<ElementId> = targets
                .iter()
                .enumerate()
                .map(|(i, label)| ElementId::new(label.clone(), i + 1))
                .collect();
            let cluster = hyperstruct::cluster::ClusterChain::new(chain_ids).unwrap();
            let on_structure = hyperstruct::cluster::in_cluster_chain(
                h,
                &ElementId::new(z.clone(), 0),
                &cluster,
            )
            .unwrap();
            prop_assert!(on_structure);
        }
    }

    #[test]
    fn statistics_match_textbook_formulas(
        xs in proptest::collection::vec(any::<bool>(), 3..=12),
        ys in proptest::collection::vec(any::<bool>(), 12),
        zs in proptest::collection::vec(any::<bool>(), 12),
    ) {
        let n = xs.len();
        let signs = |bits: &[bool]| -> Vec<f64> {
            bits.iter().take(n).map(|b| if *b { 1.0 } else { -1.0 }).collect()
        };
        let (x, y, z) = (signs(&xs), signs(&ys), signs(&zs));
        let spread = |v: &[f64]| v.iter().any(|s| *s != v[0]);
        prop_assume!(spread(&x) && spread(&y) && spread(&z));

        let moments = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
            (mean, var.sqrt())
        };
        let (mx, sx) = moments(&x);
        let (my, sy) = moments(&y);
        let (mz, sz) = moments(&z);
        let expected_r = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / (n as f64 * sx * sy);
        let expected_t = x
            .iter()
            .zip(&y)
            .zip(&z)
            .map(|((a, b), c)| (a - mx) * (b - my) * (c - mz))
            .sum::<f64>()
            / (n as f64 * sx * sy * sz);

        let sx = Series::new("x", x).unwrap();
        let sy = Series::new("y", y).unwrap();
        let sz = Series::new("z", z).unwrap();
        prop_assert!((pearson(&sx, &sy).unwrap() - expected_r).abs() <= 1e-12);
        prop_assert!((triple_corr(&sx, &sy, &sz).unwrap() - expected_t).abs() <= 1e-12);
    }
}
