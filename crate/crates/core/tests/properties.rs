use std::collections::BTreeSet;

use proptest::prelude::*;

use imgraph_core::feature::{combined_distance, dequantize, quantize, similarity};
use imgraph_core::graph::{build_random_graph, GraphLayer};
use imgraph_core::sorter::{sort_grid, sort_grid_constrained, GridAssignment};
use imgraph_core::{generate_synthetic, FeatureRecord, SemanticFeature, VisualFeature};

fn arb_record(id: u32) -> impl Strategy<Value = FeatureRecord> {
    (
        prop::array::uniform32(any::<u8>()),
        prop::array::uniform32(any::<u8>()),
        prop::collection::vec(any::<u8>(), 50),
    )
        .prop_map(move |(a, b, v)| {
            let mut s = [0u8; 64];
            s[..32].copy_from_slice(&a);
            s[32..].copy_from_slice(&b);
            FeatureRecord::new(id, SemanticFeature::new(s), VisualFeature::from_slice(&v).unwrap())
                .unwrap()
        })
}

#[derive(Debug, Clone)]
enum Op {
    Add,
    Remove(usize),
    Improve(u16),
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Add),
        any::<usize>().prop_map(Op::Remove),
        (0u16..400).prop_map(Op::Improve),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quantize_inverts_dequantize(bytes in prop::collection::vec(any::<u8>(), 0..128)) {
        prop_assert_eq!(quantize(&dequantize(&bytes)).unwrap(), bytes);
    }

    #[test]
    fn similarity_is_a_bounded_symmetric_score(
        a in prop::collection::vec(any::<u8>(), 64),
        b in prop::collection::vec(any::<u8>(), 64),
    ) {
        let ab = similarity(&a, &b).unwrap().value();
        let ba = similarity(&b, &a).unwrap().value();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
        prop_assert_eq!(similarity(&a, &a).unwrap().value(), 1.0);
    }

    #[test]
    fn combined_distance_is_a_dissimilarity(a in arb_record(1), b in arb_record(2)) {
        let ab = combined_distance(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - combined_distance(&b, &a)).abs() < 1e-15);
        prop_assert_eq!(combined_distance(&a, &a), 0.0);
    }

    #[test]
    fn mutation_sequences_keep_layers_regular(
        seed in any::<u64>(),
        start in 0usize..30,
        ops in prop::collection::vec(arb_op(), 1..60),
    ) {
        let pool = generate_synthetic(5, 40, false, seed).unwrap();
        let mut layer = if start == 0 {
            GraphLayer::new(0)
        } else {
            build_random_graph(&pool[..start], seed).unwrap()
        };
        let mut next = start;
        for (step, op) in ops.into_iter().enumerate() {
            match op {
                Op::Add if next < pool.len() => {
                    layer.add_node(&pool[next]).unwrap();
                    next += 1;
                }
                Op::Add => {}
                Op::Remove(k) if !layer.is_empty() => {
                    let id = layer.ids()[k % layer.len()];
                    layer.remove_node(id).unwrap();
                    prop_assert!(!layer.contains(id));
                }
                Op::Remove(_) => {}
                Op::Improve(budget) => {
                    let before = layer.quality().map(|q| q.quality.value()).ok();
                    layer.improve(u64::from(budget), seed ^ step as u64);
                    let after = layer.quality().map(|q| q.quality.value()).ok();
                    prop_assert!(after >= before);
                }
            }
            if let Err(e) = layer.check_invariants() {
                return Err(TestCaseError::fail(format!("step {step}: {e}")));
            }
        }
    }

    #[test]
    fn improve_never_lowers_quality(seed in any::<u64>(), n in 6usize..80, budget in 0u64..3_000) {
        let recs = generate_synthetic(4, 20, false, seed).unwrap();
        let mut layer = build_random_graph(&recs[..n], seed).unwrap();
        let before = layer.quality().unwrap().quality;
        layer.improve(budget, seed.wrapping_add(1));
        layer.check_invariants().unwrap();
        prop_assert!(layer.quality().unwrap().quality >= before);
    }

    #[test]
    fn sort_places_every_item_once(seed in any::<u64>(), n in 1usize..40, rows in 1usize..8, cols in 1usize..8) {
        prop_assume!(n <= rows * cols);
        let recs = generate_synthetic(3, 14, false, seed).unwrap();
        let grid = sort_grid(&recs[..n], rows, cols, seed).unwrap();
        let mut ids = grid.ids();
        ids.sort_unstable();
        prop_assert_eq!(ids, (1..=n as u32).collect::<Vec<_>>());
    }

    #[test]
    fn constrained_sort_never_moves_occupied_cells(
        seed in any::<u64>(),
        occupied in prop::collection::btree_set(0usize..48, 0..30),
        extra in 0usize..20,
    ) {
        let (rows, cols) = (6, 8);
        let recs = generate_synthetic(4, 20, false, seed).unwrap();
        let mut grid = GridAssignment::new(rows, cols);
        for (k, &cell) in occupied.iter().enumerate() {
            grid.place(cell / cols, cell % cols, recs[k].image_id).unwrap();
            if k % 2 == 0 {
                grid.freeze(cell / cols, cell % cols).unwrap();
            }
        }
        let free = rows * cols - occupied.len();
        let items = &recs[occupied.len()..occupied.len() + extra.min(free)];
        let out = sort_grid_constrained(items, &grid, &recs, seed).unwrap();
        for (r, c, id) in grid.occupied() {
            prop_assert_eq!(out.get(r, c), Some(id));
        }
        prop_assert_eq!(out.frozen(), grid.frozen());
        let before: BTreeSet<u32> = grid.ids().into_iter().collect();
        let new: BTreeSet<u32> = out.ids().into_iter().filter(|id| !before.contains(id)).collect();
        let want: BTreeSet<u32> = items.iter().map(|r| r.image_id).collect();
        prop_assert_eq!(new, want);
    }
}
